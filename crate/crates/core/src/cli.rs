//! `probe-rag` command-line front-end.
//!
//! Exit codes: 0 success, 2 usage error, 3 data error, 4 remote/protocol
//! error. Reports go to stdout, logs to stderr.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::{AppConfig, ConfigError};
use crate::eval::{self, EvalError, ReportFormat};
use crate::jsonl::{self, JsonlError};
use crate::pipeline::{
    self, form_retrieval_query, generate, prompt, Generator, GeneratorError, GeneratorRequest,
    HttpGenerator, MockGenerator, MockLoadError, PipelineConfig, PipelineError, Question,
    RunRecord, StepError, SynthConfig,
};
use crate::probe::{self, ProbeError, ProberEnsemble};
use crate::retrieval::{self, CorpusIndex, RetrievalError};
use crate::sweep;
use crate::train::{self, LabeledExample, TraceRecord, TrainError};

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub const USAGE: u8 = 2;
    pub const DATA: u8 = 3;
    pub const REMOTE: u8 = 4;

    fn usage(m: impl Into<String>) -> Self {
        Self { code: Self::USAGE, message: m.into() }
    }

    fn data(m: impl fmt::Display) -> Self {
        Self { code: Self::DATA, message: m.to_string() }
    }

    fn remote(m: impl fmt::Display) -> Self {
        Self { code: Self::REMOTE, message: m.to_string() }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        Self::usage(e.to_string())
    }
}

macro_rules! data_errors {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                Self::data(e)
            }
        }
    )*};
}
data_errors!(JsonlError, RetrievalError, ProbeError, TrainError, EvalError, MockLoadError);

impl From<GeneratorError> for CliError {
    fn from(e: GeneratorError) -> Self {
        Self::remote(e)
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e.source {
            StepError::Generator(_) => Self::remote(e),
            StepError::Probe(_) => Self::data(e),
        }
    }
}

fn io_error(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |e| CliError::data(format!("{}: {e}", path.display()))
}

#[derive(Debug, Parser)]
#[command(name = "probe-rag", version, about = "Prober-gated adaptive retrieval for open-domain QA")]
pub struct Cli {
    #[command(flatten)]
    pub settings: SettingFlags,

    #[command(subcommand)]
    pub command: Command,
}

/// Flags mirroring the config-file keys one to one.
#[derive(Debug, Args, Default)]
pub struct SettingFlags {
    /// Config file of `key = value` lines. Flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Corpus JSONL with `id`, `title`, `text` per line.
    #[arg(long, global = true, value_name = "FILE")]
    pub corpus: Option<String>,
    /// BM25 index file written by `index`.
    #[arg(long, global = true, value_name = "FILE")]
    pub index: Option<String>,
    /// Generator base URL; requests go to `<URL>/generate`.
    #[arg(long, global = true, value_name = "URL")]
    pub endpoint: Option<String>,
    /// Mock generator fixture JSONL (takes precedence over --endpoint).
    #[arg(long, global = true, value_name = "FILE")]
    pub mock_fixture: Option<String>,
    /// Width of synthesized mock hidden states [default: 16].
    #[arg(long, global = true, value_name = "N")]
    pub mock_d_model: Option<String>,
    /// Token rows of synthesized mock hidden states [default: 4].
    #[arg(long, global = true, value_name = "N")]
    pub mock_tokens: Option<String>,
    /// Comma-separated probed layers [default: 6,8,10,12,14].
    #[arg(long, global = true, value_name = "LIST")]
    pub layers: Option<String>,
    /// Decision threshold added to the summed call logit [default: manifest value].
    #[arg(long, global = true, value_name = "X", allow_hyphen_values = true)]
    pub theta: Option<String>,
    /// Passages per retrieval [default: 5].
    #[arg(long, global = true, value_name = "N")]
    pub j: Option<String>,
    /// Cap on retrieval calls per question [default: 5].
    #[arg(long, global = true, value_name = "N")]
    pub max_iterations: Option<String>,
    /// Generation token budget sent to the server [default: 256].
    #[arg(long, global = true, value_name = "N")]
    pub max_new_tokens: Option<String>,
    /// Few-shot exemplar JSONL (`question`, `rationale`, `answer`) [default: built-in].
    #[arg(long, global = true, value_name = "FILE")]
    pub shots: Option<String>,
    /// Prompt template with {shots}, {passages}, {question} [default: built-in].
    #[arg(long, global = true, value_name = "FILE")]
    pub prompt_template: Option<String>,
    /// BM25 k1 [default: 1.2].
    #[arg(long, global = true, value_name = "X")]
    pub k1: Option<String>,
    /// BM25 b [default: 0.75].
    #[arg(long, global = true, value_name = "X")]
    pub b: Option<String>,
    /// Prober learning rate [default: 0.001].
    #[arg(long, global = true, value_name = "X")]
    pub learning_rate: Option<String>,
    /// Prober batch size [default: 12].
    #[arg(long, global = true, value_name = "N")]
    pub batch: Option<String>,
    /// Prober epochs; the first is warm-up [default: 2].
    #[arg(long, global = true, value_name = "N")]
    pub epochs: Option<String>,
    /// Prober dropout [default: 0.1].
    #[arg(long, global = true, value_name = "X")]
    pub dropout: Option<String>,
    /// Exponential learning-rate decay per step [default: 0.995].
    #[arg(long, global = true, value_name = "X")]
    pub gamma: Option<String>,
    /// AdamW weight decay [default: 0.01].
    #[arg(long, global = true, value_name = "X")]
    pub weight_decay: Option<String>,
    /// Prober hidden width [default: 128].
    #[arg(long, global = true, value_name = "N")]
    pub hidden: Option<String>,
    /// Steps between validation checks after warm-up [default: 100].
    #[arg(long, global = true, value_name = "N")]
    pub eval_every: Option<String>,
    /// Seed for training, balancing and mock synthesis [default: 0].
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<String>,
    /// Questions processed concurrently by `run` and `sweep` [default: 1].
    #[arg(long, global = true, value_name = "N")]
    pub parallel: Option<String>,
    /// Extra attempts after a generator connection failure [default: 1].
    #[arg(long, global = true, value_name = "N")]
    pub retries: Option<String>,
    /// Generator request timeout in seconds [default: 120].
    #[arg(long, global = true, value_name = "N")]
    pub timeout_secs: Option<String>,
}

impl SettingFlags {
    fn pairs(&self) -> [(&'static str, &Option<String>); 27] {
        [
            ("corpus", &self.corpus),
            ("index", &self.index),
            ("endpoint", &self.endpoint),
            ("mock_fixture", &self.mock_fixture),
            ("mock_d_model", &self.mock_d_model),
            ("mock_tokens", &self.mock_tokens),
            ("layers", &self.layers),
            ("theta", &self.theta),
            ("j", &self.j),
            ("max_iterations", &self.max_iterations),
            ("max_new_tokens", &self.max_new_tokens),
            ("shots", &self.shots),
            ("prompt_template", &self.prompt_template),
            ("k1", &self.k1),
            ("b", &self.b),
            ("learning_rate", &self.learning_rate),
            ("batch", &self.batch),
            ("epochs", &self.epochs),
            ("dropout", &self.dropout),
            ("gamma", &self.gamma),
            ("weight_decay", &self.weight_decay),
            ("hidden", &self.hidden),
            ("eval_every", &self.eval_every),
            ("seed", &self.seed),
            ("parallel", &self.parallel),
            ("retries", &self.retries),
            ("timeout_secs", &self.timeout_secs),
        ]
    }

    /// Defaults, then the config file, then flags.
    pub fn resolve(&self) -> Result<AppConfig, ConfigError> {
        let mut cfg = AppConfig::default();
        if let Some(path) = &self.config {
            cfg.apply_file(path)?;
        }
        for (key, value) in self.pairs() {
            if let Some(v) = value {
                cfg.set(key, v)?;
            }
        }
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FormatArg {
    Json,
    Tsv,
}

impl From<FormatArg> for ReportFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Json => ReportFormat::Json,
            FormatArg::Tsv => ReportFormat::Tsv,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SweepMode {
    /// One row per threshold.
    Theta,
    /// One row per growing prefix of the ensemble's layers.
    Layers,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a BM25 index from the corpus JSONL.
    Index {
        /// Output index file.
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },
    /// Generate with and without retrieval for every question and write traces.
    Trace {
        /// Questions JSONL (`id`, `question`, `answers`).
        #[arg(long, value_name = "FILE")]
        questions: PathBuf,
        /// Output trace JSONL.
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },
    /// Label traces by answer accuracy, pool them, and balance the labels.
    BuildDataset {
        /// Trace JSONL from `trace`.
        #[arg(long, value_name = "FILE")]
        traces: PathBuf,
        /// Output labelled dataset JSONL.
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
        /// Keep the label distribution as generated.
        #[arg(long)]
        no_balance: bool,
    },
    /// Train one prober per layer and write an ensemble.
    Train {
        /// Training dataset JSONL.
        #[arg(long, value_name = "FILE")]
        train: PathBuf,
        /// Validation dataset JSONL.
        #[arg(long, value_name = "FILE")]
        val: PathBuf,
        /// Directory receiving `ensemble.manifest` and per-layer checkpoints.
        #[arg(long, value_name = "DIR")]
        out_dir: PathBuf,
    },
    /// Answer questions with prober-gated retrieval.
    Run {
        /// Questions JSONL.
        #[arg(long, value_name = "FILE")]
        questions: PathBuf,
        /// Ensemble manifest.
        #[arg(long, value_name = "FILE")]
        ensemble: PathBuf,
        /// Output run-record JSONL.
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },
    /// Score predictions (run records or minimal JSONL) against gold answers.
    Eval {
        /// Predictions to score.
        #[arg(long, value_name = "FILE")]
        predictions: PathBuf,
        /// Questions JSONL with gold answers.
        #[arg(long, value_name = "FILE")]
        questions: PathBuf,
        /// No-retrieval predictions for the consistency metric.
        #[arg(long, value_name = "FILE")]
        baseline: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "tsv")]
        format: FormatArg,
    },
    /// Re-run the questions over several thresholds or layer subsets.
    Sweep {
        #[arg(long, value_name = "FILE")]
        questions: PathBuf,
        #[arg(long, value_name = "FILE")]
        ensemble: PathBuf,
        #[arg(long, value_enum)]
        mode: SweepMode,
        /// Thresholds for `--mode theta`.
        #[arg(long, value_name = "LIST", default_value = "-2,-1,0,1,2", allow_hyphen_values = true)]
        thetas: String,
        #[arg(long, value_enum, default_value = "tsv")]
        format: FormatArg,
    },
    /// Write per-layer and summed prober logits as CSV.
    DumpLogits {
        #[arg(long, value_name = "FILE")]
        ensemble: PathBuf,
        /// Labelled dataset JSONL.
        #[arg(long, value_name = "FILE")]
        dataset: PathBuf,
    },
    /// Print the generation prompt for a question.
    Prompt {
        #[arg(long)]
        question: String,
        /// Attach the top-j passages for the question from the index.
        #[arg(long)]
        search: bool,
    },
    /// Print the effective configuration as `key = value` lines.
    ShowConfig,
}

pub fn main<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let stdout = std::io::stdout();
    match run(cli, &mut stdout.lock()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e}");
            eprintln!("error: {e}");
            ExitCode::from(e.code)
        }
    }
}

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<(), CliError> {
    let cfg = cli.settings.resolve()?;
    match cli.command {
        Command::Index { out: path } => cmd_index(&cfg, &path),
        Command::Trace { questions, out: path } => cmd_trace(&cfg, &questions, &path),
        Command::BuildDataset { traces, out: path, no_balance } => {
            cmd_build_dataset(&cfg, &traces, &path, !no_balance)
        }
        Command::Train { train, val, out_dir } => cmd_train(&cfg, &train, &val, &out_dir, out),
        Command::Run { questions, ensemble, out: path } => {
            cmd_run(&cfg, &questions, &ensemble, &path)
        }
        Command::Eval { predictions, questions, baseline, format } => {
            cmd_eval(&predictions, &questions, baseline.as_deref(), format.into(), out)
        }
        Command::Sweep { questions, ensemble, mode, thetas, format } => {
            cmd_sweep(&cfg, &questions, &ensemble, mode, &thetas, format.into(), out)
        }
        Command::DumpLogits { ensemble, dataset } => cmd_dump_logits(&ensemble, &dataset, out),
        Command::Prompt { question, search } => cmd_prompt(&cfg, &question, search, out),
        Command::ShowConfig => show_config(&cfg, out),
    }
}

fn required<'a, T>(value: &'a Option<T>, key: &str) -> Result<&'a T, CliError> {
    value.as_ref().ok_or_else(|| CliError::usage(format!("missing setting `{key}` (--{})", key.replace('_', "-"))))
}

fn write_out(out: &mut dyn Write, text: &str) -> Result<(), CliError> {
    out.write_all(text.as_bytes()).map_err(|e| CliError::data(format!("stdout: {e}")))
}

pub fn build_generator(cfg: &AppConfig) -> Result<Box<dyn Generator>, CliError> {
    if let Some(fixture) = &cfg.mock_fixture {
        let synth = SynthConfig { d_model: cfg.mock_d_model, tokens: cfg.mock_tokens, seed: cfg.seed() };
        return Ok(Box::new(MockGenerator::from_file(fixture, synth)?));
    }
    if let Some(endpoint) = &cfg.endpoint {
        return Ok(Box::new(HttpGenerator::new(
            endpoint.clone(),
            Duration::from_secs(cfg.timeout_secs),
            cfg.retries,
        )));
    }
    Err(CliError::usage("no generator configured: set `mock_fixture` or `endpoint`"))
}

fn load_index(cfg: &AppConfig) -> Result<CorpusIndex, CliError> {
    Ok(CorpusIndex::load(required(&cfg.index, "index")?)?)
}

fn cmd_index(cfg: &AppConfig, out: &Path) -> Result<(), CliError> {
    let corpus = retrieval::load_corpus(required(&cfg.corpus, "corpus")?)?;
    let index = CorpusIndex::build(corpus, cfg.k1, cfg.b)?;
    index.save(out)?;
    log::info!("indexed {} documents into {}", index.doc_count(), out.display());
    Ok(())
}

fn cmd_trace(cfg: &AppConfig, questions: &Path, out: &Path) -> Result<(), CliError> {
    let questions: Vec<Question> = jsonl::read(questions)?;
    let index = load_index(cfg)?;
    let client = build_generator(cfg)?;
    let pc = cfg.pipeline_config(0.0)?;
    let mut traces = Vec::with_capacity(questions.len() * 2);
    for q in &questions {
        let mut request = GeneratorRequest {
            question: q.question.clone(),
            passages: Vec::new(),
            shots: pc.shots.clone(),
            layers: pc.layers.clone(),
            max_new_tokens: pc.max_new_tokens,
        };
        let direct = generate(client.as_ref(), &request, 0)?;
        let query = form_retrieval_query(&q.question, &[], &direct.rationale, &direct.answer, 0);
        request.passages = index.search(&query, pc.top_j).into_iter().map(|s| s.doc).collect();
        let retrieved = generate(client.as_ref(), &request, 1)?;
        for (with_retrieval, resp) in [(false, direct), (true, retrieved)] {
            traces.push(TraceRecord {
                question_id: q.id.clone(),
                question: q.question.clone(),
                gold_answers: q.answers.clone(),
                with_retrieval,
                rationale: resp.rationale,
                answer: resp.answer,
                hidden_states: resp.hidden_states,
            });
        }
    }
    jsonl::write(out, &traces)?;
    log::info!("wrote {} traces to {}", traces.len(), out.display());
    Ok(())
}

fn cmd_build_dataset(cfg: &AppConfig, traces: &Path, out: &Path, balance: bool) -> Result<(), CliError> {
    let traces: Vec<TraceRecord> = jsonl::read(traces)?;
    let mut examples = traces
        .iter()
        .map(|t| train::label_trace(t, &cfg.layers, eval::accuracy))
        .collect::<Result<Vec<_>, _>>()?;
    if balance {
        examples = train::balance_dataset(examples, cfg.seed())?;
    }
    jsonl::write(out, &examples)?;
    let positives = examples.iter().filter(|e| e.y == 1).count();
    log::info!("wrote {} examples ({positives} with y=1) to {}", examples.len(), out.display());
    Ok(())
}

fn cmd_train(cfg: &AppConfig, train_path: &Path, val_path: &Path, out_dir: &Path, out: &mut dyn Write) -> Result<(), CliError> {
    let train_set: Vec<LabeledExample> = jsonl::read(train_path)?;
    let val_set: Vec<LabeledExample> = jsonl::read(val_path)?;
    let (ensemble, report) = train::train_probers(&train_set, &val_set, &cfg.train, &cfg.layers)?;
    std::fs::create_dir_all(out_dir).map_err(io_error(out_dir))?;
    probe::save_ensemble(&out_dir.join("ensemble.manifest"), &ensemble)?;
    for (layer, r) in &report.layers {
        log::info!("layer {layer}: validation accuracy {:.4} at step {}", r.final_val_accuracy, r.best_step);
    }
    let mut text = serde_json::to_string(&report).expect("report serializes");
    text.push('\n');
    write_out(out, &text)
}

fn load_ensemble(path: &Path) -> Result<ProberEnsemble, CliError> {
    Ok(probe::load_ensemble(path)?)
}

/// Runs a batch; returns records and the exit code of the first failure.
fn run_records(
    questions: &[Question],
    ensemble: &ProberEnsemble,
    index: &CorpusIndex,
    client: &dyn Generator,
    pc: &PipelineConfig,
    parallel: usize,
) -> (Vec<RunRecord>, Option<CliError>) {
    let mut records = Vec::new();
    let mut first_error = None;
    for result in pipeline::run_batch(questions, ensemble, index, client, pc, parallel) {
        match result {
            Ok(r) => records.push(r),
            Err(f) => {
                log::error!("{f}");
                let code = match f.error.source {
                    StepError::Generator(_) => CliError::REMOTE,
                    StepError::Probe(_) => CliError::DATA,
                };
                first_error.get_or_insert(CliError { code, message: f.to_string() });
            }
        }
    }
    (records, first_error)
}

fn cmd_run(cfg: &AppConfig, questions: &Path, ensemble: &Path, out: &Path) -> Result<(), CliError> {
    let questions: Vec<Question> = jsonl::read(questions)?;
    let ensemble = load_ensemble(ensemble)?;
    let index = load_index(cfg)?;
    let client = build_generator(cfg)?;
    let pc = cfg.pipeline_config(ensemble.theta)?;
    let (records, failure) =
        run_records(&questions, &ensemble, &index, client.as_ref(), &pc, cfg.parallel);
    jsonl::write(out, &records)?;
    let calls: usize = records.iter().map(|r| r.retrieval_calls).sum();
    log::info!("{} of {} questions answered, {calls} retrieval calls", records.len(), questions.len());
    match failure {
        Some(mut e) => {
            e.message = format!(
                "{} of {} questions failed; first failure: {}",
                questions.len() - records.len(),
                questions.len(),
                e.message
            );
            Err(e)
        }
        None => Ok(()),
    }
}

fn cmd_eval(
    predictions: &Path,
    questions: &Path,
    baseline: Option<&Path>,
    format: ReportFormat,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let questions: Vec<Question> = jsonl::read(questions)?;
    let golds = eval::golds_from_questions(&questions);
    let preds = eval::load_predictions(predictions)?;
    let mut report = eval::score(&preds, &golds);
    if let Some(path) = baseline {
        let base = eval::load_predictions(path)?;
        let base_correct = eval::correct_ids(&base, &golds);
        let answers: BTreeMap<String, String> =
            preds.iter().map(|p| (p.question_id.clone(), p.answer.clone())).collect();
        report.consistency = Some(eval::consistency(&base_correct, &answers, &golds)?);
    }
    write_out(out, &eval::emit_report(&report, format))
}

fn parse_thetas(list: &str) -> Result<Vec<f64>, CliError> {
    list.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| CliError::usage(format!("bad theta {t:?}: {e}"))))
        .collect()
}

fn cmd_sweep(
    cfg: &AppConfig,
    questions: &Path,
    ensemble: &Path,
    mode: SweepMode,
    thetas: &str,
    format: ReportFormat,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let questions: Vec<Question> = jsonl::read(questions)?;
    let golds = eval::golds_from_questions(&questions);
    let ensemble = load_ensemble(ensemble)?;
    let index = load_index(cfg)?;
    let client = build_generator(cfg)?;
    let base = cfg.pipeline_config(ensemble.theta)?;

    let settings = match mode {
        SweepMode::Theta => sweep::theta_settings(&ensemble, &base, &parse_thetas(thetas)?),
        SweepMode::Layers => sweep::layer_prefix_settings(&ensemble, &base)?,
    };
    let rows = sweep::run_sweep(&questions, &golds, &index, client.as_ref(), &settings, cfg.parallel)
        .map_err(|f| match f.error.source {
            StepError::Generator(_) => CliError::remote(&f),
            StepError::Probe(_) => CliError::data(&f),
        })?;
    write_out(out, &sweep::render_sweep(&rows, format))
}

fn cmd_dump_logits(ensemble: &Path, dataset: &Path, out: &mut dyn Write) -> Result<(), CliError> {
    let ensemble = load_ensemble(ensemble)?;
    let examples: Vec<LabeledExample> = jsonl::read(dataset)?;
    write_out(out, &train::dump_logits(&ensemble, &examples)?)
}

fn cmd_prompt(cfg: &AppConfig, question: &str, search: bool, out: &mut dyn Write) -> Result<(), CliError> {
    let pc = cfg.pipeline_config(0.0)?;
    let passages = if search {
        load_index(cfg)?.search(question, pc.top_j).into_iter().map(|s| s.doc).collect()
    } else {
        Vec::new()
    };
    let template = cfg.prompt_template()?;
    write_out(out, &prompt::render_prompt(&template, &pc.shots, &passages, question))
}

fn show_config(cfg: &AppConfig, out: &mut dyn Write) -> Result<(), CliError> {
    let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
    let layers = cfg.layers.iter().map(|l| l.to_string()).collect::<Vec<_>>().join(",");
    let t = &cfg.train;
    let lines = [
        ("corpus", path(&cfg.corpus)),
        ("index", path(&cfg.index)),
        ("endpoint", cfg.endpoint.clone().unwrap_or_default()),
        ("mock_fixture", path(&cfg.mock_fixture)),
        ("mock_d_model", cfg.mock_d_model.to_string()),
        ("mock_tokens", cfg.mock_tokens.to_string()),
        ("layers", layers),
        ("theta", cfg.theta.map(|t| t.to_string()).unwrap_or_default()),
        ("j", cfg.j.to_string()),
        ("max_iterations", cfg.max_iterations.to_string()),
        ("max_new_tokens", cfg.max_new_tokens.to_string()),
        ("shots", path(&cfg.shots)),
        ("prompt_template", path(&cfg.prompt_template)),
        ("k1", cfg.k1.to_string()),
        ("b", cfg.b.to_string()),
        ("learning_rate", t.learning_rate.to_string()),
        ("batch", t.batch_size.to_string()),
        ("epochs", t.epochs.to_string()),
        ("dropout", t.dropout.to_string()),
        ("gamma", t.scheduler_gamma.to_string()),
        ("weight_decay", t.weight_decay.to_string()),
        ("hidden", t.hidden.to_string()),
        ("eval_every", t.eval_every.to_string()),
        ("seed", t.seed.to_string()),
        ("parallel", cfg.parallel.to_string()),
        ("retries", cfg.retries.to_string()),
        ("timeout_secs", cfg.timeout_secs.to_string()),
    ];
    let mut text = String::new();
    for (k, v) in lines {
        if v.is_empty() {
            text.push_str(&format!("# {k} =\n"));
        } else {
            text.push_str(&format!("{k} = {v}\n"));
        }
    }
    write_out(out, &text)
}
