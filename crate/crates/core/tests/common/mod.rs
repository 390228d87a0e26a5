//! Independent oracles, fixtures and the acceptance checks shared by the
//! integration tests.

#![allow(dead_code, clippy::neg_cmp_op_on_partial_ord)]

use std::collections::BTreeMap;
use std::sync::Mutex;

use probe_rag::eval;
use probe_rag::pipeline::{
    Generator, GeneratorError, GeneratorRequest, GeneratorResponse, MockEntry, MockGenerator,
    PipelineConfig, Question, SynthConfig,
};
use probe_rag::probe::{ForwardMode, ProberParams};
use probe_rag::sweep;
use probe_rag::train::{self, LabeledExample, TrainConfig};
use probe_rag::{
    pool_hidden_states, run_batch, run_query, CorpusIndex, Document, HiddenTrace, LayerIndex,
    ProberEnsemble,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Check = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)*) => {
        if !$cond {
            return Err(format!($($fmt)*));
        }
    };
}

// ---- oracles ----

/// Column means, then population standardization, written out longhand.
pub fn pool_oracle(m: &[Vec<f64>]) -> Vec<f64> {
    let u = m.len() as f64;
    let d = m[0].len();
    let mut mean = vec![0.0; d];
    for col in 0..d {
        let mut s = 0.0;
        for row in m {
            s += row[col];
        }
        mean[col] = s / u;
    }
    let mu = mean.iter().sum::<f64>() / d as f64;
    let var = mean.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / d as f64;
    if var < 1e-12 {
        return vec![0.0; d];
    }
    mean.iter().map(|v| (v - mu) / var.sqrt()).collect()
}

pub fn oracle_tokens(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for ch in text.chars() {
        if ch.is_alphanumeric() {
            cur.extend(ch.to_lowercase());
        } else if !cur.is_empty() {
            out.push(std::mem::take(&mut cur));
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

/// Okapi BM25 of every document, computed by rescanning the raw texts.
pub fn bm25_oracle(docs: &[(&str, &str)], query: &str, k1: f64, b: f64) -> Vec<f64> {
    let toks: Vec<Vec<String>> = docs.iter().map(|(_, t)| oracle_tokens(t)).collect();
    let n = docs.len() as f64;
    let avgdl = toks.iter().map(Vec::len).sum::<usize>() as f64 / n;
    toks.iter()
        .map(|doc| {
            let mut score = 0.0;
            for term in oracle_tokens(query) {
                let df = toks.iter().filter(|d| d.contains(&term)).count() as f64;
                let tf = doc.iter().filter(|t| **t == term).count() as f64;
                if tf == 0.0 {
                    continue;
                }
                let idf = (1.0 + (n - df + 0.5) / (df + 0.5)).ln();
                score += idf * tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * doc.len() as f64 / avgdl));
            }
            score
        })
        .collect()
}

/// Ids and scores of the top `j` positive-score documents, score descending
/// then id ascending, by full sort.
pub fn bm25_ranking(docs: &[(&str, &str)], query: &str, j: usize) -> Vec<(String, f64)> {
    let scores = bm25_oracle(docs, query, 1.2, 0.75);
    let mut all: Vec<(String, f64)> = docs
        .iter()
        .zip(scores)
        .filter(|(_, s)| *s > 0.0)
        .map(|((id, _), s)| (id.to_string(), s))
        .collect();
    all.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    all.truncate(j);
    all
}

pub fn index_of(docs: &[(&str, &str)]) -> CorpusIndex {
    let corpus = docs.iter().map(|(id, text)| Document::new(*id, "", *text)).collect();
    CorpusIndex::build(corpus, 1.2, 0.75).unwrap()
}

/// Full-batch logistic regression by gradient descent.
pub fn logistic_regression(train: &[(Vec<f64>, u8)], iters: usize, lr: f64) -> (Vec<f64>, f64) {
    let d = train[0].0.len();
    let mut w = vec![0.0; d];
    let mut bias = 0.0;
    for _ in 0..iters {
        let mut gw = vec![0.0; d];
        let mut gb = 0.0;
        for (x, y) in train {
            let z: f64 = bias + x.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>();
            let err = 1.0 / (1.0 + (-z).exp()) - f64::from(*y);
            gw.iter_mut().zip(x).for_each(|(g, a)| *g += err * a);
            gb += err;
        }
        let scale = lr / train.len() as f64;
        w.iter_mut().zip(&gw).for_each(|(v, g)| *v -= scale * g);
        bias -= scale * gb;
    }
    (w, bias)
}

pub fn logistic_accuracy(model: &(Vec<f64>, f64), data: &[(Vec<f64>, u8)]) -> f64 {
    let hits = data
        .iter()
        .filter(|(x, y)| {
            let z: f64 = model.1 + x.iter().zip(&model.0).map(|(a, b)| a * b).sum::<f64>();
            u8::from(z > 0.0) == *y
        })
        .count();
    hits as f64 / data.len() as f64
}

// ---- fixtures ----

pub fn gaussian(rng: &mut impl Rng) -> f64 {
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Two unit-variance Gaussian blobs in `d` dimensions whose centres sit 4
/// standard deviations apart along a zero-mean unit direction. Each raw
/// vector goes through pooling as a one-token trace, as in the pipeline.
pub fn blob_examples(n: usize, d: usize, layer: LayerIndex, rng: &mut impl Rng) -> Vec<LabeledExample> {
    let dir: Vec<f64> = (0..d)
        .map(|i| if i % 2 == 0 { 1.0 } else { -1.0 } / (d as f64).sqrt())
        .collect();
    (0..n)
        .map(|i| {
            let y = (i % 2) as u8;
            let sign = if y == 1 { 2.0 } else { -2.0 };
            let raw: Vec<f64> = dir.iter().map(|u| sign * u + gaussian(rng)).collect();
            LabeledExample {
                question_id: format!("b{i}"),
                pooled: BTreeMap::from([(layer, pool_hidden_states(&[raw]).unwrap())]),
                y,
                with_retrieval: false,
            }
        })
        .collect()
}

pub const LAYERS: [LayerIndex; 5] = [6, 8, 10, 12, 14];

/// d=2, h=1 prober: call logit = SiLU(x0 - x1), pass logit = -SiLU(x0 - x1).
pub fn sign_prober(layer: LayerIndex) -> ProberParams {
    let mut p = ProberParams::zeros(layer, 2, 1, 0.0);
    p.norm_gain = vec![1.0, 1.0];
    p.w1 = vec![1.0, -1.0];
    p.w2 = vec![1.0, -1.0];
    p
}

pub fn sign_ensemble() -> ProberEnsemble {
    ProberEnsemble::new(LAYERS.iter().map(|&l| (l, sign_prober(l))).collect(), 0.0).unwrap()
}

/// One-token trace on every layer; `retrieve` picks the row the sign
/// ensemble votes to retrieve on.
pub fn scripted_trace(retrieve: bool) -> HiddenTrace {
    let row = if retrieve { vec![1.0, 0.0] } else { vec![0.0, 1.0] };
    HiddenTrace::new(LAYERS.iter().map(|&l| (l, vec![row.clone()])).collect()).unwrap()
}

pub fn scripted(question: &str, iteration: usize, retrieve: bool, answer: &str) -> MockEntry {
    MockEntry {
        question: question.into(),
        iteration,
        rationale: format!("step {iteration}"),
        answer: answer.into(),
        hidden_states: Some(scripted_trace(retrieve)),
        tokens: None,
    }
}

pub fn random_ensemble(d: usize, hidden: usize, seed: u64) -> ProberEnsemble {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let probers = LAYERS
        .iter()
        .map(|&l| (l, ProberParams::init_random(l, d, hidden, 0.1, &mut rng)))
        .collect();
    ProberEnsemble::new(probers, 0.0).unwrap()
}

/// Generator wrapper that keeps every request it forwards.
pub struct Recording<G> {
    pub inner: G,
    pub requests: Mutex<Vec<(usize, GeneratorRequest)>>,
}

impl<G> Recording<G> {
    pub fn new(inner: G) -> Self {
        Self { inner, requests: Mutex::new(Vec::new()) }
    }
}

impl<G: Generator> Generator for Recording<G> {
    fn generate(&self, req: &GeneratorRequest, iteration: usize) -> Result<GeneratorResponse, GeneratorError> {
        self.requests.lock().unwrap().push((iteration, req.clone()));
        self.inner.generate(req, iteration)
    }
}

pub const HAND_CORPUS: [(&str, &str); 3] = [
    ("d1", "boxing world champion"),
    ("d2", "world of music"),
    ("d3", "champion boxer boxing"),
];

/// 50 questions; each has six scripted iterations with synthesized states.
pub fn bulk_fixture() -> (Vec<Question>, Vec<MockEntry>) {
    let mut questions = Vec::new();
    let mut entries = Vec::new();
    for i in 0..50 {
        let q = format!("bulk question {i} about boxing or music");
        let gold = if i % 3 == 0 { "music" } else { "boxing" };
        questions.push(Question { id: format!("q{i:02}"), question: q.clone(), answers: vec![gold.into()] });
        for it in 0..6 {
            let answer = if (i + it) % 2 == 0 { "boxing" } else { "music" };
            entries.push(MockEntry {
                question: q.clone(),
                iteration: it,
                rationale: format!("thinking about {answer}"),
                answer: answer.into(),
                hidden_states: None,
                tokens: Some(1 + (i + it) % 5),
            });
        }
    }
    (questions, entries)
}

pub fn bulk_corpus() -> CorpusIndex {
    index_of(&[
        ("d1", "boxing world champion"),
        ("d2", "world of music"),
        ("d3", "champion boxer boxing"),
        ("d4", "music theory and harmony"),
        ("d5", "a question about nothing"),
    ])
}

// ---- acceptance checks ----

pub fn check_pooling() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let u = rng.gen_range(1..=8);
        let d = rng.gen_range(1..=16);
        let m: Vec<Vec<f64>> =
            (0..u).map(|_| (0..d).map(|_| rng.gen_range(-5.0..5.0)).collect()).collect();
        let got = pool_hidden_states(&m).map_err(|e| e.to_string())?;
        let want = pool_oracle(&m);
        ensure!(got.len() == d, "width {} != {d}", got.len());
        for (a, b) in got.iter().zip(&want) {
            worst = worst.max((a - b).abs());
        }
    }
    ensure!(worst <= 1e-9, "max deviation {worst:e} > 1e-9");
    let constant = vec![vec![3.25; 7]; 4];
    let z = pool_hidden_states(&constant).map_err(|e| e.to_string())?;
    ensure!(z.iter().all(|&v| v == 0.0), "constant input pooled to {z:?}");
    Ok(format!("100 matrices, max deviation {worst:.1e}; constant input -> zero vector"))
}

/// Relative error `|a - n| / max(|a|, |n|)`, with differences below 1e-9 in
/// absolute terms treated as exact.
pub fn relative_error(a: f64, n: f64) -> f64 {
    let diff = (a - n).abs();
    if diff < 1e-9 {
        0.0
    } else {
        diff / a.abs().max(n.abs())
    }
}

pub fn check_gradients() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let step = 1e-4;
    let mut worst = 0.0f64;
    let mut checked = 0usize;
    for config in 0..20 {
        let d = rng.gen_range(1..=6);
        let h = rng.gen_range(1..=8);
        let dropout = if config % 2 == 0 { 0.0 } else { 0.3 };
        let mut p = ProberParams::init_random(6, d, h, dropout, &mut rng);
        p.norm_gain.iter_mut().for_each(|g| *g = rng.gen_range(0.5..1.5));
        p.norm_bias.iter_mut().for_each(|b| *b = rng.gen_range(-0.5..0.5));
        let x: Vec<f64> = (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let label = rng.gen_range(0..=1u8);
        let mask: Option<Vec<f64>> = (dropout > 0.0).then(|| {
            (0..h).map(|_| if rng.gen::<f64>() < dropout { 0.0 } else { 1.0 / (1.0 - dropout) }).collect()
        });

        let (_, grad) = p.loss_and_gradient(&x, label, mask.as_deref()).map_err(|e| e.to_string())?;
        let loss_at = |q: &ProberParams| q.loss_and_gradient(&x, label, mask.as_deref()).unwrap().0;

        let analytic: Vec<f64> = flatten(&grad);
        for (k, &a) in analytic.iter().enumerate() {
            let mut plus = p.clone();
            let mut minus = p.clone();
            *param_mut(&mut plus, k) += step;
            *param_mut(&mut minus, k) -= step;
            let numeric = (loss_at(&plus) - loss_at(&minus)) / (2.0 * step);
            let err = relative_error(a, numeric);
            if err > worst {
                worst = err;
            }
            ensure!(err <= 1e-3, "config {config} parameter {k}: analytic {a:e} vs numeric {numeric:e}");
            checked += 1;
        }
    }
    Ok(format!("20 configurations, {checked} parameters, max relative error {worst:.1e}"))
}

fn flatten(p: &ProberParams) -> Vec<f64> {
    [&p.norm_gain, &p.norm_bias, &p.w1, &p.b1, &p.w2]
        .into_iter()
        .flatten()
        .chain(p.b2.iter())
        .copied()
        .collect()
}

fn param_mut(p: &mut ProberParams, mut k: usize) -> &mut f64 {
    for t in [&mut p.norm_gain, &mut p.norm_bias, &mut p.w1, &mut p.b1, &mut p.w2] {
        if k < t.len() {
            return &mut t[k];
        }
        k -= t.len();
    }
    &mut p.b2[k]
}

pub struct BlobRun {
    pub ensemble: ProberEnsemble,
    pub val: Vec<LabeledExample>,
    pub val_accuracy: f64,
    pub oracle_accuracy: f64,
}

pub fn train_blobs() -> Result<BlobRun, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let train_set = blob_examples(400, 16, 6, &mut rng);
    let val = blob_examples(100, 16, 6, &mut rng);
    let cfg = TrainConfig::default();
    let (ensemble, report) = train::train_probers(&train_set, &val, &cfg, &[6]).map_err(|e| e.to_string())?;
    let val_accuracy = report.layers[&6].final_val_accuracy;

    let as_pairs = |xs: &[LabeledExample]| -> Vec<(Vec<f64>, u8)> {
        xs.iter().map(|e| (e.pooled[&6].clone(), e.y)).collect()
    };
    let model = logistic_regression(&as_pairs(&train_set), 500, 0.5);
    let oracle_accuracy = logistic_accuracy(&model, &as_pairs(&val));
    Ok(BlobRun { ensemble, val, val_accuracy, oracle_accuracy })
}

pub fn check_trainer(run: &BlobRun) -> Check {
    let recomputed = train::evaluate_prober(run.ensemble.prober(6).unwrap(), &run.val)
        .map_err(|e| e.to_string())?;
    ensure!(
        (recomputed - run.val_accuracy).abs() < 1e-12,
        "reported accuracy {} but checkpoint scores {recomputed}",
        run.val_accuracy
    );
    ensure!(run.oracle_accuracy >= 0.95, "logistic-regression oracle only reaches {}", run.oracle_accuracy);
    ensure!(run.val_accuracy >= 0.95, "prober validation accuracy {} < 0.95", run.val_accuracy);
    Ok(format!("prober val acc {:.2}, logistic oracle {:.2}", run.val_accuracy, run.oracle_accuracy))
}

pub fn check_logit_separation(run: &BlobRun) -> Check {
    let csv = train::dump_logits(&run.ensemble, &run.val).map_err(|e| e.to_string())?;
    let mut sums = [(0.0, 0usize); 2];
    for line in csv.lines().skip(1).filter(|l| l.starts_with("sum,")) {
        let f: Vec<&str> = line.split(',').collect();
        let call: f64 = f[1].parse().map_err(|e| format!("{e}"))?;
        let y: usize = f[3].parse().map_err(|e| format!("{e}"))?;
        sums[y].0 += call;
        sums[y].1 += 1;
    }
    ensure!(sums[0].1 > 0 && sums[1].1 > 0, "dump lacks one of the labels");
    let m0 = sums[0].0 / sums[0].1 as f64;
    let m1 = sums[1].0 / sums[1].1 as f64;
    ensure!(m0 > m1, "mean sum_call y=0 {m0} <= y=1 {m1}");
    Ok(format!("mean sum_call y=0 {m0:.3} > y=1 {m1:.3}"))
}

pub fn check_bm25() -> Check {
    let index = index_of(&HAND_CORPUS);
    let hits = index.search("boxing champion", 2);
    let expected = 2.0 * 1.6f64.ln();
    ensure!(hits.len() == 2, "{} hits", hits.len());
    let ids: Vec<&str> = hits.iter().map(|h| h.doc.id.as_str()).collect();
    ensure!(ids == ["d1", "d3"], "ranking {ids:?}");
    for h in &hits {
        ensure!((h.score - expected).abs() <= 1e-9, "{} scored {} vs {expected}", h.doc.id, h.score);
    }
    let oracle = bm25_oracle(&HAND_CORPUS, "boxing champion", 1.2, 0.75);
    ensure!((oracle[0] - expected).abs() <= 1e-12 && oracle[1] == 0.0, "oracle disagrees with hand value");

    let cases = enumerate_bm25();
    Ok(format!("hand corpus scores 2 ln 1.6 = {expected:.9}; {cases} enumerated searches match"))
}

/// Every corpus of 1 to 4 documents drawn from the nonempty multisets of at
/// most two terms over {a, b, c}, against a fixed query set.
pub fn enumerate_bm25() -> usize {
    let alphabet = ["a", "b", "c"];
    let mut universe: Vec<String> = alphabet.iter().map(|s| s.to_string()).collect();
    for i in 0..3 {
        for j in i..3 {
            universe.push(format!("{} {}", alphabet[i], alphabet[j]));
        }
    }
    let queries = ["a", "b", "d", "a b", "a a", "b c", "a b c", "c d"];
    let mut cases = 0;
    for n in 1..=4usize {
        let total = universe.len().pow(n as u32);
        for code in 0..total {
            let mut c = code;
            let ids: Vec<String> = (0..n).map(|i| format!("doc{i}")).collect();
            let docs: Vec<(&str, &str)> = (0..n)
                .map(|i| {
                    let t = universe[c % universe.len()].as_str();
                    c /= universe.len();
                    (ids[i].as_str(), t)
                })
                .collect();
            let index = index_of(&docs);
            for q in queries {
                for j in [1, 4] {
                    let want = bm25_ranking(&docs, q, j);
                    let got = index.search(q, j);
                    assert_eq!(got.len(), want.len(), "{docs:?} {q:?} j={j}");
                    for (g, (id, s)) in got.iter().zip(&want) {
                        assert_eq!(&g.doc.id, id, "{docs:?} {q:?} j={j}");
                        assert!((g.score - s).abs() <= 1e-9, "{docs:?} {q:?}");
                    }
                    cases += 1;
                }
            }
        }
    }
    cases
}

fn config(max_iterations: usize, top_j: usize) -> PipelineConfig {
    PipelineConfig { max_iterations, top_j, ..PipelineConfig::default() }
}

pub fn check_pipeline() -> Check {
    let ens = sign_ensemble();
    let index = index_of(&HAND_CORPUS);
    let q = "who is the boxing champion";

    let pass = MockGenerator::new(vec![scripted(q, 0, false, "Ali")], SynthConfig::default()).unwrap();
    let r = run_query("p", q, &ens, &index, &pass, &config(5, 2)).map_err(|e| e.to_string())?;
    ensure!(r.retrieval_calls == 0 && r.iterations.len() == 1, "pass script made {} calls", r.retrieval_calls);
    ensure!(r.final_answer == "Ali", "final answer {:?}", r.final_answer);

    let always = MockGenerator::new(vec![scripted(q, 0, true, "?")], SynthConfig::default()).unwrap();
    let r = run_query("a", q, &ens, &index, &always, &config(3, 2)).map_err(|e| e.to_string())?;
    ensure!(r.retrieval_calls == 3, "always-retrieve made {} calls", r.retrieval_calls);
    ensure!(r.iterations.len() == 4, "{} generations", r.iterations.len());

    let once = Recording::new(
        MockGenerator::new(
            vec![scripted(q, 0, true, "world champion"), scripted(q, 1, false, "Ali")],
            SynthConfig::default(),
        )
        .unwrap(),
    );
    let r = run_query("o", q, &ens, &index, &once, &config(5, 2)).map_err(|e| e.to_string())?;
    ensure!(r.retrieval_calls == 1, "retrieve-once made {} calls", r.retrieval_calls);
    let requests = once.requests.lock().unwrap();
    ensure!(requests.len() == 2, "{} generator requests", requests.len());
    ensure!(requests[0].1.passages.is_empty(), "first request carried passages");
    let search = format!("{q} step 0 world champion");
    let want = bm25_ranking(&HAND_CORPUS, &search, 2);
    let got: Vec<(String, String)> =
        requests[1].1.passages.iter().map(|d| (d.id.clone(), d.text.clone())).collect();
    let want_docs: Vec<(String, String)> = want
        .iter()
        .map(|(id, _)| {
            let text = HAND_CORPUS.iter().find(|(d, _)| d == id).unwrap().1;
            (id.clone(), text.to_string())
        })
        .collect();
    ensure!(got == want_docs, "second request passages {got:?}, oracle {want_docs:?}");
    drop(requests);

    let (questions, entries) = bulk_fixture();
    let synth = SynthConfig { d_model: 16, tokens: 4, seed: 9 };
    let ens = random_ensemble(16, 8, 3);
    let run = |parallel: usize| {
        let mock = MockGenerator::new(entries.clone(), synth).unwrap();
        let out: Vec<_> = run_batch(&questions, &ens, &bulk_corpus(), &mock, &config(5, 3), parallel)
            .into_iter()
            .map(|r| r.map_err(|e| e.to_string()))
            .collect::<Result<Vec<_>, _>>()?;
        serde_json::to_string(&out).map_err(|e| e.to_string())
    };
    let first = run(1)?;
    ensure!(first == run(1)?, "sequential reruns differ");
    ensure!(first == run(4)?, "parallel run differs from sequential");
    Ok(format!("0 / 3 / 1 calls as scripted; second request carries oracle top-2 {:?}; 50-question batch bitwise stable", want.iter().map(|w| &w.0).collect::<Vec<_>>()))
}

pub fn check_metric_pins() -> Check {
    let g = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect::<Vec<String>>();
    let boxing = g(&["Fistfighting", "Corner men", "Boxing"]);
    ensure!(eval::exact_match("Boxing", &boxing) && eval::accuracy("Boxing", &boxing), "Boxing pin");
    let rcaf = g(&["Royal Canadian"]);
    ensure!(
        !eval::exact_match("Royal Canadian Air Force", &rcaf) && eval::accuracy("Royal Canadian Air Force", &rcaf),
        "Royal Canadian pin"
    );

    let golds: BTreeMap<String, Vec<String>> = BTreeMap::from([
        ("a".into(), g(&["Boxing"])),
        ("b".into(), g(&["Royal Canadian"])),
        ("c".into(), g(&["Paris"])),
    ]);
    let base = vec![
        eval::Prediction { question_id: "a".into(), answer: "Boxing".into(), retrieval_calls: 0 },
        eval::Prediction { question_id: "b".into(), answer: "Royal Canadian Air Force".into(), retrieval_calls: 0 },
        eval::Prediction { question_id: "c".into(), answer: "Lyon".into(), retrieval_calls: 0 },
    ];
    let correct = eval::correct_ids(&base, &golds);
    let answers: BTreeMap<String, String> =
        base.iter().map(|p| (p.question_id.clone(), p.answer.clone())).collect();
    let c = eval::consistency(&correct, &answers, &golds).map_err(|e| e.to_string())?;
    ensure!(c == 1.0, "self-consistency {c}");
    Ok("Boxing EM 1 / ACC 1; Royal Canadian Air Force EM 0 / ACC 1; self-consistency 100%".into())
}

pub fn check_sweep() -> Check {
    let (questions, entries) = bulk_fixture();
    let golds = eval::golds_from_questions(&questions);
    let mock = MockGenerator::new(entries, SynthConfig { d_model: 16, tokens: 4, seed: 5 }).unwrap();
    let index = bulk_corpus();
    let ens = random_ensemble(16, 8, 17);
    let base = config(5, 3);

    let settings = sweep::theta_settings(&ens, &base, &sweep::DEFAULT_THETAS);
    let rows = sweep::run_sweep(&questions, &golds, &index, &mock, &settings, 2).map_err(|e| e.to_string())?;
    ensure!(rows.len() == 5, "theta sweep emitted {} rows", rows.len());
    let calls: Vec<usize> = rows.iter().map(|r| r.report.total_retrieval_calls).collect();
    ensure!(calls.windows(2).all(|w| w[0] <= w[1]), "retrieval calls not monotone in theta: {calls:?}");
    ensure!(calls[0] < calls[4], "sweep did not move the call count: {calls:?}");

    let settings = sweep::layer_prefix_settings(&ens, &base).map_err(|e| e.to_string())?;
    let rows = sweep::run_sweep(&questions, &golds, &index, &mock, &settings, 2).map_err(|e| e.to_string())?;
    ensure!(rows.len() == 5, "layer sweep emitted {} rows", rows.len());
    let labels: Vec<&str> = rows.iter().map(|r| r.setting.as_str()).collect();
    ensure!(labels[0] == "layers=6" && labels[4] == "layers=6,8,10,12,14", "labels {labels:?}");
    let tsv = sweep::render_sweep(&rows, eval::ReportFormat::Tsv);
    ensure!(tsv.lines().count() == 6, "TSV has {} lines", tsv.lines().count());
    Ok(format!("5 + 5 rows; total calls over theta -2..2: {calls:?}"))
}

/// Eval-mode logits.
pub fn eval_logits(p: &ProberParams, x: &[f64]) -> [f64; 2] {
    p.forward(x, ForwardMode::Eval).unwrap()
}
