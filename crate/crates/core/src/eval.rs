//! Open-domain QA metrics and run statistics.
//!
//! EM compares normalized strings. ACC asks whether a normalized gold alias
//! occurs as a contiguous run of tokens inside the normalized prediction, so
//! "Royal Canadian Air Force" is accurate (but not exact) for "Royal Canadian".

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::jsonl::JsonlError;
use crate::pipeline::{Question, RunRecord};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("consistency is undefined: the baseline answered nothing correctly")]
    EmptyBaseline,
    #[error(transparent)]
    File(#[from] JsonlError),
    #[error("{path}:{line}: not a run record or prediction: {reason}")]
    Prediction { path: String, line: usize, reason: String },
    #[error("duplicate prediction for question {0}")]
    DuplicatePrediction(String),
}

/// Lowercase, strip ASCII punctuation, drop the articles a/an/the, collapse
/// whitespace.
pub fn normalize_answer(s: &str) -> String {
    let lowered = s.to_lowercase();
    let no_punct: String = lowered.chars().filter(|c| !c.is_ascii_punctuation()).collect();
    no_punct
        .split_whitespace()
        .filter(|w| !matches!(*w, "a" | "an" | "the"))
        .collect::<Vec<_>>()
        .join(" ")
}

fn tokens(s: &str) -> Vec<String> {
    normalize_answer(s).split(' ').filter(|t| !t.is_empty()).map(String::from).collect()
}

pub fn exact_match(pred: &str, golds: &[String]) -> bool {
    let p = normalize_answer(pred);
    golds.iter().any(|g| normalize_answer(g) == p)
}

/// A gold that normalizes to nothing only matches an equally empty prediction.
pub fn accuracy(pred: &str, golds: &[String]) -> bool {
    let p = tokens(pred);
    golds.iter().any(|g| {
        let g = tokens(g);
        if g.is_empty() {
            return p.is_empty();
        }
        p.windows(g.len()).any(|w| w == g.as_slice())
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    pub question_id: String,
    pub answer: String,
    #[serde(default)]
    pub retrieval_calls: usize,
}

impl From<&RunRecord> for Prediction {
    fn from(r: &RunRecord) -> Self {
        Self {
            question_id: r.question_id.clone(),
            answer: r.final_answer.clone(),
            retrieval_calls: r.retrieval_calls,
        }
    }
}

/// Reads predictions from either run-record JSONL or the minimal
/// `{question_id, answer, retrieval_calls}` form; the two may be mixed.
pub fn load_predictions(path: &Path) -> Result<Vec<Prediction>, EvalError> {
    let values: Vec<serde_json::Value> = crate::jsonl::read(path)?;
    let mut seen = BTreeSet::new();
    let mut out = Vec::with_capacity(values.len());
    for (i, v) in values.into_iter().enumerate() {
        let err = |reason: String| EvalError::Prediction {
            path: path.display().to_string(),
            line: i + 1,
            reason,
        };
        let pred = if v.get("final_answer").is_some() {
            let r: RunRecord = serde_json::from_value(v).map_err(|e| err(e.to_string()))?;
            Prediction::from(&r)
        } else {
            serde_json::from_value(v).map_err(|e| err(e.to_string()))?
        };
        if !seen.insert(pred.question_id.clone()) {
            return Err(EvalError::DuplicatePrediction(pred.question_id));
        }
        out.push(pred);
    }
    Ok(out)
}

/// Fraction of `base_correct` that the method also answers accurately.
/// Questions without a prediction count as wrong.
pub fn consistency(
    base_correct: &BTreeSet<String>,
    predictions: &BTreeMap<String, String>,
    golds: &BTreeMap<String, Vec<String>>,
) -> Result<f64, EvalError> {
    if base_correct.is_empty() {
        return Err(EvalError::EmptyBaseline);
    }
    let kept = base_correct
        .iter()
        .filter(|id| match (predictions.get(*id), golds.get(*id)) {
            (Some(p), Some(g)) => accuracy(p, g),
            _ => false,
        })
        .count();
    Ok(kept as f64 / base_correct.len() as f64)
}

/// Ids the given predictions answer accurately.
pub fn correct_ids(
    predictions: &[Prediction],
    golds: &BTreeMap<String, Vec<String>>,
) -> BTreeSet<String> {
    predictions
        .iter()
        .filter(|p| golds.get(&p.question_id).is_some_and(|g| accuracy(&p.answer, g)))
        .map(|p| p.question_id.clone())
        .collect()
}

/// Share of queries with no, exactly one, and two or more retrieval calls.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StepRatio {
    pub no: f64,
    pub single: f64,
    pub multi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetrievalStats {
    pub total_calls: usize,
    pub step_ratio: StepRatio,
    pub empty: bool,
}

pub fn retrieval_stats(calls: &[usize]) -> RetrievalStats {
    let total_calls = calls.iter().sum();
    if calls.is_empty() {
        return RetrievalStats { total_calls, step_ratio: StepRatio::default(), empty: true };
    }
    let n = calls.len() as f64;
    let count = |f: fn(usize) -> bool| calls.iter().filter(|&&c| f(c)).count() as f64 / n;
    RetrievalStats {
        total_calls,
        step_ratio: StepRatio {
            no: count(|c| c == 0),
            single: count(|c| c == 1),
            multi: count(|c| c >= 2),
        },
        empty: false,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub count: usize,
    pub em: f64,
    pub acc: f64,
    pub total_retrieval_calls: usize,
    pub step_ratio: StepRatio,
    pub consistency: Option<f64>,
    pub empty: bool,
}

/// Scores predictions against gold aliases. Predictions for unknown
/// questions are ignored; questions without a prediction score zero for EM
/// and ACC and are left out of the step ratio.
pub fn score(predictions: &[Prediction], golds: &BTreeMap<String, Vec<String>>) -> MetricsReport {
    let by_id: BTreeMap<&str, &Prediction> =
        predictions.iter().map(|p| (p.question_id.as_str(), p)).collect();
    let mut em = 0usize;
    let mut acc = 0usize;
    for (id, g) in golds {
        if let Some(p) = by_id.get(id.as_str()) {
            em += usize::from(exact_match(&p.answer, g));
            acc += usize::from(accuracy(&p.answer, g));
        }
    }
    let calls: Vec<usize> = predictions
        .iter()
        .filter(|p| golds.contains_key(&p.question_id))
        .map(|p| p.retrieval_calls)
        .collect();
    let stats = retrieval_stats(&calls);
    let n = golds.len();
    let frac = |k: usize| if n == 0 { 0.0 } else { k as f64 / n as f64 };
    MetricsReport {
        count: n,
        em: frac(em),
        acc: frac(acc),
        total_retrieval_calls: stats.total_calls,
        step_ratio: stats.step_ratio,
        consistency: None,
        empty: n == 0,
    }
}

pub fn golds_from_questions(questions: &[Question]) -> BTreeMap<String, Vec<String>> {
    questions.iter().map(|q| (q.id.clone(), q.answers.clone())).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Tsv,
}

pub const TSV_HEADER: &str =
    "em\tacc\ttotal_retrieval_calls\tno_retrieval\tsingle_step\tmulti_step\tconsistency\tcount";

/// One TSV data row; rates are percentages with two decimals.
pub fn tsv_row(m: &MetricsReport) -> String {
    let pct = |v: f64| format!("{:.2}", v * 100.0);
    let consistency = m.consistency.map_or_else(|| "-".to_string(), pct);
    format!(
        "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
        pct(m.em),
        pct(m.acc),
        m.total_retrieval_calls,
        pct(m.step_ratio.no),
        pct(m.step_ratio.single),
        pct(m.step_ratio.multi),
        consistency,
        m.count
    )
}

pub fn emit_report(m: &MetricsReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => {
            let mut s = serde_json::to_string(m).expect("report serializes");
            s.push('\n');
            s
        }
        ReportFormat::Tsv => {
            let mut s = String::new();
            writeln!(s, "{TSV_HEADER}").unwrap();
            writeln!(s, "{}", tsv_row(m)).unwrap();
            s
        }
    }
}
