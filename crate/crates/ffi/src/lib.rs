//! C ABI over the probe-rag index, prober ensemble and answer metrics.
//!
//! Handles are opaque and owned by the caller once returned; release each one
//! with its `*_free` function. Every fallible call returns a [`PragStatus`]
//! and, on failure, stores a message readable through [`prag_last_error`] on
//! the same thread. No call unwinds across the boundary.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use probe_rag::jsonl::JsonlError;
use probe_rag::probe::{self, ProbeError, ProberEnsemble};
use probe_rag::retrieval::{self, CorpusIndex, RetrievalError};
use probe_rag::eval;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PragStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Io = 3,
    Data = 4,
    Dimension = 5,
    OutOfRange = 6,
    Panic = 7,
}

/// BM25 index over a document corpus.
pub struct PragIndex(CorpusIndex);

/// Ranked search hits; ids stay valid until the results are freed.
pub struct PragResults {
    ids: Vec<CString>,
    scores: Vec<f64>,
}

/// Per-layer prober ensemble with its decision threshold.
pub struct PragEnsemble(ProberEnsemble);

/// Soft-vote outcome of [`prag_ensemble_decide`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PragDecision {
    pub sum_call: f64,
    pub sum_pass: f64,
    pub theta: f64,
    pub retrieve: bool,
}

struct Failure(PragStatus, String);

impl From<RetrievalError> for Failure {
    fn from(e: RetrievalError) -> Self {
        let status = match &e {
            RetrievalError::Corpus(JsonlError::Open { .. } | JsonlError::Io { .. }) => PragStatus::Io,
            _ => PragStatus::Data,
        };
        Failure(status, e.to_string())
    }
}

impl From<ProbeError> for Failure {
    fn from(e: ProbeError) -> Self {
        let status = match &e {
            ProbeError::Io { .. } => PragStatus::Io,
            ProbeError::Dimension(_) | ProbeError::MissingLayer(_) => PragStatus::Dimension,
            _ => PragStatus::Data,
        };
        Failure(status, e.to_string())
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> PragStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PragStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_last_error(message);
            status
        }
        Err(_) => {
            set_last_error("internal panic".into());
            PragStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(PragStatus::NullPointer, format!("{what} is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| Failure(PragStatus::InvalidUtf8, format!("{what}: {e}")))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn strings_arg(p: *const *const c_char, n: usize, what: &str) -> Result<Vec<String>, Failure> {
    if n == 0 {
        return Ok(Vec::new());
    }
    if p.is_null() {
        return Err(null(what));
    }
    std::slice::from_raw_parts(p, n)
        .iter()
        .map(|&s| str_arg(s, what).map(str::to_owned))
        .collect()
}

/// Message of the last failed call on this thread, or null if none. Valid
/// until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn prag_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn prag_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Builds an index from a corpus JSONL file (`id`, `title`, `text` per line).
#[no_mangle]
pub unsafe extern "C" fn prag_index_build(
    corpus_path: *const c_char,
    k1: f64,
    b: f64,
    out: *mut *mut PragIndex,
) -> PragStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let path = str_arg(corpus_path, "corpus_path")?;
        let corpus = retrieval::load_corpus(Path::new(path))?;
        let index = CorpusIndex::build(corpus, k1, b)?;
        *out = Box::into_raw(Box::new(PragIndex(index)));
        Ok(())
    })
}

/// Loads an index file written by [`prag_index_save`] or `probe-rag index`.
#[no_mangle]
pub unsafe extern "C" fn prag_index_load(path: *const c_char, out: *mut *mut PragIndex) -> PragStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let index = CorpusIndex::load(Path::new(str_arg(path, "path")?))?;
        *out = Box::into_raw(Box::new(PragIndex(index)));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn prag_index_save(index: *const PragIndex, path: *const c_char) -> PragStatus {
    guard(|| {
        let index = index.as_ref().ok_or_else(|| null("index"))?;
        index.0.save(Path::new(str_arg(path, "path")?))?;
        Ok(())
    })
}

/// Number of indexed documents; 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn prag_index_doc_count(index: *const PragIndex) -> usize {
    index.as_ref().map_or(0, |i| i.0.doc_count())
}

#[no_mangle]
pub unsafe extern "C" fn prag_index_free(index: *mut PragIndex) {
    if !index.is_null() {
        drop(Box::from_raw(index));
    }
}

/// Top-`j` documents for `query`, best first.
#[no_mangle]
pub unsafe extern "C" fn prag_index_search(
    index: *const PragIndex,
    query: *const c_char,
    j: usize,
    out: *mut *mut PragResults,
) -> PragStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let index = index.as_ref().ok_or_else(|| null("index"))?;
        let hits = index.0.search(str_arg(query, "query")?, j);
        let results = PragResults {
            ids: hits
                .iter()
                .map(|h| CString::new(h.doc.id.replace('\0', " ")).expect("nul bytes removed"))
                .collect(),
            scores: hits.iter().map(|h| h.score).collect(),
        };
        *out = Box::into_raw(Box::new(results));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn prag_results_len(results: *const PragResults) -> usize {
    results.as_ref().map_or(0, |r| r.ids.len())
}

/// Document id of hit `i`, or null when out of range.
#[no_mangle]
pub unsafe extern "C" fn prag_results_id(results: *const PragResults, i: usize) -> *const c_char {
    results
        .as_ref()
        .and_then(|r| r.ids.get(i))
        .map_or(ptr::null(), |c| c.as_ptr())
}

/// BM25 score of hit `i`, or NaN when out of range.
#[no_mangle]
pub unsafe extern "C" fn prag_results_score(results: *const PragResults, i: usize) -> f64 {
    results
        .as_ref()
        .and_then(|r| r.scores.get(i).copied())
        .unwrap_or(f64::NAN)
}

#[no_mangle]
pub unsafe extern "C" fn prag_results_free(results: *mut PragResults) {
    if !results.is_null() {
        drop(Box::from_raw(results));
    }
}

/// Loads an ensemble manifest and its per-layer checkpoints.
#[no_mangle]
pub unsafe extern "C" fn prag_ensemble_load(path: *const c_char, out: *mut *mut PragEnsemble) -> PragStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let ensemble = probe::load_ensemble(Path::new(str_arg(path, "path")?))?;
        *out = Box::into_raw(Box::new(PragEnsemble(ensemble)));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn prag_ensemble_free(ensemble: *mut PragEnsemble) {
    if !ensemble.is_null() {
        drop(Box::from_raw(ensemble));
    }
}

#[no_mangle]
pub unsafe extern "C" fn prag_ensemble_layer_count(ensemble: *const PragEnsemble) -> usize {
    ensemble.as_ref().map_or(0, |e| e.0.layers().len())
}

/// Copies the ascending layer indices into `layers` (capacity `cap`).
#[no_mangle]
pub unsafe extern "C" fn prag_ensemble_layers(
    ensemble: *const PragEnsemble,
    layers: *mut u32,
    cap: usize,
) -> PragStatus {
    guard(|| {
        let ensemble = ensemble.as_ref().ok_or_else(|| null("ensemble"))?;
        let wanted = ensemble.0.layers();
        if cap < wanted.len() {
            return Err(Failure(
                PragStatus::OutOfRange,
                format!("need room for {} layers, got {cap}", wanted.len()),
            ));
        }
        if layers.is_null() {
            return Err(null("layers"));
        }
        std::slice::from_raw_parts_mut(layers, wanted.len()).copy_from_slice(&wanted);
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn prag_ensemble_d_model(ensemble: *const PragEnsemble) -> usize {
    ensemble.as_ref().map_or(0, |e| e.0.d_model())
}

#[no_mangle]
pub unsafe extern "C" fn prag_ensemble_theta(ensemble: *const PragEnsemble) -> f64 {
    ensemble.as_ref().map_or(f64::NAN, |e| e.0.theta)
}

#[no_mangle]
pub unsafe extern "C" fn prag_ensemble_set_theta(ensemble: *mut PragEnsemble, theta: f64) -> PragStatus {
    guard(|| {
        let ensemble = ensemble.as_mut().ok_or_else(|| null("ensemble"))?;
        ensemble.0.theta = theta;
        Ok(())
    })
}

/// Decides on pooled features laid out as `layer_count x d_model` row-major,
/// rows in ascending layer order. `len` must equal that product.
#[no_mangle]
pub unsafe extern "C" fn prag_ensemble_decide(
    ensemble: *const PragEnsemble,
    pooled: *const f64,
    len: usize,
    out: *mut PragDecision,
) -> PragStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let ensemble = ensemble.as_ref().ok_or_else(|| null("ensemble"))?;
        let layers = ensemble.0.layers();
        let d = ensemble.0.d_model();
        if len != layers.len() * d {
            return Err(Failure(
                PragStatus::Dimension,
                format!("expected {} x {d} = {} values, got {len}", layers.len(), layers.len() * d),
            ));
        }
        if pooled.is_null() {
            return Err(null("pooled"));
        }
        let values = std::slice::from_raw_parts(pooled, len);
        let by_layer: BTreeMap<u32, Vec<f64>> =
            layers.iter().zip(values.chunks(d)).map(|(&l, row)| (l, row.to_vec())).collect();
        let decision = ensemble.0.decide(&by_layer)?;
        *out = PragDecision {
            sum_call: decision.sum_call,
            sum_pass: decision.sum_pass,
            theta: decision.theta,
            retrieve: decision.retrieve,
        };
        Ok(())
    })
}

/// Mean-pools a `tokens x d_model` row-major matrix and standardizes the
/// result into `out` (length `d_model`).
#[no_mangle]
pub unsafe extern "C" fn prag_pool_hidden_states(
    states: *const f64,
    tokens: usize,
    d_model: usize,
    out: *mut f64,
) -> PragStatus {
    guard(|| {
        if tokens == 0 || d_model == 0 {
            return Err(Failure(PragStatus::Dimension, "empty hidden-state matrix".into()));
        }
        if states.is_null() {
            return Err(null("states"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let len = tokens.checked_mul(d_model).ok_or_else(|| {
            Failure(PragStatus::Dimension, "matrix size overflows".into())
        })?;
        let rows: Vec<&[f64]> = std::slice::from_raw_parts(states, len).chunks(d_model).collect();
        let pooled = probe::pool_hidden_states(&rows)?;
        std::slice::from_raw_parts_mut(out, d_model).copy_from_slice(&pooled);
        Ok(())
    })
}

/// Whether the normalized prediction equals any normalized gold answer.
#[no_mangle]
pub unsafe extern "C" fn prag_exact_match(
    prediction: *const c_char,
    golds: *const *const c_char,
    n_golds: usize,
    out: *mut bool,
) -> PragStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let golds = strings_arg(golds, n_golds, "golds")?;
        *out = eval::exact_match(str_arg(prediction, "prediction")?, &golds);
        Ok(())
    })
}

/// Whether any normalized gold answer occurs as a token span of the
/// normalized prediction.
#[no_mangle]
pub unsafe extern "C" fn prag_accuracy(
    prediction: *const c_char,
    golds: *const *const c_char,
    n_golds: usize,
    out: *mut bool,
) -> PragStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let golds = strings_arg(golds, n_golds, "golds")?;
        *out = eval::accuracy(str_arg(prediction, "prediction")?, &golds);
        Ok(())
    })
}
