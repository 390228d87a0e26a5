//! Okapi BM25 retrieval over a document corpus.
//!
//! The persisted index is a single JSON object:
//! `{"format": "probe-rag-bm25", "version": 1, "k1", "b", "documents",
//! "postings", "doc_lengths", "avg_doc_len"}`. Postings refer to documents by
//! their position in `documents`. Maps are ordered so rebuilding the same
//! corpus produces byte-identical files.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::jsonl::{self, JsonlError};

pub const DEFAULT_K1: f64 = 1.2;
pub const DEFAULT_B: f64 = 0.75;
/// Passages per retrieval step.
pub const DEFAULT_TOP_J: usize = 5;

const INDEX_FORMAT: &str = "probe-rag-bm25";
const INDEX_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum RetrievalError {
    #[error("duplicate document id {0:?}")]
    DuplicateId(String),
    #[error("empty document id at corpus position {0}")]
    EmptyId(usize),
    #[error("invalid BM25 parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Corpus(#[from] JsonlError),
    #[error("index file {path}: {reason}")]
    IndexFile { path: String, reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    #[serde(default)]
    pub title: String,
    pub text: String,
}

impl Document {
    pub fn new(id: impl Into<String>, title: impl Into<String>, text: impl Into<String>) -> Self {
        Self { id: id.into(), title: title.into(), text: text.into() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredDocument {
    pub doc: Document,
    pub score: f64,
}

/// Lowercases and splits on anything that is not alphanumeric.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Posting {
    pub doc: u32,
    pub tf: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusIndex {
    format: String,
    version: u32,
    k1: f64,
    b: f64,
    documents: Vec<Document>,
    postings: BTreeMap<String, Vec<Posting>>,
    doc_lengths: Vec<u32>,
    avg_doc_len: f64,
}

impl CorpusIndex {
    /// Indexes each document's `text`. Documents keep their corpus order.
    pub fn build(corpus: Vec<Document>, k1: f64, b: f64) -> Result<Self, RetrievalError> {
        if !(k1 > 0.0 && k1.is_finite()) {
            return Err(RetrievalError::InvalidParams(format!("k1 must be > 0, got {k1}")));
        }
        if !(0.0..=1.0).contains(&b) {
            return Err(RetrievalError::InvalidParams(format!("b must be in [0, 1], got {b}")));
        }
        let mut seen = HashSet::new();
        for (i, d) in corpus.iter().enumerate() {
            if d.id.is_empty() {
                return Err(RetrievalError::EmptyId(i));
            }
            if !seen.insert(d.id.as_str()) {
                return Err(RetrievalError::DuplicateId(d.id.clone()));
            }
        }

        let mut postings: BTreeMap<String, Vec<Posting>> = BTreeMap::new();
        let mut doc_lengths = Vec::with_capacity(corpus.len());
        for (ordinal, d) in corpus.iter().enumerate() {
            let tokens = tokenize(&d.text);
            doc_lengths.push(tokens.len() as u32);
            let mut tf: BTreeMap<String, u32> = BTreeMap::new();
            for t in tokens {
                *tf.entry(t).or_default() += 1;
            }
            for (term, tf) in tf {
                postings.entry(term).or_default().push(Posting { doc: ordinal as u32, tf });
            }
        }
        let avg_doc_len = if doc_lengths.is_empty() {
            0.0
        } else {
            doc_lengths.iter().map(|&l| f64::from(l)).sum::<f64>() / doc_lengths.len() as f64
        };

        Ok(Self {
            format: INDEX_FORMAT.into(),
            version: INDEX_VERSION,
            k1,
            b,
            documents: corpus,
            postings,
            doc_lengths,
            avg_doc_len,
        })
    }

    pub fn doc_count(&self) -> usize {
        self.documents.len()
    }

    pub fn avg_doc_len(&self) -> f64 {
        self.avg_doc_len
    }

    pub fn k1(&self) -> f64 {
        self.k1
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn document(&self, id: &str) -> Option<&Document> {
        self.documents.iter().find(|d| d.id == id)
    }

    /// Token count of a document, by id.
    pub fn doc_length(&self, id: &str) -> Option<u32> {
        let i = self.documents.iter().position(|d| d.id == id)?;
        Some(self.doc_lengths[i])
    }

    /// Number of documents containing `term`.
    pub fn doc_freq(&self, term: &str) -> usize {
        self.postings.get(term).map_or(0, Vec::len)
    }

    pub fn idf(&self, term: &str) -> f64 {
        let n = self.doc_count() as f64;
        let df = self.doc_freq(term) as f64;
        ((n - df + 0.5) / (df + 0.5) + 1.0).ln()
    }

    /// Top-`j` documents by BM25, ties broken by ascending id. Zero-score
    /// documents are never returned. Repeated query terms count repeatedly.
    pub fn search(&self, query: &str, j: usize) -> Vec<ScoredDocument> {
        if j == 0 || self.documents.is_empty() {
            return Vec::new();
        }
        let mut scores = vec![0.0f64; self.documents.len()];
        for term in tokenize(query) {
            let Some(list) = self.postings.get(&term) else {
                continue;
            };
            let idf = self.idf(&term);
            for p in list {
                let tf = f64::from(p.tf);
                let len_ratio = f64::from(self.doc_lengths[p.doc as usize]) / self.avg_doc_len;
                let denom = tf + self.k1 * (1.0 - self.b + self.b * len_ratio);
                scores[p.doc as usize] += idf * tf * (self.k1 + 1.0) / denom;
            }
        }

        let mut hits: Vec<(usize, f64)> =
            scores.into_iter().enumerate().filter(|&(_, s)| s > 0.0).collect();
        hits.sort_by(|a, b| {
            b.1.partial_cmp(&a.1)
                .unwrap_or(Ordering::Equal)
                .then_with(|| self.documents[a.0].id.cmp(&self.documents[b.0].id))
        });
        hits.truncate(j);
        hits.into_iter()
            .map(|(i, score)| ScoredDocument { doc: self.documents[i].clone(), score })
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("index serializes")
    }

    pub fn save(&self, path: &Path) -> Result<(), RetrievalError> {
        fs::write(path, self.to_json()).map_err(|e| RetrievalError::IndexFile {
            path: path.display().to_string(),
            reason: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self, RetrievalError> {
        let err = |reason: String| RetrievalError::IndexFile {
            path: path.display().to_string(),
            reason,
        };
        let text = fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
        let index: Self = serde_json::from_str(&text).map_err(|e| err(e.to_string()))?;
        if index.format != INDEX_FORMAT || index.version != INDEX_VERSION {
            return Err(err(format!(
                "unsupported format {} v{}",
                index.format, index.version
            )));
        }
        if index.doc_lengths.len() != index.documents.len()
            || index
                .postings
                .values()
                .flatten()
                .any(|p| p.doc as usize >= index.documents.len())
        {
            return Err(err("postings reference unknown documents".into()));
        }
        Ok(index)
    }
}

pub fn load_corpus(path: &Path) -> Result<Vec<Document>, RetrievalError> {
    Ok(jsonl::read(path)?)
}
