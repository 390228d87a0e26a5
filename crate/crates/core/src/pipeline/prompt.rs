//! Few-shot chain-of-thought prompt layout shared with generation servers.
//!
//! A template is plain text with three placeholders: `{shots}`, `{passages}`
//! and `{question}`. `{passages}` expands to nothing when no documents are
//! attached, which yields the direct-QA variant of the same prompt.

use std::fmt::Write as _;
use std::path::Path;

use super::protocol::FewShot;
use crate::jsonl::{self, JsonlError};
use crate::retrieval::Document;

pub const DEFAULT_TEMPLATE: &str = include_str!("../../assets/prompt_template.txt");
const DEFAULT_SHOTS: &str = include_str!("../../assets/shots.jsonl");

/// The four built-in exemplars.
pub fn default_shots() -> Vec<FewShot> {
    DEFAULT_SHOTS
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).expect("bundled shots parse"))
        .collect()
}

pub fn load_shots(path: &Path) -> Result<Vec<FewShot>, JsonlError> {
    jsonl::read(path)
}

pub fn render_shots(shots: &[FewShot]) -> String {
    let mut out = String::new();
    for s in shots {
        writeln!(out, "Question: {}", s.question).unwrap();
        writeln!(out, "Rationale: {}", s.rationale).unwrap();
        writeln!(out, "Answer: {}", s.answer).unwrap();
        out.push('\n');
    }
    out
}

pub fn render_passages(passages: &[Document]) -> String {
    if passages.is_empty() {
        return String::new();
    }
    let mut out = String::from("Passages:\n");
    for d in passages {
        if d.title.is_empty() {
            writeln!(out, "{}", d.text).unwrap();
        } else {
            writeln!(out, "{}: {}", d.title, d.text).unwrap();
        }
    }
    out.push('\n');
    out
}

pub fn render_prompt(
    template: &str,
    shots: &[FewShot],
    passages: &[Document],
    question: &str,
) -> String {
    template
        .replace("{shots}", &render_shots(shots))
        .replace("{passages}", &render_passages(passages))
        .replace("{question}", question)
}
