//! Line-delimited record formats for datasets and embedding sidecars.

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::kernel::{DataInstance, Embedding, StopWords};

/// One line of `dataset.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceRecord {
    pub id: String,
    pub text: String,
    pub explorer_id: String,
    pub iteration: u32,
    pub marginal_gain: f64,
    pub method: String,
}

/// One line of `embeddings.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbeddingRecord {
    pub id: String,
    pub embedding: Embedding,
}

impl InstanceRecord {
    pub fn from_instance(item: &DataInstance, method: &str) -> Self {
        Self {
            id: item.id.clone(),
            text: item.text.clone(),
            explorer_id: item.explorer_id.clone(),
            iteration: item.iteration,
            marginal_gain: item.marginal_gain,
            method: method.to_string(),
        }
    }

    pub fn into_instance(self, embedding: Embedding, stopwords: &StopWords) -> DataInstance {
        let mut item = DataInstance::new(self.id, self.text, embedding, stopwords);
        item.explorer_id = self.explorer_id;
        item.iteration = self.iteration;
        item.marginal_gain = self.marginal_gain;
        item
    }
}

/// Serializes records one per line, with a trailing newline.
pub fn to_jsonl<T: Serialize>(records: &[T]) -> String {
    let mut out = String::new();
    for r in records {
        let line = serde_json::to_string(r).expect("records serialize");
        let _ = writeln!(out, "{line}");
    }
    out
}

pub fn dataset_jsonl(items: &[DataInstance], method: &str) -> String {
    let records: Vec<_> = items.iter().map(|i| InstanceRecord::from_instance(i, method)).collect();
    to_jsonl(&records)
}

pub fn embeddings_jsonl(items: &[DataInstance]) -> String {
    let records: Vec<_> =
        items.iter().map(|i| EmbeddingRecord { id: i.id.clone(), embedding: i.embedding.clone() }).collect();
    to_jsonl(&records)
}

/// A line that failed to parse (1-based line number).
#[derive(Debug, Clone, PartialEq)]
pub struct LineError {
    pub line: usize,
    pub message: String,
}

/// Parses every non-blank line; malformed lines are collected, not fatal.
pub fn parse_jsonl<T: for<'de> Deserialize<'de>>(text: &str) -> (Vec<T>, Vec<LineError>) {
    let mut ok = Vec::new();
    let mut errors = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(line) {
            Ok(v) => ok.push(v),
            Err(e) => errors.push(LineError { line: i + 1, message: e.to_string() }),
        }
    }
    (ok, errors)
}

pub fn embeddings_by_id(records: Vec<EmbeddingRecord>) -> HashMap<String, Embedding> {
    records.into_iter().map(|r| (r.id, r.embedding)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let sw = StopWords::english();
        let mut a = DataInstance::new("d1", "The red ball", Embedding::new(vec![3.0, 4.0]).unwrap(), &sw);
        a.explorer_id = "e0".into();
        a.iteration = 2;
        a.marginal_gain = 0.5;
        let text = dataset_jsonl(std::slice::from_ref(&a), "engine");
        assert_eq!(
            text,
            "{\"id\":\"d1\",\"text\":\"The red ball\",\"explorer_id\":\"e0\",\"iteration\":2,\"marginal_gain\":0.5,\"method\":\"engine\"}\n"
        );
        let (recs, errs) = parse_jsonl::<InstanceRecord>(&text);
        assert!(errs.is_empty());
        let (embs, _) = parse_jsonl::<EmbeddingRecord>(&embeddings_jsonl(&[a.clone()]));
        let map = embeddings_by_id(embs);
        let back = recs.into_iter().next().unwrap().into_instance(map["d1"].clone(), &sw);
        assert_eq!(back, a);
    }

    #[test]
    fn malformed_lines_reported() {
        let (ok, errs) = parse_jsonl::<EmbeddingRecord>("{\"id\":\"a\",\"embedding\":[1]}\n\nnot json\n{\"id\":\"b\",\"embedding\":[0]}\n");
        assert_eq!(ok.len(), 1);
        assert_eq!(errs.iter().map(|e| e.line).collect::<Vec<_>>(), vec![3, 4]);
    }
}
