//! Replayable discovery trace: one record per issued CI query and per rule
//! application, serialized as JSON lines.

use crate::graph::Mark;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryKind {
    ObservationalCi,
    IndicatorCi,
    IndicatorDoCi,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TraceRecord {
    Query {
        kind: QueryKind,
        regime: usize,
        lhs: String,
        rhs: String,
        cond: Vec<String>,
        independent: bool,
    },
    EdgeRemoved {
        a: String,
        b: String,
        sepset: Vec<String>,
    },
    Orientation {
        rule: String,
        a: String,
        b: String,
        mark_a: Mark,
        mark_b: Mark,
        triangle: bool,
    },
    Conflict {
        rule: String,
        a: String,
        b: String,
        detail: String,
    },
    Note {
        event: String,
        a: String,
        b: String,
        detail: String,
    },
}

impl TraceRecord {
    /// Variable names mentioned by this record, for pair filtering.
    pub fn mentions(&self) -> Vec<&str> {
        match self {
            TraceRecord::Query { lhs, rhs, .. } => vec![lhs.as_str(), rhs.as_str()],
            TraceRecord::EdgeRemoved { a, b, .. }
            | TraceRecord::Orientation { a, b, .. }
            | TraceRecord::Conflict { a, b, .. }
            | TraceRecord::Note { a, b, .. } => vec![a.as_str(), b.as_str()],
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trace {
    pub records: Vec<TraceRecord>,
}

impl Trace {
    pub fn push(&mut self, r: TraceRecord) {
        self.records.push(r);
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("trace record serializes"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(s: &str) -> Result<Self, serde_json::Error> {
        let mut records = Vec::new();
        for line in s.lines() {
            if line.trim().is_empty() {
                continue;
            }
            records.push(serde_json::from_str(line)?);
        }
        Ok(Self { records })
    }
}
