//! Evaluation of learned graphs against ground truth: directed-edge
//! precision/recall/F1, structural Hamming distance over pair classes, and
//! selection-detection accuracy over intervened pairs.

use crate::classes::{AugmentedDag, FPag};
use crate::graph::{Mark, MixedGraph, VertexId};
use crate::separation::inducing_paths;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("variable sets differ: {0:?} vs {1:?}")]
    VariableMismatch(Vec<String>, Vec<String>),
}

/// Pair class used for the Hamming distance. Triangle-tagged edges assert
/// the absence of a direct link, so they land in `NoEdge`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairClass {
    NoEdge,
    Forward,
    Backward,
    Other,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EdgeJudgment {
    pub a: String,
    pub b: String,
    pub predicted: PairClass,
    pub truth: PairClass,
    /// Causal claim backed by a circle mark rather than a tail/square.
    pub circle_backed: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsReport {
    pub dag_precision: f64,
    pub dag_recall: f64,
    pub dag_f1: f64,
    pub dag_shd: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub selection_accuracy: Option<f64>,
    pub edges: Vec<EdgeJudgment>,
}

fn predicted_class(g: &MixedGraph, i: VertexId, j: VertexId) -> (PairClass, bool) {
    match g.edge(i, j) {
        None => (PairClass::NoEdge, false),
        Some(e) => {
            if e.triangle {
                return (PairClass::NoEdge, false);
            }
            let fwd = e.mark_b == Mark::Arrowhead && e.mark_a != Mark::Arrowhead;
            let bwd = e.mark_a == Mark::Arrowhead && e.mark_b != Mark::Arrowhead;
            if fwd {
                (PairClass::Forward, e.mark_a == Mark::Circle)
            } else if bwd {
                (PairClass::Backward, e.mark_b == Mark::Circle)
            } else {
                (PairClass::Other, false)
            }
        }
    }
}

fn truth_class(truth: &MixedGraph, i: VertexId, j: VertexId) -> PairClass {
    match truth.edge(i, j) {
        None => PairClass::NoEdge,
        Some(e) => {
            if e.mark_a == Mark::Tail && e.mark_b == Mark::Arrowhead {
                PairClass::Forward
            } else if e.mark_a == Mark::Arrowhead && e.mark_b == Mark::Tail {
                PairClass::Backward
            } else {
                PairClass::Other
            }
        }
    }
}

/// Compares a learned graph to the true DAG over the observed variables.
/// A predicted causal edge is an arrowhead at one end with a non-arrowhead
/// mark at the other and no triangle tag; circle-backed claims count at
/// full weight and are flagged in the per-edge detail.
pub fn dag_metrics(predicted: &FPag, truth: &MixedGraph) -> Result<MetricsReport, MetricsError> {
    let pg = predicted.graph();
    let p_names: Vec<String> = pg.vertices().iter().map(|v| v.name.clone()).collect();
    let t_names: Vec<String> = truth.vertices().iter().map(|v| v.name.clone()).collect();
    if p_names != t_names {
        return Err(MetricsError::VariableMismatch(p_names, t_names));
    }
    let n = pg.n_vertices();
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut truth_edges = 0usize;
    let mut shd = 0usize;
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let (pred, circle_backed) = predicted_class(pg, i, j);
            let tru = truth_class(truth, i, j);
            if matches!(tru, PairClass::Forward | PairClass::Backward) {
                truth_edges += 1;
            }
            match pred {
                PairClass::Forward | PairClass::Backward => {
                    if pred == tru {
                        tp += 1;
                    } else {
                        fp += 1;
                    }
                }
                _ => {}
            }
            if pred != tru {
                shd += 1;
            }
            if pred != PairClass::NoEdge || tru != PairClass::NoEdge {
                edges.push(EdgeJudgment {
                    a: p_names[i].clone(),
                    b: p_names[j].clone(),
                    predicted: pred,
                    truth: tru,
                    circle_backed,
                });
            }
        }
    }
    // No claims means no false claims; abstention is scored against recall.
    let dag_precision = if tp + fp == 0 {
        1.0
    } else {
        tp as f64 / (tp + fp) as f64
    };
    let dag_recall = if truth_edges == 0 {
        1.0
    } else {
        tp as f64 / truth_edges as f64
    };
    let dag_f1 = if dag_precision + dag_recall == 0.0 {
        0.0
    } else {
        2.0 * dag_precision * dag_recall / (dag_precision + dag_recall)
    };
    Ok(MetricsReport {
        dag_precision,
        dag_recall,
        dag_f1,
        dag_shd: shd,
        selection_accuracy: None,
        edges,
    })
}

/// True iff the observed pair shares a selection child or is joined by an
/// inducing path with tails at both ends.
pub fn truth_pair_selected(truth: &AugmentedDag, vi: VertexId, vj: VertexId) -> bool {
    let g = truth.graph();
    for s in truth.selection_vertices() {
        let parents = g.parents(s);
        if parents.contains(&vi) && parents.contains(&vj) {
            return true;
        }
    }
    inducing_paths(truth, vi, vj)
        .iter()
        .any(|p| p.start_mark == Mark::Tail && p.end_mark == Mark::Tail)
}

fn predicted_pair_selected(g: &MixedGraph, i: VertexId, j: VertexId) -> bool {
    match g.edge(i, j) {
        None => false,
        Some(e) => matches!(
            (e.mark_a, e.mark_b),
            (Mark::Tail, Mark::Tail)
                | (Mark::Tail, Mark::Square)
                | (Mark::Square, Mark::Tail)
                | (Mark::Square, Mark::Square)
        ),
    }
}

/// Fraction of intervened pairs whose selection status is classified
/// correctly. Returns 1.0 when no pair is intervened.
pub fn selection_accuracy(predicted: &FPag, truth: &AugmentedDag) -> Result<f64, MetricsError> {
    let pg = predicted.graph();
    let observed = truth.observed();
    let p_names: Vec<String> = pg.vertices().iter().map(|v| v.name.clone()).collect();
    let t_names: Vec<String> = observed
        .iter()
        .map(|&v| truth.graph().vertex(v).name.clone())
        .collect();
    if p_names != t_names {
        return Err(MetricsError::VariableMismatch(p_names, t_names));
    }
    let intervened: BTreeSet<VertexId> = truth.intervened();
    let positions: Vec<(usize, VertexId)> = observed
        .iter()
        .enumerate()
        .filter(|(_, v)| intervened.contains(v))
        .map(|(i, &v)| (i, v))
        .collect();
    let mut total = 0usize;
    let mut correct = 0usize;
    for (ai, &(pi, vi)) in positions.iter().enumerate() {
        for &(pj, vj) in positions.iter().skip(ai + 1) {
            total += 1;
            let truth_sel = truth_pair_selected(truth, vi, vj);
            let pred_sel = predicted_pair_selected(pg, pi, pj);
            if truth_sel == pred_sel {
                correct += 1;
            }
        }
    }
    Ok(if total == 0 {
        1.0
    } else {
        correct as f64 / total as f64
    })
}
