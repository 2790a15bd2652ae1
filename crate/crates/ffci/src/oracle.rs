//! Ground-truth engines: oracle conditional-independence answers, MAG
//! construction from an augmented DAG, and equivalence checking.
//!
//! Every oracle query conditions on the full selection set, mirroring data
//! that is always sample-filtered. Indicator queries run on the intact
//! graph; the indicator is just another exogenous parent there, which is
//! what pooled observational/interventional data measures.

use crate::classes::{AugmentedDag, ClassError, Mag};
use crate::graph::{Mark, MixedGraph, VertexId, VertexKind};
use crate::separation::{
    ancestors_of_set, d_separated, mixed_inducing_path_exists, mutilate, SeparationError,
};
use itertools::Itertools;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("separation: {0}")]
    Separation(#[from] SeparationError),
    #[error("class: {0}")]
    Class(#[from] ClassError),
    #[error("vertex {0} is not observed")]
    NonObserved(VertexId),
    #[error("invalid regime {0}")]
    BadRegime(usize),
    #[error("graphs have different intervention targets")]
    TargetMismatch,
    #[error("graphs have different observed variables")]
    ObservedMismatch,
}

/// Left side of a conditional-independence query: either a regime indicator
/// or a set of observed variables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum QueryLhs {
    Psi(usize),
    Vars(BTreeSet<VertexId>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CiQuery {
    pub lhs: QueryLhs,
    pub rhs: BTreeSet<VertexId>,
    pub cond: BTreeSet<VertexId>,
}

impl CiQuery {
    pub fn vars(
        lhs: impl IntoIterator<Item = VertexId>,
        rhs: impl IntoIterator<Item = VertexId>,
        cond: impl IntoIterator<Item = VertexId>,
    ) -> Self {
        Self {
            lhs: QueryLhs::Vars(lhs.into_iter().collect()),
            rhs: rhs.into_iter().collect(),
            cond: cond.into_iter().collect(),
        }
    }

    pub fn psi(
        regime: usize,
        rhs: impl IntoIterator<Item = VertexId>,
        cond: impl IntoIterator<Item = VertexId>,
    ) -> Self {
        Self {
            lhs: QueryLhs::Psi(regime),
            rhs: rhs.into_iter().collect(),
            cond: cond.into_iter().collect(),
        }
    }
}

fn check_observed(g: &AugmentedDag, ids: &BTreeSet<VertexId>) -> Result<(), OracleError> {
    for &v in ids {
        if v >= g.graph().n_vertices() {
            return Err(OracleError::Separation(SeparationError::UnknownVertex(v)));
        }
        if g.graph().kind(v) != VertexKind::Observed {
            return Err(OracleError::NonObserved(v));
        }
    }
    Ok(())
}

/// Answers a query by d-separation on the intact augmented graph with all
/// selection vertices appended to the conditioning set. True = independent.
pub fn oracle_ci(g: &AugmentedDag, q: &CiQuery) -> Result<bool, OracleError> {
    check_observed(g, &q.rhs)?;
    check_observed(g, &q.cond)?;
    let lhs: BTreeSet<VertexId> = match &q.lhs {
        QueryLhs::Psi(k) => {
            let psi = g.psi_of(*k).ok_or(OracleError::BadRegime(*k))?;
            [psi].into_iter().collect()
        }
        QueryLhs::Vars(vars) => {
            check_observed(g, vars)?;
            vars.clone()
        }
    };
    let mut z = q.cond.clone();
    z.extend(g.selection_vertices());
    Ok(d_separated(g.graph(), &lhs, &q.rhs, &z)?)
}

/// Marginal invariance of `x` under regime `k` evaluated on the mutilated
/// graph: true iff severing the regime's targets from their parents leaves
/// no active route from the indicator to `x` given selection.
///
/// This is the refinement query of the discovery engine. On the intact
/// graph an indicator attached to an ancestrally selected collider is
/// d-connected to everything downstream of the selection filter, so the
/// intact reading cannot distinguish a path-induced edge from a direct one;
/// the severed reading can.
pub fn oracle_psi_do_ci(g: &AugmentedDag, regime: usize, x: VertexId) -> Result<bool, OracleError> {
    check_observed(g, &[x].into_iter().collect())?;
    let cut = mutilate(g, regime)?;
    let psi = cut.psi_of(regime).ok_or(OracleError::BadRegime(regime))?;
    let a: BTreeSet<VertexId> = [psi].into_iter().collect();
    let b: BTreeSet<VertexId> = [x].into_iter().collect();
    let z: BTreeSet<VertexId> = cut.selection_vertices().into_iter().collect();
    Ok(d_separated(cut.graph(), &a, &b, &z)?)
}

/// Constructs the maximal ancestral graph over the observed variables:
/// adjacency iff an inducing path exists; a mark is a tail iff the vertex is
/// an ancestor of the far endpoint or of a selection vertex, else an
/// arrowhead.
pub fn mag_of(g: &AugmentedDag) -> Result<Mag, OracleError> {
    let graph = g.graph();
    let observed = g.observed();
    let latent: BTreeSet<VertexId> = graph.ids_of_kind(VertexKind::Latent).into_iter().collect();
    let selection: BTreeSet<VertexId> = graph
        .ids_of_kind(VertexKind::Selection)
        .into_iter()
        .collect();
    let sel_seeds: Vec<VertexId> = selection.iter().copied().collect();
    let anc_sel = ancestors_of_set(graph, &sel_seeds);
    let anc_of: BTreeMap<VertexId, BTreeSet<VertexId>> = observed
        .iter()
        .map(|&v| (v, ancestors_of_set(graph, &[v])))
        .collect();

    let vertices = observed
        .iter()
        .enumerate()
        .map(|(pos, &v)| crate::graph::Vertex {
            id: pos,
            kind: VertexKind::Observed,
            name: graph.vertex(v).name.clone(),
        })
        .collect();
    let mut mag = MixedGraph::new(vertices).expect("contiguous ids");
    for (pi, &vi) in observed.iter().enumerate() {
        for (pj, &vj) in observed.iter().enumerate().skip(pi + 1) {
            if !mixed_inducing_path_exists(graph, vi, vj, &latent, &selection) {
                continue;
            }
            let tail_i = anc_of[&vj].contains(&vi) || anc_sel.contains(&vi);
            let tail_j = anc_of[&vi].contains(&vj) || anc_sel.contains(&vj);
            let mark = |tail: bool| if tail { Mark::Tail } else { Mark::Arrowhead };
            mag.add_edge(pi, pj, mark(tail_i), mark(tail_j), false)
                .expect("fresh edge");
        }
    }
    Ok(Mag::new(mag)?)
}

/// First structural difference backing a negative equivalence verdict.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Witness {
    SkeletonEdge {
        pair: (usize, usize),
        present_in_first: bool,
    },
    VStructure {
        triple: (usize, usize, usize),
        present_in_first: bool,
    },
    /// A conditional-independence pattern between a regime indicator and an
    /// intervened variable that holds in one model but not the other.
    IndicatorPattern {
        regime: usize,
        target: usize,
        cond: Vec<usize>,
        independent_in_first: bool,
    },
}

/// Inducing-path endpoint classes for a pair, encoded as marks with
/// `Square` standing for "both tails and arrowheads occur".
pub fn endpoint_classes(g: &AugmentedDag, vi: VertexId, vj: VertexId) -> Option<(Mark, Mark)> {
    let paths = crate::separation::inducing_paths(g, vi, vj);
    if paths.is_empty() {
        return None;
    }
    let class = |tail: bool, head: bool| match (tail, head) {
        (true, true) => Mark::Square,
        (true, false) => Mark::Tail,
        (false, true) => Mark::Arrowhead,
        (false, false) => unreachable!("path has some start mark"),
    };
    let tail_i = paths.iter().any(|p| p.start_mark == Mark::Tail);
    let head_i = paths.iter().any(|p| p.start_mark == Mark::Arrowhead);
    let tail_j = paths.iter().any(|p| p.end_mark == Mark::Tail);
    let head_j = paths.iter().any(|p| p.end_mark == Mark::Arrowhead);
    Some((class(tail_i, head_i), class(tail_j, head_j)))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EquivalenceCertificate {
    pub verdict: bool,
    pub witness: Option<Witness>,
}

fn observed_positions(g: &AugmentedDag) -> BTreeMap<VertexId, usize> {
    g.observed()
        .into_iter()
        .enumerate()
        .map(|(pos, v)| (v, pos))
        .collect()
}

/// Checks whether two ground-truth models with the same targets entail the
/// same learnable structure: equal MAG skeletons and v-structures, and equal
/// marks on every edge whose endpoints are both intervened.
pub fn fi_markov_equivalent(
    g1: &AugmentedDag,
    g2: &AugmentedDag,
) -> Result<EquivalenceCertificate, OracleError> {
    let pos1 = observed_positions(g1);
    let pos2 = observed_positions(g2);
    if pos1.len() != pos2.len() {
        return Err(OracleError::ObservedMismatch);
    }
    let tgt1: Vec<BTreeSet<usize>> = g1
        .targets()
        .iter()
        .map(|t| t.iter().map(|v| pos1[v]).collect())
        .collect();
    let tgt2: Vec<BTreeSet<usize>> = g2
        .targets()
        .iter()
        .map(|t| t.iter().map(|v| pos2[v]).collect())
        .collect();
    if tgt1 != tgt2 {
        return Err(OracleError::TargetMismatch);
    }

    let m1 = mag_of(g1)?;
    let m2 = mag_of(g2)?;

    let sk1 = m1.skeleton();
    let sk2 = m2.skeleton();
    if sk1 != sk2 {
        let diff = sk1
            .symmetric_difference(&sk2)
            .min()
            .copied()
            .expect("nonempty difference");
        return Ok(EquivalenceCertificate {
            verdict: false,
            witness: Some(Witness::SkeletonEdge {
                pair: diff,
                present_in_first: sk1.contains(&diff),
            }),
        });
    }

    let vs1 = m1.v_structures();
    let vs2 = m2.v_structures();
    if vs1 != vs2 {
        let diff = vs1
            .symmetric_difference(&vs2)
            .min()
            .copied()
            .expect("nonempty difference");
        return Ok(EquivalenceCertificate {
            verdict: false,
            witness: Some(Witness::VStructure {
                triple: diff,
                present_in_first: vs1.contains(&diff),
            }),
        });
    }

    // Indicator patterns over the intervened variables must coincide for
    // every conditioning set. MAG marks and even inducing-path endpoint
    // classes are the wrong granularity here: an ancestrally selected
    // vertex with an incoming arrowhead hides the presence of a direct
    // link from every conditional-independence query, so two models that
    // differ only in such a link entail identical patterns and must be
    // declared equivalent.
    let obs1 = g1.observed();
    let obs2 = g2.observed();
    let n = obs1.len();
    let intervened: BTreeSet<usize> = tgt1.iter().flatten().copied().collect();
    let all_positions: Vec<usize> = (0..n).collect();
    for regime in 1..=g1.n_regimes() {
        for &x in &intervened {
            let others: Vec<usize> = all_positions
                .iter()
                .copied()
                .filter(|&v| v != x)
                .collect();
            for size in 0..=others.len() {
                for cond in others.iter().copied().combinations(size) {
                    let q1 = CiQuery::psi(regime, [obs1[x]], cond.iter().map(|&c| obs1[c]));
                    let q2 = CiQuery::psi(regime, [obs2[x]], cond.iter().map(|&c| obs2[c]));
                    let r1 = oracle_ci(g1, &q1)?;
                    let r2 = oracle_ci(g2, &q2)?;
                    if r1 != r2 {
                        return Ok(EquivalenceCertificate {
                            verdict: false,
                            witness: Some(Witness::IndicatorPattern {
                                regime,
                                target: x,
                                cond,
                                independent_in_first: r1,
                            }),
                        });
                    }
                }
            }
        }
    }

    Ok(EquivalenceCertificate {
        verdict: true,
        witness: None,
    })
}
