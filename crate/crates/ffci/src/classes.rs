//! Graph classes and their validity checks.
//!
//! `validate` reports every violated invariant of a requested class instead
//! of failing on the first one, so tests and the CLI can print a complete
//! diagnosis. The structural model used for simulation and oracle queries is
//! [`AugmentedDag`]: the causal DAG over observed, latent, and selection
//! vertices extended with one noise parent per observed/latent vertex and
//! one indicator vertex per interventional regime.

use crate::graph::{GraphError, Mark, MixedGraph, VertexId, VertexKind};
use crate::separation;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GraphClass {
    Dag,
    Mag,
    FPag,
    AugmentedDag,
}

/// Complete list of invariant violations; empty iff the graph is valid.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<String>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, v: impl Into<String>) {
        self.violations.push(v.into());
    }
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.is_valid() {
            write!(f, "valid")
        } else {
            for v in &self.violations {
                writeln!(f, "violation: {v}")?;
            }
            Ok(())
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ClassError {
    #[error("graph error: {0}")]
    Graph(#[from] GraphError),
    #[error("intervention target {0} is not an observed vertex")]
    InvalidTarget(VertexId),
    #[error("targets and kinds length mismatch: {targets} vs {kinds}")]
    TargetKindMismatch { targets: usize, kinds: usize },
    #[error("invalid {class:?}: {report}")]
    Invalid {
        class: GraphClass,
        report: ValidationReport,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InterventionKind {
    Hard,
    Soft,
}

/// Checks whether the directed part of `g` is acyclic (Kahn's algorithm).
pub fn directed_part_acyclic(g: &MixedGraph) -> bool {
    let n = g.n_vertices();
    let mut indeg = vec![0usize; n];
    for e in g.edges() {
        if e.mark_a == Mark::Tail && e.mark_b == Mark::Arrowhead && !e.triangle {
            indeg[e.b] += 1;
        } else if e.mark_a == Mark::Arrowhead && e.mark_b == Mark::Tail && !e.triangle {
            indeg[e.a] += 1;
        }
    }
    let mut queue: Vec<VertexId> = (0..n).filter(|&v| indeg[v] == 0).collect();
    let mut seen = 0;
    while let Some(v) = queue.pop() {
        seen += 1;
        for c in g.children(v) {
            indeg[c] -= 1;
            if indeg[c] == 0 {
                queue.push(c);
            }
        }
    }
    seen == n
}

/// Topological order of the directed part; `None` if cyclic.
pub fn topological_order(g: &MixedGraph) -> Option<Vec<VertexId>> {
    let n = g.n_vertices();
    let mut indeg: Vec<usize> = (0..n).map(|v| g.parents(v).len()).collect();
    let mut queue: BTreeSet<VertexId> = (0..n).filter(|&v| indeg[v] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(&v) = queue.iter().next() {
        queue.remove(&v);
        order.push(v);
        for c in g.children(v) {
            indeg[c] -= 1;
            if indeg[c] == 0 {
                queue.insert(c);
            }
        }
    }
    (order.len() == n).then_some(order)
}

fn validate_dag(g: &MixedGraph, report: &mut ValidationReport) {
    for e in g.edges() {
        let dir = (e.mark_a == Mark::Tail && e.mark_b == Mark::Arrowhead)
            || (e.mark_a == Mark::Arrowhead && e.mark_b == Mark::Tail);
        if !dir || e.triangle {
            report.push(format!(
                "non-directed edge {} {} in DAG",
                g.vertex(e.a).name,
                g.vertex(e.b).name
            ));
        }
    }
    if !directed_part_acyclic(g) {
        report.push("directed cycle");
    }
}

fn validate_mag(g: &MixedGraph, report: &mut ValidationReport) {
    for v in g.vertices() {
        if v.kind != VertexKind::Observed {
            report.push(format!("non-observed vertex {} in MAG", v.name));
        }
    }
    for e in g.edges() {
        if e.triangle
            || e.mark_a == Mark::Circle
            || e.mark_b == Mark::Circle
            || e.mark_a == Mark::Square
            || e.mark_b == Mark::Square
        {
            report.push(format!(
                "mark outside tail/arrowhead on edge {} {}",
                g.vertex(e.a).name,
                g.vertex(e.b).name
            ));
        }
    }
    if !directed_part_acyclic(g) {
        report.push("directed cycle");
    }
    // Almost-directed cycle: u <-> v with u an ancestor of v.
    for e in g.edges() {
        if e.mark_a == Mark::Arrowhead && e.mark_b == Mark::Arrowhead {
            let anc_a = separation::ancestors_of_set(g, &[e.a]);
            let anc_b = separation::ancestors_of_set(g, &[e.b]);
            if anc_b.contains(&e.a) || anc_a.contains(&e.b) {
                report.push(format!(
                    "almost directed cycle through {} <-> {}",
                    g.vertex(e.a).name,
                    g.vertex(e.b).name
                ));
            }
        }
    }
    for e in g.edges() {
        if e.mark_a == Mark::Tail && e.mark_b == Mark::Tail {
            for &v in &[e.a, e.b] {
                if !g.parents(v).is_empty() || !g.spouses(v).is_empty() {
                    report.push(format!(
                        "undirected endpoint has parent or spouse: {} on edge {} {}",
                        g.vertex(v).name,
                        g.vertex(e.a).name,
                        g.vertex(e.b).name
                    ));
                }
            }
        }
    }
    // Maximality: a non-adjacent pair with an inducing path (relative to
    // empty latent/selection sets, within the MAG itself) is not separable.
    let n = g.n_vertices();
    for i in 0..n {
        for j in i + 1..n {
            if !g.adjacent(i, j)
                && separation::mixed_inducing_path_exists(g, i, j, &BTreeSet::new(), &BTreeSet::new())
            {
                report.push(format!(
                    "not maximal: {} and {} cannot be m-separated",
                    g.vertex(i).name,
                    g.vertex(j).name
                ));
            }
        }
    }
}

fn fpag_edge_kind_allowed(mark_u: Mark, mark_v: Mark, triangle: bool) -> bool {
    use Mark::*;
    let pair = if mark_u <= mark_v {
        (mark_u, mark_v)
    } else {
        (mark_v, mark_u)
    };
    if triangle {
        matches!(pair, (Tail, Arrowhead) | (Tail, Tail))
    } else {
        matches!(
            pair,
            (Tail, Tail)
                | (Tail, Arrowhead)
                | (Arrowhead, Arrowhead)
                | (Tail, Square)
                | (Square, Square)
                | (Arrowhead, Square)
                | (Tail, Circle)
                | (Circle, Circle)
                | (Arrowhead, Circle)
        )
    }
}

fn validate_fpag(g: &MixedGraph, report: &mut ValidationReport) {
    for v in g.vertices() {
        if v.kind != VertexKind::Observed {
            report.push(format!("non-observed vertex {} in learned graph", v.name));
        }
    }
    for e in g.edges() {
        if !fpag_edge_kind_allowed(e.mark_a, e.mark_b, e.triangle) {
            report.push(format!(
                "edge kind not allowed: {} {:?}{}{:?} {}",
                g.vertex(e.a).name,
                e.mark_a,
                if e.triangle { " [triangle] " } else { " " },
                e.mark_b,
                g.vertex(e.b).name
            ));
        }
    }
}

fn validate_augmented_graph(g: &MixedGraph, report: &mut ValidationReport) {
    validate_dag(g, report);
    for v in g.vertices() {
        match v.kind {
            VertexKind::Indicator | VertexKind::Noise => {
                if !g.parents(v.id).is_empty() {
                    report.push(format!("exogenous vertex {} has a parent", v.name));
                }
            }
            VertexKind::Selection
                if !g.children(v.id).is_empty() => {
                    report.push(format!("selection vertex {} has outgoing edges", v.name));
                }
            _ => {}
        }
        if v.kind == VertexKind::Indicator {
            for c in g.children(v.id) {
                if g.kind(c) != VertexKind::Observed {
                    report.push(format!(
                        "indicator {} points to non-observed vertex {}",
                        v.name,
                        g.vertex(c).name
                    ));
                }
            }
        }
        if matches!(v.kind, VertexKind::Observed | VertexKind::Latent) {
            let noise_parents = g
                .parents(v.id)
                .into_iter()
                .filter(|&p| g.kind(p) == VertexKind::Noise)
                .count();
            if noise_parents != 1 {
                report.push(format!(
                    "vertex {} has {} noise parents, expected 1",
                    v.name, noise_parents
                ));
            }
        }
    }
}

/// Reports every violated invariant of the requested class.
pub fn validate(g: &MixedGraph, class: GraphClass) -> ValidationReport {
    let mut report = ValidationReport::default();
    match class {
        GraphClass::Dag => validate_dag(g, &mut report),
        GraphClass::Mag => validate_mag(g, &mut report),
        GraphClass::FPag => validate_fpag(g, &mut report),
        GraphClass::AugmentedDag => validate_augmented_graph(g, &mut report),
    }
    report
}

/// A validated acyclic directed graph (any vertex kinds).
#[derive(Debug, Clone, PartialEq)]
pub struct Dag {
    graph: MixedGraph,
}

impl Dag {
    pub fn new(graph: MixedGraph) -> Result<Self, ClassError> {
        let report = validate(&graph, GraphClass::Dag);
        if report.is_valid() {
            Ok(Self { graph })
        } else {
            Err(ClassError::Invalid {
                class: GraphClass::Dag,
                report,
            })
        }
    }

    pub fn graph(&self) -> &MixedGraph {
        &self.graph
    }

    pub fn into_graph(self) -> MixedGraph {
        self.graph
    }
}

/// A validated maximal ancestral graph over observed vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct Mag {
    graph: MixedGraph,
}

impl Mag {
    pub fn new(graph: MixedGraph) -> Result<Self, ClassError> {
        let report = validate(&graph, GraphClass::Mag);
        if report.is_valid() {
            Ok(Self { graph })
        } else {
            Err(ClassError::Invalid {
                class: GraphClass::Mag,
                report,
            })
        }
    }

    pub fn graph(&self) -> &MixedGraph {
        &self.graph
    }

    /// Unordered skeleton edges.
    pub fn skeleton(&self) -> BTreeSet<(VertexId, VertexId)> {
        self.graph.edges().map(|e| (e.a, e.b)).collect()
    }

    /// Unordered colliders (i, k, j), i < j, with i, j non-adjacent.
    pub fn v_structures(&self) -> BTreeSet<(VertexId, VertexId, VertexId)> {
        let mut out = BTreeSet::new();
        let n = self.graph.n_vertices();
        for k in 0..n {
            let nbrs = self.graph.neighbors(k);
            for (ai, &i) in nbrs.iter().enumerate() {
                for &j in nbrs.iter().skip(ai + 1) {
                    if self.graph.adjacent(i, j) {
                        continue;
                    }
                    let ei = self.graph.edge(i, k).unwrap();
                    let ej = self.graph.edge(j, k).unwrap();
                    if ei.mark_b == Mark::Arrowhead && ej.mark_b == Mark::Arrowhead {
                        out.insert((i.min(j), k, i.max(j)));
                    }
                }
            }
        }
        out
    }
}

/// Learned graph over observed vertices: four marks plus triangle flags.
#[derive(Debug, Clone, PartialEq)]
pub struct FPag {
    graph: MixedGraph,
}

impl FPag {
    /// Fully connected circle-circle graph, the skeleton-search start state.
    pub fn complete(names: &[String]) -> Self {
        let mut g = MixedGraph::with_names(VertexKind::Observed, names);
        let n = names.len();
        for i in 0..n {
            for j in i + 1..n {
                g.add_edge(i, j, Mark::Circle, Mark::Circle, false).unwrap();
            }
        }
        Self { graph: g }
    }

    pub fn from_graph(graph: MixedGraph) -> Result<Self, ClassError> {
        let report = validate(&graph, GraphClass::FPag);
        if report.is_valid() {
            Ok(Self { graph })
        } else {
            Err(ClassError::Invalid {
                class: GraphClass::FPag,
                report,
            })
        }
    }

    pub fn graph(&self) -> &MixedGraph {
        &self.graph
    }

    pub fn graph_mut(&mut self) -> &mut MixedGraph {
        &mut self.graph
    }

    pub fn validate(&self) -> ValidationReport {
        validate(&self.graph, GraphClass::FPag)
    }
}

/// Ground-truth structural model: causal DAG plus noise and indicator
/// vertices, with per-regime intervention targets and kinds.
///
/// Regime 0 is observational; regimes `1..=K` carry one indicator vertex
/// each, pointing at every member of the regime's target set. Hard-regime
/// edge removal is applied on the fly by [`crate::separation::mutilate`]
/// and by the sampler, never stored.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedDag {
    graph: MixedGraph,
    targets: Vec<BTreeSet<VertexId>>,
    kinds: Vec<InterventionKind>,
    psi: Vec<VertexId>,
    epsilon: BTreeMap<VertexId, VertexId>,
}

impl AugmentedDag {
    pub fn graph(&self) -> &MixedGraph {
        &self.graph
    }

    /// Target sets for regimes 1..=K (index 0 here is regime 1).
    pub fn targets(&self) -> &[BTreeSet<VertexId>] {
        &self.targets
    }

    pub fn kinds(&self) -> &[InterventionKind] {
        &self.kinds
    }

    /// Number of interventional regimes K.
    pub fn n_regimes(&self) -> usize {
        self.targets.len()
    }

    /// Indicator vertex of regime `k` (1-based).
    pub fn psi_of(&self, regime: usize) -> Option<VertexId> {
        (regime >= 1).then(|| self.psi.get(regime - 1).copied()).flatten()
    }

    pub fn kind_of(&self, regime: usize) -> Option<InterventionKind> {
        (regime >= 1).then(|| self.kinds.get(regime - 1).copied()).flatten()
    }

    pub fn target_of(&self, regime: usize) -> Option<&BTreeSet<VertexId>> {
        (regime >= 1).then(|| self.targets.get(regime - 1)).flatten()
    }

    pub fn noise_parent(&self, v: VertexId) -> Option<VertexId> {
        self.epsilon.get(&v).copied()
    }

    pub fn observed(&self) -> Vec<VertexId> {
        self.graph.ids_of_kind(VertexKind::Observed)
    }

    pub fn selection_vertices(&self) -> Vec<VertexId> {
        self.graph.ids_of_kind(VertexKind::Selection)
    }

    /// Union of all target sets.
    pub fn intervened(&self) -> BTreeSet<VertexId> {
        self.targets.iter().flatten().copied().collect()
    }

    /// Mutable graph access for regime mutilation. The result of edge
    /// removal no longer satisfies the full augmented-DAG invariants, so
    /// callers must not re-validate mutilated copies.
    pub(crate) fn graph_mut_unchecked(&mut self) -> &mut MixedGraph {
        &mut self.graph
    }

    pub fn validate(&self) -> ValidationReport {
        let mut report = validate(&self.graph, GraphClass::AugmentedDag);
        for (k, target) in self.targets.iter().enumerate() {
            let psi = self.psi[k];
            let children: BTreeSet<VertexId> = self.graph.children(psi).into_iter().collect();
            if &children != target {
                report.push(format!(
                    "indicator {} children {:?} differ from target {:?}",
                    self.graph.vertex(psi).name,
                    children,
                    target
                ));
            }
        }
        report
    }

    /// Rebuilds with the same base structure but different targets.
    pub fn with_targets(
        &self,
        targets: &[Vec<VertexId>],
        kinds: &[InterventionKind],
    ) -> Result<AugmentedDag, ClassError> {
        let base = self.base_dag();
        augment(&Dag::new(base)?, targets, kinds)
    }

    /// The causal DAG over observed/latent/selection vertices, with noise and
    /// indicator vertices stripped.
    pub fn base_dag(&self) -> MixedGraph {
        let keep: Vec<VertexId> = self
            .graph
            .vertices()
            .iter()
            .filter(|v| {
                matches!(
                    v.kind,
                    VertexKind::Observed | VertexKind::Latent | VertexKind::Selection
                )
            })
            .map(|v| v.id)
            .collect();
        project(&self.graph, &keep)
    }
}

/// Keeps only `keep` vertices (reindexed in the given order) and edges among them.
fn project(g: &MixedGraph, keep: &[VertexId]) -> MixedGraph {
    let mut index = BTreeMap::new();
    for (new_id, &old) in keep.iter().enumerate() {
        index.insert(old, new_id);
    }
    let vertices = keep
        .iter()
        .enumerate()
        .map(|(new_id, &old)| crate::graph::Vertex {
            id: new_id,
            kind: g.kind(old),
            name: g.vertex(old).name.clone(),
        })
        .collect();
    let mut out = MixedGraph::new(vertices).expect("contiguous ids");
    for e in g.edges() {
        if let (Some(&a), Some(&b)) = (index.get(&e.a), index.get(&e.b)) {
            out.add_edge(a, b, e.mark_a, e.mark_b, e.triangle).unwrap();
        }
    }
    out
}

/// Projects a graph onto its observed vertices, dropping incident edges.
pub fn restrict_to_observed(g: &MixedGraph) -> MixedGraph {
    let keep = g.ids_of_kind(VertexKind::Observed);
    project(g, &keep)
}

/// Extends a causal DAG over observed/latent/selection vertices with noise
/// parents and one indicator vertex per target set.
pub fn augment(
    dag: &Dag,
    targets: &[Vec<VertexId>],
    kinds: &[InterventionKind],
) -> Result<AugmentedDag, ClassError> {
    if targets.len() != kinds.len() {
        return Err(ClassError::TargetKindMismatch {
            targets: targets.len(),
            kinds: kinds.len(),
        });
    }
    let mut graph = dag.graph().clone();
    for target in targets {
        for &t in target {
            if t >= graph.n_vertices() {
                return Err(ClassError::Graph(GraphError::UnknownVertex(t)));
            }
            if graph.kind(t) != VertexKind::Observed {
                return Err(ClassError::InvalidTarget(t));
            }
        }
    }
    let mut epsilon = BTreeMap::new();
    let base_ids: Vec<VertexId> = graph
        .vertices()
        .iter()
        .filter(|v| matches!(v.kind, VertexKind::Observed | VertexKind::Latent))
        .map(|v| v.id)
        .collect();
    for v in base_ids {
        let name = format!("eps_{}", graph.vertex(v).name);
        let e = graph.add_vertex(VertexKind::Noise, name);
        graph.add_directed(e, v).map_err(ClassError::Graph)?;
        epsilon.insert(v, e);
    }
    let mut psi = Vec::with_capacity(targets.len());
    for (k, target) in targets.iter().enumerate() {
        let p = graph.add_vertex(VertexKind::Indicator, format!("psi{}", k + 1));
        let mut seen = BTreeSet::new();
        for &t in target {
            if seen.insert(t) {
                graph.add_directed(p, t).map_err(ClassError::Graph)?;
            }
        }
        psi.push(p);
    }
    let aug = AugmentedDag {
        graph,
        targets: targets
            .iter()
            .map(|t| t.iter().copied().collect())
            .collect(),
        kinds: kinds.to_vec(),
        psi,
        epsilon,
    };
    let report = aug.validate();
    if !report.is_valid() {
        return Err(ClassError::Invalid {
            class: GraphClass::AugmentedDag,
            report,
        });
    }
    Ok(aug)
}
