//! Graph-separation primitives: ancestry, path blocking, inducing paths,
//! and on-the-fly regime mutilation.
//!
//! d-separation and m-separation share one reachability engine over mixed
//! graphs. A walk state is (vertex, mark it was entered through); a vertex
//! passes as a collider iff both incident path marks at it are arrowheads
//! and it is an ancestor of the conditioning set, and as a non-collider iff
//! it is outside the conditioning set.

use crate::classes::{AugmentedDag, InterventionKind};
use crate::graph::{Mark, MixedGraph, VertexId, VertexKind};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeSet, VecDeque};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SeparationError {
    #[error("unknown vertex id {0}")]
    UnknownVertex(VertexId),
    #[error("query sets overlap on vertex {0}")]
    OverlappingSets(VertexId),
    #[error("invalid regime {0}")]
    BadRegime(usize),
}

fn check_sets(
    g: &MixedGraph,
    a: &BTreeSet<VertexId>,
    b: &BTreeSet<VertexId>,
    z: &BTreeSet<VertexId>,
) -> Result<(), SeparationError> {
    for &v in a.iter().chain(b).chain(z) {
        if v >= g.n_vertices() {
            return Err(SeparationError::UnknownVertex(v));
        }
    }
    for &v in a {
        if b.contains(&v) || z.contains(&v) {
            return Err(SeparationError::OverlappingSets(v));
        }
    }
    for &v in b {
        if z.contains(&v) {
            return Err(SeparationError::OverlappingSets(v));
        }
    }
    Ok(())
}

/// Reflexive ancestors of `seeds` over plain directed edges.
pub fn ancestors_of_set(g: &MixedGraph, seeds: &[VertexId]) -> BTreeSet<VertexId> {
    let mut out: BTreeSet<VertexId> = seeds.iter().copied().collect();
    let mut stack: Vec<VertexId> = seeds.to_vec();
    while let Some(v) = stack.pop() {
        for p in g.parents(v) {
            if out.insert(p) {
                stack.push(p);
            }
        }
    }
    out
}

/// Reflexive ancestors of a single vertex; errors on unknown ids.
pub fn ancestors(g: &MixedGraph, v: VertexId) -> Result<BTreeSet<VertexId>, SeparationError> {
    if v >= g.n_vertices() {
        return Err(SeparationError::UnknownVertex(v));
    }
    Ok(ancestors_of_set(g, &[v]))
}

/// Reflexive descendants over plain directed edges.
pub fn descendants_of_set(g: &MixedGraph, seeds: &[VertexId]) -> BTreeSet<VertexId> {
    let mut out: BTreeSet<VertexId> = seeds.iter().copied().collect();
    let mut stack: Vec<VertexId> = seeds.to_vec();
    while let Some(v) = stack.pop() {
        for c in g.children(v) {
            if out.insert(c) {
                stack.push(c);
            }
        }
    }
    out
}

/// m-connection reachability over a mixed graph. Returns true iff some path
/// from `a` to `b` is active given `z`.
fn connected(g: &MixedGraph, a: &BTreeSet<VertexId>, b: &BTreeSet<VertexId>, z: &BTreeSet<VertexId>) -> bool {
    let anc_z = {
        let seeds: Vec<VertexId> = z.iter().copied().collect();
        ancestors_of_set(g, &seeds)
    };
    // State: (vertex, entered through an arrowhead at that vertex?).
    let mut visited = vec![[false; 2]; g.n_vertices()];
    let mut queue: VecDeque<(VertexId, bool)> = VecDeque::new();
    for &s in a {
        for e in g.incident(s) {
            let into_head = e.mark_b == Mark::Arrowhead;
            if b.contains(&e.b) {
                return true;
            }
            if !visited[e.b][into_head as usize] {
                visited[e.b][into_head as usize] = true;
                queue.push_back((e.b, into_head));
            }
        }
    }
    while let Some((w, entered_head)) = queue.pop_front() {
        for e in g.incident(w) {
            let leaves_head = e.mark_a == Mark::Arrowhead;
            let collider = entered_head && leaves_head;
            let passes = if collider {
                anc_z.contains(&w)
            } else {
                !z.contains(&w)
            };
            if !passes {
                continue;
            }
            let into_head = e.mark_b == Mark::Arrowhead;
            if b.contains(&e.b) {
                return true;
            }
            if !visited[e.b][into_head as usize] {
                visited[e.b][into_head as usize] = true;
                queue.push_back((e.b, into_head));
            }
        }
    }
    false
}

/// Path-blocking separation over any mixed graph (shared by d- and
/// m-separation). Errors if the three sets overlap or name unknown vertices.
pub fn separated(
    g: &MixedGraph,
    a: &BTreeSet<VertexId>,
    b: &BTreeSet<VertexId>,
    z: &BTreeSet<VertexId>,
) -> Result<bool, SeparationError> {
    check_sets(g, a, b, z)?;
    Ok(!connected(g, a, b, z))
}

/// d-separation in a directed graph.
pub fn d_separated(
    g: &MixedGraph,
    a: &BTreeSet<VertexId>,
    b: &BTreeSet<VertexId>,
    z: &BTreeSet<VertexId>,
) -> Result<bool, SeparationError> {
    separated(g, a, b, z)
}

/// m-separation in a mixed ancestral graph.
///
/// Reachability follows walks, which coincide with paths on ancestral
/// graphs (every graph this crate produces). On a non-ancestral mixed
/// graph a walk can m-connect where no single path does, so callers must
/// not feed arbitrary mark soups here.
pub fn m_separated(
    g: &MixedGraph,
    a: &BTreeSet<VertexId>,
    b: &BTreeSet<VertexId>,
    z: &BTreeSet<VertexId>,
) -> Result<bool, SeparationError> {
    separated(g, a, b, z)
}

/// A simple path whose interior is latent vertices and colliders ancestral
/// to an endpoint or a selection vertex; such a path cannot be blocked by
/// conditioning on observed variables.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InducingPath {
    /// Vertex sequence from the first endpoint to the second.
    pub vertices: Vec<VertexId>,
    /// Mark at the first endpoint on the first edge.
    pub start_mark: Mark,
    /// Mark at the second endpoint on the last edge.
    pub end_mark: Mark,
}

struct PathSearch<'a> {
    g: &'a MixedGraph,
    target: VertexId,
    latent: &'a BTreeSet<VertexId>,
    collider_anchors: BTreeSet<VertexId>,
    on_path: Vec<bool>,
    path: Vec<VertexId>,
    found: Vec<InducingPath>,
    stop_at_first: bool,
}

impl<'a> PathSearch<'a> {
    fn interior_ok(&self, w: VertexId, mark_in: Mark, mark_out: Mark) -> bool {
        let collider = mark_in == Mark::Arrowhead && mark_out == Mark::Arrowhead;
        if collider {
            self.collider_anchors.contains(&w)
        } else {
            self.latent.contains(&w)
        }
    }

    fn dfs(&mut self, w: VertexId, mark_in_at_w: Mark) {
        if self.stop_at_first && !self.found.is_empty() {
            return;
        }
        for e in self.g.incident(w) {
            let next = e.b;
            // Validate w as an interior vertex unless it is the source.
            if self.path.len() >= 2 && !self.interior_ok(w, mark_in_at_w, e.mark_a) {
                continue;
            }
            if next == self.target {
                let mut vertices = self.path.clone();
                vertices.push(next);
                let start_mark = self.g.edge(vertices[0], vertices[1]).unwrap().mark_a;
                self.found.push(InducingPath {
                    vertices,
                    start_mark,
                    end_mark: e.mark_b,
                });
                if self.stop_at_first {
                    return;
                }
                continue;
            }
            if self.on_path[next] {
                continue;
            }
            // `next` can only serve as an interior vertex if it is latent or
            // entered through an arrowhead while anchored as a collider.
            let could_be_latent = self.latent.contains(&next);
            let could_be_collider =
                e.mark_b == Mark::Arrowhead && self.collider_anchors.contains(&next);
            if !(could_be_latent || could_be_collider) {
                continue;
            }
            self.on_path[next] = true;
            self.path.push(next);
            self.dfs(next, e.mark_b);
            self.path.pop();
            self.on_path[next] = false;
        }
    }
}

fn inducing_search(
    g: &MixedGraph,
    i: VertexId,
    j: VertexId,
    latent: &BTreeSet<VertexId>,
    selection: &BTreeSet<VertexId>,
    stop_at_first: bool,
) -> Vec<InducingPath> {
    let mut anchor_seeds: Vec<VertexId> = vec![i, j];
    anchor_seeds.extend(selection.iter().copied());
    let collider_anchors = ancestors_of_set(g, &anchor_seeds);
    let mut search = PathSearch {
        g,
        target: j,
        latent,
        collider_anchors,
        on_path: vec![false; g.n_vertices()],
        path: vec![i],
        found: Vec::new(),
        stop_at_first,
    };
    search.on_path[i] = true;
    search.dfs(i, Mark::Tail);
    search.found
}

/// True iff an inducing path exists between `i` and `j` relative to the given
/// latent and selection sets.
pub fn mixed_inducing_path_exists(
    g: &MixedGraph,
    i: VertexId,
    j: VertexId,
    latent: &BTreeSet<VertexId>,
    selection: &BTreeSet<VertexId>,
) -> bool {
    !inducing_search(g, i, j, latent, selection, true).is_empty()
}

/// All simple inducing paths between two observed vertices of an augmented
/// DAG, relative to its latent and selection vertices. Exponential in the
/// worst case; ground-truth graphs are desk-scale.
pub fn inducing_paths(g: &AugmentedDag, i: VertexId, j: VertexId) -> Vec<InducingPath> {
    let graph = g.graph();
    let latent: BTreeSet<VertexId> = graph.ids_of_kind(VertexKind::Latent).into_iter().collect();
    let selection: BTreeSet<VertexId> = graph
        .ids_of_kind(VertexKind::Selection)
        .into_iter()
        .collect();
    inducing_search(graph, i, j, &latent, &selection, false)
}

/// Checks the inducing-path conditions by direct traversal of a candidate
/// path; used to cross-validate search results.
pub fn is_inducing_path(
    g: &MixedGraph,
    path: &[VertexId],
    latent: &BTreeSet<VertexId>,
    selection: &BTreeSet<VertexId>,
) -> bool {
    if path.len() < 2 {
        return false;
    }
    for w in path.windows(2) {
        if !g.adjacent(w[0], w[1]) {
            return false;
        }
    }
    let i = path[0];
    let j = *path.last().unwrap();
    let mut anchor_seeds = vec![i, j];
    anchor_seeds.extend(selection.iter().copied());
    let anchors = ancestors_of_set(g, &anchor_seeds);
    for idx in 1..path.len() - 1 {
        let w = path[idx];
        let mark_in = g.edge(path[idx - 1], w).unwrap().mark_b;
        let mark_out = g.edge(w, path[idx + 1]).unwrap().mark_a;
        let collider = mark_in == Mark::Arrowhead && mark_out == Mark::Arrowhead;
        if collider {
            if !anchors.contains(&w) {
                return false;
            }
        } else if !latent.contains(&w) {
            return false;
        }
    }
    true
}

/// Applies regime `k`'s intervention structurally. Hard regimes lose every
/// non-indicator incoming edge on each target; soft regimes and regime 0
/// return the graph unchanged.
pub fn mutilate(g: &AugmentedDag, regime: usize) -> Result<AugmentedDag, SeparationError> {
    if regime == 0 {
        return Ok(g.clone());
    }
    let kind = g
        .kind_of(regime)
        .ok_or(SeparationError::BadRegime(regime))?;
    if kind == InterventionKind::Soft {
        return Ok(g.clone());
    }
    let mut out = g.clone();
    let targets: Vec<VertexId> = g.target_of(regime).unwrap().iter().copied().collect();
    for t in targets {
        let parents = out.graph().parents(t);
        for p in parents {
            if out.graph().kind(p) != VertexKind::Indicator {
                out.graph_mut_unchecked().remove_edge(p, t).unwrap();
            }
        }
    }
    Ok(out)
}
