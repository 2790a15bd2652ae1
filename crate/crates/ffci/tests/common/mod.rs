//! Shared test support: fixture builders, an independent brute-force
//! separation oracle, and random graph generators.
//!
//! The brute-force oracle enumerates every simple path and applies the
//! blocking rules directly; it shares no code with the reachability engine
//! it is used to check.

#![allow(dead_code)]

use ffci::classes::{augment, AugmentedDag, Dag, InterventionKind};
use ffci::graph::{Mark, MixedGraph, VertexId, VertexKind};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeSet;

/// Builds a ground-truth model: an observed-variable DAG plus latent
/// vertices (each with a list of children) and selection vertices (each
/// with a list of parents), augmented with the given singleton-or-set
/// targets, all hard.
pub fn build_fixture(
    n_obs: usize,
    edges: &[(usize, usize)],
    latent_children: &[&[usize]],
    selection_parents: &[&[usize]],
    targets: &[Vec<usize>],
) -> AugmentedDag {
    let mut g = MixedGraph::observed(n_obs);
    for &(a, b) in edges {
        g.add_directed(a, b).unwrap();
    }
    for (i, children) in latent_children.iter().enumerate() {
        let l = g.add_vertex(VertexKind::Latent, format!("L{}", i + 1));
        for &c in *children {
            g.add_directed(l, c).unwrap();
        }
    }
    for (i, parents) in selection_parents.iter().enumerate() {
        let s = g.add_vertex(VertexKind::Selection, format!("S{}", i + 1));
        for &p in *parents {
            g.add_directed(p, s).unwrap();
        }
    }
    let kinds = vec![InterventionKind::Hard; targets.len()];
    augment(&Dag::new(g).unwrap(), targets, &kinds).unwrap()
}

pub fn singleton_targets(n: usize) -> Vec<Vec<usize>> {
    (0..n).map(|v| vec![v]).collect()
}

// ---------------------------------------------------------------------------
// Canonical two-variable structures behind the six orientation rows.
// ---------------------------------------------------------------------------

pub fn fixture_direct_cause() -> AugmentedDag {
    build_fixture(2, &[(0, 1)], &[], &[], &singleton_targets(2))
}

pub fn fixture_latent_confounder() -> AugmentedDag {
    build_fixture(2, &[], &[&[0, 1]], &[], &singleton_targets(2))
}

pub fn fixture_latent_plus_cause() -> AugmentedDag {
    build_fixture(2, &[(0, 1)], &[&[0, 1]], &[], &singleton_targets(2))
}

pub fn fixture_direct_selection() -> AugmentedDag {
    build_fixture(2, &[], &[], &[&[0, 1]], &singleton_targets(2))
}

pub fn fixture_cause_child_selected() -> AugmentedDag {
    build_fixture(2, &[(0, 1)], &[], &[&[1]], &singleton_targets(2))
}

pub fn fixture_latent_double_selection() -> AugmentedDag {
    build_fixture(2, &[], &[&[0, 1]], &[&[0, 1]], &singleton_targets(2))
}

pub fn six_canonical_fixtures() -> Vec<(&'static str, AugmentedDag)> {
    vec![
        ("direct_cause", fixture_direct_cause()),
        ("latent_confounder", fixture_latent_confounder()),
        ("latent_plus_cause", fixture_latent_plus_cause()),
        ("direct_selection", fixture_direct_selection()),
        ("cause_child_selected", fixture_cause_child_selected()),
        ("latent_double_selection", fixture_latent_double_selection()),
    ]
}

// ---------------------------------------------------------------------------
// Three-variable disambiguation fixtures: a path-induced apparent cause
// (with and without the true direct link) and a path-induced apparent
// co-selection (against true direct co-selection).
// ---------------------------------------------------------------------------

/// True direct cause X1 -> X2 coexisting with the inducing path
/// X1 -> X3 <- L -> X2, X3 -> S <- X1.
pub fn fixture_cause_with_path() -> AugmentedDag {
    build_fixture(
        3,
        &[(0, 1), (0, 2)],
        &[&[2, 1]],
        &[&[2, 0]],
        &singleton_targets(3),
    )
}

/// Same structure without the direct link: the X1 -> X2 dependence is
/// carried entirely by the inducing path through X3.
pub fn fixture_path_only_cause() -> AugmentedDag {
    build_fixture(3, &[(0, 2)], &[&[2, 1]], &[&[2, 0]], &singleton_targets(3))
}

/// Plain direct co-selection X1 -> S <- X2 with an unconnected X3.
pub fn fixture_direct_coselection() -> AugmentedDag {
    build_fixture(3, &[], &[], &[&[0, 1]], &singleton_targets(3))
}

/// Apparent co-selection carried by the collider path X1 -> X3 <- X2 with
/// X3 -> S: no shared selection child.
pub fn fixture_path_only_selection() -> AugmentedDag {
    build_fixture(3, &[(0, 2), (1, 2)], &[], &[&[2]], &singleton_targets(3))
}

/// Direct co-selection of all three plus the collider path: the middle
/// node's severed-regime query stays dependent, so no upgrade applies.
pub fn fixture_coselection_with_path() -> AugmentedDag {
    build_fixture(
        3,
        &[(0, 2), (1, 2)],
        &[],
        &[&[2, 0, 1]],
        &singleton_targets(3),
    )
}

// ---------------------------------------------------------------------------
// Brute-force separation oracle.
// ---------------------------------------------------------------------------

fn brute_ancestors(g: &MixedGraph, seeds: &BTreeSet<VertexId>) -> BTreeSet<VertexId> {
    let mut out = seeds.clone();
    loop {
        let mut grew = false;
        for e in g.edges() {
            // directed u -> v when tail at u, arrowhead at v
            let (from, to) = if e.mark_a == Mark::Tail && e.mark_b == Mark::Arrowhead && !e.triangle
            {
                (e.a, e.b)
            } else if e.mark_a == Mark::Arrowhead && e.mark_b == Mark::Tail && !e.triangle {
                (e.b, e.a)
            } else {
                continue;
            };
            if out.contains(&to) && out.insert(from) {
                grew = true;
            }
        }
        if !grew {
            return out;
        }
    }
}

fn path_active(g: &MixedGraph, path: &[VertexId], z: &BTreeSet<VertexId>) -> bool {
    let anc_z = brute_ancestors(g, z);
    for idx in 1..path.len() - 1 {
        let w = path[idx];
        let mark_in = g.edge(path[idx - 1], w).unwrap().mark_b;
        let mark_out = g.edge(w, path[idx + 1]).unwrap().mark_a;
        let collider = mark_in == Mark::Arrowhead && mark_out == Mark::Arrowhead;
        if collider {
            if !anc_z.contains(&w) {
                return false;
            }
        } else if z.contains(&w) {
            return false;
        }
    }
    true
}

fn all_simple_paths(g: &MixedGraph, a: VertexId, b: VertexId) -> Vec<Vec<VertexId>> {
    let mut out = Vec::new();
    let mut path = vec![a];
    let mut on_path = vec![false; g.n_vertices()];
    on_path[a] = true;
    fn dfs(
        g: &MixedGraph,
        b: VertexId,
        path: &mut Vec<VertexId>,
        on_path: &mut Vec<bool>,
        out: &mut Vec<Vec<VertexId>>,
    ) {
        let cur = *path.last().unwrap();
        for next in g.neighbors(cur) {
            if next == b {
                let mut p = path.clone();
                p.push(b);
                out.push(p);
                continue;
            }
            if on_path[next] {
                continue;
            }
            on_path[next] = true;
            path.push(next);
            dfs(g, b, path, on_path, out);
            path.pop();
            on_path[next] = false;
        }
    }
    dfs(g, b, &mut path, &mut on_path, &mut out);
    out
}

/// Exhaustive-path separation check: separated iff no simple path is active.
pub fn brute_separated(
    g: &MixedGraph,
    a: &BTreeSet<VertexId>,
    b: &BTreeSet<VertexId>,
    z: &BTreeSet<VertexId>,
) -> bool {
    for &s in a {
        for &t in b {
            for path in all_simple_paths(g, s, t) {
                if path.len() == 2 || path_active(g, &path, z) {
                    return false;
                }
            }
        }
    }
    true
}

// ---------------------------------------------------------------------------
// Random generators.
// ---------------------------------------------------------------------------

/// Random DAG over `n` observed vertices with the given edge probability.
pub fn random_dag(n: usize, p: f64, rng: &mut ChaCha8Rng) -> MixedGraph {
    let mut g = MixedGraph::observed(n);
    for i in 0..n {
        for j in i + 1..n {
            if rng.gen_bool(p) {
                if rng.gen_bool(0.5) {
                    g.add_directed(i, j).unwrap();
                } else {
                    g.add_directed(j, i).unwrap();
                }
            }
        }
    }
    // Re-orient any accidental cycle by original index order.
    if !ffci::classes::directed_part_acyclic(&g) {
        let mut h = MixedGraph::observed(n);
        for e in g.edges() {
            h.add_directed(e.a, e.b).unwrap();
        }
        return h;
    }
    g
}

/// Random mixed graph: each pair gets an edge with probability `p` and
/// independent random tail/arrowhead marks.
pub fn random_mixed(n: usize, p: f64, rng: &mut ChaCha8Rng) -> MixedGraph {
    let mut g = MixedGraph::observed(n);
    for i in 0..n {
        for j in i + 1..n {
            if rng.gen_bool(p) {
                let m = |r: &mut ChaCha8Rng| {
                    if r.gen_bool(0.5) {
                        Mark::Tail
                    } else {
                        Mark::Arrowhead
                    }
                };
                let ma = m(rng);
                let mb = m(rng);
                g.add_edge(i, j, ma, mb, false).unwrap();
            }
        }
    }
    g
}

/// Random maximal ancestral graph, built by marginalizing a random ground
/// truth; exercises directed, bidirected, and undirected edges.
pub fn random_mag(n_lo: usize, n_hi: usize, rng: &mut ChaCha8Rng) -> MixedGraph {
    let aug = random_soundness_config_sized(n_lo, n_hi, rng);
    ffci::oracle::mag_of(&aug).unwrap().graph().clone()
}

/// Random ground-truth model in the soundness-suite family: ER DAG plus up
/// to two latents and two selections, all observed variables intervened.
pub fn random_soundness_config(rng: &mut ChaCha8Rng) -> AugmentedDag {
    random_soundness_config_sized(3, 8, rng)
}

pub fn random_soundness_config_sized(
    n_lo: usize,
    n_hi: usize,
    rng: &mut ChaCha8Rng,
) -> AugmentedDag {
    let n = rng.gen_range(n_lo..=n_hi);
    let p = 2.0 / (n as f64 - 1.0);
    let dag = random_dag(n, p.min(0.9), rng);
    let mut g = dag;
    let n_latent = rng.gen_range(0..=2);
    for i in 0..n_latent {
        let l = g.add_vertex(VertexKind::Latent, format!("L{}", i + 1));
        let a = rng.gen_range(0..n);
        let mut b = rng.gen_range(0..n);
        while b == a {
            b = rng.gen_range(0..n);
        }
        g.add_directed(l, a).unwrap();
        g.add_directed(l, b).unwrap();
    }
    let n_sel = rng.gen_range(0..=2);
    for i in 0..n_sel {
        let s = g.add_vertex(VertexKind::Selection, format!("S{}", i + 1));
        let a = rng.gen_range(0..n);
        let mut b = rng.gen_range(0..n);
        while b == a {
            b = rng.gen_range(0..n);
        }
        g.add_directed(a, s).unwrap();
        g.add_directed(b, s).unwrap();
    }
    let targets = singleton_targets(n);
    let kinds = vec![InterventionKind::Hard; n];
    augment(&Dag::new(g).unwrap(), &targets, &kinds).unwrap()
}

pub fn set(ids: &[VertexId]) -> BTreeSet<VertexId> {
    ids.iter().copied().collect()
}
