//! The discovery engine: observational skeleton search, interventional
//! CI-signature capture and orientation, path-induced edge refinement, and
//! the finishing orientation rules.
//!
//! Step order is: skeleton from regime-0 answers; for every adjacent pair
//! of intervened variables a four-signal signature picks one of six edge
//! orientations; pairs left as plain directed or undirected edges are
//! re-examined through intervened middle nodes and upgraded to
//! triangle-tagged variants when the middle node's severed-regime query
//! shows no influence on the far endpoint; finally sepset colliders, the
//! standard orientation rules, and the indicator invariance rules orient
//! everything not already fixed.

pub mod rules;
pub mod trace;

use crate::citest::{CiError, CiProvider};
use crate::classes::FPag;
use crate::graph::{Mark, MixedGraph, VertexId};
use itertools::Itertools;
use rules::{key, PairKey, RuleEngine};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;
use trace::{QueryKind, Trace, TraceRecord};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("ci provider: {0}")]
    Ci(#[from] CiError),
    #[error("engine produced an invalid graph: {0}")]
    InvalidOutput(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FfciOptions {
    /// Skeleton conditioning-set size cap; `None` means up to n-2.
    pub skeleton_cond_cap: Option<usize>,
    /// Cap on the extra conditioning set size in signature capture.
    pub tuple_cond_cap: usize,
    /// Run the middle-node refinement pass.
    pub refine: bool,
}

impl Default for FfciOptions {
    fn default() -> Self {
        Self {
            skeleton_cond_cap: None,
            tuple_cond_cap: 3,
            refine: true,
        }
    }
}

/// Separating sets found during skeleton search.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SepsetTable {
    map: BTreeMap<PairKey, Vec<VertexId>>,
}

impl SepsetTable {
    pub fn get(&self, a: VertexId, b: VertexId) -> Option<&[VertexId]> {
        self.map.get(&key(a, b)).map(Vec::as_slice)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&PairKey, &Vec<VertexId>)> {
        self.map.iter()
    }
}

/// One slot of the four-signal signature: dependent unless some tried
/// conditioning set separated it, in which case that set is kept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotOutcome {
    pub dependent: bool,
    pub separating_cond: Option<Vec<VertexId>>,
}

/// The four dependence decisions driving pair orientation, in order:
/// (psi_a vs b | C), (psi_a vs b | a,C), (psi_b vs a | C), (psi_b vs a | b,C).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CiTuple {
    pub pair: (VertexId, VertexId),
    pub regimes: (usize, usize),
    pub slots: [SlotOutcome; 4],
}

impl CiTuple {
    pub fn pattern(&self) -> [bool; 4] {
        [
            self.slots[0].dependent,
            self.slots[1].dependent,
            self.slots[2].dependent,
            self.slots[3].dependent,
        ]
    }
}

/// Swaps the roles of the two endpoints in a signature.
pub fn swap_pattern(p: [bool; 4]) -> [bool; 4] {
    [p[2], p[3], p[0], p[1]]
}

/// Edge orientation selected by the signature table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PairOrientation {
    /// i -> j
    Directed,
    /// i <-> j
    Bidirected,
    /// i o-> j
    CircleArrow,
    /// i - j
    Undirected,
    /// i -[square] j (tail at i, square at j)
    TailSquare,
    /// i [square]-[square] j
    SquareSquare,
}

impl PairOrientation {
    pub fn marks(self) -> (Mark, Mark) {
        match self {
            PairOrientation::Directed => (Mark::Tail, Mark::Arrowhead),
            PairOrientation::Bidirected => (Mark::Arrowhead, Mark::Arrowhead),
            PairOrientation::CircleArrow => (Mark::Circle, Mark::Arrowhead),
            PairOrientation::Undirected => (Mark::Tail, Mark::Tail),
            PairOrientation::TailSquare => (Mark::Tail, Mark::Square),
            PairOrientation::SquareSquare => (Mark::Square, Mark::Square),
        }
    }
}

/// The exact six-row signature table; anything else is no match.
pub fn orient_pair(pattern: [bool; 4]) -> Option<PairOrientation> {
    const D: bool = true;
    const I: bool = false;
    match pattern {
        [D, I, I, D] => Some(PairOrientation::Directed),
        [I, D, I, D] => Some(PairOrientation::Bidirected),
        [D, D, I, D] => Some(PairOrientation::CircleArrow),
        [D, I, D, I] => Some(PairOrientation::Undirected),
        [D, I, D, D] => Some(PairOrientation::TailSquare),
        [D, D, D, D] => Some(PairOrientation::SquareSquare),
        _ => None,
    }
}

/// Full output of a discovery run.
#[derive(Debug)]
pub struct Discovery {
    pub fpag: FPag,
    pub sepsets: SepsetTable,
    pub tuples: BTreeMap<PairKey, CiTuple>,
    pub trace: Trace,
}

struct Exec<'a> {
    provider: &'a dyn CiProvider,
    names: Vec<String>,
    opts: &'a FfciOptions,
    graph: MixedGraph,
    sepsets: SepsetTable,
    fixed: BTreeSet<PairKey>,
    tuples: BTreeMap<PairKey, CiTuple>,
    trace: Trace,
    /// First regime (1-based) intervening each variable.
    regime_of: Vec<Option<usize>>,
}

impl<'a> Exec<'a> {
    fn new(provider: &'a dyn CiProvider, opts: &'a FfciOptions) -> Self {
        let names = provider.var_names();
        let n = names.len();
        let targets = provider.regime_targets();
        let mut regime_of = vec![None; n];
        for (k, t) in targets.iter().enumerate() {
            for &v in t {
                if regime_of[v].is_none() {
                    regime_of[v] = Some(k + 1);
                }
            }
        }
        let graph = FPag::complete(&names).graph().clone();
        Self {
            provider,
            names,
            opts,
            graph,
            sepsets: SepsetTable::default(),
            fixed: BTreeSet::new(),
            tuples: BTreeMap::new(),
            trace: Trace::default(),
            regime_of,
        }
    }

    fn cond_names(&self, cond: &[VertexId]) -> Vec<String> {
        cond.iter().map(|&c| self.names[c].clone()).collect()
    }

    fn q_x(&mut self, x: VertexId, y: VertexId, cond: &[VertexId]) -> Result<bool, EngineError> {
        let independent = self.provider.x_independent(x, y, cond)?;
        self.trace.push(TraceRecord::Query {
            kind: QueryKind::ObservationalCi,
            regime: 0,
            lhs: self.names[x].clone(),
            rhs: self.names[y].clone(),
            cond: self.cond_names(cond),
            independent,
        });
        Ok(independent)
    }

    fn q_psi(
        &mut self,
        regime: usize,
        x: VertexId,
        cond: &[VertexId],
    ) -> Result<bool, EngineError> {
        let independent = self.provider.psi_independent(regime, x, cond)?;
        self.trace.push(TraceRecord::Query {
            kind: QueryKind::IndicatorCi,
            regime,
            lhs: format!("psi{regime}"),
            rhs: self.names[x].clone(),
            cond: self.cond_names(cond),
            independent,
        });
        Ok(independent)
    }

    fn q_psi_do(&mut self, regime: usize, x: VertexId) -> Result<bool, EngineError> {
        let independent = self.provider.psi_do_independent(regime, x)?;
        self.trace.push(TraceRecord::Query {
            kind: QueryKind::IndicatorDoCi,
            regime,
            lhs: format!("psi{regime}"),
            rhs: self.names[x].clone(),
            cond: Vec::new(),
            independent,
        });
        Ok(independent)
    }

    // -- Step 1 -------------------------------------------------------------

    fn skeleton(&mut self) -> Result<(), EngineError> {
        let n = self.names.len();
        let cap = self.opts.skeleton_cond_cap.unwrap_or(n.saturating_sub(2));
        for depth in 0..=cap {
            // Stable variant: adjacency is snapshotted per depth so removal
            // order cannot influence which sets get tested.
            let adj: Vec<Vec<VertexId>> = (0..n).map(|v| self.graph.neighbors(v)).collect();
            let mut any_big_enough = false;
            for i in 0..n {
                for j in i + 1..n {
                    if !self.graph.adjacent(i, j) {
                        continue;
                    }
                    let mut tested: BTreeSet<Vec<VertexId>> = BTreeSet::new();
                    let mut removed = false;
                    for (u, v) in [(i, j), (j, i)] {
                        let base: Vec<VertexId> =
                            adj[u].iter().copied().filter(|&w| w != v).collect();
                        if base.len() >= depth {
                            any_big_enough = true;
                        } else {
                            continue;
                        }
                        for cond in base.into_iter().combinations(depth) {
                            if !tested.insert(cond.clone()) {
                                continue;
                            }
                            if self.q_x(i, j, &cond)? {
                                self.graph.remove_edge(i, j).expect("adjacent");
                                self.trace.push(TraceRecord::EdgeRemoved {
                                    a: self.names[i].clone(),
                                    b: self.names[j].clone(),
                                    sepset: self.cond_names(&cond),
                                });
                                self.sepsets.map.insert(key(i, j), cond);
                                removed = true;
                                break;
                            }
                        }
                        if removed {
                            break;
                        }
                    }
                }
            }
            if !any_big_enough && depth > 0 {
                break;
            }
        }
        Ok(())
    }

    // -- Step 2 -------------------------------------------------------------

    /// Vertices lying on some simple skeleton path between `a` and `b`,
    /// excluding the endpoints. These are the conditioning candidates for
    /// signature capture.
    fn path_interiors(&mut self, a: VertexId, b: VertexId) -> Vec<VertexId> {
        let n = self.graph.n_vertices();
        let mut interiors: BTreeSet<VertexId> = BTreeSet::new();
        let mut on_path = vec![false; n];
        on_path[a] = true;
        let mut path = vec![a];
        let mut budget = 200_000usize;
        let mut overflow = false;
        self.paths_dfs(a, b, &mut path, &mut on_path, &mut interiors, &mut budget, &mut overflow);
        if overflow {
            // Fall back to every vertex in the pair's connected component.
            self.trace.push(TraceRecord::Note {
                event: "path_enumeration_overflow".into(),
                a: self.names[a].clone(),
                b: self.names[b].clone(),
                detail: "using connected-component superset".into(),
            });
            let mut comp = vec![false; n];
            let mut stack = vec![a];
            comp[a] = true;
            while let Some(v) = stack.pop() {
                for w in self.graph.neighbors(v) {
                    if !comp[w] {
                        comp[w] = true;
                        stack.push(w);
                    }
                }
            }
            return (0..n).filter(|&v| comp[v] && v != a && v != b).collect();
        }
        interiors.into_iter().collect()
    }

    #[allow(clippy::too_many_arguments)]
    fn paths_dfs(
        &self,
        cur: VertexId,
        target: VertexId,
        path: &mut Vec<VertexId>,
        on_path: &mut Vec<bool>,
        interiors: &mut BTreeSet<VertexId>,
        budget: &mut usize,
        overflow: &mut bool,
    ) {
        if *overflow {
            return;
        }
        for next in self.graph.neighbors(cur) {
            if *budget == 0 {
                *overflow = true;
                return;
            }
            *budget -= 1;
            if next == target {
                for &v in path.iter().skip(1) {
                    interiors.insert(v);
                }
                continue;
            }
            if on_path[next] {
                continue;
            }
            on_path[next] = true;
            path.push(next);
            self.paths_dfs(next, target, path, on_path, interiors, budget, overflow);
            path.pop();
            on_path[next] = false;
        }
    }

    /// One signature slot: independent iff some conditioning set drawn from
    /// the path interiors (plus the fixed endpoint, if any) separates.
    fn slot(
        &mut self,
        regime: usize,
        x: VertexId,
        base: Option<VertexId>,
        interiors: &[VertexId],
    ) -> Result<SlotOutcome, EngineError> {
        let cap = self.opts.tuple_cond_cap.min(interiors.len());
        for size in 0..=cap {
            for extra in interiors.iter().copied().combinations(size) {
                let mut cond = extra.clone();
                if let Some(b) = base {
                    cond.push(b);
                }
                cond.sort_unstable();
                if self.q_psi(regime, x, &cond)? {
                    return Ok(SlotOutcome {
                        dependent: false,
                        separating_cond: Some(extra),
                    });
                }
            }
        }
        Ok(SlotOutcome {
            dependent: true,
            separating_cond: None,
        })
    }

    fn capture(
        &mut self,
        a: VertexId,
        ra: usize,
        b: VertexId,
        rb: usize,
    ) -> Result<CiTuple, EngineError> {
        let interiors = self.path_interiors(a, b);
        let slots = [
            self.slot(ra, b, None, &interiors)?,
            self.slot(ra, b, Some(a), &interiors)?,
            self.slot(rb, a, None, &interiors)?,
            self.slot(rb, a, Some(b), &interiors)?,
        ];
        Ok(CiTuple {
            pair: (a, b),
            regimes: (ra, rb),
            slots,
        })
    }

    fn apply_orientation(&mut self, i: VertexId, j: VertexId, o: PairOrientation) {
        let (mi, mj) = o.marks();
        self.graph.set_edge(i, j, mi, mj, false).expect("adjacent");
        self.fixed.insert(key(i, j));
        let e = self.graph.edge(i.min(j), i.max(j)).unwrap();
        self.trace.push(TraceRecord::Orientation {
            rule: "signature".into(),
            a: self.names[e.a].clone(),
            b: self.names[e.b].clone(),
            mark_a: e.mark_a,
            mark_b: e.mark_b,
            triangle: false,
        });
    }

    fn step2(&mut self) -> Result<(), EngineError> {
        let n = self.names.len();
        for a in 0..n {
            for b in a + 1..n {
                let (ra, rb) = match (self.regime_of[a], self.regime_of[b]) {
                    (Some(ra), Some(rb)) => (ra, rb),
                    _ => continue,
                };
                if !self.graph.adjacent(a, b) {
                    continue;
                }
                if ra == rb {
                    self.trace.push(TraceRecord::Note {
                        event: "shared_regime_pair_skipped".into(),
                        a: self.names[a].clone(),
                        b: self.names[b].clone(),
                        detail: format!("both targeted by regime {ra}"),
                    });
                    continue;
                }
                let tuple = self.capture(a, ra, b, rb)?;
                let pattern = tuple.pattern();
                if let Some(o) = orient_pair(pattern) {
                    self.apply_orientation(a, b, o);
                } else if let Some(o) = orient_pair(swap_pattern(pattern)) {
                    self.apply_orientation(b, a, o);
                } else {
                    self.trace.push(TraceRecord::Note {
                        event: "signature_no_match".into(),
                        a: self.names[a].clone(),
                        b: self.names[b].clone(),
                        detail: format!("{pattern:?}"),
                    });
                }
                self.tuples.insert(key(a, b), tuple);
            }
        }
        Ok(())
    }

    // -- Step 2.3 -----------------------------------------------------------

    /// Middle-node candidates adjacent to both endpoints, ascending.
    fn middle_nodes(&self, i: VertexId, j: VertexId) -> Vec<VertexId> {
        (0..self.names.len())
            .filter(|&m| {
                m != i && m != j && self.graph.adjacent(i, m) && self.graph.adjacent(m, j)
            })
            .collect()
    }

    /// Upgrade a fixed directed edge i -> j when an intervened middle node
    /// with an incoming-arrowhead square shows no severed-regime influence
    /// on j: the dependence is carried by the path, not a direct link.
    ///
    /// The head-side independence is informative only when the severed
    /// regime still reaches the tail endpoint: a direct link would then
    /// carry the perturbation onward, so its absence rules the link out.
    /// Without that channel the query says nothing and the edge stays.
    fn refine_directed(&mut self, i: VertexId, j: VertexId) -> Result<(), EngineError> {
        for m in self.middle_nodes(i, j) {
            let eim = self.graph.edge(i, m).unwrap();
            let emj = self.graph.edge(m, j).unwrap();
            let pattern_ok = eim.mark_b == Mark::Square
                && eim.mark_a != Mark::Arrowhead
                && emj.mark_b == Mark::Arrowhead
                && emj.mark_a != Mark::Tail;
            if !pattern_ok {
                continue;
            }
            let regime = match self.regime_of[m] {
                Some(r) => r,
                None => {
                    self.trace.push(TraceRecord::Note {
                        event: "refinement_unavailable".into(),
                        a: self.names[i].clone(),
                        b: self.names[j].clone(),
                        detail: format!("middle node {} has no interventional data", self.names[m]),
                    });
                    continue;
                }
            };
            if self.q_psi_do(regime, i)? {
                self.trace.push(TraceRecord::Note {
                    event: "refinement_uninformative".into(),
                    a: self.names[i].clone(),
                    b: self.names[j].clone(),
                    detail: format!(
                        "severed regime of {} does not reach the tail endpoint",
                        self.names[m]
                    ),
                });
                continue;
            }
            if self.q_psi_do(regime, j)? {
                self.graph
                    .set_edge(i, j, Mark::Tail, Mark::Arrowhead, true)
                    .expect("adjacent");
                self.trace.push(TraceRecord::Orientation {
                    rule: "refine_path_cause".into(),
                    a: self.names[i.min(j)].clone(),
                    b: self.names[i.max(j)].clone(),
                    mark_a: self.graph.edge(i.min(j), i.max(j)).unwrap().mark_a,
                    mark_b: self.graph.edge(i.min(j), i.max(j)).unwrap().mark_b,
                    triangle: true,
                });
                return Ok(());
            }
        }
        Ok(())
    }

    /// Upgrade a fixed undirected edge i - j when an intervened middle node
    /// carrying an incoming arrowhead and a square toward j shows no
    /// severed-regime influence on i.
    fn refine_undirected(&mut self, i: VertexId, j: VertexId) -> Result<bool, EngineError> {
        for m in self.middle_nodes(i, j) {
            let eim = self.graph.edge(i, m).unwrap();
            let emj = self.graph.edge(m, j).unwrap();
            let pattern_ok = matches!(eim.mark_b, Mark::Arrowhead | Mark::Square)
                && emj.mark_a == Mark::Square
                && emj.mark_b == Mark::Tail;
            if !pattern_ok {
                continue;
            }
            let regime = match self.regime_of[m] {
                Some(r) => r,
                None => {
                    self.trace.push(TraceRecord::Note {
                        event: "refinement_unavailable".into(),
                        a: self.names[i].clone(),
                        b: self.names[j].clone(),
                        detail: format!("middle node {} has no interventional data", self.names[m]),
                    });
                    continue;
                }
            };
            if self.q_psi_do(regime, i)? {
                self.graph
                    .set_edge(i, j, Mark::Tail, Mark::Tail, true)
                    .expect("adjacent");
                self.trace.push(TraceRecord::Orientation {
                    rule: "refine_path_selection".into(),
                    a: self.names[i.min(j)].clone(),
                    b: self.names[i.max(j)].clone(),
                    mark_a: Mark::Tail,
                    mark_b: Mark::Tail,
                    triangle: true,
                });
                return Ok(true);
            }
        }
        Ok(false)
    }

    fn refine(&mut self) -> Result<(), EngineError> {
        // One pass plus one recheck: the first pass can expose new squares
        // only through upgrades, which never change plain marks, so two
        // passes reach the fixpoint.
        for _ in 0..2 {
            let pairs: Vec<PairKey> = self.fixed.iter().copied().collect();
            for (u, v) in pairs {
                let e = match self.graph.edge(u, v) {
                    Some(e) => e,
                    None => continue,
                };
                if e.triangle {
                    continue;
                }
                match (e.mark_a, e.mark_b) {
                    (Mark::Tail, Mark::Arrowhead) => self.refine_directed(u, v)?,
                    (Mark::Arrowhead, Mark::Tail) => self.refine_directed(v, u)?,
                    (Mark::Tail, Mark::Tail)
                        if !self.refine_undirected(u, v)? => {
                            self.refine_undirected(v, u)?;
                        }
                    _ => {}
                }
            }
        }
        Ok(())
    }

    // -- Step 3 -------------------------------------------------------------

    /// Indicator invariance rules between an intervened variable and an
    /// unintervened neighbor: marginal change with conditional invariance
    /// puts a tail at the intervened end and an arrowhead at the neighbor;
    /// the opposite signature puts an arrowhead at the intervened end.
    fn invariance_rules(&mut self) -> Result<(), EngineError> {
        let n = self.names.len();
        let mut updates: Vec<(VertexId, VertexId, Mark)> = Vec::new();
        for a in 0..n {
            for b in a + 1..n {
                if !self.graph.adjacent(a, b) {
                    continue;
                }
                let (iv, uv) = match (self.regime_of[a], self.regime_of[b]) {
                    (Some(_), None) => (a, b),
                    (None, Some(_)) => (b, a),
                    _ => continue,
                };
                let regime = self.regime_of[iv].unwrap();
                let interiors = self.path_interiors(iv, uv);
                let marginal = self.slot(regime, uv, None, &interiors)?;
                let conditional = self.slot(regime, uv, Some(iv), &interiors)?;
                match (marginal.dependent, conditional.dependent) {
                    (true, false) => {
                        updates.push((iv, uv, Mark::Tail));
                        updates.push((uv, iv, Mark::Arrowhead));
                    }
                    (false, true) => {
                        updates.push((iv, uv, Mark::Arrowhead));
                    }
                    _ => {}
                }
            }
        }
        let mut engine = RuleEngine::new(
            &mut self.graph,
            &self.fixed,
            &self.sepsets.map,
            &mut self.trace,
        );
        for (at, other, mark) in updates {
            engine.set_mark("invariance", at, other, mark);
        }
        Ok(())
    }

    fn finish(&mut self) -> Result<(), EngineError> {
        {
            let mut engine = RuleEngine::new(
                &mut self.graph,
                &self.fixed,
                &self.sepsets.map,
                &mut self.trace,
            );
            engine.orient_colliders();
            engine.run_to_fixpoint();
        }
        self.invariance_rules()?;
        {
            let mut engine = RuleEngine::new(
                &mut self.graph,
                &self.fixed,
                &self.sepsets.map,
                &mut self.trace,
            );
            engine.run_to_fixpoint();
        }
        Ok(())
    }

    fn into_discovery(self) -> Result<Discovery, EngineError> {
        let fpag =
            FPag::from_graph(self.graph).map_err(|e| EngineError::InvalidOutput(e.to_string()))?;
        Ok(Discovery {
            fpag,
            sepsets: self.sepsets,
            tuples: self.tuples,
            trace: self.trace,
        })
    }
}

/// Runs the full discovery pipeline against any provider. Deterministic
/// given provider answers: pairs are processed in ascending order.
pub fn f_fci(provider: &dyn CiProvider, opts: &FfciOptions) -> Result<Discovery, EngineError> {
    let mut exec = Exec::new(provider, opts);
    exec.skeleton()?;
    exec.step2()?;
    if opts.refine {
        exec.refine()?;
    }
    exec.finish()?;
    exec.into_discovery()
}

/// Convenience: oracle-backed discovery over a ground-truth model.
pub fn f_fci_oracle(
    aug: &crate::classes::AugmentedDag,
    opts: &FfciOptions,
) -> Result<Discovery, EngineError> {
    let provider = crate::citest::OracleProvider::new(aug.clone());
    f_fci(&provider, opts)
}

/// Edge classes of the learned graph, for reporting.
pub fn describe_edge(g: &MixedGraph, a: VertexId, b: VertexId) -> Option<String> {
    let e = g.edge(a, b)?;
    let glyph = |m: Mark, side: bool| match (m, side) {
        (Mark::Tail, _) => "-",
        (Mark::Arrowhead, false) => "<",
        (Mark::Arrowhead, true) => ">",
        (Mark::Circle, _) => "o",
        (Mark::Square, _) => "#",
    };
    let tag = if e.triangle { "^" } else { "" };
    Some(format!(
        "{}{}-{}{}",
        glyph(e.mark_a, false),
        tag,
        tag,
        glyph(e.mark_b, true)
    ))
}

pub use trace::{Trace as DiscoveryTrace, TraceRecord as DiscoveryTraceRecord};
