//! Collider orientation and the complete FCI rule set (R1-R10), applied to
//! edges not already fixed by the interventional orientation step.
//!
//! Rules only upgrade circle marks. Edges oriented from interventional
//! evidence are immutable here: a rule that demands a different mark on one
//! is recorded as a conflict and skipped, and the run continues.

use super::trace::{Trace, TraceRecord};
use crate::graph::{Mark, MixedGraph, VertexId};
use std::collections::{BTreeMap, BTreeSet};

pub(super) type PairKey = (VertexId, VertexId);

pub(super) fn key(a: VertexId, b: VertexId) -> PairKey {
    (a.min(b), a.max(b))
}

pub(super) struct RuleEngine<'a> {
    pub g: &'a mut MixedGraph,
    pub fixed: &'a BTreeSet<PairKey>,
    pub sepsets: &'a BTreeMap<PairKey, Vec<VertexId>>,
    pub trace: &'a mut Trace,
    conflicts_seen: BTreeSet<String>,
    changed: bool,
}

impl<'a> RuleEngine<'a> {
    pub fn new(
        g: &'a mut MixedGraph,
        fixed: &'a BTreeSet<PairKey>,
        sepsets: &'a BTreeMap<PairKey, Vec<VertexId>>,
        trace: &'a mut Trace,
    ) -> Self {
        Self {
            g,
            fixed,
            sepsets,
            trace,
            conflicts_seen: BTreeSet::new(),
            changed: false,
        }
    }

    fn name(&self, v: VertexId) -> String {
        self.g.vertex(v).name.clone()
    }

    fn conflict(&mut self, rule: &str, at: VertexId, other: VertexId, want: Mark) {
        let detail = format!(
            "{} wants {} at {} on edge to {}",
            rule,
            want,
            self.name(at),
            self.name(other)
        );
        if self.conflicts_seen.insert(detail.clone()) {
            self.trace.push(TraceRecord::Conflict {
                rule: rule.to_string(),
                a: self.name(at),
                b: self.name(other),
                detail,
            });
        }
    }

    /// Sets the mark at `at` on edge (at, other) if that endpoint is still a
    /// circle on a non-fixed edge. Returns true when a change was applied.
    pub fn set_mark(&mut self, rule: &str, at: VertexId, other: VertexId, mark: Mark) -> bool {
        let e = match self.g.edge(at, other) {
            Some(e) => e,
            None => return false,
        };
        if e.mark_a == mark {
            return false;
        }
        if self.fixed.contains(&key(at, other)) || e.mark_a != Mark::Circle {
            self.conflict(rule, at, other, mark);
            return false;
        }
        self.g.set_mark_at(at, other, mark).expect("edge exists");
        let e = self.g.edge(at.min(other), at.max(other)).unwrap();
        self.trace.push(TraceRecord::Orientation {
            rule: rule.to_string(),
            a: self.name(e.a),
            b: self.name(e.b),
            mark_a: e.mark_a,
            mark_b: e.mark_b,
            triangle: e.triangle,
        });
        self.changed = true;
        true
    }

    fn mark_at(&self, at: VertexId, other: VertexId) -> Option<Mark> {
        self.g.edge(at, other).map(|e| e.mark_a)
    }

    fn arrow_into(&self, at: VertexId, other: VertexId) -> bool {
        self.mark_at(at, other) == Some(Mark::Arrowhead)
    }

    fn directed(&self, from: VertexId, to: VertexId) -> bool {
        matches!(
            self.g.edge(from, to),
            Some(e) if e.mark_a == Mark::Tail && e.mark_b == Mark::Arrowhead
        )
    }

    /// Orients unshielded colliders from the separating sets: for i - k - j
    /// with i, j non-adjacent and k outside sepset(i, j), point both edges
    /// into k.
    pub fn orient_colliders(&mut self) {
        let n = self.g.n_vertices();
        for k in 0..n {
            let nbrs = self.g.neighbors(k);
            for (ai, &i) in nbrs.iter().enumerate() {
                for &j in nbrs.iter().skip(ai + 1) {
                    if self.g.adjacent(i, j) {
                        continue;
                    }
                    let sep = match self.sepsets.get(&key(i, j)) {
                        Some(s) => s,
                        None => continue,
                    };
                    if sep.contains(&k) {
                        continue;
                    }
                    self.set_mark("collider", k, i, Mark::Arrowhead);
                    self.set_mark("collider", k, j, Mark::Arrowhead);
                }
            }
        }
    }

    pub fn run_to_fixpoint(&mut self) {
        loop {
            self.changed = false;
            self.r1();
            self.r2();
            self.r3();
            self.r4();
            self.r5();
            self.r6();
            self.r7();
            self.r8();
            self.r9();
            self.r10();
            if !self.changed {
                break;
            }
        }
    }

    // R1: a *-> b o-* c with a, c non-adjacent: orient b -> c.
    fn r1(&mut self) {
        let n = self.g.n_vertices();
        for b in 0..n {
            for a in self.g.neighbors(b) {
                if !self.arrow_into(b, a) {
                    continue;
                }
                for c in self.g.neighbors(b) {
                    if c == a || self.g.adjacent(a, c) {
                        continue;
                    }
                    if self.mark_at(b, c) == Some(Mark::Circle) {
                        self.set_mark("R1", b, c, Mark::Tail);
                        self.set_mark("R1", c, b, Mark::Arrowhead);
                    }
                }
            }
        }
    }

    // R2: a -> b *-> c or a *-> b -> c, with a *-o c: orient a *-> c.
    fn r2(&mut self) {
        let n = self.g.n_vertices();
        for a in 0..n {
            for c in self.g.neighbors(a) {
                if self.mark_at(c, a) != Some(Mark::Circle) {
                    continue;
                }
                let found = self.g.neighbors(a).into_iter().any(|b| {
                    b != c
                        && self.g.adjacent(b, c)
                        && ((self.directed(a, b) && self.arrow_into(c, b))
                            || (self.arrow_into(b, a) && self.directed(b, c)))
                });
                if found {
                    self.set_mark("R2", c, a, Mark::Arrowhead);
                }
            }
        }
    }

    // R3: a *-> b <-* c, a *-o d o-* c, a, c non-adjacent, d *-o b:
    // orient d *-> b.
    fn r3(&mut self) {
        let n = self.g.n_vertices();
        for b in 0..n {
            let nbrs = self.g.neighbors(b);
            for &a in &nbrs {
                if !self.arrow_into(b, a) {
                    continue;
                }
                for &c in &nbrs {
                    if c <= a || !self.arrow_into(b, c) || self.g.adjacent(a, c) {
                        continue;
                    }
                    for &d in &nbrs {
                        if d == a || d == c {
                            continue;
                        }
                        if self.mark_at(d, a) == Some(Mark::Circle)
                            && self.mark_at(d, c) == Some(Mark::Circle)
                            && self.mark_at(b, d) == Some(Mark::Circle)
                        {
                            self.set_mark("R3", b, d, Mark::Arrowhead);
                        }
                    }
                }
            }
        }
    }

    // R4: discriminating path from t to c for b, with b o-* c: orient by
    // sepset membership.
    fn r4(&mut self) {
        let n = self.g.n_vertices();
        for c in 0..n {
            for b in self.g.neighbors(c) {
                if self.mark_at(b, c) != Some(Mark::Circle) {
                    continue;
                }
                // Grow collider-parent chains back from b. Paths are stored
                // reversed: [c, b, v1, v2, ...]; each interior vi is a
                // collider on the path and a parent of c.
                let mut stack: Vec<Vec<VertexId>> = vec![vec![c, b]];
                let mut applied = false;
                while let Some(path) = stack.pop() {
                    if applied {
                        break;
                    }
                    let last = *path.last().unwrap();
                    for prev in self.g.neighbors(last) {
                        if path.contains(&prev) {
                            continue;
                        }
                        // Interior `last` needs its endpoint-side arrowhead
                        // on the extension edge.
                        if path.len() >= 3 && !self.arrow_into(last, prev) {
                            continue;
                        }
                        if !self.g.adjacent(prev, c) {
                            // prev closes a discriminating path (needs at
                            // least one collider between the endpoints).
                            if path.len() < 3 {
                                continue;
                            }
                            let alpha = path[2];
                            let in_sepset = self
                                .sepsets
                                .get(&key(prev, c))
                                .map(|s| s.contains(&b))
                                .unwrap_or(false);
                            if in_sepset {
                                self.set_mark("R4", b, c, Mark::Tail);
                                self.set_mark("R4", c, b, Mark::Arrowhead);
                            } else {
                                self.set_mark("R4", b, alpha, Mark::Arrowhead);
                                self.set_mark("R4", b, c, Mark::Arrowhead);
                                self.set_mark("R4", c, b, Mark::Arrowhead);
                            }
                            applied = true;
                            break;
                        }
                        if self.directed(prev, c) && self.arrow_into(prev, last) {
                            let mut next = path.clone();
                            next.push(prev);
                            stack.push(next);
                        }
                    }
                }
            }
        }
    }

    fn circle_edge(&self, a: VertexId, b: VertexId) -> bool {
        matches!(
            self.g.edge(a, b),
            Some(e) if e.mark_a == Mark::Circle && e.mark_b == Mark::Circle
        )
    }

    /// Uncovered path search. `edge_ok(from, to)` gates each step; triples
    /// must be unshielded.
    fn uncovered_path(
        &self,
        from: VertexId,
        second: VertexId,
        to: VertexId,
        edge_ok: &dyn Fn(&Self, VertexId, VertexId) -> bool,
    ) -> Option<Vec<VertexId>> {
        if !edge_ok(self, from, second) {
            return None;
        }
        let mut path = vec![from, second];
        let mut on_path = vec![false; self.g.n_vertices()];
        on_path[from] = true;
        on_path[second] = true;
        self.uncovered_dfs(to, edge_ok, &mut path, &mut on_path)
    }

    fn uncovered_dfs(
        &self,
        to: VertexId,
        edge_ok: &dyn Fn(&Self, VertexId, VertexId) -> bool,
        path: &mut Vec<VertexId>,
        on_path: &mut Vec<bool>,
    ) -> Option<Vec<VertexId>> {
        let cur = *path.last().unwrap();
        if cur == to {
            return Some(path.clone());
        }
        let prev = path[path.len() - 2];
        for next in self.g.neighbors(cur) {
            if on_path[next] || self.g.adjacent(prev, next) || !edge_ok(self, cur, next) {
                continue;
            }
            path.push(next);
            on_path[next] = true;
            if let Some(found) = self.uncovered_dfs(to, edge_ok, path, on_path) {
                return Some(found);
            }
            path.pop();
            on_path[next] = false;
        }
        None
    }

    // R5: a o-o b with an uncovered circle path between them whose ends are
    // unshielded with the opposite endpoints: undirect the whole cycle.
    fn r5(&mut self) {
        let edges: Vec<(VertexId, VertexId)> = self
            .g
            .edges()
            .filter(|e| e.mark_a == Mark::Circle && e.mark_b == Mark::Circle)
            .map(|e| (e.a, e.b))
            .collect();
        for (a, b) in edges {
            if !self.circle_edge(a, b) {
                continue;
            }
            let seconds: Vec<VertexId> = self
                .g
                .neighbors(a)
                .into_iter()
                .filter(|&g2| g2 != b && !self.g.adjacent(g2, b) && self.circle_edge(a, g2))
                .collect();
            let mut found = None;
            for second in seconds {
                if let Some(p) =
                    self.uncovered_path(a, second, b, &|s, x, y| s.circle_edge(x, y))
                {
                    // The vertex before b must be non-adjacent to a.
                    let theta = p[p.len() - 2];
                    if !self.g.adjacent(theta, a) {
                        found = Some(p);
                        break;
                    }
                }
            }
            if let Some(p) = found {
                self.set_mark("R5", a, b, Mark::Tail);
                self.set_mark("R5", b, a, Mark::Tail);
                for w in p.windows(2) {
                    self.set_mark("R5", w[0], w[1], Mark::Tail);
                    self.set_mark("R5", w[1], w[0], Mark::Tail);
                }
            }
        }
    }

    // R6: a - b o-* c: the circle at b becomes a tail.
    fn r6(&mut self) {
        let n = self.g.n_vertices();
        for b in 0..n {
            let has_undirected = self.g.neighbors(b).into_iter().any(|a| {
                matches!(
                    self.g.edge(a, b),
                    Some(e) if e.mark_a == Mark::Tail && e.mark_b == Mark::Tail && !e.triangle
                )
            });
            if !has_undirected {
                continue;
            }
            for c in self.g.neighbors(b) {
                if self.mark_at(b, c) == Some(Mark::Circle) {
                    self.set_mark("R6", b, c, Mark::Tail);
                }
            }
        }
    }

    // R7: a -o b o-* c, a, c non-adjacent: the circle at b becomes a tail.
    fn r7(&mut self) {
        let n = self.g.n_vertices();
        for b in 0..n {
            let tails: Vec<VertexId> = self
                .g
                .neighbors(b)
                .into_iter()
                .filter(|&a| {
                    matches!(
                        self.g.edge(a, b),
                        Some(e) if e.mark_a == Mark::Tail && e.mark_b == Mark::Circle && !e.triangle
                    )
                })
                .collect();
            for a in tails {
                for c in self.g.neighbors(b) {
                    if c == a || self.g.adjacent(a, c) {
                        continue;
                    }
                    if self.mark_at(b, c) == Some(Mark::Circle) {
                        self.set_mark("R7", b, c, Mark::Tail);
                    }
                }
            }
        }
    }

    // R8: a -> b -> c or a -o b -> c, with a o-> c: orient a -> c.
    fn r8(&mut self) {
        let n = self.g.n_vertices();
        for a in 0..n {
            for c in self.g.neighbors(a) {
                let e = self.g.edge(a, c).unwrap();
                if !(e.mark_a == Mark::Circle && e.mark_b == Mark::Arrowhead) {
                    continue;
                }
                let found = self.g.neighbors(a).into_iter().any(|b| {
                    if b == c || !self.g.adjacent(b, c) || !self.directed(b, c) {
                        return false;
                    }
                    let ab = self.g.edge(a, b).unwrap();
                    self.directed(a, b)
                        || (ab.mark_a == Mark::Tail && ab.mark_b == Mark::Circle)
                });
                if found {
                    self.set_mark("R8", a, c, Mark::Tail);
                }
            }
        }
    }

    fn pd_edge(&self, from: VertexId, to: VertexId) -> bool {
        matches!(
            self.g.edge(from, to),
            Some(e) if matches!(e.mark_a, Mark::Circle | Mark::Tail)
                && matches!(e.mark_b, Mark::Circle | Mark::Arrowhead)
        )
    }

    // R9: a o-> c with an uncovered potentially-directed path a, b, .., c
    // where b and c are non-adjacent: orient the circle at a to a tail.
    fn r9(&mut self) {
        let n = self.g.n_vertices();
        for a in 0..n {
            for c in self.g.neighbors(a) {
                let e = self.g.edge(a, c).unwrap();
                if !(e.mark_a == Mark::Circle && e.mark_b == Mark::Arrowhead) {
                    continue;
                }
                let seconds: Vec<VertexId> = self
                    .g
                    .neighbors(a)
                    .into_iter()
                    .filter(|&b| b != c && !self.g.adjacent(b, c))
                    .collect();
                let found = seconds.into_iter().any(|b| {
                    self.uncovered_path(a, b, c, &|s, x, y| s.pd_edge(x, y))
                        .is_some()
                });
                if found {
                    self.set_mark("R9", a, c, Mark::Tail);
                }
            }
        }
    }

    // R10: a o-> c, b -> c <- t, uncovered pd paths from a to b and a to t
    // whose first steps are distinct and non-adjacent: tail at a.
    fn r10(&mut self) {
        let n = self.g.n_vertices();
        for a in 0..n {
            for c in self.g.neighbors(a) {
                let e = self.g.edge(a, c).unwrap();
                if !(e.mark_a == Mark::Circle && e.mark_b == Mark::Arrowhead) {
                    continue;
                }
                let parents: Vec<VertexId> = self
                    .g
                    .neighbors(c)
                    .into_iter()
                    .filter(|&p| p != a && self.directed(p, c))
                    .collect();
                let mut fired = false;
                for (bi, &b) in parents.iter().enumerate() {
                    for &t in parents.iter().skip(bi + 1) {
                        for mu in self.g.neighbors(a) {
                            if mu == c {
                                continue;
                            }
                            for om in self.g.neighbors(a) {
                                if om == c || om == mu || self.g.adjacent(mu, om) {
                                    continue;
                                }
                                let p1 = if mu == b {
                                    self.pd_edge(a, b).then(|| vec![a, b])
                                } else {
                                    self.uncovered_path(a, mu, b, &|s, x, y| s.pd_edge(x, y))
                                };
                                if p1.is_none() {
                                    continue;
                                }
                                let p2 = if om == t {
                                    self.pd_edge(a, t).then(|| vec![a, t])
                                } else {
                                    self.uncovered_path(a, om, t, &|s, x, y| s.pd_edge(x, y))
                                };
                                if p2.is_some() {
                                    self.set_mark("R10", a, c, Mark::Tail);
                                    fired = true;
                                    break;
                                }
                            }
                            if fired {
                                break;
                            }
                        }
                        if fired {
                            break;
                        }
                    }
                    if fired {
                        break;
                    }
                }
            }
        }
    }
}
