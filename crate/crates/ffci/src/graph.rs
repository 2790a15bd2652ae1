//! Mixed graphs with typed endpoint marks.
//!
//! One edge store serves every graph class in the crate: DAGs use
//! tail/arrowhead marks, MAGs add undirected and bidirected edges, and
//! learned graphs add circle and square marks plus a per-edge triangle
//! flag for path-induced edges. Edges are keyed by unordered vertex
//! pair, so an edge is two marks, a flag, and nothing else.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use thiserror::Error;

/// Vertex index into a graph's vertex list.
pub type VertexId = usize;

/// Endpoint annotation on one side of an edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mark {
    Tail,
    Arrowhead,
    Circle,
    Square,
}

impl fmt::Display for Mark {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Mark::Tail => "tail",
            Mark::Arrowhead => "arrowhead",
            Mark::Circle => "circle",
            Mark::Square => "square",
        };
        write!(f, "{s}")
    }
}

/// Role of a vertex in the structural model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VertexKind {
    /// Measured variable.
    Observed,
    /// Unmeasured confounder.
    Latent,
    /// Unmeasured sink conditioned to 1 by sample inclusion.
    Selection,
    /// Exogenous noise term.
    Noise,
    /// Exogenous binary regime indicator.
    Indicator,
}

impl VertexKind {
    /// Rank used for canonical vertex ordering: (kind rank, id).
    pub fn rank(self) -> u8 {
        match self {
            VertexKind::Observed => 0,
            VertexKind::Latent => 1,
            VertexKind::Selection => 2,
            VertexKind::Noise => 3,
            VertexKind::Indicator => 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vertex {
    pub id: VertexId,
    pub kind: VertexKind,
    pub name: String,
}

/// Marks and flag stored for one unordered pair. `mark_u` belongs to the
/// smaller vertex id of the pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EdgeData {
    pub mark_u: Mark,
    pub mark_v: Mark,
    pub triangle: bool,
}

/// An edge viewed from a chosen endpoint order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EdgeView {
    pub a: VertexId,
    pub b: VertexId,
    pub mark_a: Mark,
    pub mark_b: Mark,
    pub triangle: bool,
}

impl EdgeView {
    pub fn is_directed_from_a(&self) -> bool {
        self.mark_a == Mark::Tail && self.mark_b == Mark::Arrowhead && !self.triangle
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GraphError {
    #[error("unknown vertex id {0}")]
    UnknownVertex(VertexId),
    #[error("self loop on vertex {0}")]
    SelfLoop(VertexId),
    #[error("duplicate edge between {0} and {1}")]
    DuplicateEdge(VertexId, VertexId),
    #[error("no edge between {0} and {1}")]
    MissingEdge(VertexId, VertexId),
    #[error("vertex ids must be 0..n in order, found {0} at position {1}")]
    NonContiguousIds(VertexId, usize),
}

/// Vertex list plus unordered-pair keyed edges.
///
/// Immutable once built by convention: builders construct, algorithms share
/// by reference. Vertex ids equal positions in the vertex list.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedGraph {
    vertices: Vec<Vertex>,
    edges: BTreeMap<(VertexId, VertexId), EdgeData>,
}

impl MixedGraph {
    pub fn new(vertices: Vec<Vertex>) -> Result<Self, GraphError> {
        for (pos, v) in vertices.iter().enumerate() {
            if v.id != pos {
                return Err(GraphError::NonContiguousIds(v.id, pos));
            }
        }
        Ok(Self {
            vertices,
            edges: BTreeMap::new(),
        })
    }

    /// Builds a graph of observed variables named `X1..Xn`.
    pub fn observed(n: usize) -> Self {
        let vertices = (0..n)
            .map(|i| Vertex {
                id: i,
                kind: VertexKind::Observed,
                name: format!("X{}", i + 1),
            })
            .collect();
        Self {
            vertices,
            edges: BTreeMap::new(),
        }
    }

    /// Builds an edgeless graph of one kind with the given names.
    pub fn with_names(kind: VertexKind, names: &[String]) -> Self {
        let vertices = names
            .iter()
            .enumerate()
            .map(|(i, name)| Vertex {
                id: i,
                kind,
                name: name.clone(),
            })
            .collect();
        Self {
            vertices,
            edges: BTreeMap::new(),
        }
    }

    pub fn add_vertex(&mut self, kind: VertexKind, name: impl Into<String>) -> VertexId {
        let id = self.vertices.len();
        self.vertices.push(Vertex {
            id,
            kind,
            name: name.into(),
        });
        id
    }

    pub fn add_edge(
        &mut self,
        a: VertexId,
        b: VertexId,
        mark_a: Mark,
        mark_b: Mark,
        triangle: bool,
    ) -> Result<(), GraphError> {
        self.check_vertex(a)?;
        self.check_vertex(b)?;
        if a == b {
            return Err(GraphError::SelfLoop(a));
        }
        let (u, v, mark_u, mark_v) = if a < b {
            (a, b, mark_a, mark_b)
        } else {
            (b, a, mark_b, mark_a)
        };
        if self.edges.contains_key(&(u, v)) {
            return Err(GraphError::DuplicateEdge(u, v));
        }
        self.edges.insert(
            (u, v),
            EdgeData {
                mark_u,
                mark_v,
                triangle,
            },
        );
        Ok(())
    }

    /// Adds a directed edge `a -> b`.
    pub fn add_directed(&mut self, a: VertexId, b: VertexId) -> Result<(), GraphError> {
        self.add_edge(a, b, Mark::Tail, Mark::Arrowhead, false)
    }

    pub fn remove_edge(&mut self, a: VertexId, b: VertexId) -> Result<(), GraphError> {
        let key = if a < b { (a, b) } else { (b, a) };
        self.edges
            .remove(&key)
            .map(|_| ())
            .ok_or(GraphError::MissingEdge(a, b))
    }

    /// Rewrites the marks/flag of an existing edge.
    pub fn set_edge(
        &mut self,
        a: VertexId,
        b: VertexId,
        mark_a: Mark,
        mark_b: Mark,
        triangle: bool,
    ) -> Result<(), GraphError> {
        let (u, v, mark_u, mark_v) = if a < b {
            (a, b, mark_a, mark_b)
        } else {
            (b, a, mark_b, mark_a)
        };
        match self.edges.get_mut(&(u, v)) {
            Some(data) => {
                *data = EdgeData {
                    mark_u,
                    mark_v,
                    triangle,
                };
                Ok(())
            }
            None => Err(GraphError::MissingEdge(a, b)),
        }
    }

    pub fn set_mark_at(
        &mut self,
        at: VertexId,
        other: VertexId,
        mark: Mark,
    ) -> Result<(), GraphError> {
        let e = self.edge(at, other).ok_or(GraphError::MissingEdge(at, other))?;
        self.set_edge(at, other, mark, e.mark_b, e.triangle)
    }

    fn check_vertex(&self, v: VertexId) -> Result<(), GraphError> {
        if v < self.vertices.len() {
            Ok(())
        } else {
            Err(GraphError::UnknownVertex(v))
        }
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn vertex(&self, id: VertexId) -> &Vertex {
        &self.vertices[id]
    }

    pub fn kind(&self, id: VertexId) -> VertexKind {
        self.vertices[id].kind
    }

    pub fn ids_of_kind(&self, kind: VertexKind) -> Vec<VertexId> {
        self.vertices
            .iter()
            .filter(|v| v.kind == kind)
            .map(|v| v.id)
            .collect()
    }

    /// Edge between `a` and `b` with marks returned in (a, b) order.
    pub fn edge(&self, a: VertexId, b: VertexId) -> Option<EdgeView> {
        let key = if a < b { (a, b) } else { (b, a) };
        self.edges.get(&key).map(|data| {
            if a < b {
                EdgeView {
                    a,
                    b,
                    mark_a: data.mark_u,
                    mark_b: data.mark_v,
                    triangle: data.triangle,
                }
            } else {
                EdgeView {
                    a,
                    b,
                    mark_a: data.mark_v,
                    mark_b: data.mark_u,
                    triangle: data.triangle,
                }
            }
        })
    }

    pub fn adjacent(&self, a: VertexId, b: VertexId) -> bool {
        let key = if a < b { (a, b) } else { (b, a) };
        self.edges.contains_key(&key)
    }

    /// Edges in canonical (u < v) order.
    pub fn edges(&self) -> impl Iterator<Item = EdgeView> + '_ {
        self.edges.iter().map(|(&(u, v), data)| EdgeView {
            a: u,
            b: v,
            mark_a: data.mark_u,
            mark_b: data.mark_v,
            triangle: data.triangle,
        })
    }

    /// Neighbors of `v` in ascending order, with the edge viewed from `v`.
    pub fn incident(&self, v: VertexId) -> Vec<EdgeView> {
        let mut out = Vec::new();
        for e in self.edges() {
            if e.a == v {
                out.push(e);
            } else if e.b == v {
                out.push(EdgeView {
                    a: e.b,
                    b: e.a,
                    mark_a: e.mark_b,
                    mark_b: e.mark_a,
                    triangle: e.triangle,
                });
            }
        }
        out
    }

    pub fn neighbors(&self, v: VertexId) -> Vec<VertexId> {
        self.incident(v).into_iter().map(|e| e.b).collect()
    }

    /// Parents of `v`: vertices `u` with a plain directed edge `u -> v`.
    pub fn parents(&self, v: VertexId) -> Vec<VertexId> {
        self.incident(v)
            .into_iter()
            .filter(|e| e.mark_a == Mark::Arrowhead && e.mark_b == Mark::Tail && !e.triangle)
            .map(|e| e.b)
            .collect()
    }

    pub fn children(&self, v: VertexId) -> Vec<VertexId> {
        self.incident(v)
            .into_iter()
            .filter(|e| e.mark_a == Mark::Tail && e.mark_b == Mark::Arrowhead && !e.triangle)
            .map(|e| e.b)
            .collect()
    }

    /// Spouses of `v`: neighbors joined by a bidirected edge.
    pub fn spouses(&self, v: VertexId) -> Vec<VertexId> {
        self.incident(v)
            .into_iter()
            .filter(|e| e.mark_a == Mark::Arrowhead && e.mark_b == Mark::Arrowhead)
            .map(|e| e.b)
            .collect()
    }

    /// Neighbors of `v` joined by an undirected (tail-tail, untagged) edge.
    pub fn undirected_neighbors(&self, v: VertexId) -> Vec<VertexId> {
        self.incident(v)
            .into_iter()
            .filter(|e| e.mark_a == Mark::Tail && e.mark_b == Mark::Tail && !e.triangle)
            .map(|e| e.b)
            .collect()
    }
}
