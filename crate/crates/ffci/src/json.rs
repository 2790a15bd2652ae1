//! Graph file format and DOT rendering.
//!
//! Vertices are written in canonical (kind rank, id) order and edges keyed
//! by unordered pair in ascending order, so serialization is deterministic.
//! `targets`/`intervention_kinds` are present only for ground-truth files.

use crate::classes::{augment, AugmentedDag, ClassError, Dag, InterventionKind};
use crate::graph::{GraphError, Mark, MixedGraph, Vertex, VertexId, VertexKind};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("graph: {0}")]
    Graph(#[from] GraphError),
    #[error("class: {0}")]
    Class(#[from] ClassError),
    #[error("vertex ids are not a permutation of 0..{0}")]
    BadIds(usize),
    #[error("indicator count {indicators} does not match target count {targets}")]
    IndicatorMismatch { indicators: usize, targets: usize },
    #[error("graph file has no intervention targets")]
    MissingTargets,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VertexJson {
    pub id: VertexId,
    pub kind: VertexKind,
    pub name: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EdgeJson {
    pub u: VertexId,
    pub v: VertexId,
    pub mark_u: Mark,
    pub mark_v: Mark,
    #[serde(default)]
    pub triangle: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GraphJson {
    pub vertices: Vec<VertexJson>,
    pub edges: Vec<EdgeJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub targets: Option<Vec<Vec<VertexId>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intervention_kinds: Option<Vec<InterventionKind>>,
}

impl GraphJson {
    pub fn from_graph(g: &MixedGraph) -> Self {
        let mut vertices: Vec<VertexJson> = g
            .vertices()
            .iter()
            .map(|v| VertexJson {
                id: v.id,
                kind: v.kind,
                name: v.name.clone(),
            })
            .collect();
        vertices.sort_by_key(|v| (v.kind.rank(), v.id));
        let edges = g
            .edges()
            .map(|e| EdgeJson {
                u: e.a,
                v: e.b,
                mark_u: e.mark_a,
                mark_v: e.mark_b,
                triangle: e.triangle,
            })
            .collect();
        Self {
            vertices,
            edges,
            targets: None,
            intervention_kinds: None,
        }
    }

    pub fn from_augmented(aug: &AugmentedDag) -> Self {
        let mut out = Self::from_graph(aug.graph());
        out.targets = Some(
            aug.targets()
                .iter()
                .map(|t| t.iter().copied().collect())
                .collect(),
        );
        out.intervention_kinds = Some(aug.kinds().to_vec());
        out
    }

    pub fn to_graph(&self) -> Result<MixedGraph, FormatError> {
        let n = self.vertices.len();
        let mut slots: Vec<Option<Vertex>> = vec![None; n];
        for v in &self.vertices {
            if v.id >= n || slots[v.id].is_some() {
                return Err(FormatError::BadIds(n));
            }
            slots[v.id] = Some(Vertex {
                id: v.id,
                kind: v.kind,
                name: v.name.clone(),
            });
        }
        let vertices = slots.into_iter().map(Option::unwrap).collect();
        let mut g = MixedGraph::new(vertices)?;
        for e in &self.edges {
            g.add_edge(e.u, e.v, e.mark_u, e.mark_v, e.triangle)?;
        }
        Ok(g)
    }

    /// Reads a ground-truth structural model. Accepts either a base DAG over
    /// observed/latent/selection vertices (noise and indicators are added
    /// here) or a fully augmented graph (reconstructed as-is).
    pub fn to_augmented(&self) -> Result<AugmentedDag, FormatError> {
        let graph = self.to_graph()?;
        let targets = self.targets.clone().ok_or(FormatError::MissingTargets)?;
        let kinds = self
            .intervention_kinds
            .clone()
            .unwrap_or_else(|| vec![InterventionKind::Hard; targets.len()]);
        let has_aux = graph
            .vertices()
            .iter()
            .any(|v| matches!(v.kind, VertexKind::Noise | VertexKind::Indicator));
        if !has_aux {
            let dag = Dag::new(graph)?;
            return Ok(augment(&dag, &targets, &kinds)?);
        }
        let indicators = graph.ids_of_kind(VertexKind::Indicator);
        if indicators.len() != targets.len() {
            return Err(FormatError::IndicatorMismatch {
                indicators: indicators.len(),
                targets: targets.len(),
            });
        }
        // Rebuild from the base structure so auxiliary bookkeeping is
        // reconstructed uniformly, then check it matches the file.
        let keep: Vec<VertexId> = graph
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
        let mut remap = vec![usize::MAX; graph.n_vertices()];
        for (new_id, &old) in keep.iter().enumerate() {
            remap[old] = new_id;
        }
        let vertices = keep
            .iter()
            .enumerate()
            .map(|(new_id, &old)| Vertex {
                id: new_id,
                kind: graph.kind(old),
                name: graph.vertex(old).name.clone(),
            })
            .collect();
        let mut base = MixedGraph::new(vertices)?;
        for e in graph.edges() {
            if remap[e.a] != usize::MAX && remap[e.b] != usize::MAX {
                base.add_edge(remap[e.a], remap[e.b], e.mark_a, e.mark_b, e.triangle)?;
            }
        }
        let targets: Vec<Vec<VertexId>> = targets
            .iter()
            .map(|t| t.iter().map(|&v| remap[v]).collect())
            .collect();
        Ok(augment(&Dag::new(base)?, &targets, &kinds)?)
    }

    pub fn to_pretty_string(&self) -> Result<String, FormatError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json_str(s: &str) -> Result<Self, FormatError> {
        Ok(serde_json::from_str(s)?)
    }
}

fn dot_arrow(mark: Mark) -> &'static str {
    match mark {
        Mark::Tail => "none",
        Mark::Arrowhead => "normal",
        Mark::Circle => "odot",
        Mark::Square => "box",
    }
}

/// Deterministic DOT text. Marks map to arrow styles (tail: none,
/// arrowhead: normal, circle: odot, square: box); triangle edges are bold
/// and labeled.
pub fn export_dot(g: &MixedGraph) -> String {
    let mut out = String::from("digraph g {\n  edge [dir=both];\n");
    let mut vertices: Vec<&Vertex> = g.vertices().iter().collect();
    vertices.sort_by_key(|v| (v.kind.rank(), v.id));
    for v in vertices {
        let shape = match v.kind {
            VertexKind::Observed => "ellipse",
            VertexKind::Latent => "diamond",
            VertexKind::Selection => "doublecircle",
            VertexKind::Noise => "point",
            VertexKind::Indicator => "hexagon",
        };
        out.push_str(&format!(
            "  v{} [label=\"{}\", shape={}];\n",
            v.id, v.name, shape
        ));
    }
    for e in g.edges() {
        let extra = if e.triangle {
            ", style=bold, label=\"\u{25B2}\""
        } else {
            ""
        };
        out.push_str(&format!(
            "  v{} -> v{} [arrowtail={}, arrowhead={}{}];\n",
            e.a,
            e.b,
            dot_arrow(e.mark_a),
            dot_arrow(e.mark_b),
            extra
        ));
    }
    out.push_str("}\n");
    out
}
