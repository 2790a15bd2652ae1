//! Ground-truth structure generation and selection-filtered sampling.
//!
//! Structures are Erdős–Rényi DAGs over the observed variables with latent
//! confounders attached to two random children each and selection vertices
//! attached to two random parents each. Each structural edge carries a
//! univariate mechanism drawn from {linear, square, sin, tanh}; a vertex is
//! the sum of its edge contributions plus exogenous noise. Selection keeps
//! the rows whose per-vertex scores fall inside calibrated quantile bands.
//!
//! Sampling is organized in fixed-size blocks, each with its own
//! seed-derived random stream, so results are bit-identical regardless of
//! how blocks are scheduled.

use crate::classes::{augment, AugmentedDag, Dag, InterventionKind};
use crate::data::Table;
use crate::graph::{MixedGraph, VertexId, VertexKind};
use crate::json::GraphJson;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("config: {0}")]
    Config(String),
    #[error("selection keeps fewer than 1% of draws ({accepted}/{drawn})")]
    DegenerateSelection { accepted: usize, drawn: usize },
    #[error("invalid regime {0}")]
    BadRegime(usize),
    #[error("class: {0}")]
    Class(#[from] crate::classes::ClassError),
    #[error("format: {0}")]
    Format(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MechanismKind {
    Linear,
    Square,
    Sin,
    Tanh,
}

impl MechanismKind {
    pub fn eval(self, x: f64) -> f64 {
        match self {
            MechanismKind::Linear => x,
            MechanismKind::Square => x * x,
            MechanismKind::Sin => x.sin(),
            MechanismKind::Tanh => x.tanh(),
        }
    }
}

/// One structural-edge term: `weight * kind(parent_value)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeMechanism {
    pub kind: MechanismKind,
    pub weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum NoiseSpec {
    /// Equal mixture of two uniform bands.
    UniformMixture { low: (f64, f64), high: (f64, f64) },
    Gaussian { mean: f64, std: f64 },
}

impl NoiseSpec {
    fn draw(&self, rng: &mut ChaCha8Rng) -> f64 {
        match *self {
            NoiseSpec::UniformMixture { low, high } => {
                let band = if rng.gen_bool(0.5) { low } else { high };
                rng.gen_range(band.0..band.1)
            }
            NoiseSpec::Gaussian { mean, std } => {
                // Box-Muller keeps the dependency surface small.
                let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
                let u2: f64 = rng.gen_range(0.0..1.0);
                mean + std * (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TargetsSpec {
    /// One singleton regime per observed variable.
    AllSingletons,
    Explicit(Vec<Vec<VertexId>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n_observed: usize,
    pub avg_degree: f64,
    /// Inclusive range for the latent-confounder count.
    pub n_latent: (usize, usize),
    /// Inclusive range for the selection-vertex count.
    pub n_selection: (usize, usize),
    pub mechanisms: Vec<MechanismKind>,
    pub noise: NoiseSpec,
    pub selection_keep_quantile: (f64, f64),
    pub samples_per_regime: usize,
    pub intervention_kind: InterventionKind,
    pub targets: TargetsSpec,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            n_observed: 10,
            avg_degree: 2.0,
            n_latent: (2, 3),
            n_selection: (2, 3),
            mechanisms: vec![
                MechanismKind::Linear,
                MechanismKind::Square,
                MechanismKind::Sin,
                MechanismKind::Tanh,
            ],
            noise: NoiseSpec::UniformMixture {
                low: (0.0, 2.0),
                high: (2.0, 4.0),
            },
            selection_keep_quantile: (0.25, 0.75),
            samples_per_regime: 1000,
            intervention_kind: InterventionKind::Hard,
            targets: TargetsSpec::AllSingletons,
            seed: 0,
        }
    }
}

impl SimConfig {
    /// Linear mechanisms with Gaussian noise; partial-correlation tests are
    /// exact on data drawn from this preset.
    pub fn linear_gaussian(n_observed: usize, seed: u64) -> Self {
        Self {
            n_observed,
            mechanisms: vec![MechanismKind::Linear],
            noise: NoiseSpec::Gaussian { mean: 2.0, std: 1.0 },
            // One-sided band: hard regimes pull scores down, so a lower
            // cutoff of zero keeps every regime's acceptance rate healthy
            // while the asymmetry keeps selection shifts mean-visible.
            selection_keep_quantile: (0.0, 0.7),
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.n_observed == 0 {
            return Err(SimError::Config("n_observed must be positive".into()));
        }
        if self.n_observed < 2 && (self.n_latent.1 > 0 || self.n_selection.1 > 0) {
            return Err(SimError::Config(
                "latent/selection attachment needs at least 2 observed variables".into(),
            ));
        }
        if self.n_latent.0 > self.n_latent.1 || self.n_selection.0 > self.n_selection.1 {
            return Err(SimError::Config("count range inverted".into()));
        }
        if self.mechanisms.is_empty() {
            return Err(SimError::Config("mechanism set is empty".into()));
        }
        let (lo, hi) = self.selection_keep_quantile;
        if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) {
            return Err(SimError::Config("keep quantiles outside [0,1]".into()));
        }
        if self.samples_per_regime == 0 {
            return Err(SimError::Config("samples_per_regime must be positive".into()));
        }
        Ok(())
    }
}

/// Acceptance interval for one selection vertex.
pub type Interval = (f64, f64);

/// Fully specified generative model: augmented structure, per-edge
/// mechanisms, selection score terms, and acceptance intervals.
#[derive(Debug, Clone)]
pub struct StructureSpec {
    pub aug: AugmentedDag,
    /// child -> ordered (parent, mechanism) terms, over observed and latent
    /// children.
    pub mechanisms: BTreeMap<VertexId, Vec<(VertexId, EdgeMechanism)>>,
    /// selection vertex -> ordered (parent, score function) terms.
    pub selection_scores: BTreeMap<VertexId, Vec<(VertexId, EdgeMechanism)>>,
    pub intervals: BTreeMap<VertexId, Interval>,
    pub noise: NoiseSpec,
    /// Mean shift added to soft-intervened targets.
    pub soft_shift: f64,
    pub keep_quantile: (f64, f64),
}

/// Selection-filtered samples for one regime.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub regime: usize,
    pub targets: Vec<usize>,
    pub kind: Option<InterventionKind>,
    /// Rows over observed variables, in observed-column order.
    pub table: Table,
    /// Draws consumed before selection, for diagnostics.
    pub pre_selection_n: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub regime: usize,
    pub targets: Vec<usize>,
    pub kind: Option<InterventionKind>,
    pub n: usize,
    pub pre_selection_n: usize,
}

fn draw_mechanism(cfg: &SimConfig, rng: &mut ChaCha8Rng) -> EdgeMechanism {
    let kind = *cfg.mechanisms.choose(rng).expect("non-empty mechanisms");
    let magnitude = rng.gen_range(0.5..1.5);
    let weight = if rng.gen_bool(0.5) { magnitude } else { -magnitude };
    EdgeMechanism { kind, weight }
}

/// Draws a ground-truth structure. Acceptance intervals start unbounded;
/// run [`calibrate_interval`] before sampling with selection.
pub fn random_structure(cfg: &SimConfig, rng: &mut ChaCha8Rng) -> Result<StructureSpec, SimError> {
    cfg.validate()?;
    let n = cfg.n_observed;
    let mut g = MixedGraph::observed(n);

    // Erdős–Rényi over a random vertex order: expected vertex degree is
    // avg_degree when each of the n(n-1)/2 pairs enters with p = d/(n-1).
    let p_edge = if n > 1 {
        (cfg.avg_degree / (n as f64 - 1.0)).min(1.0)
    } else {
        0.0
    };
    let mut order: Vec<VertexId> = (0..n).collect();
    order.shuffle(rng);
    let mut rank = vec![0usize; n];
    for (r, &v) in order.iter().enumerate() {
        rank[v] = r;
    }
    for i in 0..n {
        for j in i + 1..n {
            if rng.gen_bool(p_edge) {
                let (from, to) = if rank[i] < rank[j] { (i, j) } else { (j, i) };
                g.add_directed(from, to).unwrap();
            }
        }
    }

    let n_latent = rng.gen_range(cfg.n_latent.0..=cfg.n_latent.1);
    let n_selection = rng.gen_range(cfg.n_selection.0..=cfg.n_selection.1);
    let mut latents = Vec::new();
    for idx in 0..n_latent {
        let l = g.add_vertex(VertexKind::Latent, format!("L{}", idx + 1));
        let mut pool: Vec<VertexId> = (0..n).collect();
        pool.shuffle(rng);
        g.add_directed(l, pool[0]).unwrap();
        g.add_directed(l, pool[1]).unwrap();
        latents.push(l);
    }
    let mut selections = Vec::new();
    for idx in 0..n_selection {
        let s = g.add_vertex(VertexKind::Selection, format!("S{}", idx + 1));
        let mut pool: Vec<VertexId> = (0..n).collect();
        pool.shuffle(rng);
        g.add_directed(pool[0], s).unwrap();
        g.add_directed(pool[1], s).unwrap();
        selections.push(s);
    }

    let target_sets: Vec<Vec<VertexId>> = match &cfg.targets {
        TargetsSpec::AllSingletons => (0..n).map(|v| vec![v]).collect(),
        TargetsSpec::Explicit(t) => t.clone(),
    };
    let kinds = vec![cfg.intervention_kind; target_sets.len()];
    let aug = augment(&Dag::new(g)?, &target_sets, &kinds)?;

    // Mechanisms for structural edges among observed/latent vertices, in
    // deterministic (child, parent) order.
    let graph = aug.graph();
    let mut mechanisms: BTreeMap<VertexId, Vec<(VertexId, EdgeMechanism)>> = BTreeMap::new();
    for v in graph.vertices() {
        if !matches!(v.kind, VertexKind::Observed | VertexKind::Latent) {
            continue;
        }
        let mut terms = Vec::new();
        for p in graph.parents(v.id) {
            if matches!(graph.kind(p), VertexKind::Observed | VertexKind::Latent) {
                terms.push((p, draw_mechanism(cfg, rng)));
            }
        }
        mechanisms.insert(v.id, terms);
    }
    let mut selection_scores = BTreeMap::new();
    let mut intervals = BTreeMap::new();
    for v in graph.vertices() {
        if v.kind != VertexKind::Selection {
            continue;
        }
        let terms: Vec<(VertexId, EdgeMechanism)> = graph
            .parents(v.id)
            .into_iter()
            .map(|p| {
                let kind = *cfg.mechanisms.choose(rng).expect("non-empty mechanisms");
                (p, EdgeMechanism { kind, weight: 1.0 })
            })
            .collect();
        selection_scores.insert(v.id, terms);
        intervals.insert(v.id, (f64::NEG_INFINITY, f64::INFINITY));
    }

    Ok(StructureSpec {
        aug,
        mechanisms,
        selection_scores,
        intervals,
        noise: cfg.noise,
        soft_shift: 2.0,
        keep_quantile: cfg.selection_keep_quantile,
    })
}

fn stream_seed(seed: u64, regime: usize, block: usize) -> u64 {
    // splitmix64 over the packed ids; independent streams per block.
    let mut z = seed
        .wrapping_add((regime as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add((block as u64).wrapping_mul(0xBF58_476D_1CE4_E5B9));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

struct DrawOutput {
    /// Observed row values.
    row: Vec<f64>,
    /// Selection scores in selection-vertex order.
    scores: Vec<f64>,
}

struct Sampler<'a> {
    spec: &'a StructureSpec,
    topo: Vec<VertexId>,
    observed: Vec<VertexId>,
    selections: Vec<VertexId>,
    hard_targets: Vec<bool>,
    soft_targets: Vec<bool>,
}

impl<'a> Sampler<'a> {
    fn new(spec: &'a StructureSpec, regime: usize) -> Result<Self, SimError> {
        let graph = spec.aug.graph();
        if regime > spec.aug.n_regimes() {
            return Err(SimError::BadRegime(regime));
        }
        let topo: Vec<VertexId> = crate::classes::topological_order(graph)
            .expect("augmented graph is acyclic")
            .into_iter()
            .filter(|&v| matches!(graph.kind(v), VertexKind::Observed | VertexKind::Latent))
            .collect();
        let mut hard_targets = vec![false; graph.n_vertices()];
        let mut soft_targets = vec![false; graph.n_vertices()];
        if regime > 0 {
            let kind = spec.aug.kind_of(regime).unwrap();
            for &t in spec.aug.target_of(regime).unwrap() {
                match kind {
                    InterventionKind::Hard => hard_targets[t] = true,
                    InterventionKind::Soft => soft_targets[t] = true,
                }
            }
        }
        Ok(Self {
            spec,
            topo,
            observed: spec.aug.observed(),
            selections: spec.aug.selection_vertices(),
            hard_targets,
            soft_targets,
        })
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> DrawOutput {
        let mut values = vec![0.0f64; self.spec.aug.graph().n_vertices()];
        for &v in &self.topo {
            if self.hard_targets[v] {
                values[v] = rng.gen_range(-1.0..1.0);
                continue;
            }
            let mut x = self.spec.noise.draw(rng);
            if let Some(terms) = self.spec.mechanisms.get(&v) {
                for &(p, m) in terms {
                    x += m.weight * m.kind.eval(values[p]);
                }
            }
            if self.soft_targets[v] {
                x += self.spec.soft_shift;
            }
            values[v] = x;
        }
        let row = self.observed.iter().map(|&v| values[v]).collect();
        let scores = self
            .selections
            .iter()
            .map(|&s| {
                self.spec.selection_scores[&s]
                    .iter()
                    .map(|&(p, m)| m.weight * m.kind.eval(values[p]))
                    .sum()
            })
            .collect();
        DrawOutput { row, scores }
    }

    fn accept(&self, scores: &[f64]) -> bool {
        self.selections.iter().zip(scores).all(|(&s, &score)| {
            let (lo, hi) = self.spec.intervals[&s];
            score >= lo && score <= hi
        })
    }
}

const BLOCK_SIZE: usize = 512;
const DEGENERACY_PROBE: usize = 10_000;

/// Draws `n` post-selection rows for a regime. Oversamples in blocks until
/// `n` rows pass every acceptance interval; errors if acceptance stays
/// below 1% after a probe budget.
pub fn sample(spec: &StructureSpec, regime: usize, n: usize, seed: u64) -> Result<Dataset, SimError> {
    let sampler = Sampler::new(spec, regime)?;
    let graph = spec.aug.graph();
    let names: Vec<String> = sampler
        .observed
        .iter()
        .map(|&v| graph.vertex(v).name.clone())
        .collect();
    let mut table = Table::new(names);
    let mut accepted = 0usize;
    let mut drawn = 0usize;
    let mut pre_selection_n = 0usize;
    let mut next_block = 0usize;
    const ROUND: usize = 8;
    while accepted < n {
        let blocks: Vec<Vec<(usize, Vec<f64>)>> = (next_block..next_block + ROUND)
            .into_par_iter()
            .map(|b| {
                let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(seed, regime, b));
                let mut kept = Vec::new();
                for d in 0..BLOCK_SIZE {
                    let out = sampler.draw(&mut rng);
                    if sampler.accept(&out.scores) {
                        kept.push((d, out.row));
                    }
                }
                kept
            })
            .collect();
        for kept in blocks {
            let block_start = drawn;
            drawn += BLOCK_SIZE;
            for (d, row) in kept {
                if accepted < n {
                    table.push_row(&row).expect("row width");
                    accepted += 1;
                    pre_selection_n = block_start + d + 1;
                }
            }
        }
        next_block += ROUND;
        if accepted < n && drawn >= DEGENERACY_PROBE && accepted * 100 < drawn {
            return Err(SimError::DegenerateSelection { accepted, drawn });
        }
    }
    let pos: BTreeMap<VertexId, usize> = sampler
        .observed
        .iter()
        .enumerate()
        .map(|(i, &v)| (v, i))
        .collect();
    let (targets, kind) = if regime == 0 {
        (Vec::new(), None)
    } else {
        (
            spec.aug
                .target_of(regime)
                .unwrap()
                .iter()
                .map(|v| pos[v])
                .collect(),
            spec.aug.kind_of(regime),
        )
    };
    Ok(Dataset {
        regime,
        targets,
        kind,
        table,
        pre_selection_n,
    })
}

/// Draws an unselected pilot and pins each acceptance interval to the
/// configured quantile band of its empirical score distribution.
pub fn calibrate_interval(
    spec: &StructureSpec,
    seed: u64,
    n_pilot: usize,
) -> Result<StructureSpec, SimError> {
    if n_pilot < 100 {
        return Err(SimError::Config(format!(
            "pilot of {n_pilot} is too small, need at least 100"
        )));
    }
    let (lo_q, hi_q) = spec.keep_quantile;
    if lo_q >= hi_q {
        return Err(SimError::DegenerateSelection {
            accepted: 0,
            drawn: n_pilot,
        });
    }
    let sampler = Sampler::new(spec, 0)?;
    let mut scores: Vec<Vec<f64>> = vec![Vec::with_capacity(n_pilot); sampler.selections.len()];
    let n_blocks = n_pilot.div_ceil(BLOCK_SIZE);
    let blocks: Vec<Vec<Vec<f64>>> = (0..n_blocks)
        .into_par_iter()
        .map(|b| {
            // Calibration streams are offset so they never overlap sampling.
            let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(seed ^ 0xCA11_B0A7, 0, b));
            let mut out = Vec::with_capacity(BLOCK_SIZE);
            for _ in 0..BLOCK_SIZE {
                out.push(sampler.draw(&mut rng).scores);
            }
            out
        })
        .collect();
    let mut total = 0usize;
    'outer: for block in blocks {
        for row in block {
            for (dst, v) in scores.iter_mut().zip(row) {
                dst.push(v);
            }
            total += 1;
            if total >= n_pilot {
                break 'outer;
            }
        }
    }
    let quantile = |sorted: &[f64], q: f64| -> f64 {
        let idx = ((sorted.len() - 1) as f64 * q).round() as usize;
        sorted[idx.min(sorted.len() - 1)]
    };
    let mut out = spec.clone();
    for (i, &s) in sampler.selections.iter().enumerate() {
        let mut col = scores[i].clone();
        col.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let lo = if lo_q <= 0.0 {
            f64::NEG_INFINITY
        } else {
            quantile(&col, lo_q)
        };
        let hi = if hi_q >= 1.0 {
            f64::INFINITY
        } else {
            quantile(&col, hi_q)
        };
        out.intervals.insert(s, (lo, hi));
    }
    Ok(out)
}

/// Samples every regime (0..=K) of a calibrated structure.
pub fn sample_all_regimes(
    spec: &StructureSpec,
    n: usize,
    seed: u64,
) -> Result<Vec<Dataset>, SimError> {
    (0..=spec.aug.n_regimes())
        .map(|k| sample(spec, k, n, seed))
        .collect()
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
struct MechanismTermJson {
    child: VertexId,
    parent: VertexId,
    kind: MechanismKind,
    weight: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct IntervalJson {
    selection: VertexId,
    lo: f64,
    hi: f64,
}

/// Graph JSON plus the mechanisms block.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StructureSpecJson {
    pub graph: GraphJson,
    mechanisms: Vec<MechanismTermJson>,
    selection_scores: Vec<MechanismTermJson>,
    intervals: Vec<IntervalJson>,
    noise: NoiseSpec,
    soft_shift: f64,
    keep_quantile: (f64, f64),
}

impl StructureSpecJson {
    pub fn from_spec(spec: &StructureSpec) -> Self {
        let term = |(child, terms): (&VertexId, &Vec<(VertexId, EdgeMechanism)>)| {
            terms
                .iter()
                .map(|&(parent, m)| MechanismTermJson {
                    child: *child,
                    parent,
                    kind: m.kind,
                    weight: m.weight,
                })
                .collect::<Vec<_>>()
        };
        Self {
            graph: GraphJson::from_augmented(&spec.aug),
            mechanisms: spec.mechanisms.iter().flat_map(term).collect(),
            selection_scores: spec.selection_scores.iter().flat_map(term).collect(),
            intervals: spec
                .intervals
                .iter()
                .map(|(&selection, &(lo, hi))| IntervalJson { selection, lo, hi })
                .collect(),
            noise: spec.noise,
            soft_shift: spec.soft_shift,
            keep_quantile: spec.keep_quantile,
        }
    }

    pub fn to_spec(&self) -> Result<StructureSpec, SimError> {
        let aug = self
            .graph
            .to_augmented()
            .map_err(|e| SimError::Format(e.to_string()))?;
        let mut mechanisms: BTreeMap<VertexId, Vec<(VertexId, EdgeMechanism)>> = BTreeMap::new();
        for t in &self.mechanisms {
            mechanisms.entry(t.child).or_default().push((
                t.parent,
                EdgeMechanism {
                    kind: t.kind,
                    weight: t.weight,
                },
            ));
        }
        let mut selection_scores: BTreeMap<VertexId, Vec<(VertexId, EdgeMechanism)>> =
            BTreeMap::new();
        for t in &self.selection_scores {
            selection_scores.entry(t.child).or_default().push((
                t.parent,
                EdgeMechanism {
                    kind: t.kind,
                    weight: t.weight,
                },
            ));
        }
        // Parentless vertices have no flat terms; restore their entries.
        for v in aug.graph().vertices() {
            match v.kind {
                VertexKind::Observed | VertexKind::Latent => {
                    mechanisms.entry(v.id).or_default();
                }
                VertexKind::Selection => {
                    selection_scores.entry(v.id).or_default();
                }
                _ => {}
            }
        }
        let intervals = self
            .intervals
            .iter()
            .map(|iv| (iv.selection, (iv.lo, iv.hi)))
            .collect();
        Ok(StructureSpec {
            aug,
            mechanisms,
            selection_scores,
            intervals,
            noise: self.noise,
            soft_shift: self.soft_shift,
            keep_quantile: self.keep_quantile,
        })
    }
}

impl Dataset {
    pub fn manifest(&self) -> DatasetManifest {
        DatasetManifest {
            regime: self.regime,
            targets: self.targets.clone(),
            kind: self.kind,
            n: self.table.n_rows(),
            pre_selection_n: self.pre_selection_n,
        }
    }

    /// Writes `regime_<k>.csv` and its JSON manifest sidecar.
    pub fn write_to_dir(&self, dir: &std::path::Path) -> Result<(), SimError> {
        std::fs::create_dir_all(dir)?;
        let csv = dir.join(format!("regime_{}.csv", self.regime));
        let man = dir.join(format!("regime_{}.manifest.json", self.regime));
        std::fs::write(csv, self.table.to_csv_string())?;
        let manifest = serde_json::to_string_pretty(&self.manifest())
            .map_err(|e| SimError::Format(e.to_string()))?;
        std::fs::write(man, manifest)?;
        Ok(())
    }

    /// Loads all `regime_*.csv` datasets from a directory, ordered by regime.
    pub fn read_dir(dir: &std::path::Path) -> Result<Vec<Dataset>, SimError> {
        let mut regimes = Vec::new();
        for entry in std::fs::read_dir(dir)? {
            let path = entry?.path();
            let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
            if let Some(stem) = name.strip_prefix("regime_").and_then(|s| s.strip_suffix(".csv")) {
                if let Ok(k) = stem.parse::<usize>() {
                    regimes.push((k, path));
                }
            }
        }
        regimes.sort();
        let mut out = Vec::new();
        for (k, csv_path) in regimes {
            let table = Table::from_csv_str(&std::fs::read_to_string(&csv_path)?)
                .map_err(|e| SimError::Format(e.to_string()))?;
            let man_path = csv_path.with_file_name(format!("regime_{k}.manifest.json"));
            let manifest: DatasetManifest =
                serde_json::from_str(&std::fs::read_to_string(man_path)?)
                    .map_err(|e| SimError::Format(e.to_string()))?;
            out.push(Dataset {
                regime: k,
                targets: manifest.targets,
                kind: manifest.kind,
                table,
                pre_selection_n: manifest.pre_selection_n,
            });
        }
        Ok(out)
    }
}
