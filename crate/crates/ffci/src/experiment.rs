//! Experiment orchestration: a grid of (variable count, sample size) cells,
//! each repeated over seeds, with per-cell persistence and resume.
//!
//! Cells run as independent jobs; every artifact write is
//! write-temp-then-rename so an interrupted run never leaves a torn cell.
//! A completed cell drops a manifest and is skipped on rerun.

use crate::citest::{DataProvider, TestMethod};
use crate::classes::restrict_to_observed;
use crate::engine::{f_fci, f_fci_oracle, FfciOptions};
use crate::json::GraphJson;
use crate::metrics::{dag_metrics, selection_accuracy};
use crate::sim::{calibrate_interval, random_structure, sample_all_regimes, SimConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("empty experiment grid")]
    EmptyGrid,
    #[error("sim: {0}")]
    Sim(#[from] crate::sim::SimError),
    #[error("ci: {0}")]
    Ci(#[from] crate::citest::CiError),
    #[error("engine: {0}")]
    Engine(#[from] crate::engine::EngineError),
    #[error("metrics: {0}")]
    Metrics(#[from] crate::metrics::MetricsError),
    #[error("serialize: {0}")]
    Serde(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Oracle,
    Data,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub n_observed: Vec<usize>,
    pub sample_sizes: Vec<usize>,
    pub repetitions: usize,
    pub backend: Backend,
    pub base: SimConfig,
    pub alpha: f64,
    pub options: FfciOptions,
    pub pilot: usize,
}

impl Default for ExperimentPlan {
    fn default() -> Self {
        Self {
            n_observed: vec![10, 15, 20, 25],
            sample_sizes: vec![500, 1000, 1500, 2000],
            repetitions: 10,
            backend: Backend::Data,
            base: SimConfig::default(),
            alpha: 0.05,
            options: FfciOptions::default(),
            pilot: 4000,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RepMetrics {
    pub rep: usize,
    pub seed: u64,
    pub dag_precision: f64,
    pub dag_recall: f64,
    pub dag_f1: f64,
    pub dag_shd: usize,
    pub selection_accuracy: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellResult {
    pub n_observed: usize,
    pub n_samples: usize,
    pub backend: Backend,
    pub reps: Vec<RepMetrics>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MeanVar {
    pub mean: f64,
    pub var: f64,
}

fn mean_var(values: impl Iterator<Item = f64> + Clone) -> MeanVar {
    let n = values.clone().count().max(1) as f64;
    let mean = values.clone().sum::<f64>() / n;
    // Population variance, matching the reported +/- convention.
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    MeanVar { mean, var }
}

impl CellResult {
    pub fn precision(&self) -> MeanVar {
        mean_var(self.reps.iter().map(|r| r.dag_precision))
    }
    pub fn recall(&self) -> MeanVar {
        mean_var(self.reps.iter().map(|r| r.dag_recall))
    }
    pub fn f1(&self) -> MeanVar {
        mean_var(self.reps.iter().map(|r| r.dag_f1))
    }
    pub fn shd(&self) -> MeanVar {
        mean_var(self.reps.iter().map(|r| r.dag_shd as f64))
    }
    pub fn selection(&self) -> MeanVar {
        mean_var(self.reps.iter().map(|r| r.selection_accuracy))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub cells: Vec<CellResult>,
}

pub const SUMMARY_HEADER: &str = "n_observed,n_samples,repetitions,backend,dag_precision_mean,dag_precision_var,dag_recall_mean,dag_recall_var,dag_f1_mean,dag_f1_var,dag_shd_mean,dag_shd_var,selection_accuracy_mean,selection_accuracy_var";

impl ExperimentSummary {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(SUMMARY_HEADER);
        out.push('\n');
        for c in &self.cells {
            let p = c.precision();
            let r = c.recall();
            let f = c.f1();
            let s = c.shd();
            let a = c.selection();
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
                c.n_observed,
                c.n_samples,
                c.reps.len(),
                match c.backend {
                    Backend::Oracle => "oracle",
                    Backend::Data => "data",
                },
                p.mean, p.var, r.mean, r.var, f.mean, f.var, s.mean, s.var, a.mean, a.var
            ));
        }
        out
    }
}

fn rep_seed(base: u64, n_observed: usize, n_samples: usize, rep: usize) -> u64 {
    let mut z = base
        .wrapping_add((n_observed as u64).wrapping_mul(0xA076_1D64_78BD_642F))
        .wrapping_add((n_samples as u64).wrapping_mul(0xE703_7ED1_A0B4_28DB))
        .wrapping_add((rep as u64).wrapping_mul(0x8EBC_6AF0_9C88_C6E3));
    z = (z ^ (z >> 32)).wrapping_mul(0xD6E8_FEB8_6659_FD93);
    z ^ (z >> 32)
}

/// A hard regime can push a selection score entirely outside its acceptance
/// band, leaving that regime without data. Such structures cannot produce a
/// dataset at all, so the repetition redraws deterministically.
const DEGENERATE_REDRAWS: u64 = 16;

fn atomic_write(path: &Path, contents: &str) -> Result<(), std::io::Error> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, contents)?;
    fs::rename(tmp, path)
}

/// Runs one repetition end to end and returns its metrics; artifacts land
/// in `cell_dir` when given.
pub fn run_rep(
    plan: &ExperimentPlan,
    n_observed: usize,
    n_samples: usize,
    rep: usize,
    cell_dir: Option<&Path>,
) -> Result<RepMetrics, ExperimentError> {
    let base_seed = rep_seed(plan.base.seed, n_observed, n_samples, rep);
    let mut attempt = 0u64;
    let (seed, spec, discovery) = loop {
        let seed = base_seed.wrapping_add(attempt.wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let cfg = SimConfig {
            n_observed,
            samples_per_regime: n_samples,
            seed,
            ..plan.base.clone()
        };
        let run = || -> Result<_, ExperimentError> {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let spec = random_structure(&cfg, &mut rng)?;
            let spec = calibrate_interval(&spec, seed, plan.pilot)?;
            let discovery = match plan.backend {
                Backend::Oracle => f_fci_oracle(&spec.aug, &plan.options)?,
                Backend::Data => {
                    let datasets = sample_all_regimes(&spec, n_samples, seed)?;
                    let targets: Vec<BTreeSet<usize>> = datasets
                        .iter()
                        .skip(1)
                        .map(|d| d.targets.iter().copied().collect())
                        .collect();
                    let tables = datasets.into_iter().map(|d| d.table).collect();
                    let provider =
                        DataProvider::new(tables, targets, plan.alpha, TestMethod::FisherZ)?;
                    f_fci(&provider, &plan.options)?
                }
            };
            Ok((spec, discovery))
        };
        match run() {
            Ok((spec, discovery)) => break (seed, spec, discovery),
            Err(ExperimentError::Sim(crate::sim::SimError::DegenerateSelection { .. }))
                if attempt < DEGENERATE_REDRAWS =>
            {
                attempt += 1;
            }
            Err(e) => return Err(e),
        }
    };

    let truth_dag = restrict_to_observed(spec.aug.graph());
    let mut report = dag_metrics(&discovery.fpag, &truth_dag)?;
    let sel = selection_accuracy(&discovery.fpag, &spec.aug)?;
    report.selection_accuracy = Some(sel);

    if let Some(dir) = cell_dir {
        fs::create_dir_all(dir)?;
        let graph_json = GraphJson::from_graph(discovery.fpag.graph())
            .to_pretty_string()
            .map_err(|e| {
                std::io::Error::other(e.to_string())
            })?;
        atomic_write(&dir.join(format!("pred_{rep}.json")), &graph_json)?;
        atomic_write(
            &dir.join(format!("truth_{rep}.json")),
            &GraphJson::from_augmented(&spec.aug)
                .to_pretty_string()
                .map_err(|e| std::io::Error::other(e.to_string()))?,
        )?;
        atomic_write(
            &dir.join(format!("trace_{rep}.jsonl")),
            &discovery.trace.to_jsonl(),
        )?;
    }

    Ok(RepMetrics {
        rep,
        seed,
        dag_precision: report.dag_precision,
        dag_recall: report.dag_recall,
        dag_f1: report.dag_f1,
        dag_shd: report.dag_shd,
        selection_accuracy: sel,
    })
}

fn cell_dir(out: &Path, n_observed: usize, n_samples: usize) -> PathBuf {
    out.join(format!("cell_v{n_observed}_n{n_samples}"))
}

/// Runs every cell of the plan, skipping cells whose manifest already
/// exists, and writes `summary.csv` at the end.
pub fn run_experiment(plan: &ExperimentPlan, out: &Path) -> Result<ExperimentSummary, ExperimentError> {
    if plan.n_observed.is_empty() || plan.sample_sizes.is_empty() || plan.repetitions == 0 {
        return Err(ExperimentError::EmptyGrid);
    }
    fs::create_dir_all(out)?;
    let grid: Vec<(usize, usize)> = plan
        .n_observed
        .iter()
        .flat_map(|&v| plan.sample_sizes.iter().map(move |&n| (v, n)))
        .collect();

    let results: Vec<Result<CellResult, ExperimentError>> = grid
        .par_iter()
        .map(|&(n_observed, n_samples)| {
            let dir = cell_dir(out, n_observed, n_samples);
            let manifest = dir.join("cell.json");
            if manifest.exists() {
                if let Ok(text) = fs::read_to_string(&manifest) {
                    if let Ok(cell) = serde_json::from_str::<CellResult>(&text) {
                        if cell.reps.len() == plan.repetitions && cell.backend == plan.backend {
                            return Ok(cell);
                        }
                    }
                }
                // Partial or stale cell: recompute it from scratch.
            }
            let mut reps = Vec::with_capacity(plan.repetitions);
            for rep in 0..plan.repetitions {
                reps.push(run_rep(plan, n_observed, n_samples, rep, Some(&dir))?);
            }
            let cell = CellResult {
                n_observed,
                n_samples,
                backend: plan.backend,
                reps,
            };
            atomic_write(&manifest, &serde_json::to_string_pretty(&cell)?)?;
            Ok(cell)
        })
        .collect();

    let mut cells = Vec::new();
    for r in results {
        cells.push(r?);
    }
    cells.sort_by_key(|c| (c.n_observed, c.n_samples));
    let summary = ExperimentSummary { cells };
    atomic_write(&out.join("summary.csv"), &summary.to_csv())?;
    Ok(summary)
}
