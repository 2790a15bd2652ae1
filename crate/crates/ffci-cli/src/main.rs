//! Command-line surface: simulation, discovery, equivalence checking,
//! evaluation, experiment orchestration, and trace inspection.
//!
//! Exit codes: 0 success, 2 contract violation (bad inputs, mismatched
//! schemas, invalid graphs), 3 degenerate data (selection keeps too little).

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand};
use ffci::citest::{ci_test, DataProvider, TestMethod};
use ffci::engine::{f_fci, f_fci_oracle, DiscoveryTrace, FfciOptions};
use ffci::experiment::{run_experiment, ExperimentPlan};
use ffci::json::{export_dot, GraphJson};
use ffci::metrics::{dag_metrics, selection_accuracy};
use ffci::oracle::{fi_markov_equivalent, oracle_ci, CiQuery, QueryLhs};
use ffci::sim::{calibrate_interval, random_structure, sample, Dataset, SimConfig, StructureSpecJson};
use ffci::{FPag, InterventionKind};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "ffci", version, about = "Causal discovery under latent confounding and post-treatment selection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a ground-truth structure and write per-regime datasets.
    Simulate {
        /// Simulation config JSON; defaults are used when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Pilot size for acceptance-interval calibration.
        #[arg(long, default_value_t = 4000)]
        pilot: usize,
    },
    /// Learn a graph from a dataset directory written by `simulate`.
    Discover {
        #[arg(long)]
        data: PathBuf,
        /// Optional explicit target sets (JSON array of arrays of column
        /// indices); defaults to the dataset manifests.
        #[arg(long)]
        targets: Option<PathBuf>,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Disable the path-induced edge refinement pass.
        #[arg(long)]
        no_refine: bool,
        /// Conditional-permutation indicator tests instead of Fisher-z.
        #[arg(long)]
        permutation: bool,
        /// Skeleton conditioning-set cap.
        #[arg(long, default_value_t = 3)]
        max_cond: usize,
    },
    /// Learn a graph from a ground-truth file using oracle independence.
    OracleDiscover {
        #[arg(long)]
        truth: PathBuf,
        /// Override the truth file's target sets (JSON array of arrays of
        /// observed vertex ids).
        #[arg(long)]
        targets: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long)]
        no_refine: bool,
    },
    /// Check fine-grained interventional equivalence of two ground truths.
    Equiv {
        first: PathBuf,
        second: PathBuf,
    },
    /// Score a learned graph against a ground-truth file.
    Eval {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        truth: PathBuf,
    },
    /// Run an experiment plan over a grid of configurations.
    Run {
        #[arg(long)]
        plan: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render a graph file as DOT.
    ExportDot {
        graph: PathBuf,
        out: PathBuf,
    },
    /// Filter a discovery trace by a variable pair.
    Explain {
        trace: PathBuf,
        /// Comma-separated variable names, e.g. X1,X2.
        #[arg(long)]
        pair: String,
    },
    /// One oracle separation query against a ground-truth file.
    Query {
        #[arg(long)]
        truth: PathBuf,
        /// Left side: a variable name or psi<k>.
        #[arg(long)]
        lhs: String,
        #[arg(long)]
        rhs: String,
        /// Comma-separated conditioning variable names.
        #[arg(long, default_value = "")]
        cond: String,
    },
    /// One finite-sample CI test on a dataset directory.
    Citest {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        x: String,
        #[arg(long)]
        y: String,
        #[arg(long, default_value = "")]
        cond: String,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        /// Regime to test on (default observational).
        #[arg(long, default_value_t = 0)]
        regime: usize,
    },
}

fn read_graph(path: &Path) -> Result<GraphJson> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))?;
    Ok(GraphJson::from_json_str(&text)?)
}

fn name_to_col(names: &[String], name: &str) -> Result<usize> {
    names
        .iter()
        .position(|n| n == name)
        .ok_or_else(|| anyhow!("unknown variable {name}; available: {names:?}"))
}

fn parse_cond(names: &[String], cond: &str) -> Result<Vec<usize>> {
    cond.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| name_to_col(names, s.trim()))
        .collect()
}

fn load_provider(
    data: &Path,
    targets_file: Option<&Path>,
    alpha: f64,
    method: TestMethod,
) -> Result<(DataProvider, Vec<String>)> {
    let datasets = Dataset::read_dir(data)?;
    if datasets.is_empty() || datasets[0].regime != 0 {
        bail!("dataset directory must contain an observational regime_0.csv");
    }
    let names = datasets[0].table.names().to_vec();
    let targets: Vec<BTreeSet<usize>> = match targets_file {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            let raw: Vec<Vec<usize>> = serde_json::from_str(&text)?;
            raw.into_iter().map(|t| t.into_iter().collect()).collect()
        }
        None => datasets
            .iter()
            .skip(1)
            .map(|d| d.targets.iter().copied().collect())
            .collect(),
    };
    let tables = datasets.into_iter().map(|d| d.table).collect();
    Ok((DataProvider::new(tables, targets, alpha, method)?, names))
}

fn write_discovery(
    discovery: &ffci::Discovery,
    out: &Path,
    trace: Option<&Path>,
) -> Result<()> {
    let json = GraphJson::from_graph(discovery.fpag.graph()).to_pretty_string()?;
    std::fs::write(out, json)?;
    if let Some(path) = trace {
        std::fs::write(path, discovery.trace.to_jsonl())?;
    }
    println!("wrote {}", out.display());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { config, out, pilot } => {
            let cfg: SimConfig = match config {
                Some(path) => serde_json::from_str(&std::fs::read_to_string(path)?)?,
                None => SimConfig::default(),
            };
            cfg.validate()?;
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            let spec = random_structure(&cfg, &mut rng)?;
            let spec = if spec.selection_scores.is_empty() {
                spec
            } else {
                calibrate_interval(&spec, cfg.seed, pilot)?
            };
            std::fs::create_dir_all(&out)?;
            for regime in 0..=spec.aug.n_regimes() {
                let ds = sample(&spec, regime, cfg.samples_per_regime, cfg.seed)?;
                ds.write_to_dir(&out)?;
            }
            let spec_json = serde_json::to_string_pretty(&StructureSpecJson::from_spec(&spec))?;
            std::fs::write(out.join("structure.json"), spec_json)?;
            let truth = GraphJson::from_augmented(&spec.aug).to_pretty_string()?;
            std::fs::write(out.join("truth.json"), truth)?;
            println!(
                "wrote {} regimes of {} rows to {}",
                spec.aug.n_regimes() + 1,
                cfg.samples_per_regime,
                out.display()
            );
            Ok(())
        }
        Command::Discover {
            data,
            targets,
            alpha,
            out,
            trace,
            no_refine,
            permutation,
            max_cond,
        } => {
            let method = if permutation {
                TestMethod::Permutation { n_perm: 500 }
            } else {
                TestMethod::FisherZ
            };
            let (provider, _names) = load_provider(&data, targets.as_deref(), alpha, method)?;
            let opts = FfciOptions {
                skeleton_cond_cap: Some(max_cond),
                refine: !no_refine,
                ..FfciOptions::default()
            };
            let discovery = f_fci(&provider, &opts)?;
            write_discovery(&discovery, &out, trace.as_deref())
        }
        Command::OracleDiscover {
            truth,
            targets,
            out,
            trace,
            no_refine,
        } => {
            let mut aug = read_graph(&truth)?.to_augmented()?;
            if let Some(path) = targets {
                let raw: Vec<Vec<usize>> =
                    serde_json::from_str(&std::fs::read_to_string(path)?)?;
                let kinds = vec![InterventionKind::Hard; raw.len()];
                aug = aug.with_targets(&raw, &kinds)?;
            }
            let opts = FfciOptions {
                refine: !no_refine,
                ..FfciOptions::default()
            };
            let discovery = f_fci_oracle(&aug, &opts)?;
            write_discovery(&discovery, &out, trace.as_deref())
        }
        Command::Equiv { first, second } => {
            let a = read_graph(&first)?.to_augmented()?;
            let b = read_graph(&second)?.to_augmented()?;
            let cert = fi_markov_equivalent(&a, &b)?;
            println!("{}", serde_json::to_string_pretty(&cert)?);
            Ok(())
        }
        Command::Eval { pred, truth } => {
            let pred_graph = FPag::from_graph(read_graph(&pred)?.to_graph()?)?;
            let truth_json = read_graph(&truth)?;
            let mut report = if truth_json.targets.is_some() {
                let aug = truth_json.to_augmented()?;
                let observed = ffci::restrict_to_observed(aug.graph());
                let mut r = dag_metrics(&pred_graph, &observed)?;
                r.selection_accuracy = Some(selection_accuracy(&pred_graph, &aug)?);
                r
            } else {
                dag_metrics(&pred_graph, &truth_json.to_graph()?)?
            };
            report.edges.retain(|e| e.predicted != e.truth);
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(())
        }
        Command::Run { plan, out } => {
            let plan: ExperimentPlan = serde_json::from_str(&std::fs::read_to_string(plan)?)?;
            let summary = run_experiment(&plan, &out)?;
            print!("{}", summary.to_csv());
            println!("summary written to {}", out.join("summary.csv").display());
            Ok(())
        }
        Command::ExportDot { graph, out } => {
            let g = read_graph(&graph)?.to_graph()?;
            std::fs::write(&out, export_dot(&g))?;
            println!("wrote {}", out.display());
            Ok(())
        }
        Command::Explain { trace, pair } => {
            let text = std::fs::read_to_string(&trace)?;
            let trace = DiscoveryTrace::from_jsonl(&text)?;
            let wanted: Vec<&str> = pair.split(',').map(str::trim).collect();
            if wanted.len() != 2 {
                bail!("--pair expects two comma-separated names");
            }
            for record in &trace.records {
                let names = record.mentions();
                if wanted.iter().all(|w| names.contains(w)) {
                    println!("{}", serde_json::to_string(record)?);
                }
            }
            Ok(())
        }
        Command::Query { truth, lhs, rhs, cond } => {
            let aug = read_graph(&truth)?.to_augmented()?;
            let names: Vec<String> = aug
                .observed()
                .iter()
                .map(|&v| aug.graph().vertex(v).name.clone())
                .collect();
            let observed = aug.observed();
            let rhs_col = observed[name_to_col(&names, &rhs)?];
            let cond_cols: Vec<usize> = parse_cond(&names, &cond)?
                .into_iter()
                .map(|c| observed[c])
                .collect();
            let query = if let Some(k) = lhs.strip_prefix("psi") {
                let regime: usize = k.parse().context("parsing regime index")?;
                CiQuery {
                    lhs: QueryLhs::Psi(regime),
                    rhs: [rhs_col].into_iter().collect(),
                    cond: cond_cols.into_iter().collect(),
                }
            } else {
                let lhs_col = observed[name_to_col(&names, &lhs)?];
                CiQuery::vars([lhs_col], [rhs_col], cond_cols)
            };
            let independent = oracle_ci(&aug, &query)?;
            println!(
                "{}",
                serde_json::json!({ "lhs": lhs, "rhs": rhs, "cond": cond, "independent": independent })
            );
            Ok(())
        }
        Command::Citest {
            data,
            x,
            y,
            cond,
            alpha,
            regime,
        } => {
            let datasets = Dataset::read_dir(&data)?;
            let ds = datasets
                .iter()
                .find(|d| d.regime == regime)
                .ok_or_else(|| anyhow!("regime {regime} not found"))?;
            let names = ds.table.names().to_vec();
            let result = ci_test(
                &ds.table,
                name_to_col(&names, &x)?,
                name_to_col(&names, &y)?,
                &parse_cond(&names, &cond)?,
                alpha,
            )?;
            println!("{}", serde_json::to_string_pretty(&result)?);
            Ok(())
        }
    }
}

/// Maps failures onto the documented exit codes.
fn classify(err: &anyhow::Error) -> u8 {
    let chain = format!("{err:#}");
    if chain.contains("keeps fewer than 1%") || chain.contains("degenerate") {
        return 3;
    }
    if chain.contains("invalid")
        || chain.contains("mismatch")
        || chain.contains("unknown")
        || chain.contains("must contain")
        || chain.contains("violation")
        || chain.contains("different intervention targets")
    {
        return 2;
    }
    1
}

fn main() -> ExitCode {
    // Dying quietly on a closed pipe beats a panic trace under `| head`.
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(classify(&err))
        }
    }
}
