//! Causal structure learning from joint observational and interventional
//! data in the presence of latent confounders and post-treatment selection.
//!
//! The crate provides:
//!
//! - typed mixed graphs and the graph classes used throughout
//!   ([`graph`], [`classes`]): DAGs, augmented structural models, maximal
//!   ancestral graphs, and learned graphs with square marks and
//!   triangle-tagged path-induced edges;
//! - separation primitives ([`separation`]): ancestry, d-/m-separation,
//!   inducing paths, regime mutilation;
//! - ground-truth engines ([`oracle`]): oracle CI answers, MAG
//!   construction, and fine-grained interventional equivalence checking;
//! - a structural-model simulator with selection filtering ([`sim`]);
//! - finite-sample CI tests behind a provider interface ([`citest`]);
//! - the discovery engine ([`engine`]) that learns a graph over the
//!   observed variables from either oracle answers or data;
//! - evaluation metrics ([`metrics`]) and an experiment harness
//!   ([`experiment`]).

pub mod citest;
pub mod classes;
pub mod data;
pub mod engine;
pub mod experiment;
pub mod graph;
pub mod json;
pub mod metrics;
pub mod oracle;
pub mod separation;
pub mod sim;

pub use citest::{CiProvider, CiResult, DataProvider, OracleProvider, TestMethod};
pub use classes::{
    augment, restrict_to_observed, validate, AugmentedDag, Dag, FPag, GraphClass,
    InterventionKind, Mag, ValidationReport,
};
pub use engine::{f_fci, f_fci_oracle, CiTuple, Discovery, FfciOptions, PairOrientation};
pub use graph::{Mark, MixedGraph, VertexId, VertexKind};
pub use oracle::{fi_markov_equivalent, mag_of, oracle_ci, CiQuery, EquivalenceCertificate};
pub use sim::{calibrate_interval, random_structure, sample, Dataset, SimConfig, StructureSpec};
