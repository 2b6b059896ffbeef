//! Relevance-guided unsupervised quality-diversity search.
//!
//! The crate implements an AURORA-style loop in which behavioural descriptors
//! are learnt by an autoencoder, and a task-relevance score computed from a
//! buffer of solver-selected individuals distorts the archive metric so the
//! container gathers solutions near the regions a downstream task needs.
//! Baseline variants (AURORA, mean-streams, hand-coded) share the same loop.
//!
//! Module map:
//! - [`archive`]: unstructured container with distance threshold and size control.
//! - [`encoder`]: fully connected autoencoder and its training schedule.
//! - [`relevance`]: relevance buffer, score and directional metric.
//! - [`evolution`]: mutation, selection, variants and the main loop.
//! - [`env`]: planar rover surrogate environment.
//! - [`tasks`]: downstream task solvers and evaluation metrics.
//! - [`cli`]: config parsing, campaigns and result files.

pub mod archive;
pub mod cli;
pub mod encoder;
pub mod env;
pub mod error;
pub mod evolution;
pub mod exec;
pub mod io;
pub mod relevance;
pub mod tasks;

pub use archive::{AddOutcome, Container, ContainerParams, Individual};
pub use encoder::Encoder;
pub use env::{EnvSummary, RoverParams, SensoryData, TaskId};
pub use error::{Error, Result};
pub use evolution::{run_experiment, ExperimentConfig, MetricsLog, RunOutput, Variant, VariantSpec};
pub use relevance::{DistanceMetric, RelevanceBuffer};
