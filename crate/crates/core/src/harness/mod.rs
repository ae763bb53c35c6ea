//! Experiment configuration, synthetic datasets, evaluation metrics and the
//! experiment runner behind the `mdisc` binary.

mod config;
mod dataset;
mod metrics;
mod run;

pub use config::{
    build_manifold, AlgorithmSpec, BudgetParams, DatasetConfig, ExperimentConfig, ManifoldDecl,
    ManifoldKind, PatternSource, ProjectionConfig, RemdParams,
};
pub use dataset::{generate_dataset, Dataset};
pub use metrics::{
    closest_sample_share, oracle_points, registration_from, registration_metrics, Shares,
};
pub use run::{
    evaluate_experiment, repetition_dataset, repetition_seed, run_experiment, Context, EvalReport,
    RegistrationRow, ResultRow, TransferRow,
};
