//! Experiment orchestration: TOML configs, multi-seed runs, transfer,
//! ablation and tradeoff drivers, metric files and aggregate reports.

pub mod config;
pub mod gradcheck;
pub mod metrics;
pub mod run;

pub use config::{
    ExperimentConfig, SuiteConfig, SweepConfig, SweepParam, SweepValue, TransferArm,
    TransferConfig,
};
pub use gradcheck::{gradcheck_suite, GradcheckOptions, GradcheckSummary, HeadSuite};
pub use metrics::{
    write_json, AggregateReport, CheckpointStats, MetricsLog, SeedSummary, Stat, Summary,
    METRICS_HEADER,
};
pub use run::{
    ablate, run, setup_for, sr_counterpart, tradeoff, train_seeds, train_seeds_with, transfer,
    write_outputs, ArmReport, SweepReport, SweepRow, TradeoffPoint, TradeoffReport,
    TransferReport,
};
