//! Accuracy metrics, reports and the feature ablation.

pub mod ablation;
pub mod metrics;
pub mod report;

pub use ablation::{fit_model, run_ablation, run_config, AblationResult, ConfigRun, ExperimentParams};
pub use metrics::{confusion, error_rate_above, metrics, round2, ConfusionMatrix, ErrorRateMode, Metrics};
pub use report::{
    error_flags, evaluate, export_error_las, reports_to_csv, reports_to_table, EvalOptions, EvalReport, REPORT_CSV_HEADER,
};
