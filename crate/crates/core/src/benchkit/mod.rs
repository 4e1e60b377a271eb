//! Benchmark support: synthetic data, filter workloads, exact ground truth and
//! metric aggregation.

pub mod metrics;
pub mod synth;
pub mod truth;
pub mod workload;

pub use metrics::{evaluate_run, recall, recall_unclamped, run_sweep, write_metrics_csv, MetricsRow, RunMetrics, CSV_HEADER};
pub use synth::{gen_metadata, gen_metadata_with, GaussianMixture, MetaDistribution, MetaGenParams};
pub use truth::{ground_truth, GroundTruth};
pub use workload::{gen_workload, QuerySet, Shape, Workload, WorkloadMeta};
