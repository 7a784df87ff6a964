//! Benchmarks, metrics, reports and gradient certification.

pub mod gradcheck;
pub mod metrics;
pub mod report;
pub mod runner;

pub use gradcheck::{run_gradcheck, GradcheckConfig, GradcheckReport};
pub use metrics::{accumulate_iou, delta_error, miou, IouAccumulator, IouCounts, Summary};
pub use runner::{
    ablation_suite, compare_variants, perturbation_sweep, run_benchmark, tpi_sweep,
    BenchmarkReport, Comparison, IndexSource, LabeledTask, SweepTable, SynthSource,
    TaskDirSource, TaskSource, Variant,
};
