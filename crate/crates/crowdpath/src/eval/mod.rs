//! Evaluation harness: metrics, baselines, the benchmark runner, report
//! emitters, and synthetic scenes to run them on.

pub mod baselines;
pub mod benchmark;
pub mod metrics;
pub mod output;
pub mod synth;

pub use baselines::{linear_baseline, sim_k_baseline};
pub use benchmark::{
    collect_samples, run_benchmark, BenchmarkOptions, BenchmarkReport, EvalSample, Method,
};
pub use metrics::{ade, fde, Metrics};
