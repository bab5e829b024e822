//! Benchmark performance functions, reference oracles, quality metrics and
//! the replicated-experiment protocol.

mod experiment;
mod functions;
mod metrics;

pub use experiment::{
    run_experiment, Aggregates, Algorithm, ExperimentConfig, ExperimentReport, PreparedExperiment,
    RunRow,
};
pub use functions::{
    benchmark, himmelblau, linear, normal_tail, piecewise_linear, with_dummy_dims, Benchmark,
    DummyDims, BENCHMARK_NAMES, HIMMELBLAU_MAXIMISERS, PIECEWISE_LINEAR_REFERENCE,
};
pub use metrics::{
    dmc_estimate, kde_curve, maxima_found, msle, silverman_bandwidth, DmcEstimate, Msle,
};
