//! Subset Simulation (SuS) and Branching Subset Simulation (BSuS).
//!
//! The crate estimates small exceedance probabilities `P(g(X) >= b)` for a
//! standard normal input `X` and doubles as a multimodal optimiser. BSuS
//! partitions each level with the convex graph partitioner ([`cgp`]) and
//! runs an independent SuS-style branch inside every cell.
//!
//! Module map:
//!
//! * [`model`]: input model, counted performance functions, levels, regions.
//! * [`mcmc`]: Modified Metropolis sampler confined to a region.
//! * [`sus`]: the SuS loop, stop conditions and estimators.
//! * [`bsus`]: the branching engine, tree estimators and conditional sampling.
//! * [`cgp`]: convexity graph, label propagation and linear classification.
//! * [`benchmarks`]: test functions, reference oracles, metrics, experiments.

pub mod benchmarks;
pub mod bsus;
pub mod cgp;
mod error;
mod estimator;
pub mod exec;
pub mod mcmc;
pub mod model;
pub mod rng;
pub mod sus;

pub use error::{Error, Result};
pub use exec::Execution;
pub use model::{
    CountedPerformanceFunction, EvaluatedSample, FnPerformance, InputModel, Level,
    PerformanceFunction, RegionConstraint, SampleOrigin,
};
pub use rng::RngStream;
