use std::sync::Arc;

use statrs::function::erf::erfc;

use crate::model::{FnPerformance, PerformanceFunction};
use crate::{Error, Result};

/// Two-dimensional piecewise linear limit state whose design point lies far
/// from the direction of steepest initial ascent. Failure is `g >= 0`.
pub fn piecewise_linear(x: &[f64]) -> f64 {
    let g1 = if x[0] > 3.5 { 4.0 - x[0] } else { 0.85 - 0.1 * x[0] };
    let g2 = if x[1] > 2.0 { 0.5 - 0.1 * x[1] } else { 2.3 - x[1] };
    -g1.min(g2)
}

/// Negated Himmelblau function; its four maxima all equal 0.
pub fn himmelblau(x: &[f64]) -> f64 {
    let a = x[0] * x[0] + x[1] - 11.0;
    let b = x[0] + x[1] * x[1] - 7.0;
    -(a * a + b * b)
}

pub fn linear(x: &[f64]) -> f64 {
    x[0]
}

pub const HIMMELBLAU_MAXIMISERS: [[f64; 2]; 4] = [
    [3.0, 2.0],
    [-2.805118, 3.131312],
    [-3.779310, -3.283186],
    [3.584428, -1.848126],
];

/// Reference `P(g >= 0)` for [`piecewise_linear`], from 10^8 direct samples.
pub const PIECEWISE_LINEAR_REFERENCE: f64 = 3.2e-5;

/// Standard normal upper tail `P(Z >= z)`.
pub fn normal_tail(z: f64) -> f64 {
    0.5 * erfc(z / std::f64::consts::SQRT_2)
}

/// Evaluates `base` on the first `base.dim()` coordinates and ignores the rest.
pub struct DummyDims {
    base: Arc<dyn PerformanceFunction>,
    dim: usize,
}

impl PerformanceFunction for DummyDims {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, x: &[f64]) -> f64 {
        self.base.eval(&x[..self.base.dim()])
    }
}

/// Embeds `base` in `dim` dimensions. `dim == base.dim()` returns `base`.
pub fn with_dummy_dims(
    base: Arc<dyn PerformanceFunction>,
    dim: usize,
) -> Result<Arc<dyn PerformanceFunction>> {
    if dim < base.dim() {
        return Err(Error::InvalidConfig(format!(
            "cannot embed a {}-d function in {dim} dimensions",
            base.dim()
        )));
    }
    if dim == base.dim() {
        return Ok(base);
    }
    Ok(Arc::new(DummyDims { base, dim }))
}

/// A named performance function with whatever ground truth is known.
#[derive(Clone)]
pub struct Benchmark {
    pub name: &'static str,
    pub base_dim: usize,
    pub pf: Arc<dyn PerformanceFunction>,
    /// Failure threshold `b*` of reliability problems.
    pub failure_threshold: Option<f64>,
    pub reference_probability: Option<f64>,
    pub maximisers: Vec<Vec<f64>>,
    design_region: Option<fn(&[f64]) -> bool>,
}

impl std::fmt::Debug for Benchmark {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Benchmark")
            .field("name", &self.name)
            .field("dim", &self.pf.dim())
            .field("failure_threshold", &self.failure_threshold)
            .field("reference_probability", &self.reference_probability)
            .finish_non_exhaustive()
    }
}

impl Benchmark {
    pub fn dim(&self) -> usize {
        self.pf.dim()
    }

    pub fn has_design_region(&self) -> bool {
        self.design_region.is_some()
    }

    /// Whether `x` lies in the neighbourhood of the design point, for
    /// benchmarks that define one.
    pub fn in_design_region(&self, x: &[f64]) -> Option<bool> {
        self.design_region.map(|f| f(x))
    }
}

pub const BENCHMARK_NAMES: [&str; 3] = ["piecewise_linear", "himmelblau", "linear"];

/// Looks up a benchmark by name, embedded in `dim` dimensions (`None`
/// keeps its base dimension).
pub fn benchmark(name: &str, dim: Option<usize>) -> Result<Benchmark> {
    let (base_dim, f, failure_threshold, reference, maximisers, design): (
        usize,
        fn(&[f64]) -> f64,
        Option<f64>,
        Option<f64>,
        Vec<Vec<f64>>,
        Option<fn(&[f64]) -> bool>,
    ) = match name {
        "piecewise_linear" => (
            2,
            piecewise_linear,
            Some(0.0),
            Some(PIECEWISE_LINEAR_REFERENCE),
            Vec::new(),
            Some(|x| x[0] > 3.5),
        ),
        "himmelblau" => (
            2,
            himmelblau,
            None,
            None,
            HIMMELBLAU_MAXIMISERS.iter().map(|m| m.to_vec()).collect(),
            None,
        ),
        "linear" => (1, linear, Some(2.0), Some(normal_tail(2.0)), Vec::new(), None),
        _ => {
            return Err(Error::UnknownBenchmark {
                name: name.to_string(),
                available: BENCHMARK_NAMES.join(", "),
            })
        }
    };
    let base: Arc<dyn PerformanceFunction> = Arc::new(FnPerformance::new(base_dim, f));
    Ok(Benchmark {
        name: BENCHMARK_NAMES.iter().find(|&&n| n == name).expect("matched above"),
        base_dim,
        pf: with_dummy_dims(base, dim.unwrap_or(base_dim))?,
        failure_threshold,
        reference_probability: reference,
        maximisers,
        design_region: design,
    })
}
