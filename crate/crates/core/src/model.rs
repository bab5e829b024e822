//! Shared domain types: the input model, counted performance evaluation,
//! samples, levels and region constraints.

use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::cgp::LinearClassifier;
use crate::rng::RngStream;
use crate::{Error, Result};

/// Standard multivariate normal input of dimension `dim`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputModel {
    dim: usize,
}

impl InputModel {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidConfig("input dimension must be >= 1".into()));
        }
        Ok(Self { dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Draws `count` i.i.d. standard normal vectors.
    pub fn sample_prior(&self, count: usize, stream: &RngStream) -> Vec<Vec<f64>> {
        let mut rng = stream.rng();
        (0..count)
            .map(|_| (0..self.dim).map(|_| rng.sample(StandardNormal)).collect())
            .collect()
    }

    /// Log density up to the normalising constant.
    pub fn log_density(&self, x: &[f64]) -> f64 {
        -0.5 * x.iter().map(|v| v * v).sum::<f64>()
    }
}

/// A deterministic scalar map `g: R^d -> R`.
pub trait PerformanceFunction: Send + Sync {
    fn dim(&self) -> usize;
    fn eval(&self, x: &[f64]) -> f64;
}

/// Adapts a closure into a [`PerformanceFunction`].
pub struct FnPerformance<F> {
    dim: usize,
    f: F,
}

impl<F> FnPerformance<F>
where
    F: Fn(&[f64]) -> f64 + Send + Sync,
{
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F> PerformanceFunction for FnPerformance<F>
where
    F: Fn(&[f64]) -> f64 + Send + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }
}

/// Wraps a performance function and counts every invocation.
///
/// The counter is atomic so a shared instance may be evaluated from several
/// threads; each run normally owns its own instance.
pub struct CountedPerformanceFunction {
    inner: Arc<dyn PerformanceFunction>,
    count: AtomicU64,
}

impl fmt::Debug for CountedPerformanceFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CountedPerformanceFunction")
            .field("dim", &self.inner.dim())
            .field("count", &self.count())
            .finish()
    }
}

impl CountedPerformanceFunction {
    pub fn new(inner: Arc<dyn PerformanceFunction>) -> Self {
        Self {
            inner,
            count: AtomicU64::new(0),
        }
    }

    pub fn from_fn<F>(dim: usize, f: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        Self::new(Arc::new(FnPerformance::new(dim, f)))
    }

    pub fn dim(&self) -> usize {
        self.inner.dim()
    }

    pub fn count(&self) -> u64 {
        self.count.load(Ordering::Relaxed)
    }

    pub fn inner(&self) -> &Arc<dyn PerformanceFunction> {
        &self.inner
    }

    /// Evaluates `g(point)`, incrementing the counter by exactly one.
    pub fn evaluate(&self, point: Vec<f64>) -> Result<EvaluatedSample> {
        if point.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: point.len(),
            });
        }
        Ok(self.evaluate_unchecked(point))
    }

    pub(crate) fn evaluate_unchecked(&self, point: Vec<f64>) -> EvaluatedSample {
        debug_assert_eq!(point.len(), self.dim());
        self.count.fetch_add(1, Ordering::Relaxed);
        let performance = self.inner.eval(&point);
        EvaluatedSample { point, performance }
    }
}

/// A point together with its cached performance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluatedSample {
    pub point: Vec<f64>,
    pub performance: f64,
}

/// Where a level sample came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SampleOrigin {
    /// Independent draw from the input distribution.
    Prior,
    /// Position `step` (0 = seed) of Markov chain `chain`.
    Chain { chain: usize, step: usize },
}

/// An ordered multiset of evaluated samples plus per-sample provenance.
///
/// Samples produced by chains are stored chain-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Level {
    samples: Vec<EvaluatedSample>,
    origins: Vec<SampleOrigin>,
}

impl Level {
    pub fn from_prior(samples: Vec<EvaluatedSample>) -> Self {
        let origins = vec![SampleOrigin::Prior; samples.len()];
        Self { samples, origins }
    }

    /// Builds a level from chains, keeping chain-major order.
    pub fn from_chains(chains: Vec<Vec<EvaluatedSample>>) -> Self {
        let mut samples = Vec::new();
        let mut origins = Vec::new();
        for (chain, states) in chains.into_iter().enumerate() {
            for (step, s) in states.into_iter().enumerate() {
                samples.push(s);
                origins.push(SampleOrigin::Chain { chain, step });
            }
        }
        Self { samples, origins }
    }

    /// The sub-level made of the given indices, provenance preserved.
    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            samples: indices.iter().map(|&i| self.samples[i].clone()).collect(),
            origins: indices.iter().map(|&i| self.origins[i]).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[EvaluatedSample] {
        &self.samples
    }

    pub fn origins(&self) -> &[SampleOrigin] {
        &self.origins
    }

    pub fn performances(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|s| s.performance)
    }

    /// True when every sample is an independent prior draw.
    pub fn is_prior(&self) -> bool {
        self.origins.iter().all(|o| *o == SampleOrigin::Prior)
    }

    /// Sample indices grouped by chain, each group ordered by step.
    /// Prior samples form singleton groups.
    pub fn chain_groups(&self) -> Vec<Vec<usize>> {
        let mut groups: Vec<(usize, Vec<(usize, usize)>)> = Vec::new();
        let mut singletons = Vec::new();
        for (i, origin) in self.origins.iter().enumerate() {
            match *origin {
                SampleOrigin::Prior => singletons.push(vec![i]),
                SampleOrigin::Chain { chain, step } => {
                    match groups.iter_mut().find(|(c, _)| *c == chain) {
                        Some((_, g)) => g.push((step, i)),
                        None => groups.push((chain, vec![(step, i)])),
                    }
                }
            }
        }
        let mut out: Vec<Vec<usize>> = groups
            .into_iter()
            .map(|(_, mut g)| {
                g.sort_by_key(|&(step, _)| step);
                g.into_iter().map(|(_, i)| i).collect()
            })
            .collect();
        out.extend(singletons);
        out
    }

    /// True when all samples share exactly the same performance.
    pub fn has_constant_performance(&self) -> bool {
        let mut perf = self.performances();
        match perf.next() {
            Some(first) => perf.all(|p| p == first),
            None => true,
        }
    }
}

/// One membership clause: `classifier` must assign `label`.
#[derive(Debug, Clone)]
pub struct Clause {
    pub classifier: Arc<LinearClassifier>,
    pub label: usize,
}

/// Conjunction of classifier-cell memberships, optionally paired with an
/// exceedance threshold. The threshold is checked by callers against cached
/// performance; [`RegionConstraint::contains`] never evaluates `g`.
#[derive(Debug, Clone, Default)]
pub struct RegionConstraint {
    clauses: Vec<Clause>,
    threshold: Option<f64>,
}

impl RegionConstraint {
    /// The whole input space.
    pub fn everywhere() -> Self {
        Self::default()
    }

    pub fn clauses(&self) -> &[Clause] {
        &self.clauses
    }

    pub fn threshold(&self) -> Option<f64> {
        self.threshold
    }

    pub fn with_threshold(mut self, threshold: f64) -> Self {
        self.threshold = Some(threshold);
        self
    }

    /// A child constraint: this one plus `classifier == label`.
    pub fn refine(&self, classifier: Arc<LinearClassifier>, label: usize) -> Self {
        let mut clauses = self.clauses.clone();
        clauses.push(Clause { classifier, label });
        Self {
            clauses,
            threshold: self.threshold,
        }
    }

    pub fn contains(&self, point: &[f64]) -> bool {
        self.clauses
            .iter()
            .all(|c| c.classifier.predict(point) == c.label)
    }

    /// Membership plus the threshold test on a cached performance.
    pub fn admits(&self, sample: &EvaluatedSample) -> bool {
        self.threshold.is_none_or(|b| sample.performance >= b) && self.contains(&sample.point)
    }
}
