//! Modified Metropolis sampler (component-wise proposals) targeting
//! `f(x) 1{g(x) >= b} 1_A(x)` for the standard normal input density `f`.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::model::{CountedPerformanceFunction, EvaluatedSample, RegionConstraint};
use crate::rng::RngStream;
use crate::{Error, Result};

/// Symmetric component-wise Gaussian proposal `x'_i ~ N(x_i, spread^2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProposalSpec {
    spread: f64,
}

impl Default for ProposalSpec {
    fn default() -> Self {
        Self { spread: 1.0 }
    }
}

impl ProposalSpec {
    pub fn new(spread: f64) -> Result<Self> {
        if !(spread > 0.0 && spread.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "proposal spread must be positive, got {spread}"
            )));
        }
        Ok(Self { spread })
    }

    pub fn spread(&self) -> f64 {
        self.spread
    }
}

/// The chain's stationary distribution: the prior restricted to
/// `{g >= threshold}` intersected with `constraint`.
#[derive(Debug, Clone, Copy)]
pub struct ChainTarget<'a> {
    pub threshold: f64,
    pub constraint: &'a RegionConstraint,
    pub pf: &'a CountedPerformanceFunction,
}

impl ChainTarget<'_> {
    pub fn admits(&self, sample: &EvaluatedSample) -> bool {
        sample.performance >= self.threshold && self.constraint.contains(&sample.point)
    }
}

/// Acceptance probability of a single component move under the standard
/// normal marginal: `min(1, phi(proposed) / phi(current))`.
pub fn component_acceptance(current: f64, proposed: f64) -> f64 {
    (0.5 * (current * current - proposed * proposed)).exp().min(1.0)
}

/// One Modified Metropolis transition.
///
/// Each component is proposed and accepted independently; the assembled
/// candidate is then kept only if it lies in the exceedance region and the
/// region constraint. A candidate identical to `state` costs no evaluation.
pub fn modified_metropolis_step<R: Rng + ?Sized>(
    state: &EvaluatedSample,
    target: &ChainTarget<'_>,
    proposal: &ProposalSpec,
    rng: &mut R,
) -> EvaluatedSample {
    let mut moved = false;
    let candidate: Vec<f64> = state
        .point
        .iter()
        .map(|&x| {
            let z: f64 = rng.sample(StandardNormal);
            let proposed = x + proposal.spread * z;
            let u: f64 = rng.random();
            if u < component_acceptance(x, proposed) {
                moved |= proposed != x;
                proposed
            } else {
                x
            }
        })
        .collect();
    if !moved {
        return state.clone();
    }
    let evaluated = target.pf.evaluate_unchecked(candidate);
    if target.admits(&evaluated) {
        evaluated
    } else {
        state.clone()
    }
}

/// Runs a chain of `length` states starting at (and including) `seed`.
pub fn run_chain(
    seed: &EvaluatedSample,
    length: usize,
    target: &ChainTarget<'_>,
    proposal: &ProposalSpec,
    stream: &RngStream,
) -> Result<Vec<EvaluatedSample>> {
    if !target.admits(seed) {
        return Err(Error::SeedOutsideTarget {
            performance: seed.performance,
            threshold: target.threshold,
        });
    }
    if seed.point.len() != target.pf.dim() {
        return Err(Error::DimensionMismatch {
            expected: target.pf.dim(),
            got: seed.point.len(),
        });
    }
    let mut rng = stream.rng();
    let mut states = Vec::with_capacity(length.max(1));
    states.push(seed.clone());
    for _ in 1..length {
        let next = modified_metropolis_step(states.last().expect("non-empty"), target, proposal, &mut rng);
        states.push(next);
    }
    Ok(states)
}
