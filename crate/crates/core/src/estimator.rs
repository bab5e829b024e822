//! Product-form estimator pieces shared by the SuS and BSuS estimators.

use crate::model::{EvaluatedSample, Level};
use crate::sus::{cov_dmc, cov_mcmc, estimate_gamma};
use crate::{Error, Result};

/// One conditional-probability factor: the fraction of `level` whose
/// samples satisfy an indicator.
#[derive(Debug, Clone)]
pub(crate) struct Factor<'a> {
    level: &'a Level,
    indicators: Vec<bool>,
    chain_length: usize,
}

impl<'a> Factor<'a> {
    pub fn new(
        level: &'a Level,
        chain_length: usize,
        indicator: impl Fn(&EvaluatedSample) -> bool,
    ) -> Self {
        let indicators = level.samples().iter().map(indicator).collect();
        Self {
            level,
            indicators,
            chain_length,
        }
    }

    pub fn value(&self) -> f64 {
        if self.indicators.is_empty() {
            return 0.0;
        }
        let hits = self.indicators.iter().filter(|&&h| h).count();
        hits as f64 / self.indicators.len() as f64
    }

    /// Squared c.o.v. of this factor: the direct Monte Carlo formula on
    /// prior levels, the chain-corrected one otherwise.
    pub fn delta_squared(&self) -> Result<f64> {
        let value = self.value();
        let n = self.indicators.len();
        if value <= 0.0 {
            return Err(Error::UndefinedCov("a conditional factor is zero".into()));
        }
        let delta = if self.level.is_prior() {
            cov_dmc(value, n)?
        } else {
            let rows: Vec<Vec<bool>> = self
                .level
                .chain_groups()
                .into_iter()
                .map(|g| g.into_iter().map(|i| self.indicators[i]).collect())
                .collect();
            let gamma = estimate_gamma(&rows, self.chain_length);
            cov_mcmc(value, n, gamma)?
        };
        Ok(delta * delta)
    }
}

pub(crate) fn product(factors: &[Factor<'_>]) -> f64 {
    factors.iter().fold(1.0, |acc, f| acc * f.value())
}

pub(crate) fn delta_squared_sum(factors: &[Factor<'_>]) -> Result<f64> {
    factors.iter().try_fold(0.0, |acc, f| Ok(acc + f.delta_squared()?))
}
