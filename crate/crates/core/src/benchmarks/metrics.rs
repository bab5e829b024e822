use serde::{Deserialize, Serialize};
use statrs::statistics::{Data, Distribution, OrderStatistics};

use crate::exec::{map_indexed, Execution};
use crate::model::{InputModel, PerformanceFunction};
use crate::rng::{tags, RngStream};
use crate::sus::cov_dmc;
use crate::{Error, Result};

const DMC_CHUNK: usize = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DmcEstimate {
    pub estimate: f64,
    /// `None` when no sample hit.
    pub cov: Option<f64>,
    pub hits: u64,
    pub samples: u64,
}

/// Direct Monte Carlo estimate of `P(g(X) >= b)` from `n` prior draws.
///
/// Draws come in fixed chunks, each from its own child stream, so the result
/// does not depend on `exec`.
pub fn dmc_estimate(
    pf: &dyn PerformanceFunction,
    b: f64,
    n: u64,
    exec: Execution,
    stream: &RngStream,
) -> Result<DmcEstimate> {
    if n == 0 {
        return Err(Error::InvalidConfig("DMC needs at least one sample".into()));
    }
    let model = InputModel::new(pf.dim())?;
    let chunks = n.div_ceil(DMC_CHUNK as u64) as usize;
    let hits: u64 = map_indexed(exec, chunks, |c| {
        let start = c as u64 * DMC_CHUNK as u64;
        let len = (n - start).min(DMC_CHUNK as u64) as usize;
        model
            .sample_prior(len, &stream.tagged(tags::DMC, c as u64))
            .iter()
            .filter(|x| pf.eval(x) >= b)
            .count() as u64
    })
    .into_iter()
    .sum();
    let estimate = hits as f64 / n as f64;
    let cov = (hits > 0).then(|| cov_dmc(estimate, n as usize)).transpose()?;
    Ok(DmcEstimate {
        estimate,
        cov,
        hits,
        samples: n,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Msle {
    /// `None` when every estimate is zero.
    pub value: Option<f64>,
    pub zero_estimates: usize,
}

/// Mean squared log10 error of the positive estimates; zeros are counted
/// separately rather than clamped.
pub fn msle(estimates: &[f64], reference: f64) -> Result<Msle> {
    if !(reference > 0.0) {
        return Err(Error::InvalidConfig(format!("reference must be positive, got {reference}")));
    }
    let positive: Vec<f64> = estimates.iter().copied().filter(|&e| e > 0.0).collect();
    let value = (!positive.is_empty()).then(|| {
        let r = reference.log10();
        positive.iter().map(|e| (e.log10() - r).powi(2)).sum::<f64>() / positive.len() as f64
    });
    Ok(Msle {
        value,
        zero_estimates: estimates.len() - positive.len(),
    })
}

/// Number of `maximisers` with at least one point within `radius`
/// (inclusive). Only the leading coordinates matching each maximiser's
/// length enter the distance.
pub fn maxima_found<'a>(
    points: impl IntoIterator<Item = &'a [f64]>,
    maximisers: &[Vec<f64>],
    radius: f64,
) -> usize {
    let r2 = radius * radius;
    let mut found = vec![false; maximisers.len()];
    for p in points {
        for (hit, m) in found.iter_mut().zip(maximisers) {
            if !*hit {
                let d2: f64 = m.iter().zip(p).map(|(a, b)| (a - b).powi(2)).sum();
                *hit = d2 <= r2;
            }
        }
        if found.iter().all(|&h| h) {
            break;
        }
    }
    found.iter().filter(|&&h| h).count()
}

/// Silverman's rule of thumb `0.9 min(sd, IQR / 1.34) n^(-1/5)`.
pub fn silverman_bandwidth(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mut data = Data::new(values.to_vec());
    let sd = data.std_dev().unwrap_or(0.0);
    let iqr = data.interquartile_range();
    let spread = match (sd > 0.0, iqr > 0.0) {
        (true, true) => sd.min(iqr / 1.34),
        (true, false) => sd,
        (false, true) => iqr / 1.34,
        (false, false) => 1.0,
    };
    0.9 * spread * n.powf(-0.2)
}

/// Gaussian kernel density of `values` on `points` evenly spaced grid
/// points spanning three bandwidths beyond the data.
pub fn kde_curve(values: &[f64], points: usize) -> Vec<(f64, f64)> {
    if values.is_empty() || points == 0 {
        return Vec::new();
    }
    let h = silverman_bandwidth(values);
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min) - 3.0 * h;
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 3.0 * h;
    let norm = 1.0 / (values.len() as f64 * h * (2.0 * std::f64::consts::PI).sqrt());
    (0..points)
        .map(|i| {
            let x = if points == 1 {
                0.5 * (lo + hi)
            } else {
                lo + (hi - lo) * i as f64 / (points - 1) as f64
            };
            let density = values
                .iter()
                .map(|v| (-0.5 * ((x - v) / h).powi(2)).exp())
                .sum::<f64>()
                * norm;
            (x, density)
        })
        .collect()
}
