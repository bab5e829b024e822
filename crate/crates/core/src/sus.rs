//! Subset Simulation: the level loop, stop conditions and the SuS
//! probability and c.o.v. estimators.

use serde::{Deserialize, Serialize};

use crate::estimator::{delta_squared_sum, product, Factor};
use crate::mcmc::{run_chain, ChainTarget, ProposalSpec};
use crate::model::{CountedPerformanceFunction, EvaluatedSample, InputModel, Level, RegionConstraint};
use crate::rng::{tags, RngStream};
use crate::{Error, Result};

const INTEGRAL_TOL: f64 = 1e-9;

fn as_integer(x: f64) -> Option<usize> {
    let r = x.round();
    ((x - r).abs() < INTEGRAL_TOL && r >= 0.0).then_some(r as usize)
}

/// Level size `n`, level probability `p` and the chain proposal.
///
/// Both `n p` (seeds per level) and `1 / p` (chain length) must be integers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SusConfigFields", into = "SusConfigFields")]
pub struct SusConfig {
    level_size: usize,
    level_probability: f64,
    proposal: ProposalSpec,
    seeds: usize,
    chain_length: usize,
}

#[derive(Serialize, Deserialize)]
struct SusConfigFields {
    level_size: usize,
    level_probability: f64,
    #[serde(default)]
    proposal: ProposalSpec,
}

impl TryFrom<SusConfigFields> for SusConfig {
    type Error = Error;
    fn try_from(f: SusConfigFields) -> Result<Self> {
        Self::new(f.level_size, f.level_probability, f.proposal)
    }
}

impl From<SusConfig> for SusConfigFields {
    fn from(c: SusConfig) -> Self {
        Self {
            level_size: c.level_size,
            level_probability: c.level_probability,
            proposal: c.proposal,
        }
    }
}

impl SusConfig {
    pub fn new(level_size: usize, level_probability: f64, proposal: ProposalSpec) -> Result<Self> {
        if level_size == 0 {
            return Err(Error::InvalidConfig("level size must be >= 1".into()));
        }
        if !(level_probability > 0.0 && level_probability <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "level probability must lie in (0, 1], got {level_probability}"
            )));
        }
        let seeds = as_integer(level_size as f64 * level_probability)
            .filter(|&s| s > 0)
            .ok_or_else(|| {
                Error::InvalidConfig(format!(
                    "n*p must be a positive integer (n = {level_size}, p = {level_probability})"
                ))
            })?;
        let chain_length = as_integer(1.0 / level_probability).ok_or_else(|| {
            Error::InvalidConfig(format!("1/p must be an integer (p = {level_probability})"))
        })?;
        Ok(Self {
            level_size,
            level_probability,
            proposal,
            seeds,
            chain_length,
        })
    }

    pub fn level_size(&self) -> usize {
        self.level_size
    }

    pub fn level_probability(&self) -> f64 {
        self.level_probability
    }

    pub fn proposal(&self) -> ProposalSpec {
        self.proposal
    }

    /// `n_c = n p`.
    pub fn seeds_per_level(&self) -> usize {
        self.seeds
    }

    /// `n_s = 1 / p`.
    pub fn chain_length(&self) -> usize {
        self.chain_length
    }
}

/// Conditions are OR-combined; any one that fires stops the run (or branch).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum StopCondition {
    /// At least `p |level|` samples of the latest level satisfy `g >= threshold`.
    FailureCount { threshold: f64 },
    /// Every sample of the latest level has the same performance.
    ConstantPerformance,
    /// The run has spent at least `max_evals` performance evaluations.
    EvalBudget { max_evals: u64 },
    /// The run (or branch path) already holds `max_levels` levels.
    MaxLevels { max_levels: usize },
}

impl StopCondition {
    /// Global conditions watch the whole run rather than one branch.
    pub fn is_global(&self) -> bool {
        matches!(self, StopCondition::EvalBudget { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    FailureCount,
    ConstantPerformance,
    EvalBudget,
    MaxLevels,
    NoChains,
}

impl StopReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            StopReason::FailureCount => "failure_count",
            StopReason::ConstantPerformance => "constant_performance",
            StopReason::EvalBudget => "eval_budget",
            StopReason::MaxLevels => "max_levels",
            StopReason::NoChains => "no_chains",
        }
    }
}

/// Evaluates the branch-local conditions on `level`, which is the
/// `depth`-th level (0-based) of its path.
pub(crate) fn local_stop(
    conditions: &[StopCondition],
    level: &Level,
    depth: usize,
    chain_length: usize,
) -> Option<StopReason> {
    conditions.iter().find_map(|c| match *c {
        StopCondition::FailureCount { threshold } => {
            let required = level.len().div_ceil(chain_length).max(1);
            let hits = level.performances().filter(|&g| g >= threshold).count();
            (hits >= required).then_some(StopReason::FailureCount)
        }
        StopCondition::ConstantPerformance => {
            level.has_constant_performance().then_some(StopReason::ConstantPerformance)
        }
        StopCondition::MaxLevels { max_levels } => {
            (depth + 1 >= max_levels).then_some(StopReason::MaxLevels)
        }
        StopCondition::EvalBudget { .. } => None,
    })
}

pub(crate) fn global_stop(conditions: &[StopCondition], evals: u64) -> Option<StopReason> {
    conditions.iter().find_map(|c| match *c {
        StopCondition::EvalBudget { max_evals } => {
            (evals >= max_evals).then_some(StopReason::EvalBudget)
        }
        _ => None,
    })
}

/// Indices of the `count` best samples under a stable descending sort
/// (ties keep their original order).
pub(crate) fn top_indices(samples: &[&EvaluatedSample], count: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..samples.len()).collect();
    order.sort_by(|&a, &b| {
        samples[b]
            .performance
            .total_cmp(&samples[a].performance)
            .then(a.cmp(&b))
    });
    order.truncate(count);
    order
}

/// Picks the `n p` best samples of `level` as seeds; the threshold is the
/// performance of the lowest seed.
pub fn select_threshold(level: &Level, p: f64) -> Result<(f64, Vec<EvaluatedSample>)> {
    if level.is_empty() {
        return Err(Error::EmptyInput("level"));
    }
    let count = as_integer(level.len() as f64 * p)
        .filter(|&c| c > 0 && c <= level.len())
        .ok_or_else(|| {
            Error::InvalidConfig(format!(
                "|level| * p must be a positive integer (|level| = {}, p = {p})",
                level.len()
            ))
        })?;
    let refs: Vec<&EvaluatedSample> = level.samples().iter().collect();
    let seeds: Vec<EvaluatedSample> = top_indices(&refs, count)
        .into_iter()
        .map(|i| refs[i].clone())
        .collect();
    let threshold = seeds.last().expect("count > 0").performance;
    Ok((threshold, seeds))
}

/// Grows the next level from the `chains` best of `cell` (samples of the
/// current level in level order). Returns the new threshold and level.
#[allow(clippy::too_many_arguments)]
pub(crate) fn grow_level(
    cell: &[&EvaluatedSample],
    chains: usize,
    chain_length: usize,
    constraint: &RegionConstraint,
    pf: &CountedPerformanceFunction,
    proposal: &ProposalSpec,
    node_stream: &RngStream,
) -> Result<(f64, Level)> {
    let seeds = top_indices(cell, chains);
    let threshold = cell[*seeds.last().expect("chains > 0")].performance;
    let target = ChainTarget {
        threshold,
        constraint,
        pf,
    };
    let runs = seeds
        .iter()
        .enumerate()
        .map(|(i, &s)| {
            run_chain(
                cell[s],
                chain_length,
                &target,
                proposal,
                &node_stream.tagged(tags::CHAIN, i as u64),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((threshold, Level::from_chains(runs)))
}

pub(crate) fn initial_level(
    model: &InputModel,
    pf: &CountedPerformanceFunction,
    size: usize,
    stream: &RngStream,
) -> Result<Level> {
    if model.dim() != pf.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            got: pf.dim(),
        });
    }
    let samples = model
        .sample_prior(size, &stream.child(tags::PRIOR))
        .into_iter()
        .map(|x| pf.evaluate_unchecked(x))
        .collect();
    Ok(Level::from_prior(samples))
}

/// Output of [`run_sus`]: levels `X^0..X^m` and thresholds `b_1..b_m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SusRun {
    levels: Vec<Level>,
    thresholds: Vec<f64>,
    stop_reason: Option<StopReason>,
    chain_length: usize,
    eval_count: u64,
}

impl SusRun {
    /// Assembles a run from parts; `thresholds[k]` bounds `levels[k + 1]`.
    pub fn from_parts(levels: Vec<Level>, thresholds: Vec<f64>, chain_length: usize) -> Result<Self> {
        if levels.is_empty() || thresholds.len() + 1 != levels.len() {
            return Err(Error::InvalidConfig(
                "a run needs one threshold per non-initial level".into(),
            ));
        }
        Ok(Self {
            levels,
            thresholds,
            stop_reason: None,
            chain_length,
            eval_count: 0,
        })
    }

    pub fn levels(&self) -> &[Level] {
        &self.levels
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    pub fn stop_reason(&self) -> Option<StopReason> {
        self.stop_reason
    }

    pub fn chain_length(&self) -> usize {
        self.chain_length
    }

    /// Performance evaluations spent by the run.
    pub fn eval_count(&self) -> u64 {
        self.eval_count
    }

    /// Factors `P_1 .. P_{m'+1}` of the product estimator for `P(g >= b)`.
    fn factors(&self, b: f64) -> Vec<Factor<'_>> {
        // m' = max{k : b_k < b}, b_0 = -inf
        let m_prime = self.thresholds.iter().take_while(|&&t| t < b).count();
        let mut factors: Vec<Factor<'_>> = (1..=m_prime)
            .map(|k| {
                let bk = self.thresholds[k - 1];
                Factor::new(&self.levels[k - 1], self.chain_length, move |s| s.performance >= bk)
            })
            .collect();
        factors.push(Factor::new(&self.levels[m_prime], self.chain_length, move |s| {
            s.performance >= b
        }));
        factors
    }
}

/// Runs Subset Simulation until any of `stop` fires.
pub fn run_sus(
    config: &SusConfig,
    model: &InputModel,
    pf: &CountedPerformanceFunction,
    stop: &[StopCondition],
    stream: &RngStream,
) -> Result<SusRun> {
    let start = pf.count();
    let everywhere = RegionConstraint::everywhere();
    let mut levels = vec![initial_level(model, pf, config.level_size(), stream)?];
    let mut thresholds = Vec::new();
    let mut node_stream = stream.child(tags::TREE);
    let stop_reason = loop {
        let current = levels.last().expect("initial level");
        let depth = levels.len() - 1;
        if let Some(reason) = global_stop(stop, pf.count() - start)
            .or_else(|| local_stop(stop, current, depth, config.chain_length()))
        {
            break reason;
        }
        node_stream = node_stream.tagged(tags::CELL, 0);
        let cell: Vec<&EvaluatedSample> = current.samples().iter().collect();
        let (threshold, next) = grow_level(
            &cell,
            config.seeds_per_level(),
            config.chain_length(),
            &everywhere,
            pf,
            &config.proposal(),
            &node_stream,
        )?;
        thresholds.push(threshold);
        levels.push(next);
    };
    Ok(SusRun {
        levels,
        thresholds,
        stop_reason: Some(stop_reason),
        chain_length: config.chain_length(),
        eval_count: pf.count() - start,
    })
}

/// Product estimator of `P(g >= b)`; returns 0 when no sample reaches `b`.
pub fn sus_probability_estimate(run: &SusRun, b: f64) -> f64 {
    product(&run.factors(b))
}

/// Combined c.o.v. `sqrt(sum_k delta_k^2)` of [`sus_probability_estimate`].
pub fn sus_cov(run: &SusRun, b: f64) -> Result<f64> {
    Ok(delta_squared_sum(&run.factors(b))?.sqrt())
}

/// c.o.v. of a direct Monte Carlo fraction: `sqrt((1 - P) / (n P))`.
pub fn cov_dmc(probability: f64, n: usize) -> Result<f64> {
    cov_mcmc(probability, n, 0.0)
}

/// c.o.v. of a chain-based fraction: `sqrt((1 - P) / (n P) (1 + gamma))`.
pub fn cov_mcmc(probability: f64, n: usize, gamma: f64) -> Result<f64> {
    if !(probability > 0.0 && probability <= 1.0) {
        return Err(Error::UndefinedCov(format!(
            "probability must lie in (0, 1], got {probability}"
        )));
    }
    if n == 0 {
        return Err(Error::UndefinedCov("zero samples".into()));
    }
    Ok(((1.0 - probability) / (n as f64 * probability) * (1.0 + gamma)).sqrt())
}

/// Chain-correlation factor `gamma = 2 sum_{j=1}^{n_s-1} (1 - j/n_s) rho(j)`.
///
/// Each row is one chain's indicator sequence (seed included). The lag-`j`
/// autocovariance is pooled over every available pair across chains and
/// normalised by the pooled indicator variance. Rows may be ragged.
/// Returns 0 when the indicators have no variance; clamped below at 0.
pub fn estimate_gamma(indicators: &[Vec<bool>], chain_length: usize) -> f64 {
    let total: usize = indicators.iter().map(Vec::len).sum();
    if total == 0 {
        return 0.0;
    }
    let hits = indicators.iter().flatten().filter(|&&h| h).count();
    let p = hits as f64 / total as f64;
    let variance = p - p * p;
    if variance <= 0.0 {
        return 0.0;
    }
    let mut gamma = 0.0;
    for lag in 1..chain_length {
        let mut pairs = 0usize;
        let mut joint = 0usize;
        for row in indicators {
            for w in 0..row.len().saturating_sub(lag) {
                pairs += 1;
                joint += usize::from(row[w] && row[w + lag]);
            }
        }
        if pairs == 0 {
            continue;
        }
        let autocov = joint as f64 / pairs as f64 - p * p;
        gamma += 2.0 * (1.0 - lag as f64 / chain_length as f64) * autocov / variance;
    }
    gamma.max(0.0)
}
