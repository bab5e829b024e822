use serde::{Deserialize, Serialize};

use crate::bsus::{
    bsus_cov, bsus_probability_estimate, run_bsus, BsusConfig, ChooseStrategy, TreeRecord,
};
use crate::cgp::{ConvexGraphPartitioner, LsvcParams, Penalty};
use crate::exec::{map_indexed, Execution};
use crate::mcmc::ProposalSpec;
use crate::model::{CountedPerformanceFunction, EvaluatedSample, InputModel};
use crate::rng::{tags, RngStream};
use crate::sus::{run_sus, sus_cov, sus_probability_estimate, StopCondition, SusConfig};
use crate::{Error, Result};

use super::functions::{benchmark, Benchmark};
use super::metrics::{kde_curve, maxima_found, msle};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Sus,
    #[default]
    Bsus,
}

fn default_p() -> f64 {
    0.1
}
fn default_budget() -> u64 {
    50
}
fn default_c() -> f64 {
    1.0
}
fn default_replications() -> usize {
    100
}
fn default_spread() -> f64 {
    1.0
}
fn default_max_levels() -> usize {
    200
}
fn default_radius() -> f64 {
    0.25
}

/// One experiment: `replications` independent runs of the same setup.
///
/// Every run stops on constant performance and after `max_levels` levels
/// along a path; reliability benchmarks also stop once `p n` samples reach
/// the failure threshold. `max_evals` adds a global evaluation budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub benchmark: String,
    /// Total input dimension; defaults to the benchmark's own.
    #[serde(default)]
    pub dim: Option<usize>,
    #[serde(default)]
    pub algorithm: Algorithm,
    pub level_size: usize,
    #[serde(default = "default_p")]
    pub level_probability: f64,
    #[serde(default = "default_budget")]
    pub graph_budget: u64,
    #[serde(default)]
    pub penalty: Penalty,
    #[serde(default = "default_c")]
    pub c: f64,
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_spread")]
    pub proposal_spread: f64,
    /// Overrides the benchmark's failure threshold.
    #[serde(default)]
    pub failure_threshold: Option<f64>,
    #[serde(default)]
    pub max_evals: Option<u64>,
    #[serde(default = "default_max_levels")]
    pub max_levels: usize,
    #[serde(default)]
    pub choose: ChooseStrategy,
    #[serde(default = "default_radius")]
    pub maxima_radius: f64,
}

impl ExperimentConfig {
    pub fn new(benchmark: &str, algorithm: Algorithm, level_size: usize) -> Self {
        Self {
            benchmark: benchmark.to_string(),
            dim: None,
            algorithm,
            level_size,
            level_probability: default_p(),
            graph_budget: default_budget(),
            penalty: Penalty::default(),
            c: default_c(),
            replications: default_replications(),
            seed: 0,
            proposal_spread: default_spread(),
            failure_threshold: None,
            max_evals: None,
            max_levels: default_max_levels(),
            choose: ChooseStrategy::default(),
            maxima_radius: default_radius(),
        }
    }

    /// Everything a run needs, validated up front.
    pub fn prepare(&self) -> Result<PreparedExperiment> {
        let bench = benchmark(&self.benchmark, self.dim)?;
        let sus = SusConfig::new(
            self.level_size,
            self.level_probability,
            ProposalSpec::new(self.proposal_spread)?,
        )?;
        let lsvc = LsvcParams::new(self.penalty, self.c)?;
        if self.replications == 0 {
            return Err(Error::InvalidConfig("replications must be >= 1".into()));
        }
        if self.max_levels == 0 {
            return Err(Error::InvalidConfig("max_levels must be >= 1".into()));
        }
        if !(self.maxima_radius >= 0.0) {
            return Err(Error::InvalidConfig("maxima_radius must be >= 0".into()));
        }
        let threshold = self.failure_threshold.or(bench.failure_threshold);
        let mut stop = vec![
            StopCondition::ConstantPerformance,
            StopCondition::MaxLevels {
                max_levels: self.max_levels,
            },
        ];
        if let Some(b) = threshold {
            stop.push(StopCondition::FailureCount { threshold: b });
        }
        if let Some(max_evals) = self.max_evals {
            stop.push(StopCondition::EvalBudget { max_evals });
        }
        Ok(PreparedExperiment {
            config: self.clone(),
            bench,
            sus,
            lsvc,
            threshold,
            stop,
        })
    }
}

pub struct PreparedExperiment {
    config: ExperimentConfig,
    bench: Benchmark,
    sus: SusConfig,
    lsvc: LsvcParams,
    threshold: Option<f64>,
    stop: Vec<StopCondition>,
}

impl PreparedExperiment {
    pub fn benchmark(&self) -> &Benchmark {
        &self.bench
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.config
    }

    /// The failure threshold estimates refer to, if any.
    pub fn threshold(&self) -> Option<f64> {
        self.threshold
    }

    pub fn stop_conditions(&self) -> &[StopCondition] {
        &self.stop
    }

    /// Seed of replication `index`.
    pub fn run_seed(&self, index: usize) -> u64 {
        RngStream::new(self.config.seed)
            .tagged(tags::RUN, index as u64)
            .derive_seed()
    }

    /// Runs replication `index` on its own evaluation counter.
    pub fn run(&self, index: usize) -> Result<RunRow> {
        self.execute(index, self.run_seed(index), false).map(|(row, _)| row)
    }

    /// A single run seeded directly with `seed`, plus its tree.
    pub fn run_with_record(&self, seed: u64) -> Result<(RunRow, TreeRecord)> {
        self.execute(0, seed, true)
            .map(|(row, record)| (row, record.expect("record requested")))
    }

    fn execute(&self, index: usize, seed: u64, keep: bool) -> Result<(RunRow, Option<TreeRecord>)> {
        let stream = RngStream::new(seed);
        let model = InputModel::new(self.bench.dim())?;
        let pf = CountedPerformanceFunction::new(self.bench.pf.clone());
        let (estimate, cov, levels, branches, samples, last): (_, _, _, _, Vec<&EvaluatedSample>, Vec<&EvaluatedSample>);
        let record;
        let sus_run;
        let tree;
        match self.config.algorithm {
            Algorithm::Sus => {
                sus_run = run_sus(&self.sus, &model, &pf, &self.stop, &stream)?;
                estimate = self.threshold.map(|b| sus_probability_estimate(&sus_run, b));
                cov = self.threshold.and_then(|b| sus_cov(&sus_run, b).ok());
                levels = sus_run.levels().len();
                branches = 1;
                samples = sus_run.levels().iter().flat_map(|l| l.samples()).collect();
                last = sus_run.levels().last().expect("initial level").samples().iter().collect();
                record = keep.then(|| {
                    TreeRecord::from_sus(&sus_run, self.sus.level_size(), self.sus.level_probability())
                });
            }
            Algorithm::Bsus => {
                let config = BsusConfig {
                    sus: self.sus,
                    graph_budget: self.config.graph_budget,
                    choose: self.config.choose,
                };
                let partitioner = ConvexGraphPartitioner::new(self.lsvc);
                tree = run_bsus(&config, &model, &pf, &partitioner, &self.stop, &stream)?;
                estimate = self.threshold.map(|b| bsus_probability_estimate(&tree, b));
                cov = self.threshold.and_then(|b| bsus_cov(&tree, b).ok());
                levels = tree.nodes().len();
                branches = tree.leaves().count();
                samples = tree.all_samples().collect();
                last = tree.leaves().flat_map(|n| n.level().samples()).collect();
                record = keep.then(|| TreeRecord::from_tree(&tree));
            }
        }
        let maxima = (!self.bench.maximisers.is_empty()).then(|| {
            maxima_found(
                samples.iter().map(|s| s.point.as_slice()),
                &self.bench.maximisers,
                self.config.maxima_radius,
            )
        });
        let design_region = self.bench.has_design_region().then(|| {
            last
                .iter()
                .any(|s| self.bench.in_design_region(&s.point) == Some(true))
        });
        let row = RunRow {
            run_index: index,
            seed,
            estimate,
            cov,
            eval_count: pf.count(),
            levels,
            branches,
            maxima_found: maxima,
            zero_flag: estimate == Some(0.0),
            reached_design_region: design_region,
        };
        Ok((row, record))
    }
}

/// Outcome of one replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub run_index: usize,
    pub seed: u64,
    pub estimate: Option<f64>,
    pub cov: Option<f64>,
    pub eval_count: u64,
    /// Levels of a SuS run, nodes of a BSuS tree.
    pub levels: usize,
    pub branches: usize,
    pub maxima_found: Option<usize>,
    pub zero_flag: bool,
    /// Whether the final level (every leaf, for BSuS) holds a sample in the
    /// design-point neighbourhood.
    pub reached_design_region: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub replications: usize,
    pub reference_probability: Option<f64>,
    pub mean_estimate: Option<f64>,
    pub msle: Option<f64>,
    pub zero_estimates: usize,
    pub mean_cov: Option<f64>,
    pub mean_eval_count: f64,
    pub mean_levels: f64,
    pub mean_branches: f64,
    pub mean_maxima_found: Option<f64>,
    pub design_region_fraction: Option<f64>,
    /// `log10(max / min)` over the positive estimates.
    pub log10_span: Option<f64>,
}

fn mean(values: impl IntoIterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.into_iter().fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

impl Aggregates {
    pub fn from_rows(rows: &[RunRow], reference: Option<f64>) -> Result<Self> {
        let n = rows.len() as f64;
        let estimates: Vec<f64> = rows.iter().filter_map(|r| r.estimate).collect();
        let positive = || estimates.iter().copied().filter(|&e| e > 0.0);
        let (msle_value, zeros) = match reference {
            Some(r) if !estimates.is_empty() => {
                let m = msle(&estimates, r)?;
                (m.value, m.zero_estimates)
            }
            _ => (None, estimates.iter().filter(|&&e| e == 0.0).count()),
        };
        let span = positive()
            .fold(None, |acc: Option<(f64, f64)>, e| {
                Some(acc.map_or((e, e), |(lo, hi)| (lo.min(e), hi.max(e))))
            })
            .map(|(lo, hi)| (hi / lo).log10());
        Ok(Self {
            replications: rows.len(),
            reference_probability: reference,
            mean_estimate: mean(estimates.iter().copied()),
            msle: msle_value,
            zero_estimates: zeros,
            mean_cov: mean(rows.iter().filter_map(|r| r.cov)),
            mean_eval_count: rows.iter().map(|r| r.eval_count as f64).sum::<f64>() / n,
            mean_levels: rows.iter().map(|r| r.levels as f64).sum::<f64>() / n,
            mean_branches: rows.iter().map(|r| r.branches as f64).sum::<f64>() / n,
            mean_maxima_found: mean(rows.iter().filter_map(|r| r.maxima_found.map(|m| m as f64))),
            design_region_fraction: mean(
                rows.iter()
                    .filter_map(|r| r.reached_design_region.map(|d| if d { 1.0 } else { 0.0 })),
            ),
            log10_span: span,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub rows: Vec<RunRow>,
    pub aggregates: Aggregates,
    /// Density of `log10(estimate)` over the positive estimates.
    pub kde: Vec<(f64, f64)>,
}

const KDE_POINTS: usize = 200;

/// Runs every replication (concurrently under [`Execution::Parallel`]) and
/// aggregates. Configuration errors surface before any run starts.
pub fn run_experiment(config: &ExperimentConfig, exec: Execution) -> Result<ExperimentReport> {
    let prepared = config.prepare()?;
    let rows = map_indexed(exec, config.replications, |i| prepared.run(i))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let reference = config
        .failure_threshold
        .is_none()
        .then_some(prepared.bench.reference_probability)
        .flatten();
    let aggregates = Aggregates::from_rows(&rows, reference)?;
    let logs: Vec<f64> = rows
        .iter()
        .filter_map(|r| r.estimate)
        .filter(|&e| e > 0.0)
        .map(f64::log10)
        .collect();
    Ok(ExperimentReport {
        config: config.clone(),
        rows,
        aggregates,
        kde: kde_curve(&logs, KDE_POINTS),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_errors_surface_early() {
        let mut c = ExperimentConfig::new("linear", Algorithm::Sus, 105);
        assert!(matches!(run_experiment(&c, Execution::Sequential), Err(Error::InvalidConfig(_))));
        c.level_size = 100;
        c.benchmark = "unknown".into();
        assert!(matches!(
            run_experiment(&c, Execution::Sequential),
            Err(Error::UnknownBenchmark { .. })
        ));
        c.benchmark = "linear".into();
        c.replications = 0;
        assert!(run_experiment(&c, Execution::Sequential).is_err());
    }

    #[test]
    fn single_replication_report_is_its_row() {
        let mut c = ExperimentConfig::new("linear", Algorithm::Sus, 200);
        c.replications = 1;
        c.seed = 4;
        let report = run_experiment(&c, Execution::Sequential).unwrap();
        let row = &report.rows[0];
        assert_eq!(report.aggregates.mean_estimate, row.estimate);
        assert_eq!(report.aggregates.mean_eval_count, row.eval_count as f64);
        assert_eq!(report.aggregates.mean_cov, row.cov);
        assert_eq!(report.aggregates.log10_span, Some(0.0));
    }

    #[test]
    fn experiment_is_deterministic_across_execution_modes() {
        let mut c = ExperimentConfig::new("piecewise_linear", Algorithm::Bsus, 200);
        c.replications = 4;
        c.seed = 17;
        c.max_levels = 12;
        let a = run_experiment(&c, Execution::Parallel).unwrap();
        let b = run_experiment(&c, Execution::Sequential).unwrap();
        assert_eq!(a, b);
        let again = Aggregates::from_rows(&a.rows, a.aggregates.reference_probability).unwrap();
        assert_eq!(again, a.aggregates);
    }

    #[test]
    fn himmelblau_rows_count_maxima() {
        let mut c = ExperimentConfig::new("himmelblau", Algorithm::Sus, 200);
        c.replications = 2;
        c.max_levels = 15;
        let report = run_experiment(&c, Execution::Parallel).unwrap();
        for row in &report.rows {
            assert!(row.estimate.is_none());
            assert!(row.maxima_found.unwrap() <= 4);
        }
        assert!(report.aggregates.mean_maxima_found.is_some());
    }
}
