//! End-to-end acceptance checks. Prints one `[PASS]` / `[FAIL]` line per
//! criterion and exits non-zero when any criterion fails.

use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::Instant;

use bsus_core::benchmarks::{
    benchmark, normal_tail, run_experiment, Aggregates, Algorithm, ExperimentConfig,
};
use bsus_core::bsus::{
    bsus_cov, bsus_probability_estimate, pair_weights, run_bsus, sample_conditional, BsusConfig, ChooseStrategy,
};
use bsus_core::cgp::{
    alp, build_convexity_graph, community_count, estimate_convexity_measure, graph_sample_count, train_lsvc,
    uniform_in_ball, ConvexGraphPartitioner, ConvexityGraph, LsvcParams, SingleSetPartitioner,
};
use bsus_core::mcmc::ProposalSpec;
use bsus_core::sus::{cov_dmc, cov_mcmc, run_sus, sus_cov, sus_probability_estimate, StopCondition, SusConfig};
use bsus_core::{CountedPerformanceFunction, EvaluatedSample, Execution, InputModel, Level, RngStream};
use rand::Rng;
use statrs::distribution::{ContinuousCDF, Normal};

const EXEC: Execution = Execution::Parallel;
const BIN: &str = env!("CARGO_BIN_EXE_bsus");

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn bsus_cli(args: &[&str]) -> std::process::Output {
    let out = Command::new(BIN).args(args).output().expect("spawn bsus");
    assert!(
        out.status.success(),
        "bsus {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn experiment(bench: &str, algorithm: Algorithm, n: usize, dim: Option<usize>) -> Aggregates {
    let mut c = ExperimentConfig::new(bench, algorithm, n);
    c.dim = dim;
    c.graph_budget = 50;
    c.replications = 100;
    run_experiment(&c, EXEC).expect("experiment").aggregates
}

/// SuS experiment whose mean evaluation count lies within 15% of `target`,
/// found by rescaling the level size (kept a multiple of 10).
fn matched_sus(bench: &str, dim: Option<usize>, target: f64) -> (usize, Aggregates) {
    let mut n = 500;
    let mut agg = experiment(bench, Algorithm::Sus, n, dim);
    for _ in 0..4 {
        if (agg.mean_eval_count / target - 1.0).abs() <= 0.15 {
            break;
        }
        let scaled = n as f64 * target / agg.mean_eval_count;
        n = ((scaled / 10.0).round() as usize).max(1) * 10;
        agg = experiment(bench, Algorithm::Sus, n, dim);
    }
    (n, agg)
}

fn within_budget(a: &Aggregates, b: &Aggregates) -> bool {
    (a.mean_eval_count / b.mean_eval_count - 1.0).abs() <= 0.15
}

fn reference_probability() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let start = Instant::now();
    bsus_cli(&[
        "dmc-reference",
        "--benchmark",
        "piecewise_linear",
        "--samples",
        "10000000",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    let secs = start.elapsed().as_secs_f64();
    let json: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("dmc.json")).unwrap()).unwrap();
    let est = json["estimate"].as_f64().unwrap();
    outcome(
        (2.65e-5..=3.75e-5).contains(&est) && secs < 60.0,
        format!("estimate {est:.3e} (band [2.65e-5, 3.75e-5]), {secs:.1} s"),
    )
}

fn sus_bimodality() -> Outcome {
    let agg = experiment("piecewise_linear", Algorithm::Sus, 500, None);
    let frac = agg.design_region_fraction.unwrap_or(f64::NAN);
    let span = agg.log10_span.unwrap_or(0.0);
    outcome(
        (0.05..=0.50).contains(&frac) && span >= 1.0,
        format!("design-region fraction {frac:.2} (band [0.05, 0.50]), log10 span {span:.2} (>= 1)"),
    )
}

fn bsus_improvement() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for dim in [None, Some(50)] {
        let bsus = experiment("piecewise_linear", Algorithm::Bsus, 500, dim);
        let (n, sus) = matched_sus("piecewise_linear", dim, bsus.mean_eval_count);
        let (mb, ms) = (bsus.msle.unwrap_or(f64::INFINITY), sus.msle.unwrap_or(f64::INFINITY));
        pass &= within_budget(&sus, &bsus) && mb < ms;
        parts.push(format!(
            "{}-d: BSuS MSLE {mb:.3} @ {:.0} evals vs SuS(n={n}) MSLE {ms:.3} @ {:.0} evals",
            dim.unwrap_or(2),
            bsus.mean_eval_count,
            sus.mean_eval_count
        ));
    }
    outcome(pass, parts.join("; "))
}

fn himmelblau_maxima() -> Outcome {
    let bsus = experiment("himmelblau", Algorithm::Bsus, 500, None);
    let (n, sus) = matched_sus("himmelblau", None, bsus.mean_eval_count);
    let mb = bsus.mean_maxima_found.unwrap_or(0.0);
    let ms = sus.mean_maxima_found.unwrap_or(0.0);
    outcome(
        within_budget(&sus, &bsus) && mb >= ms && mb >= 3.0,
        format!(
            "BSuS mean maxima {mb:.2} @ {:.0} evals, SuS(n={n}) {ms:.2} @ {:.0} evals (need BSuS >= SuS and >= 3.0)",
            bsus.mean_eval_count, sus.mean_eval_count
        ),
    )
}

fn degenerate_equivalence() -> Outcome {
    let bench = benchmark("piecewise_linear", None).unwrap();
    let model = InputModel::new(2).unwrap();
    let config = BsusConfig {
        sus: SusConfig::new(500, 0.1, ProposalSpec::default()).unwrap(),
        graph_budget: 50,
        choose: ChooseStrategy::Fifo,
    };
    let stop = [
        StopCondition::FailureCount { threshold: 0.0 },
        StopCondition::ConstantPerformance,
        StopCondition::MaxLevels { max_levels: 200 },
    ];
    let mut mismatches = 0;
    for seed in 0..20 {
        let stream = RngStream::new(seed);
        let pf_s = CountedPerformanceFunction::new(bench.pf.clone());
        let pf_b = CountedPerformanceFunction::new(bench.pf.clone());
        let sus = run_sus(&config.sus, &model, &pf_s, &stop, &stream).unwrap();
        let tree = run_bsus(&config, &model, &pf_b, &SingleSetPartitioner, &stop, &stream).unwrap();
        let same = sus_probability_estimate(&sus, 0.0) == bsus_probability_estimate(&tree, 0.0)
            && sus_cov(&sus, 0.0).ok() == bsus_cov(&tree, 0.0).ok()
            && sus.eval_count() == tree.eval_count()
            && pf_s.count() == pf_b.count();
        mismatches += usize::from(!same);
    }
    outcome(mismatches == 0, format!("{mismatches} of 20 seeds differ"))
}

fn estimator_oracle() -> Outcome {
    let exact = normal_tail(2.0);
    let mut pass = true;
    let mut parts = Vec::new();
    for algorithm in [Algorithm::Sus, Algorithm::Bsus] {
        let mut c = ExperimentConfig::new("linear", algorithm, 1000);
        c.replications = 50;
        let agg = run_experiment(&c, EXEC).unwrap().aggregates;
        let mean = agg.mean_estimate.unwrap();
        let band = 3.0 * agg.mean_cov.unwrap() * exact / 50f64.sqrt();
        pass &= (mean - exact).abs() <= band;
        parts.push(format!("{algorithm:?} mean {mean:.6} (|err| {:.2e} <= {band:.2e})", (mean - exact).abs()));
    }
    outcome(pass, format!("exact {exact:.7}; {}", parts.join("; ")))
}

fn formula_identities() -> Outcome {
    let mut failures = Vec::new();
    let mut check = |name: &str, got: f64, want: f64| {
        if (got - want).abs() > 1e-12 {
            failures.push(format!("{name}: {got} != {want}"));
        }
    };
    check("cov_dmc(0.1, 1000)", cov_dmc(0.1, 1000).unwrap(), 0.009f64.sqrt());
    for (p, n) in [(0.1, 1000), (0.37, 250), (1e-3, 10_000)] {
        check("cov_mcmc at gamma 0", cov_mcmc(p, n, 0.0).unwrap(), cov_dmc(p, n).unwrap());
    }
    let mut rng = RngStream::new(7).rng();
    for _ in 0..100 {
        let k = rng.random_range(1..12);
        let est: Vec<f64> = (0..k).map(|_| rng.random::<f64>() * 1e-3).collect();
        check("sum of pair weights", pair_weights(&est).iter().flatten().sum(), 1.0);
    }
    check("graph_sample_count(50)", graph_sample_count(50) as f64, 10.0);
    check("graph_sample_count(124750)", graph_sample_count(124_750) as f64, 500.0);
    let detail = if failures.is_empty() {
        "cov_dmc, cov_mcmc(gamma=0), weight normalisation, graph sample counts".into()
    } else {
        failures.join("; ")
    };
    outcome(failures.is_empty(), detail)
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, v.sqrt())
}

/// Shared-root identity `delta_1 delta_2 rho = delta^2` for `P1 = P Pa`,
/// `P2 = P Pb` with independent binomial fractions; returns the batch mean
/// of the difference and its standard error.
fn shared_root_identity() -> (f64, f64) {
    const BATCHES: usize = 20;
    const PER_BATCH: usize = 10_000;
    let fraction = |rng: &mut rand_chacha::ChaCha8Rng, n: usize, q: f64| {
        (0..n).filter(|_| rng.random::<f64>() < q).count() as f64 / n as f64
    };
    let diffs: Vec<f64> = (0..BATCHES)
        .map(|b| {
            let mut rng = RngStream::new(11).child(b as u64).rng();
            let (mut p, mut p1, mut p2) = (Vec::new(), Vec::new(), Vec::new());
            for _ in 0..PER_BATCH {
                let root = fraction(&mut rng, 40, 0.2);
                let a = fraction(&mut rng, 30, 0.4);
                let bb = fraction(&mut rng, 25, 0.6);
                p.push(root);
                p1.push(root * a);
                p2.push(root * bb);
            }
            let (m, s) = mean_sd(&p);
            let (m1, s1) = mean_sd(&p1);
            let (m2, s2) = mean_sd(&p2);
            let cov = p1.iter().zip(&p2).map(|(x, y)| (x - m1) * (y - m2)).sum::<f64>() / (PER_BATCH as f64 - 1.0);
            let rho = cov / (s1 * s2);
            (s1 / m1) * (s2 / m2) * rho - (s / m).powi(2)
        })
        .collect();
    let (m, s) = mean_sd(&diffs);
    (m, s / (BATCHES as f64).sqrt())
}

/// Kolmogorov-Smirnov distance between `xs` and the standard normal
/// truncated to `[b, inf)`.
fn ks_truncated_normal(xs: &mut [f64], b: f64) -> f64 {
    let normal = Normal::standard();
    let tail = normal.sf(b);
    let cdf = |x: f64| if x < b { 0.0 } else { (normal.cdf(x) - normal.cdf(b)) / tail };
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

fn conditional_sampler_ks() -> f64 {
    let b = 2.0;
    let model = InputModel::new(1).unwrap();
    let pf = CountedPerformanceFunction::from_fn(1, |x| x[0]);
    let config = BsusConfig {
        sus: SusConfig::new(1000, 0.1, ProposalSpec::default()).unwrap(),
        graph_budget: 50,
        choose: ChooseStrategy::Fifo,
    };
    let stop = [
        StopCondition::FailureCount { threshold: b },
        StopCondition::MaxLevels { max_levels: 50 },
    ];
    let partitioner = ConvexGraphPartitioner::new(LsvcParams::default());
    let tree = run_bsus(&config, &model, &pf, &partitioner, &stop, &RngStream::new(5)).unwrap();
    let draws = sample_conditional(
        &tree,
        b,
        10_000,
        20,
        &ProposalSpec::default(),
        &pf,
        EXEC,
        &RngStream::new(6),
    )
    .unwrap();
    let mut xs: Vec<f64> = draws.iter().map(|s| s.point[0]).collect();
    ks_truncated_normal(&mut xs, b)
}

/// `(n, |mean - exact|, standard error)` for SuS on the linear oracle.
fn bias_by_level_size() -> Vec<(usize, f64, f64)> {
    let exact = normal_tail(2.0);
    [500, 1000, 2000]
        .into_iter()
        .map(|n| {
            let mut c = ExperimentConfig::new("linear", Algorithm::Sus, n);
            c.replications = 400;
            c.seed = 2024;
            let rows = run_experiment(&c, EXEC).unwrap().rows;
            let est: Vec<f64> = rows.iter().filter_map(|r| r.estimate).collect();
            let (m, s) = mean_sd(&est);
            (n, (m - exact).abs(), s / (est.len() as f64).sqrt())
        })
        .collect()
}

fn estimator_and_sampler_properties() -> Outcome {
    let (diff, se) = shared_root_identity();
    let identity_ok = diff.abs() <= 3.0 * se;
    let ks = conditional_sampler_ks();
    let ks_ok = ks < 0.03;
    let bias = bias_by_level_size();
    let shrinks = bias
        .windows(2)
        .all(|w| w[1].1 <= w[0].1 + 2.0 * (w[0].2.powi(2) + w[1].2.powi(2)).sqrt());
    let bias_text: Vec<String> = bias
        .iter()
        .map(|(n, b, se)| format!("n={n}: {b:.2e}±{se:.1e}"))
        .collect();
    outcome(
        identity_ok && ks_ok && shrinks,
        format!(
            "shared-root identity diff {diff:.2e} (3σ {:.2e}); KS {ks:.4} (< 0.03); |bias| {}",
            3.0 * se,
            bias_text.join(", ")
        ),
    )
}

fn cgp_suite() -> Outcome {
    let mut failures = Vec::new();

    let triangles = ConvexityGraph::from_edges(6, &[(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)]);
    let split = (0..100)
        .filter(|&s| {
            let l = alp(&triangles, &RngStream::new(s));
            community_count(&l) == 2 && l[0] == l[1] && l[1] == l[2] && l[3] == l[4] && l[4] == l[5]
        })
        .count();
    if split != 100 {
        failures.push(format!("ALP two triangles: {split}/100"));
    }

    let mut rng = RngStream::new(3).rng();
    let mut points = Vec::new();
    let mut labels = Vec::new();
    for i in 0..200 {
        let label = i % 2;
        let shift = if label == 0 { -3.0 } else { 3.0 };
        points.push(vec![shift + rng.random_range(-1.0..1.0), rng.random_range(-5.0..5.0)]);
        labels.push(label);
    }
    let clf = train_lsvc(&points, &labels, LsvcParams::default()).unwrap();
    let correct = points.iter().zip(&labels).filter(|(p, &l)| clf.predict(p) == l).count();
    if correct != points.len() {
        failures.push(format!("LSVC accuracy {correct}/{}", points.len()));
    }

    let pf = CountedPerformanceFunction::from_fn(2, |x| -(x[0] * x[0] + x[1] * x[1]));
    let level = Level::from_prior(
        InputModel::new(2)
            .unwrap()
            .sample_prior(100, &RngStream::new(4))
            .into_iter()
            .map(|p| pf.evaluate(p).unwrap())
            .collect::<Vec<EvaluatedSample>>(),
    );
    for budget in [50u64, 300] {
        let before = pf.count();
        let graph = build_convexity_graph(&level, &pf, budget, &RngStream::new(5)).unwrap();
        let n = graph.len() as u64;
        if n != graph_sample_count(budget) as u64 || pf.count() - before != n * (n - 1) / 2 {
            failures.push(format!("graph budget {budget}: {} evaluations for {n} vertices", pf.count() - before));
        }
    }

    let half_space = estimate_convexity_measure(
        |x| x[0] >= 1.0,
        |r| vec![r.random_range(1.0..6.0), r.random_range(-4.0..4.0)],
        2000,
        16,
        &RngStream::new(8),
    );
    if half_space != 1.0 {
        failures.push(format!("half-space measure {half_space}"));
    }
    let centres = [[-3.0, 0.0], [3.0, 0.0]];
    let two_balls = estimate_convexity_measure(
        |x| centres.iter().any(|c| (x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2) <= 1.0),
        |r| {
            let c = centres[r.random_range(0..2)];
            uniform_in_ball(r, &c, 1.0)
        },
        4000,
        16,
        &RngStream::new(9),
    );
    if (two_balls - 0.5).abs() > 0.05 {
        failures.push(format!("two-ball measure {two_balls:.3}"));
    }

    let detail = if failures.is_empty() {
        format!("ALP 100/100, LSVC 1.0, graph evaluations exact, half-space 1.0, two balls {two_balls:.3}")
    } else {
        failures.join("; ")
    };
    outcome(failures.is_empty(), detail)
}

fn run_twice(args: &[&str], files: &[&str]) -> Result<(), String> {
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let outputs: Vec<Vec<Vec<u8>>> = dirs
        .iter()
        .map(|d| {
            let mut full: Vec<&str> = args.to_vec();
            full.extend(["--out", d.path().to_str().unwrap()]);
            let out = bsus_cli(&full);
            let mut bytes = vec![out.stdout];
            bytes.extend(files.iter().map(|f| std::fs::read(d.path().join(f)).unwrap()));
            bytes
        })
        .collect();
    if outputs[0] == outputs[1] {
        Ok(())
    } else {
        Err(format!("{} differs between repeats", args[0]))
    }
}

fn determinism() -> Outcome {
    let runs: [(&[&str], &[&str]); 5] = [
        (&["run-sus", "--benchmark", "piecewise_linear", "--seed", "3"], &["tree.json", "summary.json"]),
        (&["run-bsus", "--benchmark", "himmelblau", "--seed", "3"], &["tree.json", "summary.json"]),
        (
            &["experiment", "--benchmark", "piecewise_linear", "--algorithm", "bsus", "--n", "200", "--replications", "6", "--seed", "9"],
            &["runs.csv", "report.json"],
        ),
        (
            &["experiment", "--benchmark", "linear", "--algorithm", "sus", "--n", "300", "--replications", "6", "--workers", "1"],
            &["runs.csv", "report.json"],
        ),
        (&["dmc-reference", "--benchmark", "linear", "--samples", "200000", "--seed", "4"], &["dmc.json"]),
    ];
    let mut errors: Vec<String> = runs.iter().filter_map(|(a, f)| run_twice(a, f).err()).collect();

    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    bsus_cli(&["run-bsus", "--benchmark", "piecewise_linear", "--seed", "1", "--out", out]);
    let tree = dir.path().join("tree.json");
    let report = |p: &Path| bsus_cli(&["report", p.to_str().unwrap()]).stdout;
    if report(&tree) != report(&tree) {
        errors.push("report differs between repeats".into());
    }

    let pool = |w: &str| {
        let d = tempfile::tempdir().unwrap();
        bsus_cli(&[
            "experiment", "--benchmark", "himmelblau", "--n", "200", "--replications", "4", "--workers", w, "--out",
            d.path().to_str().unwrap(),
        ]);
        std::fs::read(d.path().join("runs.csv")).unwrap()
    };
    if pool("1") != pool("3") {
        errors.push("runs.csv depends on --workers".into());
    }

    let detail = if errors.is_empty() {
        "run-sus, run-bsus, experiment, dmc-reference, report byte-identical; worker count irrelevant".into()
    } else {
        errors.join("; ")
    };
    outcome(errors.is_empty(), detail)
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("1 reference probability", reference_probability),
        ("2 SuS bimodality", sus_bimodality),
        ("3 BSuS improvement at matched budget", bsus_improvement),
        ("4 Himmelblau maxima", himmelblau_maxima),
        ("5 single-set BSuS equals SuS", degenerate_equivalence),
        ("6 estimator oracle", estimator_oracle),
        ("7 formula identities", formula_identities),
        ("8 estimator and sampler properties", estimator_and_sampler_properties),
        ("9 CGP unit suite", cgp_suite),
        ("10 determinism", determinism),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let start = Instant::now();
        let o = check();
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!("[{tag}] {name}: {} ({:.1} s)", o.detail, start.elapsed().as_secs_f64());
        failed += usize::from(!o.pass);
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
