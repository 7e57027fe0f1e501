//! Acceptance suite: one pass/fail line per criterion, nonzero exit on any
//! failure. Run with `cargo test -p gstat-cli --test acceptance`.

use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use gstat::axioms::{check_axioms, check_basic_inequalities, BoxSampler};
use gstat::density::{
    exact_density, factorized_density, monte_carlo_density, DensityMethod, TuplePredicate, VerdictKind,
};
use gstat::generate::{generate, is_square, GeneratorSpec, IndexSet};
use gstat::harness::{sample_case, HarnessConfig, Theorem};
use gstat::seed::rng_for;
use gstat::statconv::{
    classical_convergence_test, extract_modified_sequence, stat_cauchy_report, stat_convergence_report, AnalysisConfig,
    ExtractionConfig, PivotSearch, TailOptions,
};
use gstat::{BaseMetric, GMetric, Point, SequencePrefix};
use rand::Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn square_spike(n: usize) -> SequencePrefix {
    generate(&GeneratorSpec::SquareSpike { n }).unwrap()
}

fn abs_max(l: usize) -> GMetric {
    GMetric::max_pairwise(BaseMetric::Absolute, l).unwrap()
}

fn within_time(start: Instant, limit: Duration) -> Result<Duration, String> {
    let took = start.elapsed();
    ensure(took < limit, format!("took {took:.2?}, limit {limit:?}"))?;
    Ok(took)
}

fn square_spike_reproduction() -> Outcome {
    let start = Instant::now();
    let n = 10_000usize;
    let s = square_spike(n);
    let g = abs_max(2);
    let x = Point::scalar(0.0);

    let root = (n as f64).sqrt().floor() as usize;
    let m = (n - root) as f64;
    let closed = 2.0 / (n * n) as f64 * (m * (m - 1.0) / 2.0);
    let f = factorized_density(|i| !is_square(i), n, 2).map_err(|e| e.to_string())?;
    ensure((f.value - closed).abs() <= 1e-12, format!("factorized {} vs closed form {closed}", f.value))?;

    let cfg = AnalysisConfig::for_prefix(&s, 2).map_err(|e| e.to_string())?;
    let r = stat_convergence_report(&s, &g, &x, &[0.5], &cfg).map_err(|e| e.to_string())?;
    let e = &r.per_eps[0];
    let last = e.trace.last().unwrap();
    ensure((last.value - closed).abs() <= 1e-12, format!("report density {} vs {closed}", last.value))?;
    ensure(e.verdict.kind == VerdictKind::TendsToOne, format!("verdict {:?}", e.verdict.kind))?;

    let opts = TailOptions::default();
    for tail in 1..=n - root {
        let c = classical_convergence_test(&s, &g, &x, 0.5, tail, &opts).map_err(|e| e.to_string())?;
        ensure(!c.holds, format!("classical test holds from {tail}"))?;
    }

    let small = square_spike(200);
    let p = TuplePredicate::new(2, |t| g.evaluate(&[&x, small.get(t[0]), small.get(t[1])]).unwrap() < 0.5);
    let exact = exact_density(&p, 200, u128::MAX).map_err(|e| e.to_string())?;
    let fact = factorized_density(|i| !is_square(i), 200, 2).map_err(|e| e.to_string())?;
    ensure(
        exact.count == fact.count && exact.value.to_bits() == fact.value.to_bits(),
        format!("n=200 exact {} vs factorized {}", exact.value, fact.value),
    )?;
    let took = within_time(start, Duration::from_secs(5))?;
    Ok(format!(
        "density {} at n=10^4 (closed form {closed}), tends-to-one, classical false for tail starts 1..={}, n=200 exact = factorized = {}, {took:.2?}",
        last.value,
        n - root,
        exact.value
    ))
}

fn axiom_metrics() -> Vec<(GMetric, usize)> {
    let mut v = Vec::new();
    for l in [1, 2, 3, 5] {
        v.push((GMetric::max_pairwise(BaseMetric::Absolute, l).unwrap(), 1));
        v.push((GMetric::max_pairwise(BaseMetric::Euclidean, l).unwrap(), 2));
    }
    for l in [2, 4] {
        v.push((GMetric::discrete(l).unwrap(), 1));
        v.push((GMetric::discrete(l).unwrap(), 2));
    }
    v
}

fn axiom_suite() -> Outcome {
    let start = Instant::now();
    let mut statements = 0;
    for (k, (g, dim)) in axiom_metrics().iter().enumerate() {
        let r = check_axioms(g, &BoxSampler::new(*dim), 10_000, 100 + k as u64, 1e-12).map_err(|e| e.to_string())?;
        statements += r.checked.values().sum::<u64>();
        ensure(r.passed(), format!("{} dim {dim}: {:?}", g.name(), r.violations.first()))?;
    }
    let took = within_time(start, Duration::from_secs(30))?;
    Ok(format!("{} metrics, {statements} axiom statements, 0 violations, {took:.2?}", axiom_metrics().len()))
}

fn inequality_suite() -> Outcome {
    let mut statements = 0;
    for (k, (g, dim)) in axiom_metrics().iter().enumerate() {
        let r = check_basic_inequalities(g, &BoxSampler::new(*dim), 10_000, 200 + k as u64, 1e-12)
            .map_err(|e| e.to_string())?;
        statements += r.checked.values().sum::<u64>();
        ensure(r.passed(), format!("{} dim {dim}: {:?}", g.name(), r.violations.first()))?;
    }
    Ok(format!("{} metrics, {statements} inequality statements over items 1-7, 0 violations", axiom_metrics().len()))
}

fn estimator_agreement() -> Outcome {
    let mut within = 0;
    for case in 0..100u64 {
        let mut rng = rng_for(0xACCE, &[case]);
        let l = rng.gen_range(1..=3);
        let n = rng.gen_range(l.max(2)..=200);
        let p_in: f64 = rng.gen_range(0.05..1.0);
        let members: Vec<bool> = (0..n).map(|_| rng.gen_bool(p_in)).collect();
        let q = |i: usize| members[i - 1];
        let p = TuplePredicate::factorized(l, q);
        let exact = exact_density(&p, n, u128::MAX).map_err(|e| e.to_string())?;
        let fact = factorized_density(q, n, l).map_err(|e| e.to_string())?;
        ensure(exact.method == DensityMethod::Exact, "exact path not taken")?;
        ensure(exact.count == fact.count, format!("case {case}: exact {} vs factorized {}", exact.count, fact.count))?;
        let mc = monte_carlo_density(&p, n, 100_000, case).map_err(|e| e.to_string())?;
        if (mc.value - exact.value).abs() <= 4.0 * mc.ci_halfwidth {
            within += 1;
        }
    }
    ensure(within >= 95, format!("Monte Carlo within 4 ci half-widths in only {within}/100 cases"))?;
    Ok(format!("exact = factorized in 100/100, Monte Carlo within 4 ci half-widths in {within}/100"))
}

fn classical_implies_statistical() -> Outcome {
    let cfg = HarnessConfig::default();
    let (mut holds, mut antecedent) = (0, 0);
    for trial in 0..100u64 {
        let case = sample_case(Theorem::ClassicalImpliesStatistical, gstat::seed::derive_seed(21, &[trial]), &cfg)
            .map_err(|e| e.to_string())?;
        let s = generate(&case.generator).map_err(|e| e.to_string())?;
        let g = GMetric::from_spec(&case.metric).map_err(|e| e.to_string())?;
        let a = harness_analysis(&case.grid, &cfg, case.seed);
        let r = stat_convergence_report(&s, &g, &case.limit, &case.epsilons, &a).map_err(|e| e.to_string())?;
        antecedent += r.classical_verdict as usize;
        if !r.classical_verdict || r.overall {
            holds += 1;
        }
    }
    ensure(holds == 100, format!("implication holds in {holds}/100"))?;
    Ok(format!("implication holds in 100/100 ({antecedent} with the classical test true at every radius)"))
}

fn harness_analysis(grid: &[usize], cfg: &HarnessConfig, seed: u64) -> AnalysisConfig {
    AnalysisConfig {
        grid: grid.to_vec(),
        policy: cfg.policy.with_seed(seed),
        verdict: cfg.verdict,
        classical_budget: cfg.classical_budget,
        classical_samples: cfg.classical_samples,
    }
}

fn statistical_implies_cauchy() -> Outcome {
    let cfg = HarnessConfig::default();
    let (mut holds, mut antecedent, mut max_tried) = (0, 0, 0);
    for trial in 0..100u64 {
        let case = sample_case(Theorem::StatisticalCauchy, gstat::seed::derive_seed(24, &[trial]), &cfg)
            .map_err(|e| e.to_string())?;
        let s = generate(&case.generator).map_err(|e| e.to_string())?;
        let g = GMetric::from_spec(&case.metric).map_err(|e| e.to_string())?;
        let l = g.order();
        let a = harness_analysis(&case.grid, &cfg, case.seed);
        let reduced: Vec<f64> = case.epsilons.iter().map(|e| e / (l * (l + 1)) as f64).collect();
        let r = stat_convergence_report(&s, &g, &case.limit, &reduced, &a).map_err(|e| e.to_string())?;
        let search = PivotSearch { seed: case.seed, ..PivotSearch::default() };
        let c = stat_cauchy_report(&s, &g, &case.epsilons, &a, &search).map_err(|e| e.to_string())?;
        ensure(c.candidates.len() <= 32, "more than 32 pivot candidates")?;
        antecedent += r.overall as usize;
        if r.overall {
            max_tried = c.per_eps.iter().map(|e| e.pivot_candidates_tried).fold(max_tried, usize::max);
        }
        if !r.overall || c.overall {
            holds += 1;
        }
    }
    ensure(antecedent == 100, format!("antecedent true for only {antecedent}/100 fixtures"))?;
    ensure(holds == 100, format!("implication holds in {holds}/100"))?;
    Ok(format!("100/100 fixtures statistically convergent and Cauchy, at most {max_tried} pivot candidates tried"))
}

fn modified_sequence_construction() -> Outcome {
    let n = 10_000;
    let s = square_spike(n);
    let g = abs_max(2);
    let x = Point::scalar(0.0);
    let cfg = ExtractionConfig::new(AnalysisConfig::for_prefix(&s, 2).map_err(|e| e.to_string())?);
    let e = extract_modified_sequence(&s, &g, &x, &cfg).map_err(|e| e.to_string())?;
    let eps = 0.01;
    let tail = e.tail_start_for(eps, 2);
    let opts = TailOptions::default();
    let y = classical_convergence_test(&e.modified_sequence, &g, &x, eps, tail, &opts).map_err(|e| e.to_string())?;
    ensure(y.holds, format!("modified sequence fails the tail test from {tail}"))?;
    ensure(e.mismatch_set == IndexSet::Squares.members_up_to(n), "mismatch set differs from the squares")?;
    let mismatch = e.mismatch_density_trace.last().unwrap();
    ensure(
        mismatch.n == n && mismatch.value <= 1e-4,
        format!("mismatch density {} at {}", mismatch.value, mismatch.n),
    )?;
    ensure(e.mismatch_verdict.tends_to_zero(), "mismatch trace does not tend to zero")?;
    ensure(e.agreement.verdict.tends_to_one(), "agreement set is not statistically dense")?;
    let sub = e.agreement_subsequence(&s).map_err(|e| e.to_string())?;
    let c = classical_convergence_test(&sub, &g, &x, eps, 1, &opts).map_err(|e| e.to_string())?;
    ensure(c.holds, "agreement subsequence fails the convergent-subsequence check")?;
    let bounds: Vec<usize> = e.block_boundaries.iter().map(|b| b.n).collect();
    Ok(format!(
        "schedule {bounds:?}, y passes the tail test at eps=0.01 from {tail}, mismatch set = {} squares with density {} at n=10^4, agreement subsequence of {} terms converges",
        e.mismatch_set.len(),
        mismatch.value,
        sub.len()
    ))
}

fn order_one_coincidence() -> Outcome {
    let n = 10_000;
    let s = square_spike(n);
    let cfg = AnalysisConfig::for_prefix(&s, 1).map_err(|e| e.to_string())?;
    let r = stat_convergence_report(&s, &abs_max(1), &Point::scalar(0.0), &[0.5], &cfg).map_err(|e| e.to_string())?;
    let e = &r.per_eps[0];
    let last = e.trace.last().unwrap();
    let expected = (n - 100) as f64 / n as f64;
    ensure((last.value - expected).abs() <= 1e-12, format!("density {} vs {expected}", last.value))?;
    ensure(e.verdict.tends_to_one(), format!("verdict {:?}", e.verdict.kind))?;
    Ok(format!("density {} at n=10^4 (expected {expected}), tends-to-one", last.value))
}

fn run_cli(args: &[String]) -> Result<Vec<u8>, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_gstat")).args(args).output().map_err(|e| e.to_string())?;
    match out.status.code() {
        Some(0) | Some(1) => Ok(out.stdout),
        other => Err(format!("{args:?} exited with {other:?}: {}", String::from_utf8_lossy(&out.stderr))),
    }
}

fn payload_bytes(args: &[&str]) -> Result<String, String> {
    let mut all: Vec<String> = args.iter().map(|s| s.to_string()).collect();
    all.extend(["--json".into(), "-".into()]);
    let out = run_cli(&all)?;
    let doc: serde_json::Value = serde_json::from_slice(&out).map_err(|e| format!("{args:?}: {e}"))?;
    Ok(doc["payload"].to_string())
}

fn cli_determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = |name: &str| dir.path().join(name).to_string_lossy().into_owned();
    let (y1, y2, a1, a2) = (path("y1.txt"), path("y2.txt"), path("a1.txt"), path("a2.txt"));
    let runs: Vec<(&str, Vec<Vec<&str>>)> = vec![
        ("axioms", vec![vec!["axioms", "--order", "3", "--dim", "2", "--trials", "2000", "--seed", "9"]]),
        (
            "analyze",
            vec![
                vec!["analyze", "--generator", "square-spike:n=10000", "--limit", "auto", "--seed", "9"],
                vec![
                    "analyze",
                    "--generator",
                    "random-walk:start=0,step=1,seed=3,n=3000",
                    "--estimator",
                    "mc",
                    "--order",
                    "3",
                    "--seed",
                    "9",
                ],
            ],
        ),
        ("cauchy", vec![vec!["cauchy", "--generator", "alternating:a=0,b=5,n=2048", "--eps", "1,0.1", "--seed", "9"]]),
        (
            "density",
            vec![vec![
                "density",
                "--set",
                "squares",
                "-n",
                "5000",
                "--estimator",
                "mc",
                "--ngrid",
                "100:5000:log2",
                "--seed",
                "9",
            ]],
        ),
        ("falsify", vec![vec!["falsify", "--theorem", "T2.3", "--trials", "8", "--len", "2048", "--seed", "9"]]),
    ];
    let mut compared = 0;
    for (name, variants) in &runs {
        for args in variants {
            let (a, b) = (payload_bytes(args)?, payload_bytes(args)?);
            ensure(a == b, format!("{name}: payloads differ between runs"))?;
            compared += 1;
        }
    }
    let extract = |y: &str, a: &str| {
        payload_bytes(&[
            "extract",
            "--generator",
            "square-spike:n=4096",
            "--seed",
            "9",
            "--out-sequence",
            y,
            "--out-indices",
            a,
        ])
        .map(|p| p.replace(y, "Y").replace(a, "A"))
    };
    ensure(extract(&y1, &a1)? == extract(&y2, &a2)?, "extract: payloads differ between runs")?;
    let read = |p: &str| std::fs::read(p).map_err(|e| e.to_string());
    ensure(read(&y1)? == read(&y2)? && read(&a1)? == read(&a2)?, "extract: output files differ")?;
    compared += 1;

    let trace = path("trace.json");
    let trace_doc = run_cli(
        &["density", "--set", "cubes", "-n", "4096", "--ngrid", "64:4096:log", "--json", "-"].map(String::from),
    )?;
    std::fs::write(&trace, trace_doc).map_err(|e| e.to_string())?;
    let mut plots = Vec::new();
    for k in 0..2 {
        let (csv, svg) = (path(&format!("t{k}.csv")), path(&format!("t{k}.svg")));
        run_cli(&[
            "trace-plot".into(),
            "--trace".into(),
            trace.clone(),
            "--csv".into(),
            csv.clone(),
            "--svg".into(),
            svg.clone(),
        ])?;
        plots.push((read(&csv)?, read(&svg)?));
    }
    ensure(plots[0] == plots[1], "trace-plot: outputs differ between runs")?;
    compared += 1;
    Ok(format!("{compared} invocations across all 7 subcommands byte-identical across two runs"))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("square-spike density, verdict and classical failure", square_spike_reproduction),
        ("g-metric axiom suite", axiom_suite),
        ("basic inequality suite", inequality_suite),
        ("estimator agreement", estimator_agreement),
        ("classical convergence implies statistical convergence", classical_implies_statistical),
        ("statistical convergence implies statistical Cauchy", statistical_implies_cauchy),
        ("modified sequence construction", modified_sequence_construction),
        ("order one reduces to classical statistical convergence", order_one_coincidence),
        ("CLI determinism", cli_determinism),
    ];
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = check();
        let took = start.elapsed();
        match outcome {
            Ok(detail) => println!("[PASS] {}. {name}: {detail} ({took:.2?})", k + 1),
            Err(why) => {
                failed += 1;
                println!("[FAIL] {}. {name}: {why} ({took:.2?})", k + 1)
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
