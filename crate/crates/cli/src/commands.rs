use std::path::{Path, PathBuf};
use std::process::ExitCode;

use gstat::axioms::{check_axioms, check_basic_inequalities, AxiomReport, BoxSampler, InequalityReport};
use gstat::density::{
    density_trace, exact_density, factorized_density, monte_carlo_density, DensityEstimate, DensityTrace,
    EstimatorPolicy, LimitVerdict, TuplePredicate, VerdictRule,
};
use gstat::generate::IndexSet;
use gstat::harness::{falsify, HarnessConfig, Theorem};
use gstat::io::{load_index_set, save_index_set, save_sequence};
use gstat::statconv::{
    auto_convergence_report, classical_convergence_test, default_grid, extract_modified_sequence, stat_cauchy_report,
    stat_convergence_report, AnalysisConfig, BlockBoundary, ClassicalOutcome, ExtractionConfig, PivotSearch,
    TailOptions,
};
use gstat::{Point, SequencePrefix};
use serde::{Deserialize, Serialize};

use crate::args::*;
use crate::envelope::write_report;
use crate::error::{CliError, CliResult};
use crate::options::*;
use crate::plot::{trace_csv, trace_svg};

pub const EXIT_FAILED: u8 = 1;

/// Writes the report when `--json` is given. The human summary goes to
/// stdout unless the report itself does.
fn emit<T: Serialize>(out: &OutputArgs, payload: &T, summary: impl FnOnce() -> String) -> CliResult<()> {
    if let Some(path) = &out.json {
        write_report(path, Some(out.seed), payload)?;
        if path == Path::new("-") {
            return Ok(());
        }
    }
    print!("{}", summary());
    Ok(())
}

fn exit(ok: bool) -> ExitCode {
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_FAILED)
    }
}

fn analysis_config(s: &SequencePrefix, l: usize, e: &EstimationArgs, seed: u64) -> CliResult<AnalysisConfig> {
    check_eps(&e.eps)?;
    let grid = match &e.ngrid {
        Some(spec) => parse_grid(spec)?,
        None => default_grid(s.len(), l)?,
    };
    let policy = policy(e, seed)?;
    Ok(AnalysisConfig {
        grid,
        policy,
        verdict: VerdictRule::default(),
        classical_budget: policy.budget,
        classical_samples: policy.samples,
    })
}

#[derive(Serialize)]
struct AxiomsPayload {
    passed: bool,
    axioms: AxiomReport,
    inequalities: InequalityReport,
}

pub fn axioms(a: &AxiomsArgs) -> CliResult<ExitCode> {
    let g = build_metric(&a.metric, a.dim)?;
    let sampler = BoxSampler::new(a.dim);
    let seed = a.output.seed;
    let axioms = check_axioms(&g, &sampler, a.trials, seed, a.tolerance)?;
    let inequalities = check_basic_inequalities(&g, &sampler, a.trials, seed, a.tolerance)?;
    let payload = AxiomsPayload { passed: axioms.passed() && inequalities.passed(), axioms, inequalities };
    emit(&a.output, &payload, || {
        let mut s = format!("{} (order {}), {} trials\n", g.name(), g.order(), a.trials);
        for (label, r) in [("axioms", &payload.axioms), ("inequalities", &payload.inequalities)] {
            s += &format!(
                "  {label}: {} statements, {} violations\n",
                r.checked.values().sum::<u64>(),
                r.violations.len()
            );
        }
        s
    })?;
    Ok(exit(payload.passed))
}

pub fn analyze(a: &AnalyzeArgs) -> CliResult<ExitCode> {
    let s = load_input(&a.input)?;
    let g = build_metric(&a.metric, s.dim())?;
    let seed = a.output.seed;
    let cfg = analysis_config(&s, g.order(), &a.estimation, seed)?;
    let eps = &a.estimation.eps;
    let report = match parse_limit(&a.limit)? {
        Some(x) => stat_convergence_report(&s, &g, &x, eps, &cfg)?,
        None => auto_convergence_report(&s, &g, eps, &cfg)?,
    };
    emit(&a.output, &report, || {
        let mut out = format!(
            "limit {:?} ({:?}), N={}, statistical: {}, classical from {}: {}\n",
            report.candidate_limit.coords(),
            report.limit_source,
            report.prefix_len,
            report.overall,
            report.classical_tail_start,
            report.classical_verdict
        );
        for e in &report.per_eps {
            let last = e.trace.last().map_or(f64::NAN, |l| l.value);
            out += &format!(
                "  eps={}: final density {last}, {:?}, classical {}\n",
                e.eps, e.verdict.kind, e.classical.holds
            );
        }
        out + "verdicts concern a finite prefix\n"
    })?;
    Ok(ExitCode::SUCCESS)
}

pub fn cauchy(a: &CauchyArgs) -> CliResult<ExitCode> {
    let s = load_input(&a.input)?;
    let g = build_metric(&a.metric, s.dim())?;
    let seed = a.output.seed;
    let cfg = analysis_config(&s, g.order(), &a.estimation, seed)?;
    if a.heuristic_pivots + a.random_pivots == 0 {
        return Err(CliError::Usage("at least one pivot candidate is required".into()));
    }
    let search = PivotSearch { heuristic: a.heuristic_pivots, random: a.random_pivots, probes: 64, seed };
    let report = stat_cauchy_report(&s, &g, &a.estimation.eps, &cfg, &search)?;
    emit(&a.output, &report, || {
        let mut out = format!("N={}, statistical Cauchy: {}\n", report.prefix_len, report.overall);
        for e in &report.per_eps {
            let last = e.trace.last().map_or(f64::NAN, |l| l.value);
            out += &format!(
                "  eps={}: pivot {} after {} candidates, final density {last}, {:?}\n",
                e.eps, e.pivot, e.pivot_candidates_tried, e.verdict.kind
            );
        }
        out + "verdicts concern a finite prefix\n"
    })?;
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct DensityPayload {
    set: String,
    n: usize,
    l: usize,
    estimate: DensityEstimate,
    #[serde(skip_serializing_if = "Option::is_none")]
    trace: Option<DensityTrace>,
    #[serde(skip_serializing_if = "Option::is_none")]
    verdict: Option<LimitVerdict>,
}

pub fn density(a: &DensityArgs) -> CliResult<ExitCode> {
    let (label, set) = match (&a.source.set, &a.source.index_file) {
        (Some(name), _) => (name.clone(), IndexSet::named(name)?),
        (None, Some(path)) => (path.display().to_string(), IndexSet::Explicit(load_index_set(path)?)),
        (None, None) => return Err(CliError::Usage("one of --set or --index-file is required".into())),
    };
    let seed = a.output.seed;
    let samples =
        u64::try_from(parse_count(&a.samples)?).map_err(|_| CliError::Usage("--samples is too large".into()))?;
    let policy = EstimatorPolicy { estimator: estimator(a.estimator), budget: parse_count(&a.budget)?, samples, seed };
    let member = |i: usize| set.contains(i);
    let p = TuplePredicate::factorized(a.order, member);
    let estimate = match a.estimator {
        EstimatorArg::Factorized | EstimatorArg::Auto => factorized_density(member, a.n, a.order)?,
        EstimatorArg::Exact => exact_density(&p, a.n, policy.budget)?,
        EstimatorArg::Mc => monte_carlo_density(&p, a.n, samples, seed)?,
    };
    let (trace, verdict) = match &a.ngrid {
        Some(spec) => {
            let grid = parse_grid(spec)?;
            let trace = density_trace(&p, &grid, &policy)?;
            // a trace shorter than the verdict window is still worth reporting
            let verdict = match VerdictRule::default().apply(&trace) {
                Ok(v) => Some(v),
                Err(gstat::Error::TraceTooShort { .. }) => None,
                Err(e) => return Err(e.into()),
            };
            (Some(trace), verdict)
        }
        None => (None, None),
    };
    let payload = DensityPayload { set: label, n: a.n, l: a.order, estimate, trace, verdict };
    emit(&a.output, &payload, || {
        let e = &payload.estimate;
        let mut s = format!(
            "{} at n={}, l={}: {} tuples, density {} ({:?})\n",
            payload.set, e.n, e.l, e.count, e.value, e.method
        );
        if let Some(v) = &payload.verdict {
            s += &format!("  trace verdict: {:?}\n", v.kind);
        }
        s
    })?;
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct ExtractPayload {
    limit: Point,
    schedule_base: f64,
    block_boundaries: Vec<BlockBoundary>,
    schedule_complete: bool,
    agreement_count: usize,
    mismatch_set: Vec<usize>,
    mismatch_density_trace: DensityTrace,
    mismatch_verdict: LimitVerdict,
    agreement_trace: DensityTrace,
    agreement_verdict: LimitVerdict,
    modified_tail_test: ClassicalOutcome,
    #[serde(skip_serializing_if = "Option::is_none")]
    sequence_file: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    index_file: Option<PathBuf>,
    finite_prefix: bool,
}

pub fn extract(a: &ExtractArgs) -> CliResult<ExitCode> {
    let s = load_input(&a.input)?;
    let g = build_metric(&a.metric, s.dim())?;
    let seed = a.output.seed;
    let cfg = analysis_config(&s, g.order(), &a.estimation, seed)?;
    let x = match parse_limit(&a.limit)? {
        Some(x) => x,
        None => auto_convergence_report(&s, &g, &a.estimation.eps, &cfg)?.candidate_limit,
    };
    let opts = TailOptions { budget: cfg.classical_budget, samples: cfg.classical_samples, seed };
    let ecfg = ExtractionConfig { schedule_base: a.schedule_base, ..ExtractionConfig::new(cfg) };
    let e = extract_modified_sequence(&s, &g, &x, &ecfg)?;
    let eps = a.estimation.eps.iter().copied().fold(f64::INFINITY, f64::min);
    let tail = e.tail_start_for(eps, g.order());
    let modified_tail_test = classical_convergence_test(&e.modified_sequence, &g, &x, eps, tail, &opts)?;
    if let Some(path) = &a.out_sequence {
        save_sequence(&e.modified_sequence, path)?;
    }
    if let Some(path) = &a.out_indices {
        save_index_set(&e.index_set, path)?;
    }
    let payload = ExtractPayload {
        limit: x,
        schedule_base: e.schedule_base,
        block_boundaries: e.block_boundaries,
        schedule_complete: e.schedule_complete,
        agreement_count: e.index_set.len(),
        mismatch_set: e.mismatch_set,
        mismatch_density_trace: e.mismatch_density_trace,
        mismatch_verdict: e.mismatch_verdict,
        agreement_trace: e.agreement.trace,
        agreement_verdict: e.agreement.verdict,
        modified_tail_test,
        sequence_file: a.out_sequence.clone(),
        index_file: a.out_indices.clone(),
        finite_prefix: true,
    };
    emit(&a.output, &payload, || {
        let bounds: Vec<String> = payload.block_boundaries.iter().map(|b| b.n.to_string()).collect();
        format!(
            "block boundaries [{}]{}\n  {} agreeing indices, {} mismatches, mismatch trace {:?}\n  modified sequence tail test at eps={} from {}: {}\n",
            bounds.join(", "),
            if payload.schedule_complete { "" } else { " (partial schedule)" },
            payload.agreement_count,
            payload.mismatch_set.len(),
            payload.mismatch_verdict.kind,
            eps,
            tail,
            payload.modified_tail_test.holds
        )
    })?;
    Ok(ExitCode::SUCCESS)
}

fn theorem(t: TheoremArg) -> Theorem {
    match t {
        TheoremArg::T21 => Theorem::ClassicalImpliesStatistical,
        TheoremArg::T22 => Theorem::Uniqueness,
        TheoremArg::T23 => Theorem::DenseAgreement,
        TheoremArg::T24 => Theorem::StatisticalCauchy,
        TheoremArg::C21 => Theorem::ConvergentSubsequence,
    }
}

pub fn falsify_cmd(a: &FalsifyArgs) -> CliResult<ExitCode> {
    let cfg = HarnessConfig { len: a.len, orders: a.orders.clone(), ..HarnessConfig::default() };
    let report = falsify(theorem(a.theorem), a.trials, a.output.seed, &cfg)?;
    emit(&a.output, &report, || {
        let mut s = format!(
            "{}: {} trials, {} hold ({} vacuous), {} inconclusive, {} suspects\n",
            report.theorem,
            report.run,
            report.holds,
            report.vacuous,
            report.inconclusive,
            report.suspects.len()
        );
        for c in &report.suspects {
            s += &format!("  suspect trial {} seed {}: {}\n", c.trial, c.case.seed, c.detail);
        }
        s
    })?;
    Ok(exit(report.passed()))
}

/// Finds the first object holding `grid` and `estimates`, depth first.
fn find_trace(v: &serde_json::Value) -> Option<&serde_json::Value> {
    match v {
        serde_json::Value::Object(m) if m.contains_key("grid") && m.contains_key("estimates") => Some(v),
        serde_json::Value::Object(m) => m.values().find_map(find_trace),
        serde_json::Value::Array(a) => a.iter().find_map(find_trace),
        _ => None,
    }
}

pub fn trace_plot(a: &TracePlotArgs) -> CliResult<ExitCode> {
    let path = &a.trace;
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.clone(), source })?;
    let doc: serde_json::Value =
        serde_json::from_str(&text).map_err(|source| CliError::Json { path: path.clone(), source })?;
    let node = match &a.pointer {
        Some(p) => doc.pointer(p).ok_or_else(|| CliError::Usage(format!("no value at `{p}`")))?,
        None => {
            find_trace(&doc).ok_or_else(|| CliError::Usage(format!("{}: no density trace found", path.display())))?
        }
    };
    let trace: DensityTrace =
        DensityTrace::deserialize(node).map_err(|source| CliError::Json { path: path.clone(), source })?;
    if trace.estimates.is_empty() {
        return Err(CliError::Usage(format!("{}: the trace is empty", path.display())));
    }
    let write =
        |p: &PathBuf, body: String| std::fs::write(p, body).map_err(|source| CliError::Io { path: p.clone(), source });
    write(&a.csv, trace_csv(&trace))?;
    write(&a.svg, trace_svg(&trace))?;
    println!("{} points written to {} and {}", trace.len(), a.csv.display(), a.svg.display());
    Ok(ExitCode::SUCCESS)
}
