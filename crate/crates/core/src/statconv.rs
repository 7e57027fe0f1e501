//! Finite-prefix analysis of statistical convergence in a g-metric space.
//!
//! For a candidate limit `x` and radius `eps`, the tuple set
//! `{(i_1 < ... < i_l) : g(x, x_{i_1}, ..., x_{i_l}) < eps}` is measured by
//! [`crate::density`] along a horizon grid, and the trace is classified by a
//! [`VerdictRule`]. Every verdict here is a statement about a finite prefix:
//! it can support or contradict a limit statement, never prove it.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::index::sample;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::combinatorics::{binomial, colex_next, colex_unrank};
use crate::density::{
    check_grid, geometric_grid, threshold_traces, DensityTrace, EstimatorPolicy, LimitVerdict, ScoredTuples,
    TuplePredicate, VerdictRule,
};
use crate::error::{Error, Result};
use crate::gmetric::{Args, FactorizationHint, GMetric, GMetricKind};
use crate::point::Point;
use crate::seed::{derive_seed, rng_for};
use crate::sequence::SequencePrefix;

pub const DEFAULT_EPSILONS: [f64; 5] = [1.0, 0.5, 0.1, 0.05, 0.01];

const SCAN_CHUNK: u128 = 1 << 14;

/// Half-octave grid from `max(l, min(100, N/8))` up to `N`.
pub fn default_grid(len: usize, l: usize) -> Result<Vec<usize>> {
    let start = (len / 8).clamp(1, 100).max(l);
    geometric_grid(start.min(len), len, 2)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalysisConfig {
    pub grid: Vec<usize>,
    pub policy: EstimatorPolicy,
    pub verdict: VerdictRule,
    /// Tuples examined by the exhaustive classical tail test.
    pub classical_budget: u128,
    /// Random tuples examined when the tail exceeds the budget.
    pub classical_samples: u64,
}

impl AnalysisConfig {
    pub fn new(grid: Vec<usize>) -> Self {
        let policy = EstimatorPolicy::default();
        AnalysisConfig {
            grid,
            classical_budget: policy.budget,
            classical_samples: policy.samples,
            policy,
            verdict: VerdictRule::default(),
        }
    }

    pub fn for_prefix(s: &SequencePrefix, l: usize) -> Result<Self> {
        Ok(AnalysisConfig::new(default_grid(s.len(), l)?))
    }

    fn check(&self, s: &SequencePrefix) -> Result<()> {
        check_grid(&self.grid)?;
        let top = *self.grid.last().expect("non-empty grid");
        if top > s.len() {
            return Err(Error::GridExceedsPrefix { horizon: top, len: s.len() });
        }
        Ok(())
    }
}

fn check_space(s: &SequencePrefix, g: &GMetric, centre: Option<&Point>) -> Result<()> {
    g.check_space_dim(s.dim())?;
    if let Some(c) = centre {
        if c.dim() != s.dim() {
            return Err(Error::DimensionMismatch { expected: s.dim(), found: c.dim() });
        }
    }
    Ok(())
}

fn check_epsilons(eps: &[f64]) -> Result<()> {
    if eps.is_empty() || eps.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
        return Err(Error::InvalidParam("epsilons must be positive finite numbers".into()));
    }
    Ok(())
}

/// `g(centre, x_{i_1}, ..., x_{i_l})`.
fn ball_score(g: &GMetric, s: &SequencePrefix, centre: &Point, t: &[usize]) -> f64 {
    let mut args: Args<'_> = Args::with_capacity(t.len() + 1);
    args.push(centre);
    args.extend(t.iter().map(|&i| s.get(i)));
    g.eval_unchecked(&args)
}

/// The ball family around `centre`, factorized when the metric says so.
fn ball_family<'a>(g: &'a GMetric, s: &'a SequencePrefix, centre: &'a Point) -> ScoredTuples<'a> {
    let family = ScoredTuples::new(g.order(), move |t| ball_score(g, s, centre, t));
    match g.factorization_hint() {
        FactorizationHint::PerIndexBall => family.with_index_score(move |i| g.singleton(centre, s.get(i))),
        FactorizationHint::None => family,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TailMethod {
    /// A failing tuple was found around an index whose singleton distance
    /// already reaches `eps`.
    Witness,
    Exhaustive,
    Sampled,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassicalOutcome {
    pub eps: f64,
    pub tail_start: usize,
    pub holds: bool,
    pub method: TailMethod,
    pub tuples_checked: u128,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub witness: Option<Vec<usize>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailOptions {
    pub budget: u128,
    pub samples: u64,
    pub seed: u64,
}

impl Default for TailOptions {
    fn default() -> Self {
        let p = EstimatorPolicy::default();
        TailOptions { budget: p.budget, samples: p.samples, seed: 0 }
    }
}

/// Tail form of classical g-convergence: every increasing `l`-tuple of
/// indices in `tail_start..=N` satisfies `g(x, x_{i_1}, ..., x_{i_l}) < eps`.
///
/// The tail is first screened for an index whose singleton distance reaches
/// `eps`, and a tuple around it is evaluated as a witness. Otherwise the
/// tail is enumerated when `C(N - tail_start + 1, l)` fits the budget and
/// sampled when it does not.
pub fn classical_convergence_test(
    s: &SequencePrefix,
    g: &GMetric,
    x: &Point,
    eps: f64,
    tail_start: usize,
    opts: &TailOptions,
) -> Result<ClassicalOutcome> {
    check_space(s, g, Some(x))?;
    let l = g.order();
    let len = s.len();
    if tail_start == 0 || tail_start + l - 1 > len {
        return Err(Error::PrefixTooShort { len, tail_start, l });
    }
    let out = |holds, method, tuples_checked, witness| ClassicalOutcome {
        eps,
        tail_start,
        holds,
        method,
        tuples_checked,
        witness,
    };

    let mut checked = 0u128;
    for i in tail_start..=len {
        if g.singleton(x, s.get(i)) >= eps {
            // the l consecutive tail indices closest to i, i included
            let lo = i.saturating_sub(l - 1).max(tail_start).min(len + 1 - l);
            let t: Vec<usize> = (lo..lo + l).collect();
            checked += 1;
            if ball_score(g, s, x, &t) >= eps {
                return Ok(out(false, TailMethod::Witness, checked, Some(t)));
            }
        }
    }

    let m = (len - tail_start + 1) as u64;
    let total = binomial(m, l as u64).unwrap_or(u128::MAX);
    let offset = tail_start;
    if total <= opts.budget {
        let chunks = total.div_ceil(SCAN_CHUNK) as u64;
        let found = (0..chunks).into_par_iter().find_map_first(|chunk| {
            let lo = chunk as u128 * SCAN_CHUNK;
            let hi = (lo + SCAN_CHUNK).min(total);
            let mut comb = colex_unrank(lo, l);
            let mut t = vec![0usize; l];
            for _ in lo..hi {
                for (dst, &c) in t.iter_mut().zip(&comb) {
                    *dst = c as usize + offset;
                }
                if ball_score(g, s, x, &t) >= eps {
                    return Some(t);
                }
                colex_next(&mut comb);
            }
            None
        });
        let holds = found.is_none();
        Ok(out(holds, TailMethod::Exhaustive, checked + total, found))
    } else {
        let chunks = opts.samples.div_ceil(4096);
        let found = (0..chunks).into_par_iter().find_map_first(|chunk| {
            let mut rng = rng_for(opts.seed, &[chunk]);
            let draws = (opts.samples - chunk * 4096).min(4096);
            for _ in 0..draws {
                let mut t: Vec<usize> = sample(&mut rng, m as usize, l).into_iter().map(|c| c + offset).collect();
                t.sort_unstable();
                if ball_score(g, s, x, &t) >= eps {
                    return Some(t);
                }
            }
            None
        });
        let holds = found.is_none();
        Ok(out(holds, TailMethod::Sampled, checked + opts.samples as u128, found))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LimitSource {
    Supplied,
    /// Most frequent term after quantizing coordinates to 1e-9.
    Mode,
    /// Medoid of a sample of at most 256 terms.
    Medoid,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpsilonVerdict {
    pub eps: f64,
    pub trace: DensityTrace,
    pub verdict: LimitVerdict,
    pub classical: ClassicalOutcome,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub candidate_limit: Point,
    pub limit_source: LimitSource,
    pub metric: String,
    pub order: usize,
    pub prefix_len: usize,
    pub policy: EstimatorPolicy,
    pub verdict_rule: VerdictRule,
    pub per_eps: Vec<EpsilonVerdict>,
    /// Every per-eps verdict tends to one.
    pub overall: bool,
    /// Classical tail test held for every eps.
    pub classical_verdict: bool,
    pub classical_tail_start: usize,
    pub finite_prefix: bool,
}

/// Statistical convergence of the prefix to `x`: for each radius, the
/// density trace of the ball tuple set and its verdict. The classical tail
/// test runs on the second half of the prefix for comparison.
pub fn stat_convergence_report(
    s: &SequencePrefix,
    g: &GMetric,
    x: &Point,
    epsilons: &[f64],
    cfg: &AnalysisConfig,
) -> Result<ConvergenceReport> {
    convergence_report_from(s, g, x, LimitSource::Supplied, epsilons, cfg)
}

fn convergence_report_from(
    s: &SequencePrefix,
    g: &GMetric,
    x: &Point,
    source: LimitSource,
    epsilons: &[f64],
    cfg: &AnalysisConfig,
) -> Result<ConvergenceReport> {
    check_space(s, g, Some(x))?;
    check_epsilons(epsilons)?;
    cfg.check(s)?;
    let l = g.order();
    let family = ball_family(g, s, x);
    let traces = threshold_traces(&family, epsilons, &cfg.grid, &cfg.policy)?;

    let tail_start = (s.len() / 2).max(1).min(s.len().saturating_sub(l) + 1).max(1);
    let opts = TailOptions {
        budget: cfg.classical_budget,
        samples: cfg.classical_samples,
        seed: derive_seed(cfg.policy.seed, &[0xC1A5]),
    };
    let classical = classical_by_eps(s, g, x, epsilons, tail_start, &opts)?;

    let mut per_eps = Vec::with_capacity(epsilons.len());
    for ((&eps, trace), classical) in epsilons.iter().zip(traces).zip(classical) {
        let verdict = cfg.verdict.apply(&trace)?;
        per_eps.push(EpsilonVerdict { eps, trace, verdict, classical });
    }
    Ok(ConvergenceReport {
        candidate_limit: x.clone(),
        limit_source: source,
        metric: g.name().to_string(),
        order: l,
        prefix_len: s.len(),
        policy: cfg.policy,
        verdict_rule: cfg.verdict,
        overall: per_eps.iter().all(|e| e.verdict.tends_to_one()),
        classical_verdict: per_eps.iter().all(|e| e.classical.holds),
        per_eps,
        classical_tail_start: tail_start,
        finite_prefix: true,
    })
}

/// Classical tests for several radii. Holding at a radius implies holding
/// at every larger one, so the smallest radii are tried first.
fn classical_by_eps(
    s: &SequencePrefix,
    g: &GMetric,
    x: &Point,
    epsilons: &[f64],
    tail_start: usize,
    opts: &TailOptions,
) -> Result<Vec<ClassicalOutcome>> {
    let mut order: Vec<usize> = (0..epsilons.len()).collect();
    order.sort_by(|&a, &b| epsilons[a].total_cmp(&epsilons[b]));
    let mut out: Vec<Option<ClassicalOutcome>> = vec![None; epsilons.len()];
    let mut held: Option<ClassicalOutcome> = None;
    for k in order {
        let eps = epsilons[k];
        let r = match &held {
            Some(h) => ClassicalOutcome { eps, ..h.clone() },
            None => classical_convergence_test(s, g, x, eps, tail_start, opts)?,
        };
        if r.holds && held.is_none() {
            held = Some(r.clone());
        }
        out[k] = Some(r);
    }
    Ok(out.into_iter().map(|o| o.expect("filled")).collect())
}

/// Heuristic candidate limits: the quantized mode and a sample medoid,
/// deduplicated, mode first.
pub fn candidate_limits(s: &SequencePrefix, g: &GMetric, seed: u64) -> Result<Vec<(Point, LimitSource)>> {
    check_space(s, g, None)?;
    let mut freq: BTreeMap<Vec<i64>, (usize, usize)> = BTreeMap::new();
    for (k, p) in s.points().iter().enumerate() {
        let key: Vec<i64> = p.coords().iter().map(|c| (c / 1e-9).round() as i64).collect();
        let e = freq.entry(key).or_insert((0, k));
        e.0 += 1;
    }
    let (_, &(_, first)) =
        freq.iter().max_by(|a, b| a.1 .0.cmp(&b.1 .0).then(b.1 .1.cmp(&a.1 .1))).expect("non-empty sequence");
    let mode = s.points()[first].clone();

    let mut rng = rng_for(seed, &[0x3ED0]);
    let picks: Vec<usize> = if s.len() <= 256 {
        (1..=s.len()).collect()
    } else {
        let mut v: Vec<usize> = sample(&mut rng, s.len(), 256).into_iter().map(|i| i + 1).collect();
        v.sort_unstable();
        v
    };
    let medoid = picks
        .iter()
        .map(|&c| {
            let cost: f64 = picks.iter().map(|&j| g.singleton(s.get(c), s.get(j))).sum();
            (cost, c)
        })
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
        .map(|(_, c)| s.get(c).clone())
        .expect("non-empty sample");

    let mut out = vec![(mode, LimitSource::Mode)];
    if medoid != out[0].0 {
        out.push((medoid, LimitSource::Medoid));
    }
    Ok(out)
}

/// Runs the convergence report for each heuristic candidate and keeps the
/// one with the largest mean final density.
pub fn auto_convergence_report(
    s: &SequencePrefix,
    g: &GMetric,
    epsilons: &[f64],
    cfg: &AnalysisConfig,
) -> Result<ConvergenceReport> {
    let mut best: Option<(f64, ConvergenceReport)> = None;
    for (x, source) in candidate_limits(s, g, cfg.policy.seed)? {
        let r = convergence_report_from(s, g, &x, source, epsilons, cfg)?;
        let score = r.per_eps.iter().map(|e| e.trace.last().map_or(0.0, |l| l.value)).sum::<f64>();
        if best.as_ref().is_none_or(|(b, _)| score > *b) {
            best = Some((score, r));
        }
    }
    Ok(best.expect("at least one candidate").1)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PivotSearch {
    /// Candidates chosen by smallest median singleton distance to a probe set.
    pub heuristic: usize,
    /// Uniform random candidates added after the heuristic ones.
    pub random: usize,
    pub probes: usize,
    pub seed: u64,
}

impl Default for PivotSearch {
    fn default() -> Self {
        PivotSearch { heuristic: 16, random: 16, probes: 64, seed: 0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CauchyEpsilon {
    pub eps: f64,
    /// The successful pivot, or the one with the largest final density.
    pub pivot: usize,
    pub trace: DensityTrace,
    pub verdict: LimitVerdict,
    pub pivot_candidates_tried: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CauchyReport {
    pub metric: String,
    pub order: usize,
    pub prefix_len: usize,
    pub candidates: Vec<usize>,
    pub per_eps: Vec<CauchyEpsilon>,
    /// Every radius found a pivot whose trace tends to one.
    pub overall: bool,
    pub finite_prefix: bool,
}

/// Pivot candidates for the Cauchy search, heuristic ones first.
pub fn pivot_candidates(s: &SequencePrefix, g: &GMetric, search: &PivotSearch) -> Vec<usize> {
    let n = s.len();
    let mut rng = rng_for(search.seed, &[0x9170]);
    let probes: Vec<usize> = sample(&mut rng, n, search.probes.min(n)).into_iter().map(|i| i + 1).collect();
    let pool: Vec<usize> =
        if n <= 4096 { (1..=n).collect() } else { sample(&mut rng, n, 4096).into_iter().map(|i| i + 1).collect() };
    let mut scored: Vec<(f64, usize)> = pool
        .par_iter()
        .map(|&i| {
            let mut d: Vec<f64> = probes.iter().map(|&j| g.singleton(s.get(i), s.get(j))).collect();
            d.sort_unstable_by(f64::total_cmp);
            (d[d.len() / 2], i)
        })
        .collect();
    scored.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let mut chosen: Vec<usize> = scored.iter().take(search.heuristic).map(|&(_, i)| i).collect();
    let mut seen: BTreeSet<usize> = chosen.iter().copied().collect();
    let target = (search.heuristic + search.random).min(n);
    while chosen.len() < target {
        let i = rng.gen_range(1..=n);
        if seen.insert(i) {
            chosen.push(i);
        }
    }
    chosen
}

/// Statistical g-Cauchy test: for each radius, looks for a pivot term
/// `x_p` whose ball tuple set has a trace tending to one.
pub fn stat_cauchy_report(
    s: &SequencePrefix,
    g: &GMetric,
    epsilons: &[f64],
    cfg: &AnalysisConfig,
    search: &PivotSearch,
) -> Result<CauchyReport> {
    check_space(s, g, None)?;
    check_epsilons(epsilons)?;
    cfg.check(s)?;
    let candidates = pivot_candidates(s, g, search);

    let mut results: Vec<Option<CauchyEpsilon>> = vec![None; epsilons.len()];
    let mut best: Vec<Option<CauchyEpsilon>> = vec![None; epsilons.len()];
    for (tried, &p) in candidates.iter().enumerate() {
        let open: Vec<usize> = (0..epsilons.len()).filter(|&k| results[k].is_none()).collect();
        if open.is_empty() {
            break;
        }
        let eps: Vec<f64> = open.iter().map(|&k| epsilons[k]).collect();
        let centre = s.get(p);
        let family = ball_family(g, s, centre);
        let policy = cfg.policy.with_seed(derive_seed(cfg.policy.seed, &[p as u64]));
        let traces = threshold_traces(&family, &eps, &cfg.grid, &policy)?;
        for (&k, trace) in open.iter().zip(traces) {
            let verdict = cfg.verdict.apply(&trace)?;
            let entry = CauchyEpsilon { eps: epsilons[k], pivot: p, trace, verdict, pivot_candidates_tried: tried + 1 };
            if entry.verdict.tends_to_one() {
                results[k] = Some(entry);
            } else {
                let final_value = |e: &CauchyEpsilon| e.trace.last().map_or(0.0, |l| l.value);
                if best[k].as_ref().is_none_or(|b| final_value(&entry) > final_value(b)) {
                    best[k] = Some(entry);
                }
            }
        }
    }
    let per_eps: Vec<CauchyEpsilon> = results
        .into_iter()
        .zip(best)
        .map(|(r, b)| {
            r.unwrap_or_else(|| CauchyEpsilon {
                pivot_candidates_tried: candidates.len(),
                ..b.expect("some pivot tried")
            })
        })
        .collect();
    Ok(CauchyReport {
        metric: g.name().to_string(),
        order: g.order(),
        prefix_len: s.len(),
        candidates,
        overall: per_eps.iter().all(|e| e.verdict.tends_to_one()),
        per_eps,
        finite_prefix: true,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DenseSubsequenceResult {
    pub trace: DensityTrace,
    pub verdict: LimitVerdict,
}

/// Density of the tuples drawn entirely from `indices`; a statistically
/// dense index set has a trace tending to one.
pub fn stat_dense_subsequence_test(
    indices: &BTreeSet<usize>,
    len: usize,
    l: usize,
    grid: &[usize],
    rule: &VerdictRule,
) -> Result<DenseSubsequenceResult> {
    if let Some(&bad) = indices.iter().find(|&&i| i == 0 || i > len) {
        return Err(Error::InvalidParam(format!("index {bad} outside 1..={len}")));
    }
    check_grid(grid)?;
    if let Some(&top) = grid.last().filter(|&&t| t > len) {
        return Err(Error::GridExceedsPrefix { horizon: top, len });
    }
    let p = TuplePredicate::factorized(l, |i| indices.contains(&i));
    let trace = crate::density::density_trace(&p, grid, &EstimatorPolicy::default())?;
    let verdict = rule.apply(&trace)?;
    Ok(DenseSubsequenceResult { trace, verdict })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtractionConfig {
    /// Radii of the schedule are `schedule_base^k`.
    pub schedule_base: f64,
    pub max_levels: usize,
    pub analysis: AnalysisConfig,
}

impl ExtractionConfig {
    pub fn new(analysis: AnalysisConfig) -> Self {
        ExtractionConfig { schedule_base: 0.5, max_levels: 40, analysis }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockBoundary {
    pub level: usize,
    pub eps: f64,
    pub n: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubsequenceExtraction {
    pub limit: Point,
    pub schedule_base: f64,
    pub block_boundaries: Vec<BlockBoundary>,
    /// False when the schedule stopped because some level found no boundary
    /// inside the prefix.
    pub schedule_complete: bool,
    /// Indices `m` with `y_m = x_m`.
    pub index_set: Vec<usize>,
    pub mismatch_set: Vec<usize>,
    pub modified_sequence: SequencePrefix,
    /// Density of tuples drawn from the mismatch set.
    pub mismatch_density_trace: DensityTrace,
    pub mismatch_verdict: LimitVerdict,
    pub agreement: DenseSubsequenceResult,
}

impl SubsequenceExtraction {
    /// Tail start at which `y` should pass the classical test at `eps`:
    /// past boundary `n_k`, every `y_m` lies within `r^k` of the limit in
    /// singleton distance, and the basic inequalities bound a full tuple by
    /// `l^2 r^k`. Falls back to the last boundary.
    pub fn tail_start_for(&self, eps: f64, l: usize) -> usize {
        let len = self.modified_sequence.len();
        let lf = (l * l) as f64;
        let n = self
            .block_boundaries
            .iter()
            .find(|b| lf * b.eps <= eps)
            .or(self.block_boundaries.last())
            .map_or(0, |b| b.n);
        (n + 1).min(len + 1 - l)
    }

    pub fn agreement_subsequence(&self, s: &SequencePrefix) -> Result<SequencePrefix> {
        s.subsequence(&self.index_set)
    }
}

/// Builds the modified sequence `y` that agrees with `x_m` on all but a
/// density-zero set of indices and converges classically to `x`.
///
/// Level `k` has radius `r^k` and boundary `n_k`, the first grid horizon
/// from which the `r^k` density stays above `1 - r^k`; boundaries are made
/// strictly increasing. An index `m` in `(n_k, n_{k+1}]` keeps `x_m` iff
/// `g(x, x_m, ..., x_m) < r^k`, otherwise `y_m = x`. Indices up to `n_1`
/// use the level-1 radius and indices past the last boundary the last
/// radius.
pub fn extract_modified_sequence(
    s: &SequencePrefix,
    g: &GMetric,
    x: &Point,
    cfg: &ExtractionConfig,
) -> Result<SubsequenceExtraction> {
    check_space(s, g, Some(x))?;
    let a = &cfg.analysis;
    a.check(s)?;
    let r = cfg.schedule_base;
    if !(r > 0.0 && r < 1.0) {
        return Err(Error::InvalidParam(format!("schedule base {r} must lie in (0, 1)")));
    }
    let len = s.len();
    let radii: Vec<f64> =
        (1..=cfg.max_levels).map(|k| r.powi(k as i32)).take_while(|&e| e > 1.0 / len as f64).collect();
    if radii.is_empty() {
        return Err(Error::NoBlockBoundary);
    }
    let family = ball_family(g, s, x);
    let traces = threshold_traces(&family, &radii, &a.grid, &a.policy)?;

    let mut boundaries: Vec<BlockBoundary> = Vec::new();
    let mut complete = true;
    for (k, (trace, &eps)) in traces.iter().zip(&radii).enumerate() {
        let vals = trace.values();
        // first grid position from which every later value exceeds 1 - eps
        let start = vals.iter().rposition(|&v| v <= 1.0 - eps).map_or(0, |p| p + 1);
        let after_prev = boundaries.last().map_or(0, |b| a.grid.partition_point(|&n| n <= b.n));
        let pos = start.max(after_prev);
        if pos >= a.grid.len() {
            complete = false;
            break;
        }
        boundaries.push(BlockBoundary { level: k + 1, eps, n: a.grid[pos] });
    }
    if boundaries.is_empty() {
        return Err(Error::NoBlockBoundary);
    }

    let radius_at = |m: usize| {
        let k = boundaries.partition_point(|b| b.n < m);
        boundaries[k.saturating_sub(1)].eps
    };
    let mut y = Vec::with_capacity(len);
    let mut index_set = Vec::new();
    let mut mismatch_set = Vec::new();
    for m in 1..=len {
        let xm = s.get(m);
        let keep = g.singleton(x, xm) < radius_at(m);
        let ym = if keep { xm.clone() } else { x.clone() };
        if &ym == xm {
            index_set.push(m);
        } else {
            mismatch_set.push(m);
        }
        y.push(ym);
    }

    let l = g.order();
    let mismatch: BTreeSet<usize> = mismatch_set.iter().copied().collect();
    let p = TuplePredicate::factorized(l, |i| mismatch.contains(&i));
    let mismatch_density_trace = crate::density::density_trace(&p, &a.grid, &EstimatorPolicy::default())?;
    let mismatch_verdict = a.verdict.apply(&mismatch_density_trace)?;
    let agreement_set: BTreeSet<usize> = index_set.iter().copied().collect();
    let agreement = stat_dense_subsequence_test(&agreement_set, len, l, &a.grid, &a.verdict)?;

    Ok(SubsequenceExtraction {
        limit: x.clone(),
        schedule_base: r,
        block_boundaries: boundaries,
        schedule_complete: complete,
        index_set,
        mismatch_set,
        modified_sequence: SequencePrefix::new(y)?,
        mismatch_density_trace,
        mismatch_verdict,
        agreement,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UniquenessGap {
    pub eps: f64,
    pub horizon: usize,
    /// `g(x, y, ..., y)`, absent when no tuple lies in both balls.
    pub gap: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub witness: Option<Vec<usize>>,
    /// `l (g(x, t) + g(y, t))` at the witness, an upper bound for the gap.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub chain_bound: Option<f64>,
}

impl UniquenessGap {
    /// The gap, `+inf` when no common tuple exists.
    pub fn value(&self) -> f64 {
        self.gap.unwrap_or(f64::INFINITY)
    }

    pub fn within_eps(&self) -> bool {
        self.gap.is_none_or(|gap| gap <= self.eps)
    }
}

/// Looks for an increasing tuple below horizon `n` inside both balls of
/// radius `eps / (2l)` around `x` and `y`. When one exists the gap
/// `g(x, y, ..., y)` is at most `eps`.
///
/// Built-in metrics are monotone, so indices whose singleton distance
/// already leaves either ball are skipped; custom metrics are scanned in
/// full, up to `budget` tuples.
pub fn uniqueness_gap(
    s: &SequencePrefix,
    g: &GMetric,
    x: &Point,
    y: &Point,
    eps: f64,
    n: usize,
    budget: u128,
) -> Result<UniquenessGap> {
    check_space(s, g, Some(x))?;
    check_space(s, g, Some(y))?;
    check_epsilons(&[eps])?;
    let l = g.order();
    if n > s.len() {
        return Err(Error::GridExceedsPrefix { horizon: n, len: s.len() });
    }
    if n < l {
        return Err(Error::HorizonTooSmall { n, l });
    }
    let radius = eps / (2 * l) as f64;
    let candidates: Vec<usize> = match g.kind() {
        GMetricKind::Custom => (1..=n).collect(),
        _ => (1..=n).filter(|&i| g.singleton(x, s.get(i)) < radius && g.singleton(y, s.get(i)) < radius).collect(),
    };
    let mut result = UniquenessGap { eps, horizon: n, gap: None, witness: None, chain_bound: None };
    if candidates.len() < l {
        return Ok(result);
    }
    let total = binomial(candidates.len() as u64, l as u64).unwrap_or(u128::MAX);
    let mut comb: Vec<u64> = (0..l as u64).collect();
    let mut t = vec![0usize; l];
    for _ in 0..total.min(budget) {
        for (dst, &c) in t.iter_mut().zip(&comb) {
            *dst = candidates[c as usize];
        }
        let gx = ball_score(g, s, x, &t);
        let gy = ball_score(g, s, y, &t);
        if gx < radius && gy < radius {
            let mut args: Args<'_> = Args::with_capacity(l + 1);
            args.push(x);
            args.extend(std::iter::repeat_n(y, l));
            result.gap = Some(g.eval_unchecked(&args));
            result.chain_bound = Some(l as f64 * (gx + gy));
            result.witness = Some(t);
            return Ok(result);
        }
        colex_next(&mut comb);
    }
    if total > budget {
        return Err(Error::BudgetExceeded { required: total, budget });
    }
    Ok(result)
}
