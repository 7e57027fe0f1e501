//! Randomized finite-prefix checks of the limit theorems.
//!
//! Each trial samples a [`TheoremCase`], evaluates the antecedent and the
//! consequent with the analyzer, and classifies the pair. A suspect is a
//! case where the antecedent held and the consequent clearly failed; it is
//! a triage artifact with a reproduction seed, not a counterexample, since
//! a finite prefix cannot refute a statement about limits.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::density::{DensityTrace, Estimator, EstimatorPolicy, VerdictRule};
use crate::error::{Error, Result};
use crate::generate::{generate, GeneratorSpec, IndexSet};
use crate::gmetric::{GMetric, GMetricKind, MetricSpec};
use crate::point::{BaseMetric, Point};
use crate::seed::{derive_seed, rng_for};
use crate::statconv::{
    classical_convergence_test, default_grid, extract_modified_sequence, stat_cauchy_report, stat_convergence_report,
    uniqueness_gap, AnalysisConfig, ExtractionConfig, PivotSearch, SubsequenceExtraction, TailOptions,
    DEFAULT_EPSILONS,
};

/// The implications under test.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Theorem {
    /// Classical convergence implies statistical convergence.
    #[serde(rename = "T2.1")]
    ClassicalImpliesStatistical,
    /// Statistical limits are unique.
    #[serde(rename = "T2.2")]
    Uniqueness,
    /// A statistically convergent sequence agrees with a classically
    /// convergent one off a density-zero index set.
    #[serde(rename = "T2.3")]
    DenseAgreement,
    /// Statistical convergence implies the statistical Cauchy property.
    #[serde(rename = "T2.4")]
    StatisticalCauchy,
    /// A statistically convergent sequence has a convergent subsequence.
    #[serde(rename = "C2.1")]
    ConvergentSubsequence,
}

impl Theorem {
    pub const ALL: [Theorem; 5] = [
        Theorem::ClassicalImpliesStatistical,
        Theorem::Uniqueness,
        Theorem::DenseAgreement,
        Theorem::StatisticalCauchy,
        Theorem::ConvergentSubsequence,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Theorem::ClassicalImpliesStatistical => "T2.1",
            Theorem::Uniqueness => "T2.2",
            Theorem::DenseAgreement => "T2.3",
            Theorem::StatisticalCauchy => "T2.4",
            Theorem::ConvergentSubsequence => "C2.1",
        }
    }
}

impl fmt::Display for Theorem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Theorem {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Theorem::ALL.into_iter().find(|t| t.id().eq_ignore_ascii_case(s)).ok_or_else(|| {
            Error::InvalidParam(format!("unknown theorem `{s}`, expected one of T2.1 T2.2 T2.3 T2.4 C2.1"))
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HarnessConfig {
    pub len: usize,
    pub epsilons: Vec<f64>,
    pub orders: Vec<usize>,
    pub policy: EstimatorPolicy,
    pub verdict: VerdictRule,
    pub classical_budget: u128,
    pub classical_samples: u64,
    pub pivots: PivotSearch,
}

impl Default for HarnessConfig {
    fn default() -> Self {
        HarnessConfig {
            len: 8192,
            epsilons: DEFAULT_EPSILONS.to_vec(),
            orders: vec![1, 2, 3],
            policy: EstimatorPolicy { estimator: Estimator::Auto, budget: 1_000_000, samples: 20_000, seed: 0 },
            verdict: VerdictRule::default(),
            classical_budget: 1_000_000,
            classical_samples: 20_000,
            pivots: PivotSearch::default(),
        }
    }
}

impl HarnessConfig {
    fn check(&self) -> Result<()> {
        if self.len < 16 {
            return Err(Error::InvalidParam(format!("prefix length {} is too short", self.len)));
        }
        if self.orders.is_empty() || self.orders.iter().any(|&l| l == 0 || l > 8) {
            return Err(Error::InvalidParam("orders must lie in 1..=8".into()));
        }
        if self.epsilons.is_empty() || self.epsilons.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
            return Err(Error::InvalidParam("epsilons must be positive finite numbers".into()));
        }
        Ok(())
    }
}

/// One sampled instance of a theorem check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TheoremCase {
    pub theorem: Theorem,
    pub generator: GeneratorSpec,
    pub metric: MetricSpec,
    pub limit: Point,
    /// Second candidate limit, for the uniqueness check.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub other: Option<Point>,
    pub epsilons: Vec<f64>,
    pub grid: Vec<usize>,
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    Holds,
    /// The antecedent failed on the prefix, so the implication holds trivially.
    Vacuous,
    Suspect,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: u64,
    pub seed: u64,
    pub outcome: Outcome,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuspectCase {
    pub trial: u64,
    pub case: TheoremCase,
    pub detail: String,
    pub traces: Vec<DensityTrace>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FalsificationReport {
    pub theorem: Theorem,
    pub seed: u64,
    pub run: usize,
    /// Includes the vacuous cases.
    pub holds: usize,
    pub vacuous: usize,
    pub inconclusive: usize,
    pub suspects: Vec<SuspectCase>,
    pub trials: Vec<TrialRecord>,
    pub config: HarnessConfig,
    pub finite_prefix: bool,
}

impl FalsificationReport {
    pub fn passed(&self) -> bool {
        self.suspects.is_empty()
    }
}

struct Judgement {
    outcome: Outcome,
    detail: String,
    traces: Vec<DensityTrace>,
}

impl Judgement {
    fn new(outcome: Outcome, detail: impl Into<String>) -> Self {
        Judgement { outcome, detail: detail.into(), traces: Vec::new() }
    }

    fn with_traces(mut self, traces: Vec<DensityTrace>) -> Self {
        self.traces = traces;
        self
    }
}

/// Per-radius implication: vacuous without any true antecedent, suspect
/// when a true antecedent meets a consequent tending to zero.
fn judge_per_eps(pairs: &[(f64, bool, bool, bool)]) -> Judgement {
    let relevant: Vec<_> = pairs.iter().filter(|p| p.1).collect();
    if relevant.is_empty() {
        return Judgement::new(Outcome::Vacuous, "antecedent false at every radius");
    }
    if let Some(p) = relevant.iter().find(|p| p.3) {
        return Judgement::new(Outcome::Suspect, format!("consequent tends to zero at eps={}", p.0));
    }
    if let Some(p) = relevant.iter().find(|p| !p.2) {
        return Judgement::new(Outcome::Inconclusive, format!("consequent inconclusive at eps={}", p.0));
    }
    Judgement::new(Outcome::Holds, format!("consequent holds at {} radii", relevant.len()))
}

fn uniform_point(rng: &mut impl Rng, dim: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..dim).map(|_| rng.gen_range(lo..hi)).collect()
}

fn sample_metric(rng: &mut impl Rng, dim: usize, l: usize, allow_discrete: bool) -> MetricSpec {
    if allow_discrete && rng.gen_bool(0.25) {
        return MetricSpec { kind: GMetricKind::Discrete, base: None, order: l };
    }
    let base = match dim {
        1 => BaseMetric::Absolute,
        _ if rng.gen_bool(0.5) => BaseMetric::Euclidean,
        _ => BaseMetric::MaxCoordinate,
    };
    MetricSpec { kind: GMetricKind::MaxPairwise, base: Some(base), order: l }
}

fn geometric_case(rng: &mut impl Rng, dim: usize, len: usize) -> (GeneratorSpec, Vec<f64>) {
    let limit = uniform_point(rng, dim, -5.0, 5.0);
    let amplitude = uniform_point(rng, dim, -1.0, 1.0);
    let ratio = rng.gen_range(0.1..0.8);
    (GeneratorSpec::ConvergentGeometric { limit: limit.clone(), amplitude, ratio, n: len }, limit)
}

/// Constant `base` off a density-zero set, with spikes at least 1 away in
/// every coordinate.
fn spike_case(rng: &mut impl Rng, dim: usize, l: usize, len: usize) -> (GeneratorSpec, Vec<f64>) {
    let mut sets = vec![IndexSet::Cubes, IndexSet::PowersOfTwo];
    if l <= 2 {
        sets.push(IndexSet::Squares);
    }
    let set = sets[rng.gen_range(0..sets.len())].clone();
    let base = uniform_point(rng, dim, -5.0, 5.0);
    let spike = base
        .iter()
        .map(|b| {
            let off = rng.gen_range(1.0..10.0);
            if rng.gen_bool(0.5) {
                b + off
            } else {
                b - off
            }
        })
        .collect();
    (GeneratorSpec::SpikeOnSet { set, base: base.clone(), spike, n: len }, base)
}

/// Samples the case for one trial.
pub fn sample_case(theorem: Theorem, seed: u64, cfg: &HarnessConfig) -> Result<TheoremCase> {
    let mut rng = rng_for(seed, &[1]);
    let l = cfg.orders[rng.gen_range(0..cfg.orders.len())];
    let dim = rng.gen_range(1..=2);
    let (generator, limit, metric) = match theorem {
        Theorem::ClassicalImpliesStatistical => {
            let (generator, limit) = geometric_case(&mut rng, dim, cfg.len);
            (generator, limit, sample_metric(&mut rng, dim, l, false))
        }
        Theorem::Uniqueness | Theorem::StatisticalCauchy => {
            let (generator, limit) = spike_case(&mut rng, dim, l, cfg.len);
            (generator, limit, sample_metric(&mut rng, dim, l, true))
        }
        Theorem::DenseAgreement | Theorem::ConvergentSubsequence => {
            if rng.gen_bool(0.5) {
                let (generator, limit) = geometric_case(&mut rng, dim, cfg.len);
                (generator, limit, sample_metric(&mut rng, dim, l, false))
            } else {
                let (generator, limit) = spike_case(&mut rng, dim, l, cfg.len);
                (generator, limit, sample_metric(&mut rng, dim, l, true))
            }
        }
    };
    let other = match theorem {
        Theorem::Uniqueness if rng.gen_bool(0.5) => {
            let shift = uniform_point(&mut rng, dim, -0.02, 0.02);
            Some(Point::new(limit.iter().zip(&shift).map(|(a, b)| a + b).collect())?)
        }
        Theorem::Uniqueness => Some(Point::new(limit.clone())?),
        _ => None,
    };
    Ok(TheoremCase {
        theorem,
        generator,
        metric,
        limit: Point::new(limit)?,
        other,
        epsilons: cfg.epsilons.clone(),
        grid: default_grid(cfg.len, l)?,
        seed,
    })
}

fn analysis_config(case: &TheoremCase, cfg: &HarnessConfig) -> AnalysisConfig {
    AnalysisConfig {
        grid: case.grid.clone(),
        policy: cfg.policy.with_seed(derive_seed(case.seed, &[2])),
        verdict: cfg.verdict,
        classical_budget: cfg.classical_budget,
        classical_samples: cfg.classical_samples,
    }
}

/// Evaluates one case; the returned record carries no trial index.
pub fn evaluate_case(case: &TheoremCase, cfg: &HarnessConfig) -> Result<(Outcome, String, Vec<DensityTrace>)> {
    let j = judge(case, cfg)?;
    Ok((j.outcome, j.detail, j.traces))
}

fn judge(case: &TheoremCase, cfg: &HarnessConfig) -> Result<Judgement> {
    let s = generate(&case.generator)?;
    let g = GMetric::from_spec(&case.metric)?;
    let a = analysis_config(case, cfg);
    let x = &case.limit;
    let l = g.order();
    match case.theorem {
        Theorem::ClassicalImpliesStatistical => {
            let r = stat_convergence_report(&s, &g, x, &case.epsilons, &a)?;
            let pairs: Vec<_> = r
                .per_eps
                .iter()
                .map(|e| (e.eps, e.classical.holds, e.verdict.tends_to_one(), e.verdict.tends_to_zero()))
                .collect();
            let traces = r.per_eps.into_iter().map(|e| e.trace).collect();
            Ok(judge_per_eps(&pairs).with_traces(traces))
        }
        Theorem::StatisticalCauchy => {
            let modulus = (l * (l + 1)) as f64;
            let reduced: Vec<f64> = case.epsilons.iter().map(|e| e / modulus).collect();
            let r = stat_convergence_report(&s, &g, x, &reduced, &a)?;
            let search = PivotSearch { seed: derive_seed(case.seed, &[3]), ..cfg.pivots };
            let c = stat_cauchy_report(&s, &g, &case.epsilons, &a, &search)?;
            let pairs: Vec<_> = r
                .per_eps
                .iter()
                .zip(&c.per_eps)
                .map(|(r, c)| (c.eps, r.verdict.tends_to_one(), c.verdict.tends_to_one(), c.verdict.tends_to_zero()))
                .collect();
            let traces = c.per_eps.into_iter().map(|e| e.trace).collect();
            Ok(judge_per_eps(&pairs).with_traces(traces))
        }
        Theorem::Uniqueness => {
            let y = case.other.as_ref().unwrap_or(x);
            let mut found = 0;
            for &eps in &case.epsilons {
                match uniqueness_gap(&s, &g, x, y, eps, s.len(), cfg.classical_budget) {
                    Ok(gap) => match gap.gap {
                        Some(v) if v > eps => {
                            return Ok(Judgement::new(Outcome::Suspect, format!("gap {v} exceeds eps={eps}")))
                        }
                        Some(_) => found += 1,
                        None => {}
                    },
                    Err(Error::BudgetExceeded { .. }) => {
                        return Ok(Judgement::new(Outcome::Inconclusive, format!("scan budget exceeded at eps={eps}")))
                    }
                    Err(e) => return Err(e),
                }
            }
            Ok(if found == 0 {
                Judgement::new(Outcome::Vacuous, "no tuple lies in both balls at any radius")
            } else {
                Judgement::new(Outcome::Holds, format!("gap within eps at {found} radii"))
            })
        }
        Theorem::DenseAgreement | Theorem::ConvergentSubsequence => {
            let r = stat_convergence_report(&s, &g, x, &case.epsilons, &a)?;
            if !r.overall {
                return Ok(Judgement::new(Outcome::Vacuous, "convergence report not overall true"));
            }
            let e = match extract_modified_sequence(&s, &g, x, &ExtractionConfig::new(a.clone())) {
                Ok(e) => e,
                Err(Error::NoBlockBoundary) => {
                    return Ok(Judgement::new(Outcome::Inconclusive, "no block boundary inside the prefix"))
                }
                Err(e) => return Err(e),
            };
            let eps = case.epsilons.iter().copied().fold(f64::INFINITY, f64::min);
            // past a boundary whose radius satisfies this bound the tail test
            // must pass; otherwise a failure only says the prefix is too short
            let guaranteed = e.block_boundaries.iter().any(|b| (l * l) as f64 * b.eps <= eps);
            let opts = TailOptions {
                budget: cfg.classical_budget,
                samples: cfg.classical_samples,
                seed: derive_seed(case.seed, &[4]),
            };
            let traces = vec![e.mismatch_density_trace.clone(), e.agreement.trace.clone()];
            let j = if case.theorem == Theorem::DenseAgreement {
                judge_agreement(&e, &g, x, eps, guaranteed, &opts)?
            } else {
                judge_subsequence(&s, &e, &g, x, eps, guaranteed, &opts)?
            };
            Ok(j.with_traces(traces))
        }
    }
}

fn tail_failure(guaranteed: bool, what: &str, tail: usize) -> Judgement {
    if guaranteed {
        Judgement::new(Outcome::Suspect, format!("{what} fails the tail test from {tail}"))
    } else {
        Judgement::new(Outcome::Inconclusive, format!("{what} fails the tail test from {tail}; schedule too short"))
    }
}

fn judge_agreement(
    e: &SubsequenceExtraction,
    g: &GMetric,
    x: &Point,
    eps: f64,
    guaranteed: bool,
    opts: &TailOptions,
) -> Result<Judgement> {
    let l = g.order();
    let tail = e.tail_start_for(eps, l);
    let classical = classical_convergence_test(&e.modified_sequence, g, x, eps, tail, opts)?;
    if !classical.holds {
        return Ok(tail_failure(guaranteed, "modified sequence", tail));
    }
    if e.mismatch_verdict.tends_to_one() || e.agreement.verdict.tends_to_zero() {
        return Ok(Judgement::new(Outcome::Suspect, "mismatch set is not density zero"));
    }
    if !(e.mismatch_verdict.tends_to_zero() && e.agreement.verdict.tends_to_one()) {
        return Ok(Judgement::new(Outcome::Inconclusive, "mismatch density verdict inconclusive"));
    }
    Ok(Judgement::new(Outcome::Holds, format!("modified sequence converges from {tail}")))
}

fn judge_subsequence(
    s: &crate::sequence::SequencePrefix,
    e: &SubsequenceExtraction,
    g: &GMetric,
    x: &Point,
    eps: f64,
    guaranteed: bool,
    opts: &TailOptions,
) -> Result<Judgement> {
    let l = g.order();
    let boundary = e.tail_start_for(eps, l) - 1;
    let sub = e.agreement_subsequence(s)?;
    if sub.len() < l {
        return Ok(Judgement::new(Outcome::Inconclusive, "agreement subsequence shorter than the order"));
    }
    let tail = (e.index_set.partition_point(|&m| m <= boundary) + 1).min(sub.len() + 1 - l);
    let classical = classical_convergence_test(&sub, g, x, eps, tail, opts)?;
    Ok(if classical.holds {
        Judgement::new(Outcome::Holds, format!("subsequence of {} terms converges from {tail}", sub.len()))
    } else {
        tail_failure(guaranteed, "agreement subsequence", tail)
    })
}

/// Runs `trials` independent cases of `theorem`. Trial `t` uses the seed
/// `derive_seed(seed, [t])`, so the report depends only on the arguments.
pub fn falsify(theorem: Theorem, trials: u64, seed: u64, cfg: &HarnessConfig) -> Result<FalsificationReport> {
    if trials == 0 {
        return Err(Error::InvalidParam("trials must be at least 1".into()));
    }
    cfg.check()?;
    let results: Vec<(TrialRecord, Option<SuspectCase>)> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let case_seed = derive_seed(seed, &[t]);
            let case = sample_case(theorem, case_seed, cfg)?;
            let j = judge(&case, cfg)?;
            let record = TrialRecord { trial: t, seed: case_seed, outcome: j.outcome, detail: j.detail.clone() };
            let suspect = (j.outcome == Outcome::Suspect).then_some(SuspectCase {
                trial: t,
                case,
                detail: j.detail,
                traces: j.traces,
            });
            Ok((record, suspect))
        })
        .collect::<Result<_>>()?;

    let (records, suspects): (Vec<TrialRecord>, Vec<_>) = results.into_iter().unzip();
    let count = |o: Outcome| records.iter().filter(|r| r.outcome == o).count();
    let vacuous = count(Outcome::Vacuous);
    Ok(FalsificationReport {
        theorem,
        seed,
        run: records.len(),
        holds: count(Outcome::Holds) + vacuous,
        vacuous,
        inconclusive: count(Outcome::Inconclusive),
        suspects: suspects.into_iter().flatten().collect(),
        trials: records,
        config: cfg.clone(),
        finite_prefix: true,
    })
}
