//! l-dimensional asymptotic density of sets of index tuples.
//!
//! A set `A` of index tuples is measured at horizon `n` by
//! `l! / n^l * |A(n)|`, where `A(n)` holds the members whose indices are all
//! at most `n`. Tuples are strictly increasing (combinations), so the full
//! set has value `l! C(n, l) / n^l`, which tends to 1; for `l = 2` that is
//! `(n - 1) / n`.
//!
//! Three backends compute the count:
//!
//! * exact: colex enumeration of all `C(n, l)` combinations, split into
//!   fixed-size rank chunks that are unranked independently and summed;
//! * factorized: when membership is a conjunction of one per-index
//!   condition, the count is `C(m, l)` with `m` the number of admissible
//!   indices;
//! * Monte Carlo: uniform combinations drawn by rejection, with a normal
//!   approximation confidence half-width.
//!
//! Every backend can evaluate several nested targets at once (a tuple score
//! against a list of thresholds), visiting each tuple a single time.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::combinatorics::{binomial, choose, colex_next, colex_unrank, normalized_count};
use crate::error::{Error, Result};
use crate::seed::{derive_seed, rng_for};

pub const DEFAULT_BUDGET: u128 = 100_000_000;
pub const DEFAULT_SAMPLES: u64 = 100_000;

const RANK_CHUNK: u128 = 1 << 15;
const SAMPLE_CHUNK: u64 = 4096;
const Z95: f64 = 1.96;

/// A strictly increasing tuple of positive indices.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct IndexTuple(Vec<usize>);

impl IndexTuple {
    pub fn new(indices: Vec<usize>) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::InvalidOrder);
        }
        if indices[0] == 0 || indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParam(format!("index tuple {indices:?} is not strictly increasing from 1")));
        }
        Ok(IndexTuple(indices))
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn max_index(&self) -> usize {
        *self.0.last().expect("non-empty")
    }
}

impl TryFrom<Vec<usize>> for IndexTuple {
    type Error = Error;
    fn try_from(v: Vec<usize>) -> Result<Self> {
        IndexTuple::new(v)
    }
}

impl From<IndexTuple> for Vec<usize> {
    fn from(t: IndexTuple) -> Self {
        t.0
    }
}

type TupleFn<'a, T> = Box<dyn Fn(&[usize]) -> T + Send + Sync + 'a>;
type IndexFn<'a, T> = Box<dyn Fn(usize) -> T + Send + Sync + 'a>;

/// Membership condition for increasing index tuples of a fixed arity.
///
/// Closures receive 1-based indices in increasing order.
pub struct TuplePredicate<'a> {
    arity: usize,
    eval: TupleFn<'a, bool>,
    factor: Option<IndexFn<'a, bool>>,
}

impl<'a> TuplePredicate<'a> {
    pub fn new(arity: usize, eval: impl Fn(&[usize]) -> bool + Send + Sync + 'a) -> Self {
        TuplePredicate { arity, eval: Box::new(eval), factor: None }
    }

    /// The conjunction of `q` over the indices of a tuple.
    pub fn factorized(arity: usize, q: impl Fn(usize) -> bool + Send + Sync + Clone + 'a) -> Self {
        let q2 = q.clone();
        TuplePredicate { arity, eval: Box::new(move |t: &[usize]| t.iter().all(|&i| q2(i))), factor: Some(Box::new(q)) }
    }

    /// Declares a per-index factorization of an existing predicate. Use
    /// [`TuplePredicate::spot_check_factorization`] to test the claim.
    pub fn with_factor(mut self, q: impl Fn(usize) -> bool + Send + Sync + 'a) -> Self {
        self.factor = Some(Box::new(q));
        self
    }

    pub fn always(arity: usize, value: bool) -> Self {
        TuplePredicate::factorized(arity, move |_| value)
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn is_factorized(&self) -> bool {
        self.factor.is_some()
    }

    pub fn test(&self, t: &IndexTuple) -> Result<bool> {
        if t.len() != self.arity {
            return Err(Error::Arity { expected: self.arity, found: t.len() });
        }
        Ok((self.eval)(t.indices()))
    }

    pub fn test_index(&self, i: usize) -> Option<bool> {
        self.factor.as_ref().map(|q| q(i))
    }

    /// Compares the tuple predicate with the conjunction of the declared
    /// per-index predicate on `samples` random tuples below `n`. Returns
    /// the first disagreeing tuple.
    pub fn spot_check_factorization(&self, n: usize, samples: u64, seed: u64) -> Result<Option<IndexTuple>> {
        let q = self.factor.as_ref().ok_or(Error::NotFactorized)?;
        check_horizon(n, self.arity)?;
        let mut rng = rng_for(seed, &[]);
        let mut buf = Vec::with_capacity(self.arity);
        for _ in 0..samples {
            sample_combination(&mut rng, n, self.arity, &mut buf);
            if (self.eval)(&buf) != buf.iter().all(|&i| q(i)) {
                return Ok(Some(IndexTuple(buf)));
            }
        }
        Ok(None)
    }
}

/// A real score on index tuples, measured against several thresholds at
/// once: a tuple belongs to the set of threshold `eps` iff its score is
/// strictly below `eps`.
pub struct ScoredTuples<'a> {
    arity: usize,
    score: TupleFn<'a, f64>,
    index_score: Option<IndexFn<'a, f64>>,
}

impl<'a> ScoredTuples<'a> {
    pub fn new(arity: usize, score: impl Fn(&[usize]) -> f64 + Send + Sync + 'a) -> Self {
        ScoredTuples { arity, score: Box::new(score), index_score: None }
    }

    /// Declares that `score(t) < eps` iff `index_score(i) < eps` for every
    /// index `i` of `t`.
    pub fn with_index_score(mut self, f: impl Fn(usize) -> f64 + Send + Sync + 'a) -> Self {
        self.index_score = Some(Box::new(f));
        self
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn is_factorized(&self) -> bool {
        self.index_score.is_some()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DensityMethod {
    Exact,
    Factorized,
    MonteCarlo,
    Stratified,
}

/// Normalized tuple count `l! / n^l * |A(n)|` at one horizon.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityEstimate {
    pub n: usize,
    pub l: usize,
    pub method: DensityMethod,
    /// Tuple count for exact and factorized estimates, hits for sampled ones.
    pub count: u128,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub samples: Option<u64>,
    pub value: f64,
    pub ci_halfwidth: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub seed: Option<u64>,
}

impl DensityEstimate {
    fn counted(n: usize, l: usize, method: DensityMethod, count: u128) -> Self {
        DensityEstimate {
            n,
            l,
            method,
            count,
            samples: None,
            value: normalized_count(count, n as u64, l as u32),
            ci_halfwidth: 0.0,
            seed: None,
        }
    }

    fn sampled(n: usize, l: usize, method: DensityMethod, hits: u128, samples: u64, seed: u64) -> Self {
        let scale = full_set_value(n, l);
        let p = hits as f64 / samples as f64;
        let ci = match method {
            DensityMethod::MonteCarlo => Z95 * (p * (1.0 - p) / samples as f64).sqrt() * scale,
            _ => 0.0,
        };
        DensityEstimate {
            n,
            l,
            method,
            count: hits,
            samples: Some(samples),
            value: scale * p,
            ci_halfwidth: ci,
            seed: Some(seed),
        }
    }
}

/// `l! C(n, l) / n^l`, the value of the full tuple set.
pub fn full_set_value(n: usize, l: usize) -> f64 {
    match binomial(n as u64, l as u64) {
        Some(c) => normalized_count(c, n as u64, l as u32),
        None => (0..l).map(|i| (n - i) as f64 / n as f64).product(),
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DensityTrace {
    pub grid: Vec<usize>,
    pub estimates: Vec<DensityEstimate>,
}

impl DensityTrace {
    pub fn values(&self) -> Vec<f64> {
        self.estimates.iter().map(|e| e.value).collect()
    }

    pub fn last(&self) -> Option<&DensityEstimate> {
        self.estimates.last()
    }

    pub fn is_empty(&self) -> bool {
        self.estimates.is_empty()
    }

    pub fn len(&self) -> usize {
        self.estimates.len()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VerdictKind {
    TendsToOne,
    TendsToZero,
    Inconclusive,
}

/// Finite-prefix classification of a density trace. Supports or refutes a
/// limit, never proves one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitVerdict {
    pub kind: VerdictKind,
    pub window: usize,
    pub tolerance: f64,
}

impl LimitVerdict {
    pub fn tends_to_one(&self) -> bool {
        self.kind == VerdictKind::TendsToOne
    }

    pub fn tends_to_zero(&self) -> bool {
        self.kind == VerdictKind::TendsToZero
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerdictRule {
    pub tolerance: f64,
    pub window: usize,
}

impl Default for VerdictRule {
    fn default() -> Self {
        VerdictRule { tolerance: 0.05, window: 5 }
    }
}

impl VerdictRule {
    pub fn apply(&self, trace: &DensityTrace) -> Result<LimitVerdict> {
        limit_verdict(trace, self.tolerance, self.window)
    }
}

/// Tends-to-one iff the last `window` values are all at least `1 - tau`,
/// tends-to-zero iff they are all at most `tau`.
pub fn limit_verdict(trace: &DensityTrace, tau: f64, window: usize) -> Result<LimitVerdict> {
    if window == 0 || trace.len() < window {
        return Err(Error::TraceTooShort { len: trace.len(), window });
    }
    let tail = &trace.estimates[trace.len() - window..];
    let kind = if tail.iter().all(|e| e.value >= 1.0 - tau) {
        VerdictKind::TendsToOne
    } else if tail.iter().all(|e| e.value <= tau) {
        VerdictKind::TendsToZero
    } else {
        VerdictKind::Inconclusive
    };
    Ok(LimitVerdict { kind, window, tolerance: tau })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Estimator {
    /// Factorized when available, exact within budget, sampled otherwise.
    Auto,
    Exact,
    Factorized,
    #[serde(rename = "mc")]
    MonteCarlo,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimatorPolicy {
    pub estimator: Estimator,
    pub budget: u128,
    pub samples: u64,
    pub seed: u64,
}

impl Default for EstimatorPolicy {
    fn default() -> Self {
        EstimatorPolicy { estimator: Estimator::Auto, budget: DEFAULT_BUDGET, samples: DEFAULT_SAMPLES, seed: 0 }
    }
}

impl EstimatorPolicy {
    pub fn with_seed(self, seed: u64) -> Self {
        EstimatorPolicy { seed, ..self }
    }
}

/// Geometric horizon grid: `start * 2^(k / per_octave)` up to `stop`, with
/// `stop` itself always last.
pub fn geometric_grid(start: usize, stop: usize, per_octave: u32) -> Result<Vec<usize>> {
    if start == 0 || stop < start || per_octave == 0 {
        return Err(Error::BadGrid);
    }
    let mut grid = Vec::new();
    let mut k = 0u32;
    loop {
        let n = (start as f64 * 2f64.powf(k as f64 / per_octave as f64)).round() as usize;
        if n >= stop {
            break;
        }
        if grid.last() != Some(&n) {
            grid.push(n);
        }
        k += 1;
    }
    grid.push(stop);
    Ok(grid)
}

pub fn check_grid(grid: &[usize]) -> Result<()> {
    if grid.is_empty() || grid[0] == 0 || grid.windows(2).any(|w| w[0] >= w[1]) {
        Err(Error::BadGrid)
    } else {
        Ok(())
    }
}

fn check_horizon(n: usize, l: usize) -> Result<()> {
    if l == 0 {
        Err(Error::InvalidOrder)
    } else if n < l {
        Err(Error::HorizonTooSmall { n, l })
    } else {
        Ok(())
    }
}

/// Uniform strictly increasing `l`-tuple in `1..=n`: distinct draws by
/// rejection, then sorted.
fn sample_combination<R: Rng>(rng: &mut R, n: usize, l: usize, buf: &mut Vec<usize>) {
    buf.clear();
    while buf.len() < l {
        let i = rng.gen_range(1..=n);
        if !buf.contains(&i) {
            buf.push(i);
        }
    }
    buf.sort_unstable();
}

/// Tuple classification shared by all backends.
///
/// A tuple falls in bucket `b` in `0..=targets`, and counts for target `j`
/// iff `b <= j`, so targets are nested. With a per-index classification the
/// bucket of a tuple is the largest bucket of its indices.
struct Classifier<'c> {
    l: usize,
    targets: usize,
    tuple: &'c (dyn Fn(&[usize]) -> usize + Sync),
    index: Option<&'c (dyn Fn(usize) -> usize + Sync)>,
}

impl Classifier<'_> {
    /// Per-horizon tuple counts for every target, by colex enumeration up
    /// to the largest horizon.
    fn exact_counts(&self, horizons: &[usize]) -> Vec<Vec<u128>> {
        let l = self.l;
        let bounds: Vec<u128> = horizons.iter().map(|&n| choose(n as u64, l as u64)).collect();
        let total = *bounds.last().unwrap_or(&0);
        let slabs = horizons.len();
        let width = self.targets + 1;
        let chunks = total.div_ceil(RANK_CHUNK) as u64;

        let slab_hist = (0..chunks)
            .into_par_iter()
            .map(|chunk| {
                let lo = chunk as u128 * RANK_CHUNK;
                let hi = (lo + RANK_CHUNK).min(total);
                let mut hist = vec![0u64; slabs * width];
                let mut comb = colex_unrank(lo, l);
                let mut idx = vec![0usize; l];
                let mut slab = bounds.partition_point(|&b| b <= lo);
                for rank in lo..hi {
                    while rank >= bounds[slab] {
                        slab += 1;
                    }
                    for (dst, &c) in idx.iter_mut().zip(&comb) {
                        *dst = c as usize + 1;
                    }
                    let b = (self.tuple)(&idx);
                    hist[slab * width + b] += 1;
                    colex_next(&mut comb);
                }
                hist
            })
            .reduce(
                || vec![0u64; slabs * width],
                |mut a, b| {
                    a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                    a
                },
            );

        let mut out = Vec::with_capacity(slabs);
        let mut running = vec![0u128; width];
        for s in 0..slabs {
            for b in 0..width {
                running[b] += slab_hist[s * width + b] as u128;
            }
            out.push(nested_counts(&running, self.targets));
        }
        out
    }

    fn factorized_counts(&self, horizons: &[usize]) -> Result<Vec<Vec<u128>>> {
        let index = self.index.ok_or(Error::NotFactorized)?;
        let mut admissible = vec![0u128; self.targets + 1];
        let mut out = Vec::with_capacity(horizons.len());
        let mut i = 0;
        for &n in horizons {
            while i < n {
                i += 1;
                admissible[index(i)] += 1;
            }
            let m = nested_counts(&admissible, self.targets);
            out.push(m.iter().map(|&m| choose(m as u64, self.l as u64)).collect());
        }
        Ok(out)
    }

    fn sampled_counts(&self, n: usize, samples: u64, seed: u64, stratified: bool) -> Result<Vec<u128>> {
        let l = self.l;
        let total = choose(n as u64, l as u64);
        if stratified && samples as u128 > total {
            return Err(Error::InvalidParam(format!(
                "{samples} strata exceed the {total} combinations at horizon {n}"
            )));
        }
        let chunks = samples.div_ceil(SAMPLE_CHUNK);
        let hist = (0..chunks)
            .into_par_iter()
            .map(|chunk| {
                let mut rng = rng_for(seed, &[chunk]);
                let mut hist = vec![0u64; self.targets + 1];
                let mut buf = Vec::with_capacity(l);
                let lo = chunk * SAMPLE_CHUNK;
                for k in lo..(lo + SAMPLE_CHUNK).min(samples) {
                    if stratified {
                        let a = total * k as u128 / samples as u128;
                        let b = total * (k as u128 + 1) / samples as u128;
                        let rank = a + rng.gen_range(0..b - a);
                        buf.clear();
                        buf.extend(colex_unrank(rank, l).into_iter().map(|c| c as usize + 1));
                    } else {
                        sample_combination(&mut rng, n, l, &mut buf);
                    }
                    hist[(self.tuple)(&buf)] += 1;
                }
                hist
            })
            .reduce(
                || vec![0u64; self.targets + 1],
                |mut a, b| {
                    a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                    a
                },
            );
        let wide: Vec<u128> = hist.into_iter().map(u128::from).collect();
        Ok(nested_counts(&wide, self.targets))
    }

    /// One trace per target along `grid`.
    fn traces(&self, grid: &[usize], policy: &EstimatorPolicy) -> Result<Vec<DensityTrace>> {
        check_grid(grid)?;
        check_horizon(grid[0], self.l)?;
        let l = self.l;
        let mut per_horizon: Vec<Option<Vec<DensityEstimate>>> = vec![None; grid.len()];

        let use_factorized = match policy.estimator {
            Estimator::Factorized => {
                if self.index.is_none() {
                    return Err(Error::NotFactorized);
                }
                true
            }
            Estimator::Auto => self.index.is_some(),
            _ => false,
        };

        let (counted, method): (Vec<usize>, DensityMethod) = if use_factorized {
            (grid.to_vec(), DensityMethod::Factorized)
        } else {
            let within: Vec<usize> = match policy.estimator {
                Estimator::MonteCarlo => Vec::new(),
                _ => grid
                    .iter()
                    .copied()
                    .filter(|&n| binomial(n as u64, l as u64).is_some_and(|c| c <= policy.budget))
                    .collect(),
            };
            if policy.estimator == Estimator::Exact && within.len() < grid.len() {
                let n = grid[within.len()];
                return Err(Error::BudgetExceeded {
                    required: binomial(n as u64, l as u64).unwrap_or(u128::MAX),
                    budget: policy.budget,
                });
            }
            (within, DensityMethod::Exact)
        };

        if !counted.is_empty() {
            let counts = if use_factorized { self.factorized_counts(&counted)? } else { self.exact_counts(&counted) };
            for (k, c) in counts.into_iter().enumerate() {
                let row = c.into_iter().map(|c| DensityEstimate::counted(counted[k], l, method, c)).collect();
                per_horizon[k] = Some(row);
            }
        }
        for (k, &n) in grid.iter().enumerate().skip(counted.len()) {
            let seed = derive_seed(policy.seed, &[n as u64]);
            let hits = self.sampled_counts(n, policy.samples.max(1), seed, false)?;
            let row = hits
                .into_iter()
                .map(|h| DensityEstimate::sampled(n, l, DensityMethod::MonteCarlo, h, policy.samples.max(1), seed))
                .collect();
            per_horizon[k] = Some(row);
        }

        let mut traces =
            vec![DensityTrace { grid: grid.to_vec(), estimates: Vec::with_capacity(grid.len()) }; self.targets];
        for row in per_horizon {
            for (t, e) in row.expect("every horizon estimated").into_iter().enumerate() {
                traces[t].estimates.push(e);
            }
        }
        Ok(traces)
    }
}

fn nested_counts(hist: &[u128], targets: usize) -> Vec<u128> {
    hist.iter()
        .take(targets)
        .scan(0u128, |acc, &h| {
            *acc += h;
            Some(*acc)
        })
        .collect()
}

fn bool_bucket(hit: bool) -> usize {
    usize::from(!hit)
}

fn predicate_classifier<'c>(
    p: &'c TuplePredicate<'_>,
    tuple: &'c (dyn Fn(&[usize]) -> usize + Sync),
    index: Option<&'c (dyn Fn(usize) -> usize + Sync)>,
) -> Classifier<'c> {
    Classifier { l: p.arity, targets: 1, tuple, index }
}

/// Counts every increasing tuple with indices at most `n`.
pub fn exact_density(p: &TuplePredicate<'_>, n: usize, budget: u128) -> Result<DensityEstimate> {
    let l = p.arity;
    check_horizon(n, l)?;
    let required = binomial(n as u64, l as u64).unwrap_or(u128::MAX);
    if required > budget {
        return Err(Error::BudgetExceeded { required, budget });
    }
    let tuple = |t: &[usize]| bool_bucket((p.eval)(t));
    let c = predicate_classifier(p, &tuple, None);
    let count = c.exact_counts(&[n])[0][0];
    Ok(DensityEstimate::counted(n, l, DensityMethod::Exact, count))
}

/// Closed form `C(m, l)` with `m = |{i <= n : q(i)}|`.
pub fn factorized_density(q: impl Fn(usize) -> bool, n: usize, l: usize) -> Result<DensityEstimate> {
    check_horizon(n, l)?;
    let m = (1..=n).filter(|&i| q(i)).count();
    Ok(DensityEstimate::counted(n, l, DensityMethod::Factorized, choose(m as u64, l as u64)))
}

/// Scaled hit fraction over `samples` uniform combinations.
pub fn monte_carlo_density(p: &TuplePredicate<'_>, n: usize, samples: u64, seed: u64) -> Result<DensityEstimate> {
    sampled_density(p, n, samples, seed, false)
}

/// One uniform draw from each of `samples` equal colex-rank strata. With
/// `samples = C(n, l)` every combination is visited once and the hit count
/// equals the exact count.
pub fn stratified_density(p: &TuplePredicate<'_>, n: usize, samples: u64, seed: u64) -> Result<DensityEstimate> {
    sampled_density(p, n, samples, seed, true)
}

fn sampled_density(
    p: &TuplePredicate<'_>,
    n: usize,
    samples: u64,
    seed: u64,
    stratified: bool,
) -> Result<DensityEstimate> {
    let l = p.arity;
    check_horizon(n, l)?;
    if samples == 0 {
        return Err(Error::InvalidParam("samples must be at least 1".into()));
    }
    let tuple = |t: &[usize]| bool_bucket((p.eval)(t));
    let c = predicate_classifier(p, &tuple, None);
    let hits = c.sampled_counts(n, samples, seed, stratified)?[0];
    let method = if stratified { DensityMethod::Stratified } else { DensityMethod::MonteCarlo };
    Ok(DensityEstimate::sampled(n, l, method, hits, samples, seed))
}

/// Estimates the density of `p` at every horizon of `grid`.
pub fn density_trace(p: &TuplePredicate<'_>, grid: &[usize], policy: &EstimatorPolicy) -> Result<DensityTrace> {
    let tuple = |t: &[usize]| bool_bucket((p.eval)(t));
    let index = p.factor.as_ref().map(|q| move |i: usize| bool_bucket(q(i)));
    let index_ref = index.as_ref().map(|f| f as &(dyn Fn(usize) -> usize + Sync));
    let c = predicate_classifier(p, &tuple, index_ref);
    Ok(c.traces(grid, policy)?.remove(0))
}

/// One trace per threshold (in input order) for the sets
/// `{t : score(t) < eps}`, visiting each tuple once for all thresholds.
pub fn threshold_traces(
    s: &ScoredTuples<'_>,
    thresholds: &[f64],
    grid: &[usize],
    policy: &EstimatorPolicy,
) -> Result<Vec<DensityTrace>> {
    if thresholds.is_empty() || thresholds.iter().any(|e| e.is_nan()) {
        return Err(Error::InvalidParam("thresholds must be non-empty numbers".into()));
    }
    let mut order: Vec<usize> = (0..thresholds.len()).collect();
    order.sort_by(|&a, &b| thresholds[a].total_cmp(&thresholds[b]));
    let sorted: Vec<f64> = order.iter().map(|&k| thresholds[k]).collect();
    // thresholds not above the score are failed; the rest pass
    let bucket = |score: f64| sorted.partition_point(|&e| e <= score);

    let tuple = |t: &[usize]| bucket((s.score)(t));
    let index = s.index_score.as_ref().map(|f| move |i: usize| bucket(f(i)));
    let index_ref = index.as_ref().map(|f| f as &(dyn Fn(usize) -> usize + Sync));
    let c = Classifier { l: s.arity, targets: sorted.len(), tuple: &tuple, index: index_ref };
    let traces = c.traces(grid, policy)?;

    let mut out = vec![DensityTrace::default(); thresholds.len()];
    for (pos, trace) in order.into_iter().zip(traces) {
        out[pos] = trace;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn is_square(i: usize) -> bool {
        let r = (i as f64).sqrt() as usize;
        (r.saturating_sub(1)..=r + 1).any(|k| k * k == i)
    }

    /// Independent oracle: nested loops over all increasing pairs.
    fn brute_pairs(n: usize, p: impl Fn(usize, usize) -> bool) -> u128 {
        let mut c = 0;
        for i in 1..=n {
            for j in i + 1..=n {
                if p(i, j) {
                    c += 1;
                }
            }
        }
        c
    }

    #[test]
    fn full_and_empty_sets() {
        let all = TuplePredicate::new(2, |_| true);
        let e = exact_density(&all, 1000, DEFAULT_BUDGET).unwrap();
        assert_eq!(e.value, 0.999);
        assert_eq!(e.count, 499_500);
        let none = TuplePredicate::new(2, |_| false);
        assert_eq!(exact_density(&none, 1000, DEFAULT_BUDGET).unwrap().value, 0.0);
    }

    #[test]
    fn non_square_pairs_at_one_hundred() {
        let oracle = brute_pairs(100, |i, j| !is_square(i) && !is_square(j));
        assert_eq!(oracle, 4005);
        let p = TuplePredicate::new(2, |t| t.iter().all(|&i| !is_square(i)));
        let exact = exact_density(&p, 100, DEFAULT_BUDGET).unwrap();
        let fact = factorized_density(|i| !is_square(i), 100, 2).unwrap();
        assert_eq!(exact.count, oracle);
        assert_eq!(fact.count, oracle);
        assert_eq!(exact.value.to_bits(), fact.value.to_bits());
        assert_eq!(fact.value, 0.801);
    }

    #[test]
    fn first_half_closed_form() {
        let v = factorized_density(|i| i <= 500, 1000, 2).unwrap().value;
        assert!((v - 0.2495).abs() < 1e-15);
        let oracle = brute_pairs(100, |i, j| i <= 50 && j <= 50);
        let e = exact_density(&TuplePredicate::new(2, |t| t[1] <= 50), 100, DEFAULT_BUDGET).unwrap();
        assert_eq!(e.count, oracle);
    }

    #[test]
    fn full_set_factorized_is_falling_factorial() {
        for (n, l) in [(10usize, 3usize), (57, 4), (1000, 2)] {
            let e = factorized_density(|_| true, n, l).unwrap();
            let ff: f64 = (1..l).map(|k| (n - k) as f64 / n as f64).product();
            assert!((e.value - ff).abs() < 1e-15);
        }
    }

    #[test]
    fn errors() {
        let p = TuplePredicate::new(3, |_| true);
        assert!(matches!(exact_density(&p, 2, DEFAULT_BUDGET), Err(Error::HorizonTooSmall { n: 2, l: 3 })));
        assert!(matches!(exact_density(&p, 100, 1000), Err(Error::BudgetExceeded { required: 161_700, budget: 1000 })));
        assert!(matches!(density_trace(&p, &[10, 10], &EstimatorPolicy::default()), Err(Error::BadGrid)));
        let pol = EstimatorPolicy { estimator: Estimator::Factorized, ..Default::default() };
        assert!(matches!(density_trace(&p, &[10], &pol), Err(Error::NotFactorized)));
    }

    #[test]
    fn monte_carlo_always_true_is_exact() {
        let p = TuplePredicate::new(3, |_| true);
        for seed in [1, 2, 3] {
            let e = monte_carlo_density(&p, 50, 1000, seed).unwrap();
            assert_eq!(e.value, full_set_value(50, 3));
            assert_eq!(e.ci_halfwidth, 0.0);
        }
        let none = TuplePredicate::new(2, |_| false);
        assert_eq!(monte_carlo_density(&none, 50, 1000, 9).unwrap().value, 0.0);
    }

    #[test]
    fn monte_carlo_non_squares() {
        let n = 10_000;
        let exact = factorized_density(|i| !is_square(i), n, 2).unwrap();
        assert_eq!(exact.count, 49_000_050);
        let p = TuplePredicate::new(2, |t| t.iter().all(|&i| !is_square(i)));
        let mc = monte_carlo_density(&p, n, 100_000, 42).unwrap();
        assert!((mc.value - exact.value).abs() <= 3.0 * mc.ci_halfwidth, "{mc:?}");
    }

    #[test]
    fn monte_carlo_is_thread_count_independent() {
        let p = TuplePredicate::new(2, |t| (t[0] + t[1]) % 3 == 0);
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let a = pool.install(|| monte_carlo_density(&p, 500, 20_000, 5).unwrap());
        let b = monte_carlo_density(&p, 500, 20_000, 5).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn stratified_exhaustive_equals_exact() {
        for n in [2usize, 7, 19, 30] {
            let p = TuplePredicate::new(2, |t| (t[0] * 7 + t[1] * 3) % 5 < 2);
            let total = choose(n as u64, 2) as u64;
            let exact = exact_density(&p, n, DEFAULT_BUDGET).unwrap();
            let strat = stratified_density(&p, n, total, 77).unwrap();
            assert_eq!(strat.count, exact.count);
            assert!((strat.value - exact.value).abs() < 1e-15);
        }
        let p = TuplePredicate::new(2, |_| true);
        assert!(stratified_density(&p, 5, 11, 0).is_err());
    }

    #[test]
    fn traces_along_a_grid() {
        let p = TuplePredicate::factorized(2, |i| !is_square(i));
        let t = density_trace(&p, &[100, 1000, 10_000], &EstimatorPolicy::default()).unwrap();
        let v = t.values();
        assert_eq!(v[0], 0.801);
        assert_eq!(v[1], 0.937992);
        assert_eq!(v[2], 0.980001);
        assert!(t.estimates.iter().all(|e| e.method == DensityMethod::Factorized));

        let sq = TuplePredicate::factorized(2, is_square);
        let t = density_trace(&sq, &[10_000], &EstimatorPolicy::default()).unwrap();
        assert!((t.values()[0] - 9.9e-5).abs() < 1e-18);

        let all = TuplePredicate::new(2, |_| true);
        let t = density_trace(&all, &[10, 20, 40], &EstimatorPolicy::default()).unwrap();
        assert_eq!(t.values(), vec![0.9, 0.95, 0.975]);
    }

    #[test]
    fn auto_policy_switches_to_sampling_past_the_budget() {
        let p = TuplePredicate::new(2, |t| t[0] % 2 == 1);
        let policy = EstimatorPolicy { budget: 5_000, samples: 20_000, ..Default::default() };
        let t = density_trace(&p, &[50, 100, 200], &policy).unwrap();
        let methods: Vec<_> = t.estimates.iter().map(|e| e.method).collect();
        assert_eq!(methods, [DensityMethod::Exact, DensityMethod::Exact, DensityMethod::MonteCarlo]);
        let exact = exact_density(&p, 200, DEFAULT_BUDGET).unwrap();
        assert!((t.estimates[2].value - exact.value).abs() < 4.0 * t.estimates[2].ci_halfwidth);
        let strict = EstimatorPolicy { estimator: Estimator::Exact, ..policy };
        assert!(matches!(density_trace(&p, &[50, 200], &strict), Err(Error::BudgetExceeded { .. })));
    }

    #[test]
    fn exact_trace_matches_single_horizon_counts() {
        let p = TuplePredicate::new(3, |t| (t[0] ^ t[1] ^ t[2]) & 1 == 0);
        let grid = [5, 17, 40, 41, 90];
        let t = density_trace(&p, &grid, &EstimatorPolicy::default()).unwrap();
        for (e, &n) in t.estimates.iter().zip(&grid) {
            assert_eq!(e.count, exact_density(&p, n, DEFAULT_BUDGET).unwrap().count);
        }
    }

    #[test]
    fn threshold_traces_match_separate_predicates() {
        let score = |t: &[usize]| ((t[0] * 31 + t[1] * 17) % 100) as f64 / 100.0;
        let s = ScoredTuples::new(2, score);
        let eps = [0.5, 0.1, 0.9, 0.1];
        let grid = [30, 64, 128];
        let traces = threshold_traces(&s, &eps, &grid, &EstimatorPolicy::default()).unwrap();
        for (k, &e) in eps.iter().enumerate() {
            let p = TuplePredicate::new(2, move |t| score(t) < e);
            let single = density_trace(&p, &grid, &EstimatorPolicy::default()).unwrap();
            assert_eq!(traces[k], single);
        }
    }

    #[test]
    fn threshold_traces_factorized() {
        let s = ScoredTuples::new(2, |t| t.iter().map(|&i| (i % 10) as f64).fold(0.0, f64::max))
            .with_index_score(|i| (i % 10) as f64);
        let traces = threshold_traces(&s, &[5.0, 100.0], &[100], &EstimatorPolicy::default()).unwrap();
        // indices with last digit < 5: 50 of 100
        assert_eq!(traces[0].estimates[0].count, choose(50, 2));
        assert_eq!(traces[1].estimates[0].count, choose(100, 2));
        let exact = EstimatorPolicy { estimator: Estimator::Exact, ..Default::default() };
        let e = threshold_traces(&s, &[5.0, 100.0], &[100], &exact).unwrap();
        assert_eq!(e[0].estimates[0].count, traces[0].estimates[0].count);
    }

    #[test]
    fn verdict_rule() {
        let mk = |vals: &[f64]| DensityTrace {
            grid: (1..=vals.len()).collect(),
            estimates: vals
                .iter()
                .enumerate()
                .map(|(k, &v)| DensityEstimate {
                    n: k + 1,
                    l: 1,
                    method: DensityMethod::Exact,
                    count: 0,
                    samples: None,
                    value: v,
                    ci_halfwidth: 0.0,
                    seed: None,
                })
                .collect(),
        };
        let t = mk(&[0.801, 0.937992, 0.980001]);
        assert_eq!(limit_verdict(&t, 0.05, 1).unwrap().kind, VerdictKind::TendsToOne);
        // 0.937992 < 0.95
        assert_eq!(limit_verdict(&t, 0.05, 2).unwrap().kind, VerdictKind::Inconclusive);
        assert_eq!(limit_verdict(&mk(&[0.0, 0.0, 0.0]), 0.05, 3).unwrap().kind, VerdictKind::TendsToZero);
        assert_eq!(limit_verdict(&mk(&[0.2, 0.9, 0.3]), 0.05, 3).unwrap().kind, VerdictKind::Inconclusive);
        assert!(matches!(limit_verdict(&t, 0.05, 4), Err(Error::TraceTooShort { len: 3, window: 4 })));
    }

    #[test]
    fn grids() {
        assert_eq!(geometric_grid(100, 1000, 1).unwrap(), vec![100, 200, 400, 800, 1000]);
        assert_eq!(geometric_grid(100, 400, 2).unwrap(), vec![100, 141, 200, 283, 400]);
        assert_eq!(geometric_grid(5, 5, 1).unwrap(), vec![5]);
        assert!(geometric_grid(0, 5, 1).is_err());
    }

    #[test]
    fn factorization_spot_check() {
        let good = TuplePredicate::new(2, |t| t.iter().all(|&i| i % 3 != 0)).with_factor(|i| i % 3 != 0);
        assert!(good.spot_check_factorization(100, 500, 1).unwrap().is_none());
        let bad = TuplePredicate::new(2, |t| t[0] % 3 != 0).with_factor(|i| i % 3 != 0);
        assert!(bad.spot_check_factorization(100, 500, 1).unwrap().is_some());
    }
}
