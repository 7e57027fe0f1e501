//! Randomized checking of the g-metric axioms and of the basic inequalities
//! every g-metric satisfies.
//!
//! Each trial draws its own RNG from `(seed, trial)`, so reports do not
//! depend on the number of worker threads. Violations are listed in trial
//! order.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gmetric::{Args, GMetric};
use crate::point::Point;
use crate::seed::rng_for;

pub type TrialRng = ChaCha8Rng;

/// Produces argument tuples for the checkers.
pub trait TupleSampler: Sync {
    fn sample(&self, rng: &mut TrialRng, arity: usize) -> Vec<Point>;
}

/// Uniform points in `[-scale, scale]^dim`; with probability
/// `tie_probability` a point instead copies an earlier point of the same
/// tuple, so that coincident arguments actually occur.
#[derive(Clone, Debug)]
pub struct BoxSampler {
    pub dim: usize,
    pub scale: f64,
    pub tie_probability: f64,
}

impl BoxSampler {
    pub fn new(dim: usize) -> Self {
        BoxSampler { dim, scale: 10.0, tie_probability: 0.3 }
    }
}

impl TupleSampler for BoxSampler {
    fn sample(&self, rng: &mut TrialRng, arity: usize) -> Vec<Point> {
        let mut out: Vec<Point> = Vec::with_capacity(arity);
        for _ in 0..arity {
            if !out.is_empty() && rng.gen_bool(self.tie_probability) {
                let j = rng.gen_range(0..out.len());
                out.push(out[j].clone());
            } else {
                let coords = (0..self.dim).map(|_| rng.gen_range(-self.scale..=self.scale)).collect();
                out.push(Point::new(coords).expect("finite sample"));
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ViolationWitness {
    /// Axiom (`g1`..`g4`) or inequality item (`1`..`7`, with `3a`/`3b`).
    pub item: String,
    pub trial: u64,
    /// Argument tuples involved, left-hand side first.
    pub points: Vec<Vec<Point>>,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
}

/// Outcome of a randomized check run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub metric: String,
    pub order: usize,
    pub trials: u64,
    pub seed: u64,
    pub tolerance: f64,
    /// Number of evaluated statements per item.
    pub checked: BTreeMap<String, u64>,
    pub violations: Vec<ViolationWitness>,
}

pub type AxiomReport = CheckReport;
pub type InequalityReport = CheckReport;

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn violations_of<'a>(&'a self, item: &'a str) -> impl Iterator<Item = &'a ViolationWitness> + 'a {
        self.violations.iter().filter(move |v| v.item == item)
    }
}

/// `lhs <= rhs` up to absolute plus relative slack `tol`.
pub fn within(lhs: f64, rhs: f64, tol: f64) -> bool {
    lhs <= rhs + tol + tol * lhs.abs().max(rhs.abs())
}

struct Trial<'a> {
    g: &'a GMetric,
    tol: f64,
    index: u64,
    checked: BTreeMap<String, u64>,
    violations: Vec<ViolationWitness>,
}

impl<'a> Trial<'a> {
    fn new(g: &'a GMetric, tol: f64, index: u64) -> Self {
        Trial { g, tol, index, checked: BTreeMap::new(), violations: Vec::new() }
    }

    fn eval(&self, pts: &[Point]) -> f64 {
        let args: Args<'_> = pts.iter().collect();
        self.g.eval_unchecked(&args)
    }

    fn record(&mut self, item: &str, holds: bool, points: Vec<Vec<Point>>, lhs: f64, rhs: f64) {
        *self.checked.entry(item.to_string()).or_default() += 1;
        if !holds {
            self.violations.push(ViolationWitness {
                item: item.to_string(),
                trial: self.index,
                points,
                lhs,
                rhs,
                slack: lhs - rhs,
            });
        }
    }

    fn le(&mut self, item: &str, lhs: f64, rhs: f64, points: Vec<Vec<Point>>) {
        let holds = within(lhs, rhs, self.tol);
        self.record(item, holds, points, lhs, rhs);
    }
}

fn draw(sampler: &dyn TupleSampler, rng: &mut TrialRng, arity: usize, dim: &mut Option<usize>) -> Result<Vec<Point>> {
    let pts = sampler.sample(rng, arity);
    if pts.len() != arity {
        return Err(Error::SamplerArity { expected: arity, found: pts.len() });
    }
    let d = dim.get_or_insert(pts[0].dim());
    if let Some(p) = pts.iter().find(|p| p.dim() != *d) {
        return Err(Error::DimensionMismatch { expected: *d, found: p.dim() });
    }
    Ok(pts)
}

fn repeated(parts: &[(&Point, usize)]) -> Vec<Point> {
    parts.iter().flat_map(|&(p, k)| std::iter::repeat_n(p.clone(), k)).collect()
}

fn run_trials<F>(g: &GMetric, trials: u64, seed: u64, tolerance: f64, body: F) -> Result<CheckReport>
where
    F: Fn(&mut Trial<'_>, &mut TrialRng, &mut Option<usize>) -> Result<()> + Sync,
{
    let results: Vec<Result<Trial<'_>>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = rng_for(seed, &[t]);
            let mut trial = Trial::new(g, tolerance, t);
            let mut dim = None;
            body(&mut trial, &mut rng, &mut dim)?;
            if let Some(d) = dim {
                g.check_space_dim(d)?;
            }
            Ok(trial)
        })
        .collect();
    let mut report = CheckReport {
        metric: g.name().to_string(),
        order: g.order(),
        trials,
        seed,
        tolerance,
        checked: BTreeMap::new(),
        violations: Vec::new(),
    };
    for r in results {
        let trial = r?;
        for (k, v) in trial.checked {
            *report.checked.entry(k).or_default() += v;
        }
        report.violations.extend(trial.violations);
    }
    Ok(report)
}

/// Samples the four axioms `trials` times.
///
/// Per trial: g1 on a constant tuple and on a perturbed constant tuple, g2
/// under a random permutation, g3 with the subset tuple resampled from the
/// entries of the superset tuple, g4 with a random split `s + t + 1 = l`
/// and a random pivot.
pub fn check_axioms(
    g: &GMetric,
    sampler: &dyn TupleSampler,
    trials: u64,
    seed: u64,
    tolerance: f64,
) -> Result<AxiomReport> {
    let l = g.order();
    let arity = g.arity();
    run_trials(g, trials, seed, tolerance, |tr, rng, dim| {
        // g1: constant tuple is zero, a perturbed one is positive.
        let base = draw(sampler, rng, 1, dim)?.remove(0);
        let constant = vec![base.clone(); arity];
        let v = tr.eval(&constant);
        tr.le("g1", v, 0.0, vec![constant.clone()]);

        let mut perturbed = constant;
        let slot = rng.gen_range(0..arity);
        let mut coords = perturbed[slot].clone().into_coords();
        let c = rng.gen_range(0..coords.len());
        coords[c] += 1e-3 * (1.0 + coords[c].abs());
        perturbed[slot] = Point::new(coords)?;
        let v = tr.eval(&perturbed);
        // strict positivity has no tolerance: the witness puts 0 on the left
        tr.record("g1", v > 0.0, vec![perturbed], 0.0, v);

        // g2
        let tuple = draw(sampler, rng, arity, dim)?;
        let mut permuted = tuple.clone();
        permuted.shuffle(rng);
        let (a, b) = (tr.eval(&tuple), tr.eval(&permuted));
        let holds = within(a, b, tolerance) && within(b, a, tolerance);
        tr.record("g2", holds, vec![permuted, tuple], b, a);

        // g3
        let sup = draw(sampler, rng, arity, dim)?;
        let sub: Vec<Point> = (0..arity).map(|_| sup[rng.gen_range(0..arity)].clone()).collect();
        let (lhs, rhs) = (tr.eval(&sub), tr.eval(&sup));
        tr.le("g3", lhs, rhs, vec![sub, sup]);

        // g4: the first s+1 arguments against the last t+1, pivot w
        let tuple = draw(sampler, rng, arity, dim)?;
        let s = rng.gen_range(0..l);
        let t = l - 1 - s;
        let w = if rng.gen_bool(0.5) {
            tuple[rng.gen_range(0..arity)].clone()
        } else {
            draw(sampler, rng, 1, dim)?.remove(0)
        };
        let mut left: Vec<Point> = tuple[..=s].to_vec();
        left.extend(std::iter::repeat_n(w.clone(), l - s));
        let mut right: Vec<Point> = tuple[s + 1..].to_vec();
        right.extend(std::iter::repeat_n(w, l - t));
        let lhs = tr.eval(&tuple);
        let rhs = tr.eval(&left) + tr.eval(&right);
        tr.le("g4", lhs, rhs, vec![tuple, left, right]);
        Ok(())
    })
}

/// Samples the seven basic inequalities of g-metrics. They are theorems
/// only for genuine g-metrics, so a violation also flags a broken axiom.
pub fn check_basic_inequalities(
    g: &GMetric,
    sampler: &dyn TupleSampler,
    trials: u64,
    seed: u64,
    tolerance: f64,
) -> Result<InequalityReport> {
    let l = g.order();
    let arity = g.arity();
    run_trials(g, trials, seed, tolerance, |tr, rng, dim| {
        // x, y, w drawn as one tuple so that ties occur
        let xyw = draw(sampler, rng, 3, dim)?;
        let (x, y, w) = (&xyw[0], &xyw[1], &xyw[2]);
        let s = rng.gen_range(1..=l);
        let s2 = rng.gen_range(1..=l);
        let full = draw(sampler, rng, arity, dim)?;
        let lf = l as f64;
        let sf = s as f64;

        let x_w = repeated(&[(x, 1), (w, l)]);
        let gx_w = tr.eval(&x_w);
        let xs_w = repeated(&[(x, s), (w, l + 1 - s)]);
        let gxs_w = tr.eval(&xs_w);

        // 1
        let a = repeated(&[(x, s), (y, l + 1 - s)]);
        let b = repeated(&[(w, s), (y, l + 1 - s)]);
        let (lhs, rhs) = (tr.eval(&a), gxs_w + tr.eval(&b));
        tr.le("1", lhs, rhs, vec![a, xs_w.clone(), b]);

        // 2
        let a = repeated(&[(x, 1), (y, l)]);
        let b = repeated(&[(w, 1), (y, l)]);
        let (lhs, rhs) = (tr.eval(&a), gx_w + tr.eval(&b));
        tr.le("2", lhs, rhs, vec![a, x_w.clone(), b]);

        // 3
        tr.le("3a", gxs_w, sf * gx_w, vec![xs_w.clone(), x_w.clone()]);
        let w_x = repeated(&[(w, 1), (x, l)]);
        let gw_x = tr.eval(&w_x);
        tr.le("3b", gxs_w, (lf + 1.0 - sf) * gw_x, vec![xs_w.clone(), w_x]);

        // 4
        let mut pts = vec![full.clone()];
        let mut rhs = 0.0;
        for xi in &full {
            let t = repeated(&[(xi, 1), (w, l)]);
            rhs += tr.eval(&t);
            pts.push(t);
        }
        let lhs = tr.eval(&full);
        tr.le("4", lhs, rhs, pts);

        // 5: replace the first argument of the full tuple by y and by w
        let mut ya = full.clone();
        ya[0] = y.clone();
        let mut wa = full;
        wa[0] = w.clone();
        let y_w = repeated(&[(y, 1), (w, l)]);
        let w_y = repeated(&[(w, 1), (y, l)]);
        let lhs = (tr.eval(&ya) - tr.eval(&wa)).abs();
        let rhs = tr.eval(&y_w).max(tr.eval(&w_y));
        tr.le("5", lhs, rhs, vec![ya, wa, y_w, w_y]);

        // 6
        let xs2_w = repeated(&[(x, s2), (w, l + 1 - s2)]);
        let lhs = (gxs_w - tr.eval(&xs2_w)).abs();
        let rhs = s.abs_diff(s2) as f64 * gx_w;
        tr.le("6", lhs, rhs, vec![xs_w.clone(), xs2_w, x_w.clone()]);

        // 7
        let factor = 1.0 + (sf - 1.0) * (lf + 1.0 - sf);
        tr.le("7", gx_w, factor * gxs_w, vec![x_w, xs_w]);
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gmetric::FactorizationHint;
    use crate::point::BaseMetric;

    fn sc(v: f64) -> Point {
        Point::scalar(v)
    }

    #[test]
    fn tolerance_is_absolute_plus_relative() {
        assert!(within(1.0, 1.0, 0.0));
        assert!(within(1e6 + 1e-7, 1e6, 1e-12));
        assert!(!within(1.0 + 1e-9, 1.0, 1e-12));
    }

    #[test]
    fn max_pairwise_order_three_has_no_violations() {
        let g = GMetric::max_pairwise(BaseMetric::Absolute, 3).unwrap();
        let r = check_axioms(&g, &BoxSampler::new(1), 10_000, 11, 1e-12).unwrap();
        assert!(r.passed(), "{:?}", r.violations.first());
        assert_eq!(r.checked["g1"], 20_000);
        assert_eq!(r.checked["g4"], 10_000);
    }

    #[test]
    fn discrete_has_no_violations() {
        for l in [1, 2, 5] {
            let g = GMetric::discrete(l).unwrap();
            let r = check_axioms(&g, &BoxSampler::new(2), 2_000, 3, 1e-12).unwrap();
            assert!(r.passed());
            let r = check_basic_inequalities(&g, &BoxSampler::new(2), 2_000, 3, 1e-12).unwrap();
            assert!(r.passed());
        }
    }

    #[test]
    fn argument_ignoring_candidate_fails_symmetry() {
        // g(x0..xl) = |x0 - x1| ignores x2, so swapping x1 and x2 changes it
        let g = GMetric::custom("first-pair", 2, FactorizationHint::None, |p: &[&Point]| {
            (p[0].coords()[0] - p[1].coords()[0]).abs()
        })
        .unwrap();
        let direct = g.evaluate_points(&[sc(0.0), sc(1.0), sc(3.0)]).unwrap();
        let swapped = g.evaluate_points(&[sc(0.0), sc(3.0), sc(1.0)]).unwrap();
        assert_ne!(direct, swapped);

        let r = check_axioms(&g, &BoxSampler::new(1), 500, 5, 1e-12).unwrap();
        assert!(r.violations_of("g2").next().is_some());
        let v = r.violations_of("g2").next().unwrap();
        assert!(v.slack.abs() > 0.0);
    }

    #[test]
    fn sum_pairwise_order_three_fails_monotonicity() {
        let g = GMetric::sum_pairwise(BaseMetric::Absolute, 3).unwrap();
        let r = check_axioms(&g, &BoxSampler::new(1), 2_000, 8, 1e-12).unwrap();
        let v = r.violations_of("g3").next().expect("g3 witness");
        assert!(v.lhs > v.rhs);
    }

    #[test]
    fn item_two_hand_case() {
        // g(0,3,3) = 3 <= g(0,1,1) + g(1,3,3) = 1 + 2
        let g = GMetric::max_pairwise(BaseMetric::Absolute, 2).unwrap();
        let lhs = g.evaluate_points(&[sc(0.0), sc(3.0), sc(3.0)]).unwrap();
        let r1 = g.evaluate_points(&[sc(0.0), sc(1.0), sc(1.0)]).unwrap();
        let r2 = g.evaluate_points(&[sc(1.0), sc(3.0), sc(3.0)]).unwrap();
        assert_eq!((lhs, r1, r2), (3.0, 1.0, 2.0));
        assert!(within(lhs, r1 + r2, 0.0));
    }

    #[test]
    fn item_three_discrete_hand_case() {
        let g = GMetric::discrete(3).unwrap();
        let lhs = g.evaluate_points(&[sc(1.0), sc(1.0), sc(0.0), sc(0.0)]).unwrap();
        let single = g.evaluate_points(&[sc(1.0), sc(0.0), sc(0.0), sc(0.0)]).unwrap();
        assert!(within(lhs, 2.0 * single, 0.0));
    }

    #[test]
    fn euclidean_inequalities_hold() {
        let g = GMetric::max_pairwise(BaseMetric::Euclidean, 2).unwrap();
        let r = check_basic_inequalities(&g, &BoxSampler::new(2), 10_000, 17, 1e-12).unwrap();
        assert!(r.passed(), "{:?}", r.violations.first());
        assert_eq!(r.checked.len(), 8);
    }

    #[test]
    fn report_is_independent_of_thread_count() {
        let g = GMetric::sum_pairwise(BaseMetric::Absolute, 3).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let single = pool.install(|| check_axioms(&g, &BoxSampler::new(1), 300, 2, 1e-12).unwrap());
        let multi = check_axioms(&g, &BoxSampler::new(1), 300, 2, 1e-12).unwrap();
        assert_eq!(single, multi);
    }

    struct ShortSampler;
    impl TupleSampler for ShortSampler {
        fn sample(&self, _: &mut TrialRng, arity: usize) -> Vec<Point> {
            vec![sc(0.0); arity.saturating_sub(1).max(1)]
        }
    }

    #[test]
    fn sampler_arity_mismatch_is_an_error() {
        let g = GMetric::discrete(2).unwrap();
        assert!(matches!(
            check_axioms(&g, &ShortSampler, 10, 0, 1e-12),
            Err(Error::SamplerArity { expected: 3, found: 2 })
        ));
    }

    #[test]
    fn base_dimension_is_validated() {
        let g = GMetric::max_pairwise(BaseMetric::Absolute, 2).unwrap();
        assert!(check_axioms(&g, &BoxSampler::new(2), 10, 0, 1e-12).is_err());
    }
}
