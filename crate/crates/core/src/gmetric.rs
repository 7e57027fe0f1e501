//! Generalized metrics of order `l`: nonnegative functions of `l + 1` points.
//!
//! Order 1 is an ordinary metric and order 2 the classical G-metric. The
//! built-in constructions are
//!
//! * [`GMetric::max_pairwise`]: the largest pairwise base distance (the
//!   diameter of the argument set). Satisfies all four axioms for every base
//!   metric.
//! * [`GMetric::sum_pairwise`]: the sum of all pairwise base distances. Only
//!   checked empirically; for `l >= 3` it breaks monotonicity, e.g. on the
//!   real line `g(0,0,1,1) = 4 > g(0,1,0.5,0.5) = 3`.
//! * [`GMetric::discrete`]: 0 on constant tuples, 1 otherwise. Identity and
//!   symmetry are immediate; monotonicity holds because a constant superset
//!   tuple forces a constant subset tuple; the split inequality holds because
//!   a zero right-hand side makes every argument equal to the pivot.
//!
//! Built-in evaluators are bit-exactly invariant under permutation of their
//! arguments: max-pairwise reduces with `f64::max`, sum-pairwise sums the
//! sorted multiset of pairwise distances, and every base distance is
//! symmetric bit-for-bit.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::error::{Error, Result};
use crate::point::{BaseMetric, Point};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GMetricKind {
    MaxPairwise,
    SumPairwise,
    Discrete,
    Custom,
}

/// Whether `g(x, x_{i_1}, ..., x_{i_l}) < eps` can be decided index by index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FactorizationHint {
    None,
    /// The ball condition around any centre equals the conjunction of the
    /// singleton conditions `g(x, x_i, ..., x_i) < eps`.
    PerIndexBall,
}

/// Serializable description of a built-in metric.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricSpec {
    pub kind: GMetricKind,
    pub base: Option<BaseMetric>,
    pub order: usize,
}

type CustomEval = dyn Fn(&[&Point]) -> f64 + Send + Sync;

#[derive(Clone)]
enum Evaluator {
    MaxPairwise(BaseMetric),
    SumPairwise(BaseMetric),
    Discrete,
    Custom(Arc<CustomEval>),
}

/// A generalized metric of order `l` on real vectors.
#[derive(Clone)]
pub struct GMetric {
    order: usize,
    name: String,
    eval: Evaluator,
    hint: FactorizationHint,
}

impl fmt::Debug for GMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GMetric")
            .field("name", &self.name)
            .field("order", &self.order)
            .field("hint", &self.hint)
            .finish()
    }
}

/// Stack buffer for evaluator arguments; orders up to 7 never allocate.
pub(crate) type Args<'a> = SmallVec<[&'a Point; 8]>;

impl GMetric {
    pub fn max_pairwise(base: BaseMetric, order: usize) -> Result<Self> {
        check_order(order)?;
        Ok(GMetric {
            order,
            name: format!("max-pairwise/{}", base_name(base)),
            eval: Evaluator::MaxPairwise(base),
            hint: FactorizationHint::None,
        })
    }

    pub fn sum_pairwise(base: BaseMetric, order: usize) -> Result<Self> {
        check_order(order)?;
        Ok(GMetric {
            order,
            name: format!("sum-pairwise/{}", base_name(base)),
            eval: Evaluator::SumPairwise(base),
            hint: FactorizationHint::None,
        })
    }

    pub fn discrete(order: usize) -> Result<Self> {
        check_order(order)?;
        Ok(GMetric {
            order,
            name: "discrete".to_string(),
            eval: Evaluator::Discrete,
            hint: FactorizationHint::PerIndexBall,
        })
    }

    /// Wraps an arbitrary callback. Nothing about it is assumed; run
    /// [`crate::axioms::check_axioms`] before trusting it.
    pub fn custom<F>(name: impl Into<String>, order: usize, hint: FactorizationHint, f: F) -> Result<Self>
    where
        F: Fn(&[&Point]) -> f64 + Send + Sync + 'static,
    {
        check_order(order)?;
        Ok(GMetric { order, name: name.into(), eval: Evaluator::Custom(Arc::new(f)), hint })
    }

    pub fn from_spec(spec: &MetricSpec) -> Result<Self> {
        let base =
            || spec.base.ok_or_else(|| Error::InvalidParam(format!("{:?} metric needs a base metric", spec.kind)));
        match spec.kind {
            GMetricKind::MaxPairwise => GMetric::max_pairwise(base()?, spec.order),
            GMetricKind::SumPairwise => GMetric::sum_pairwise(base()?, spec.order),
            GMetricKind::Discrete => GMetric::discrete(spec.order),
            GMetricKind::Custom => Err(Error::InvalidParam("custom metrics have no spec form".into())),
        }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn arity(&self) -> usize {
        self.order + 1
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn factorization_hint(&self) -> FactorizationHint {
        self.hint
    }

    pub fn kind(&self) -> GMetricKind {
        match self.eval {
            Evaluator::MaxPairwise(_) => GMetricKind::MaxPairwise,
            Evaluator::SumPairwise(_) => GMetricKind::SumPairwise,
            Evaluator::Discrete => GMetricKind::Discrete,
            Evaluator::Custom(_) => GMetricKind::Custom,
        }
    }

    pub fn base(&self) -> Option<BaseMetric> {
        match self.eval {
            Evaluator::MaxPairwise(b) | Evaluator::SumPairwise(b) => Some(b),
            _ => None,
        }
    }

    /// `None` for custom metrics.
    pub fn spec(&self) -> Option<MetricSpec> {
        match self.kind() {
            GMetricKind::Custom => None,
            kind => Some(MetricSpec { kind, base: self.base(), order: self.order }),
        }
    }

    /// Checks arity and dimensional consistency, then evaluates.
    pub fn evaluate(&self, pts: &[&Point]) -> Result<f64> {
        if pts.len() != self.arity() {
            return Err(Error::Arity { expected: self.arity(), found: pts.len() });
        }
        let dim = pts[0].dim();
        if let Some(p) = pts.iter().find(|p| p.dim() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, found: p.dim() });
        }
        if let Some(b) = self.base() {
            b.check_dim(dim)?;
        }
        Ok(self.eval_unchecked(pts))
    }

    /// Owned-argument convenience over [`GMetric::evaluate`].
    pub fn evaluate_points(&self, pts: &[Point]) -> Result<f64> {
        let args: Args<'_> = pts.iter().collect();
        self.evaluate(&args)
    }

    /// Checks a space dimension against the base metric once, so the hot
    /// loops can use [`GMetric::eval_unchecked`].
    pub fn check_space_dim(&self, dim: usize) -> Result<()> {
        match self.base() {
            Some(b) => b.check_dim(dim),
            None if dim == 0 => Err(Error::EmptyPoint),
            None => Ok(()),
        }
    }

    #[inline]
    pub(crate) fn eval_unchecked(&self, pts: &[&Point]) -> f64 {
        match &self.eval {
            Evaluator::MaxPairwise(b) => {
                let mut best = 0.0_f64;
                for i in 0..pts.len() {
                    for j in i + 1..pts.len() {
                        best = best.max(b.distance_unchecked(pts[i], pts[j]));
                    }
                }
                best
            }
            Evaluator::SumPairwise(b) => {
                let mut ds: SmallVec<[f64; 28]> = SmallVec::new();
                for i in 0..pts.len() {
                    for j in i + 1..pts.len() {
                        ds.push(b.distance_unchecked(pts[i], pts[j]));
                    }
                }
                ds.sort_unstable_by(f64::total_cmp);
                ds.iter().sum()
            }
            Evaluator::Discrete => {
                if pts.iter().all(|p| p.coords() == pts[0].coords()) {
                    0.0
                } else {
                    1.0
                }
            }
            Evaluator::Custom(f) => f(pts),
        }
    }

    /// `g(centre, p, ..., p)`: the singleton distance used for ball
    /// conditions around `centre`.
    pub(crate) fn singleton(&self, centre: &Point, p: &Point) -> f64 {
        let mut args: Args<'_> = SmallVec::with_capacity(self.arity());
        args.push(centre);
        args.extend(std::iter::repeat_n(p, self.order));
        self.eval_unchecked(&args)
    }
}

fn check_order(order: usize) -> Result<()> {
    if order == 0 {
        Err(Error::InvalidOrder)
    } else {
        Ok(())
    }
}

fn base_name(b: BaseMetric) -> &'static str {
    match b {
        BaseMetric::Absolute => "abs",
        BaseMetric::Euclidean => "euclid",
        BaseMetric::MaxCoordinate => "maxcoord",
    }
}
