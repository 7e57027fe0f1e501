//! Points of a finite-dimensional real space and the ordinary metrics used
//! as building blocks for generalized metrics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point with finite real coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Point(Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::EmptyPoint);
        }
        if let Some((index, &value)) = coords.iter().enumerate().find(|(_, c)| !c.is_finite()) {
            return Err(Error::NonFinite { index, value });
        }
        Ok(Point(coords))
    }

    /// One-dimensional point. Panics on a non-finite value.
    pub fn scalar(value: f64) -> Self {
        Point::new(vec![value]).expect("finite scalar")
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.0
    }
}

impl TryFrom<Vec<f64>> for Point {
    type Error = Error;

    fn try_from(coords: Vec<f64>) -> Result<Self> {
        Point::new(coords)
    }
}

impl From<Point> for Vec<f64> {
    fn from(p: Point) -> Self {
        p.0
    }
}

/// An ordinary metric on real vectors.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaseMetric {
    /// `|x - y|` on the real line.
    Absolute,
    Euclidean,
    /// Chebyshev distance, the largest coordinate difference.
    MaxCoordinate,
}

impl BaseMetric {
    /// Checks that `dim` is admissible: `Absolute` only lives in dimension 1.
    pub fn check_dim(self, dim: usize) -> Result<()> {
        match self {
            BaseMetric::Absolute if dim != 1 => Err(Error::DimensionMismatch { expected: 1, found: dim }),
            _ if dim == 0 => Err(Error::EmptyPoint),
            _ => Ok(()),
        }
    }

    pub fn distance(self, a: &Point, b: &Point) -> Result<f64> {
        if a.dim() != b.dim() {
            return Err(Error::DimensionMismatch { expected: a.dim(), found: b.dim() });
        }
        self.check_dim(a.dim())?;
        Ok(self.distance_unchecked(a, b))
    }

    /// Distance without dimension checks. Symmetric bit-for-bit.
    #[inline]
    pub(crate) fn distance_unchecked(self, a: &Point, b: &Point) -> f64 {
        let (a, b) = (a.coords(), b.coords());
        match self {
            BaseMetric::Absolute => (a[0] - b[0]).abs(),
            BaseMetric::Euclidean => a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt(),
            BaseMetric::MaxCoordinate => a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max),
        }
    }
}
