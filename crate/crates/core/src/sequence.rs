use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::point::Point;

/// Finite prefix `x_1, ..., x_N` of a sequence of points of one dimension.
///
/// Indexing is 1-based throughout the crate, matching index tuples.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Point>", into = "Vec<Point>")]
pub struct SequencePrefix {
    points: Vec<Point>,
}

impl SequencePrefix {
    pub fn new(points: Vec<Point>) -> Result<Self> {
        let first = points.first().ok_or(Error::EmptySequence)?;
        let dim = first.dim();
        if let Some(p) = points.iter().find(|p| p.dim() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, found: p.dim() });
        }
        Ok(SequencePrefix { points })
    }

    pub fn from_scalars(values: impl IntoIterator<Item = f64>) -> Result<Self> {
        let points = values.into_iter().map(|v| Point::new(vec![v])).collect::<Result<Vec<_>>>()?;
        SequencePrefix::new(points)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points[0].dim()
    }

    /// The term `x_i`, `1 <= i <= N`.
    pub fn get(&self, i: usize) -> &Point {
        &self.points[i - 1]
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    /// Terms at the given 1-based indices, in order.
    pub fn subsequence(&self, indices: &[usize]) -> Result<SequencePrefix> {
        if let Some(&bad) = indices.iter().find(|&&i| i == 0 || i > self.len()) {
            return Err(Error::InvalidParam(format!("index {bad} outside 1..={}", self.len())));
        }
        SequencePrefix::new(indices.iter().map(|&i| self.get(i).clone()).collect())
    }
}

impl TryFrom<Vec<Point>> for SequencePrefix {
    type Error = Error;
    fn try_from(points: Vec<Point>) -> Result<Self> {
        SequencePrefix::new(points)
    }
}

impl From<SequencePrefix> for Vec<Point> {
    fn from(s: SequencePrefix) -> Self {
        s.points
    }
}
