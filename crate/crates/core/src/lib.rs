//! Statistical convergence in generalized metric spaces, checked on finite
//! prefixes.
//!
//! * [`gmetric`] and [`axioms`]: g-metrics of order `l` and randomized
//!   checks of their axioms and basic inequalities.
//! * [`density`]: l-dimensional asymptotic density of index-tuple sets with
//!   exact, closed-form and Monte Carlo backends.
//! * [`statconv`]: finite-prefix verdicts on statistical convergence,
//!   statistical Cauchyness, dense subsequences and the modified-sequence
//!   construction.
//! * [`generate`] and [`io`]: fixture sequences and plain-text files.
//! * [`harness`]: randomized implication checks over generated cases.

pub mod axioms;
pub mod combinatorics;
pub mod density;
pub mod error;
pub mod generate;
pub mod gmetric;
pub mod harness;
pub mod io;
pub mod point;
pub mod seed;
pub mod sequence;
pub mod statconv;

pub use error::{Error, Result};
pub use gmetric::{FactorizationHint, GMetric, GMetricKind, MetricSpec};
pub use point::{BaseMetric, Point};
pub use sequence::SequencePrefix;
