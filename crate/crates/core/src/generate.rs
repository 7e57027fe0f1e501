//! Fixture sequences.
//!
//! The flagship fixture is [`GeneratorSpec::SquareSpike`]: `x_k = k` at
//! perfect squares and 0 elsewhere. It is unbounded, hence not convergent,
//! yet statistically convergent to 0 because the squares have density zero.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::point::Point;
use crate::seed::rng_for;
use crate::sequence::SequencePrefix;

/// A set of positive integers, named or explicit.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IndexSet {
    All,
    Evens,
    Odds,
    Squares,
    Cubes,
    PowersOfTwo,
    Explicit(BTreeSet<usize>),
}

pub fn is_square(i: usize) -> bool {
    let r = i.isqrt();
    r * r == i
}

pub fn is_cube(i: usize) -> bool {
    let r = (i as f64).cbrt().round() as usize;
    (r.saturating_sub(1)..=r + 1).any(|k| k.checked_pow(3) == Some(i))
}

impl IndexSet {
    pub fn contains(&self, i: usize) -> bool {
        if i == 0 {
            return false;
        }
        match self {
            IndexSet::All => true,
            IndexSet::Evens => i.is_multiple_of(2),
            IndexSet::Odds => i % 2 == 1,
            IndexSet::Squares => is_square(i),
            IndexSet::Cubes => is_cube(i),
            IndexSet::PowersOfTwo => i.is_power_of_two(),
            IndexSet::Explicit(s) => s.contains(&i),
        }
    }

    pub fn members_up_to(&self, n: usize) -> Vec<usize> {
        match self {
            IndexSet::Explicit(s) => s.range(1..=n).copied().collect(),
            _ => (1..=n).filter(|&i| self.contains(i)).collect(),
        }
    }

    /// Named sets: `all`, `evens`, `odds`, `squares`, `cubes`, `powers-of-two`.
    pub fn named(name: &str) -> Result<Self> {
        Ok(match name {
            "all" => IndexSet::All,
            "evens" => IndexSet::Evens,
            "odds" => IndexSet::Odds,
            "squares" => IndexSet::Squares,
            "cubes" => IndexSet::Cubes,
            "powers-of-two" => IndexSet::PowersOfTwo,
            other => return Err(Error::InvalidParam(format!("unknown index set `{other}`"))),
        })
    }
}

/// Recipe for a fixture sequence of length `n`. Vector parameters share the
/// sequence dimension.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum GeneratorSpec {
    /// `x_k = k` if `k` is a perfect square, else 0.
    SquareSpike {
        n: usize,
    },
    /// `x_k = spike` for `k` in `set`, else `base`.
    SpikeOnSet {
        set: IndexSet,
        base: Vec<f64>,
        spike: Vec<f64>,
        n: usize,
    },
    /// `x_k = limit + amplitude * ratio^k`, `|ratio| < 1`.
    ConvergentGeometric {
        limit: Vec<f64>,
        amplitude: Vec<f64>,
        ratio: f64,
        n: usize,
    },
    Constant {
        value: Vec<f64>,
        n: usize,
    },
    /// `a` at odd `k`, `b` at even `k`.
    Alternating {
        a: Vec<f64>,
        b: Vec<f64>,
        n: usize,
    },
    /// Starts at `start`, steps uniform in `[-step, step]` per coordinate.
    RandomWalk {
        start: Vec<f64>,
        step: f64,
        seed: u64,
        n: usize,
    },
    /// `x_k = offset + k * slope`.
    DivergentLinear {
        offset: Vec<f64>,
        slope: Vec<f64>,
        n: usize,
    },
}

impl GeneratorSpec {
    pub fn len(&self) -> usize {
        match *self {
            GeneratorSpec::SquareSpike { n }
            | GeneratorSpec::SpikeOnSet { n, .. }
            | GeneratorSpec::ConvergentGeometric { n, .. }
            | GeneratorSpec::Constant { n, .. }
            | GeneratorSpec::Alternating { n, .. }
            | GeneratorSpec::RandomWalk { n, .. }
            | GeneratorSpec::DivergentLinear { n, .. } => n,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            GeneratorSpec::SquareSpike { .. } => "square-spike",
            GeneratorSpec::SpikeOnSet { .. } => "spike-on-set",
            GeneratorSpec::ConvergentGeometric { .. } => "convergent-geometric",
            GeneratorSpec::Constant { .. } => "constant",
            GeneratorSpec::Alternating { .. } => "alternating",
            GeneratorSpec::RandomWalk { .. } => "random-walk",
            GeneratorSpec::DivergentLinear { .. } => "divergent-linear",
        }
    }
}

fn same_dim(vs: &[&[f64]]) -> Result<usize> {
    let d = vs[0].len();
    if d == 0 {
        return Err(Error::EmptyPoint);
    }
    match vs.iter().find(|v| v.len() != d) {
        Some(v) => Err(Error::DimensionMismatch { expected: d, found: v.len() }),
        None => Ok(d),
    }
}

fn affine(base: &[f64], dir: &[f64], t: f64) -> Result<Point> {
    Point::new(base.iter().zip(dir).map(|(b, d)| b + t * d).collect())
}

/// Deterministic for a fixed spec, seed included.
pub fn generate(spec: &GeneratorSpec) -> Result<SequencePrefix> {
    let n = spec.len();
    if n == 0 {
        return Err(Error::InvalidParam("sequence length must be at least 1".into()));
    }
    let points: Vec<Point> = match spec {
        GeneratorSpec::SquareSpike { .. } => {
            (1..=n).map(|k| Point::new(vec![if is_square(k) { k as f64 } else { 0.0 }])).collect::<Result<_>>()?
        }
        GeneratorSpec::SpikeOnSet { set, base, spike, .. } => {
            same_dim(&[base, spike])?;
            let (b, s) = (Point::new(base.clone())?, Point::new(spike.clone())?);
            (1..=n).map(|k| if set.contains(k) { s.clone() } else { b.clone() }).collect()
        }
        GeneratorSpec::ConvergentGeometric { limit, amplitude, ratio, .. } => {
            same_dim(&[limit, amplitude])?;
            if ratio.abs() >= 1.0 || ratio.is_nan() {
                return Err(Error::InvalidParam(format!("ratio {ratio} must satisfy |ratio| < 1")));
            }
            (1..=n).map(|k| affine(limit, amplitude, ratio.powi(k as i32))).collect::<Result<_>>()?
        }
        GeneratorSpec::Constant { value, .. } => vec![Point::new(value.clone())?; n],
        GeneratorSpec::Alternating { a, b, .. } => {
            same_dim(&[a, b])?;
            let (a, b) = (Point::new(a.clone())?, Point::new(b.clone())?);
            (1..=n).map(|k| if k % 2 == 1 { a.clone() } else { b.clone() }).collect()
        }
        GeneratorSpec::RandomWalk { start, step, seed, .. } => {
            if !(step.is_finite() && *step >= 0.0) {
                return Err(Error::InvalidParam(format!("step {step} must be finite and nonnegative")));
            }
            let mut rng = rng_for(*seed, &[]);
            let mut cur = Point::new(start.clone())?.into_coords();
            let mut out = Vec::with_capacity(n);
            for _ in 0..n {
                out.push(Point::new(cur.clone())?);
                for c in cur.iter_mut() {
                    *c += if *step > 0.0 { rng.gen_range(-step..=*step) } else { 0.0 };
                }
            }
            out
        }
        GeneratorSpec::DivergentLinear { offset, slope, .. } => {
            same_dim(&[offset, slope])?;
            (1..=n).map(|k| affine(offset, slope, k as f64)).collect::<Result<_>>()?
        }
    };
    SequencePrefix::new(points)
}

impl fmt::Display for GeneratorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn v(x: &[f64]) -> String {
            x.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(";")
        }
        fn set(s: &IndexSet) -> String {
            match s {
                IndexSet::All => "all".into(),
                IndexSet::Evens => "evens".into(),
                IndexSet::Odds => "odds".into(),
                IndexSet::Squares => "squares".into(),
                IndexSet::Cubes => "cubes".into(),
                IndexSet::PowersOfTwo => "powers-of-two".into(),
                IndexSet::Explicit(s) => s.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(";"),
            }
        }
        write!(f, "{}:", self.kind_name())?;
        match self {
            GeneratorSpec::SquareSpike { n } => write!(f, "n={n}"),
            GeneratorSpec::SpikeOnSet { set: s, base, spike, n } => {
                write!(f, "set={},base={},spike={},n={n}", set(s), v(base), v(spike))
            }
            GeneratorSpec::ConvergentGeometric { limit, amplitude, ratio, n } => {
                write!(f, "limit={},amplitude={},ratio={ratio},n={n}", v(limit), v(amplitude))
            }
            GeneratorSpec::Constant { value, n } => write!(f, "value={},n={n}", v(value)),
            GeneratorSpec::Alternating { a, b, n } => write!(f, "a={},b={},n={n}", v(a), v(b)),
            GeneratorSpec::RandomWalk { start, step, seed, n } => {
                write!(f, "start={},step={step},seed={seed},n={n}", v(start))
            }
            GeneratorSpec::DivergentLinear { offset, slope, n } => {
                write!(f, "offset={},slope={},n={n}", v(offset), v(slope))
            }
        }
    }
}

/// Parses `kind:key=value,...`. Vector components are separated by `;`,
/// an explicit index set is a `;`-separated list of integers.
///
/// ```
/// use gstat::generate::GeneratorSpec;
/// let s: GeneratorSpec = "spike-on-set:set=evens,base=0,spike=1,n=4".parse().unwrap();
/// assert_eq!(s.len(), 4);
/// ```
impl FromStr for GeneratorSpec {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let bad = |msg: String| Error::InvalidParam(format!("generator `{text}`: {msg}"));
        let (kind, rest) = text.split_once(':').unwrap_or((text, ""));
        let mut fields = std::collections::BTreeMap::new();
        for part in rest.split(',').filter(|p| !p.is_empty()) {
            let (k, v) = part.split_once('=').ok_or_else(|| bad(format!("`{part}` is not key=value")))?;
            fields.insert(k.trim().to_string(), v.trim().to_string());
        }
        let mut take = |key: &str| fields.remove(key).ok_or_else(|| bad(format!("missing `{key}`")));
        let num = |s: String| s.parse::<f64>().map_err(|_| bad(format!("`{s}` is not a number")));
        let vec = |s: String| s.split(';').map(|c| num(c.to_string())).collect::<Result<Vec<f64>>>();
        let int = |s: String| s.parse::<u64>().map_err(|_| bad(format!("`{s}` is not an integer")));

        let n = int(take("n")?)? as usize;
        let spec = match kind {
            "square-spike" => GeneratorSpec::SquareSpike { n },
            "spike-on-set" => {
                let s = take("set")?;
                let set = if s.chars().next().is_some_and(|c| c.is_ascii_digit()) {
                    IndexSet::Explicit(
                        s.split(';').map(|i| int(i.to_string()).map(|i| i as usize)).collect::<Result<_>>()?,
                    )
                } else {
                    IndexSet::named(&s)?
                };
                GeneratorSpec::SpikeOnSet { set, base: vec(take("base")?)?, spike: vec(take("spike")?)?, n }
            }
            "convergent-geometric" => GeneratorSpec::ConvergentGeometric {
                limit: vec(take("limit")?)?,
                amplitude: vec(take("amplitude")?)?,
                ratio: num(take("ratio")?)?,
                n,
            },
            "constant" => GeneratorSpec::Constant { value: vec(take("value")?)?, n },
            "alternating" => GeneratorSpec::Alternating { a: vec(take("a")?)?, b: vec(take("b")?)?, n },
            "random-walk" => GeneratorSpec::RandomWalk {
                start: vec(take("start")?)?,
                step: num(take("step")?)?,
                seed: int(take("seed")?)?,
                n,
            },
            "divergent-linear" => {
                GeneratorSpec::DivergentLinear { offset: vec(take("offset")?)?, slope: vec(take("slope")?)?, n }
            }
            other => return Err(bad(format!("unknown kind `{other}`"))),
        };
        if let Some(k) = fields.keys().next() {
            return Err(bad(format!("unexpected key `{k}`")));
        }
        Ok(spec)
    }
}
