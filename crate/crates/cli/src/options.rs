//! Conversions from command-line values to library types.

use gstat::density::{check_grid, geometric_grid, Estimator, EstimatorPolicy};
use gstat::generate::{generate, GeneratorSpec};
use gstat::io::load_sequence;
use gstat::{BaseMetric, FactorizationHint, GMetric, Point, SequencePrefix};

use crate::args::{BaseArg, EstimationArgs, EstimatorArg, InputArgs, MetricArg, MetricArgs};
use crate::error::{CliError, CliResult};

/// Integer count written plainly or in scientific notation (`1e8`).
pub fn parse_count(text: &str) -> CliResult<u128> {
    let t = text.trim().replace('_', "");
    if let Ok(v) = t.parse::<u128>() {
        return Ok(v);
    }
    match t.parse::<f64>() {
        Ok(v) if v >= 0.0 && v.fract() == 0.0 && v < 3.4e38 => Ok(v as u128),
        _ => Err(CliError::Usage(format!("`{text}` is not a non-negative integer count"))),
    }
}

/// `start:stop:log` (doubling), `start:stop:logK` (K points per octave) or
/// an increasing comma list.
pub fn parse_grid(text: &str) -> CliResult<Vec<usize>> {
    let bad = || CliError::Usage(format!("bad grid `{text}`"));
    let parts: Vec<&str> = text.split(':').collect();
    let grid = match parts.as_slice() {
        [start, stop, mode] => {
            let start: usize = start.trim().parse().map_err(|_| bad())?;
            let stop: usize = stop.trim().parse().map_err(|_| bad())?;
            let per_octave = match mode.trim().strip_prefix("log") {
                Some("") => 1,
                Some(k) => k.parse().map_err(|_| bad())?,
                None => return Err(bad()),
            };
            geometric_grid(start, stop, per_octave)?
        }
        [list] => list.split(',').map(|v| v.trim().parse::<usize>().map_err(|_| bad())).collect::<CliResult<_>>()?,
        _ => return Err(bad()),
    };
    check_grid(&grid)?;
    Ok(grid)
}

pub fn parse_point(text: &str) -> CliResult<Point> {
    let coords = text
        .split(',')
        .map(|c| c.trim().parse::<f64>().map_err(|_| CliError::Usage(format!("bad point `{text}`"))))
        .collect::<CliResult<Vec<f64>>>()?;
    Ok(Point::new(coords)?)
}

/// `None` for `auto`.
pub fn parse_limit(text: &str) -> CliResult<Option<Point>> {
    if text.trim().eq_ignore_ascii_case("auto") {
        Ok(None)
    } else {
        parse_point(text).map(Some)
    }
}

pub fn load_input(input: &InputArgs) -> CliResult<SequencePrefix> {
    match (&input.input, &input.generator) {
        (Some(path), _) => Ok(load_sequence(path)?),
        (None, Some(spec)) => Ok(generate(&spec.parse::<GeneratorSpec>()?)?),
        (None, None) => Err(CliError::Usage("one of --input or --generator is required".into())),
    }
}

pub fn base_metric(arg: Option<BaseArg>, dim: usize) -> BaseMetric {
    match arg {
        Some(BaseArg::Abs) => BaseMetric::Absolute,
        Some(BaseArg::Euclid) => BaseMetric::Euclidean,
        Some(BaseArg::Maxcoord) => BaseMetric::MaxCoordinate,
        None if dim == 1 => BaseMetric::Absolute,
        None => BaseMetric::Euclidean,
    }
}

pub fn build_metric(m: &MetricArgs, dim: usize) -> CliResult<GMetric> {
    let base = base_metric(m.base, dim);
    let g = match m.metric {
        MetricArg::MaxPairwise => GMetric::max_pairwise(base, m.order)?,
        MetricArg::SumPairwise => GMetric::sum_pairwise(base, m.order)?,
        MetricArg::Discrete => GMetric::discrete(m.order)?,
        MetricArg::FirstPair => {
            GMetric::custom("first-pair", m.order, FactorizationHint::None, move |p: &[&Point]| {
                base.distance(p[0], p[1]).unwrap_or(f64::NAN)
            })?
        }
    };
    g.check_space_dim(dim)?;
    Ok(g)
}

pub fn estimator(arg: EstimatorArg) -> Estimator {
    match arg {
        EstimatorArg::Auto => Estimator::Auto,
        EstimatorArg::Exact => Estimator::Exact,
        EstimatorArg::Factorized => Estimator::Factorized,
        EstimatorArg::Mc => Estimator::MonteCarlo,
    }
}

pub fn policy(e: &EstimationArgs, seed: u64) -> CliResult<EstimatorPolicy> {
    let samples = parse_count(&e.samples)?;
    let samples = u64::try_from(samples).map_err(|_| CliError::Usage("--samples is too large".into()))?;
    Ok(EstimatorPolicy { estimator: estimator(e.estimator), budget: parse_count(&e.budget)?, samples, seed })
}

pub fn check_eps(eps: &[f64]) -> CliResult<()> {
    if eps.is_empty() || eps.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
        return Err(CliError::Usage("--eps values must be positive".into()));
    }
    Ok(())
}
