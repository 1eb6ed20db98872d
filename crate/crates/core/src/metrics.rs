//! Per-iteration diagnostics, running averages and the rate-envelope fit.

use serde::Serialize;
use thiserror::Error;

use crate::point::Point;
use crate::problem::{feasibility_violation, global_objective, ConstrainedProblem};
use crate::solver::{Observation, Observer, SolverError};

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("reference point has zero norm; use the absolute criterion")]
    ZeroReference,
    #[error("no points given")]
    NoPoints,
    #[error("running-average weight must be positive, got {0}")]
    NonPositiveWeight(f64),
    #[error("envelope fit needs t_min >= 10, got {0}")]
    TMinTooSmall(u64),
    #[error("envelope fit needs records beyond t = {needed}, last is {last:?}")]
    TooFewRecords { needed: u64, last: Option<u64> },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MetricsRecord {
    pub t: u64,
    pub alpha: f64,
    pub criterion: f64,
    pub consensus_error: f64,
    /// Global constraint violation of the agents' mean iterate.
    pub feasibility: f64,
    /// `f(running average of agent 0) - f*`.
    pub objective_gap: f64,
}

/// `(1/N) sum_i |x_i - x*| / |x*|`
pub fn criterion(xs: &[Point], x_star: &Point) -> Result<f64, MetricsError> {
    let scale = x_star.norm();
    if scale == 0.0 {
        return Err(MetricsError::ZeroReference);
    }
    Ok(criterion_absolute(xs, x_star)? / scale)
}

/// `(1/N) sum_i |x_i - x*|`
pub fn criterion_absolute(xs: &[Point], x_star: &Point) -> Result<f64, MetricsError> {
    if xs.is_empty() {
        return Err(MetricsError::NoPoints);
    }
    Ok(xs.iter().map(|x| x.distance(x_star)).sum::<f64>() / xs.len() as f64)
}

/// `max_i |x_i - mean(x)|`
pub fn consensus_error(xs: &[Point]) -> f64 {
    let Some(mean) = Point::mean(xs) else {
        return 0.0;
    };
    xs.iter().map(|x| x.distance(&mean)).fold(0.0, f64::max)
}

/// Stationary row vector `pi` of a row-stochastic matrix (`pi A = pi`),
/// by power iteration. Meaningful for a fixed primitive `A`.
pub fn stationary_weights(a: &[Vec<f64>], iterations: usize) -> Vec<f64> {
    let n = a.len();
    let mut pi = vec![1.0 / n as f64; n];
    for _ in 0..iterations {
        let mut next = vec![0.0; n];
        for (i, row) in a.iter().enumerate() {
            for (j, w) in row.iter().enumerate() {
                next[j] += pi[i] * w;
            }
        }
        let total: f64 = next.iter().sum();
        let delta: f64 = next
            .iter()
            .zip(&pi)
            .map(|(a, b)| (a / total - b).abs())
            .sum();
        pi = next.into_iter().map(|v| v / total).collect();
        if delta < 1e-15 {
            break;
        }
    }
    pi
}

/// `max_i |x_i - sum_j pi_j x_j|`
pub fn weighted_consensus_error(xs: &[Point], pi: &[f64]) -> f64 {
    let Some(first) = xs.first() else {
        return 0.0;
    };
    let mut center = Point::zeros(first.dim());
    for (x, &w) in xs.iter().zip(pi) {
        center.axpy(w, x);
    }
    xs.iter().map(|x| x.distance(&center)).fold(0.0, f64::max)
}

/// Step-weighted averages `sum_k alpha(k) x_i(k) / sum_k alpha(k)`.
#[derive(Clone, Debug, PartialEq)]
pub struct RunningAverages {
    weight_sum: f64,
    weighted_x: Vec<Point>,
}

impl RunningAverages {
    pub fn new(n_agents: usize, dim: usize) -> Self {
        RunningAverages {
            weight_sum: 0.0,
            weighted_x: vec![Point::zeros(dim); n_agents],
        }
    }

    pub fn update(&mut self, alpha: f64, xs: &[Point]) -> Result<(), MetricsError> {
        if alpha.is_nan() || alpha <= 0.0 {
            return Err(MetricsError::NonPositiveWeight(alpha));
        }
        self.weight_sum += alpha;
        for (acc, x) in self.weighted_x.iter_mut().zip(xs) {
            acc.axpy(alpha, x);
        }
        Ok(())
    }

    pub fn weight_sum(&self) -> f64 {
        self.weight_sum
    }

    /// `None` before the first update.
    pub fn average(&self, agent: usize) -> Option<Point> {
        (self.weight_sum > 0.0).then(|| self.weighted_x[agent].scaled(1.0 / self.weight_sum))
    }
}

pub fn update_running_average(
    mut ra: RunningAverages,
    alpha_t: f64,
    xs: &[Point],
) -> Result<RunningAverages, MetricsError> {
    ra.update(alpha_t, xs)?;
    Ok(ra)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EnvelopeFit {
    pub t_min: u64,
    /// `max_{t >= t_min} criterion(t) sqrt(t) / ln t`
    pub c_hat: f64,
    /// Records at `t >= 2 t_min` above `2 c_hat ln t / sqrt t`.
    pub violations: u64,
}

/// Fits the `C ln t / sqrt t` envelope to the criterion sequence.
pub fn rate_envelope_fit(records: &[MetricsRecord], t_min: u64) -> Result<EnvelopeFit, MetricsError> {
    if t_min < 10 {
        return Err(MetricsError::TMinTooSmall(t_min));
    }
    let last = records.iter().map(|r| r.t).max();
    if last.is_none_or(|l| l < 2 * t_min) {
        return Err(MetricsError::TooFewRecords {
            needed: 2 * t_min,
            last,
        });
    }
    let shape = |t: u64| (t as f64).ln() / (t as f64).sqrt();
    let c_hat = records
        .iter()
        .filter(|r| r.t >= t_min)
        .map(|r| r.criterion / shape(r.t))
        .fold(0.0, f64::max);
    let violations = records
        .iter()
        .filter(|r| r.t >= 2 * t_min && r.criterion > 2.0 * c_hat * shape(r.t))
        .count() as u64;
    Ok(EnvelopeFit {
        t_min,
        c_hat,
        violations,
    })
}

/// Fraction of consecutive pairs in the last `tail` share of `records`
/// where the criterion went up.
pub fn trailing_uptick_fraction(records: &[MetricsRecord], tail: f64) -> f64 {
    let start = ((records.len() as f64) * (1.0 - tail)).floor() as usize;
    let window = &records[start.min(records.len())..];
    if window.len() < 2 {
        return 0.0;
    }
    let ups = window
        .windows(2)
        .filter(|w| w[1].criterion > w[0].criterion)
        .count();
    ups as f64 / (window.len() - 1) as f64
}

/// Reference solution for the criterion and the objective gap.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Reference {
    pub x_star: Point,
    pub f_star: f64,
}

impl Reference {
    pub fn from_point(p: &ConstrainedProblem, x_star: Point) -> Self {
        Reference {
            f_star: global_objective(p, &x_star),
            x_star,
        }
    }
}

/// Observer producing one [`MetricsRecord`] per iteration.
pub struct MetricsCollector<'a> {
    problem: &'a ConstrainedProblem,
    reference: Reference,
    averages: RunningAverages,
    relative: bool,
    pub records: Vec<MetricsRecord>,
}

impl<'a> MetricsCollector<'a> {
    /// Falls back to the absolute criterion when `|x*| = 0`.
    pub fn new(problem: &'a ConstrainedProblem, reference: Reference) -> Self {
        MetricsCollector {
            relative: reference.x_star.norm() > 0.0,
            averages: RunningAverages::new(problem.n_agents(), problem.dim()),
            problem,
            reference,
            records: Vec::new(),
        }
    }

    pub fn is_relative(&self) -> bool {
        self.relative
    }

    pub fn averages(&self) -> &RunningAverages {
        &self.averages
    }

    pub fn reference(&self) -> &Reference {
        &self.reference
    }

    pub fn record(&mut self, t: u64, alpha: f64, xs: &[Point]) -> Result<MetricsRecord, MetricsError> {
        self.averages.update(alpha, xs)?;
        let criterion = if self.relative {
            criterion(xs, &self.reference.x_star)?
        } else {
            criterion_absolute(xs, &self.reference.x_star)?
        };
        let mean = Point::mean(xs).ok_or(MetricsError::NoPoints)?;
        let avg0 = self.averages.average(0).expect("updated above");
        let record = MetricsRecord {
            t,
            alpha,
            criterion,
            consensus_error: consensus_error(xs),
            feasibility: feasibility_violation(self.problem, &mean),
            objective_gap: global_objective(self.problem, &avg0) - self.reference.f_star,
        };
        self.records.push(record);
        Ok(record)
    }
}

impl Observer for MetricsCollector<'_> {
    fn observe(&mut self, obs: &Observation<'_>) -> Result<(), SolverError> {
        self.record(obs.state.t(), obs.alpha, obs.state.x())
            .map(|_| ())
            .map_err(|e| SolverError::Config(e.to_string()))
    }
}
