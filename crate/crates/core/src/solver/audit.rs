//! Runtime checks of the iteration's invariants, packaged as observers.

use super::{descent_certificate, Observation, Observer, SolverError};
use crate::point::Point;

/// Tolerance for the Polyak descent certificate.
pub const CERTIFICATE_TOLERANCE: f64 = 1e-9;

/// Checks the Polyak descent inequality for every agent and round against
/// a fixed feasible `z`.
#[derive(Clone, Debug)]
pub struct CertificateAudit {
    z: Point,
    pub checked: u64,
    pub violations: u64,
    pub min_slack: f64,
    /// First failing `(t, agent, slack)`.
    pub first_violation: Option<(u64, usize, f64)>,
}

impl CertificateAudit {
    pub fn new(z: Point) -> Self {
        CertificateAudit {
            z,
            checked: 0,
            violations: 0,
            min_slack: f64::INFINITY,
            first_violation: None,
        }
    }
}

impl Observer for CertificateAudit {
    fn observe(&mut self, obs: &Observation<'_>) -> Result<(), SolverError> {
        let Some(trace) = obs.trace else {
            return Ok(());
        };
        for (i, a) in trace.agents.iter().enumerate() {
            let slack = descent_certificate(&a.v, &a.x_next, &self.z, a.gplus, &a.d, trace.beta);
            self.checked += 1;
            self.min_slack = self.min_slack.min(slack);
            if slack < -CERTIFICATE_TOLERANCE {
                self.violations += 1;
                self.first_violation.get_or_insert((trace.t, i, slack));
            }
        }
        Ok(())
    }

    fn wants_trace(&self) -> bool {
        true
    }
}

/// Counts how often the correction lowers `g^+` on rounds where the
/// constraint was violated.
#[derive(Clone, Debug, Default)]
pub struct PolyakAudit {
    pub active: u64,
    pub decreased: u64,
}

impl PolyakAudit {
    /// Fraction of violated agent-rounds whose `g^+` dropped; 1 if none.
    pub fn decrease_fraction(&self) -> f64 {
        if self.active == 0 {
            1.0
        } else {
            self.decreased as f64 / self.active as f64
        }
    }
}

impl Observer for PolyakAudit {
    fn observe(&mut self, obs: &Observation<'_>) -> Result<(), SolverError> {
        if let Some(trace) = obs.trace {
            for a in trace.agents.iter().filter(|a| a.gplus > 0.0) {
                self.active += 1;
                if a.gplus_after < a.gplus {
                    self.decreased += 1;
                }
            }
        }
        Ok(())
    }

    fn wants_trace(&self) -> bool {
        true
    }
}

/// Tracks `|sum_i y_i - alpha(t) sum_i grad f_i(x_i)| / (1 + |sum_i y_i|)`
/// and the bound `|sum_i y_i| <= N M alpha(t)` with `M` the largest
/// gradient norm seen so far.
#[derive(Clone, Debug, Default)]
pub struct TrackingAudit {
    pub max_relative_gap: f64,
    pub worst_t: u64,
    pub max_grad_norm: f64,
    pub bound_violations: u64,
    pub observed: u64,
}

impl Observer for TrackingAudit {
    fn observe(&mut self, obs: &Observation<'_>) -> Result<(), SolverError> {
        let s = obs.state;
        let tracker = s.tracker_sum();
        let target = s.gradient_sum().scaled(obs.alpha);
        let gap = tracker.distance(&target) / (1.0 + tracker.norm());
        if gap > self.max_relative_gap {
            self.max_relative_gap = gap;
            self.worst_t = s.t();
        }
        for g in s.grads() {
            self.max_grad_norm = self.max_grad_norm.max(g.norm());
        }
        let bound = s.x().len() as f64 * self.max_grad_norm * obs.alpha;
        if tracker.norm() > bound * (1.0 + 1e-12) + 1e-15 {
            self.bound_violations += 1;
        }
        self.observed += 1;
        Ok(())
    }
}
