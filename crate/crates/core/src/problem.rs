//! Objectives, inequality constraints and box sets, plus the two built-in
//! experiment families.
//!
//! Agent `i` (0-based) owns `f_i`, `g_i` and `X_i`; the network minimizes
//! `sum_i f_i(x)` subject to `g_i(x) <= 0` and `x in X_i` for every `i`.
//! The generators use the 1-based agent label `i + 1` in their formulas.

use std::fmt::Debug;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::point::Point;

/// Below this gradient norm an active constraint has no usable direction.
pub const DEFAULT_GRAD_FLOOR: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum ProblemError {
    #[error("box has lower {lower} > upper {upper} in coordinate {coord}")]
    EmptyBox { coord: usize, lower: f64, upper: f64 },
    #[error("box bounds must be finite (coordinate {coord})")]
    NonFiniteBound { coord: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("problem has no agents")]
    NoAgents,
    #[error("box intersection is empty in coordinate {coord}")]
    EmptyIntersection { coord: usize },
    #[error("declared optimum violates agent {agent}: {reason}")]
    InfeasibleOptimum { agent: usize, reason: String },
    #[error("constraint is active (g = {value}) but its gradient norm {norm:e} is below the floor")]
    DegenerateConstraint { value: f64, norm: f64 },
    #[error("fallback direction d0 must be nonzero")]
    ZeroFallbackDirection,
    #[error("quadratic constraint coefficient {coord} is negative ({value}); g would not be convex")]
    NonConvexConstraint { coord: usize, value: f64 },
    #[error("objective quadratic coefficient {coord} is negative ({value}); f would not be convex")]
    NonConvexObjective { coord: usize, value: f64 },
    #[error("at least {min} agents required, got {got}")]
    TooFewAgents { min: usize, got: usize },
}

/// A differentiable convex local objective.
pub trait SmoothObjective: Debug + Send + Sync {
    fn eval(&self, x: &Point) -> f64;
    fn grad(&self, x: &Point) -> Point;
    /// A Lipschitz constant of the gradient, if known.
    fn lipschitz(&self) -> Option<f64> {
        None
    }
}

/// A convex constraint function with continuous gradient.
pub trait InequalityConstraint: Debug + Send + Sync {
    fn eval(&self, x: &Point) -> f64;
    fn grad(&self, x: &Point) -> Point;
}

/// `a * (w . x)` inside a logistic loss.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogisticTerm {
    pub label: f64,
    pub features: Point,
}

/// `ln(1 + exp(-label * features.x)) + 0.5 * sum_k quad_k x_k^2 + linear.x`
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogisticQuadratic {
    #[serde(default)]
    pub logistic: Option<LogisticTerm>,
    pub quad: Point,
    pub linear: Point,
}

impl LogisticQuadratic {
    pub fn quadratic(quad: Point) -> Self {
        let dim = quad.dim();
        LogisticQuadratic {
            logistic: None,
            quad,
            linear: Point::zeros(dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.quad.dim()
    }

    pub fn validate(&self) -> Result<(), ProblemError> {
        let dim = self.dim();
        check_dim(dim, self.linear.dim())?;
        if let Some(term) = &self.logistic {
            check_dim(dim, term.features.dim())?;
        }
        for (coord, &q) in self.quad.iter().enumerate() {
            if q < 0.0 {
                return Err(ProblemError::NonConvexObjective { coord, value: q });
            }
        }
        Ok(())
    }

    /// Value of the logistic loss alone.
    pub fn logistic_value(&self, x: &Point) -> f64 {
        self.logistic
            .as_ref()
            .map_or(0.0, |term| softplus(-term.label * term.features.dot(x)))
    }
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl SmoothObjective for LogisticQuadratic {
    fn eval(&self, x: &Point) -> f64 {
        let quad: f64 = self
            .quad
            .iter()
            .zip(x.iter())
            .map(|(q, v)| 0.5 * q * v * v)
            .sum();
        self.logistic_value(x) + quad + self.linear.dot(x)
    }

    fn grad(&self, x: &Point) -> Point {
        let mut g: Point = self
            .quad
            .iter()
            .zip(x.iter())
            .zip(self.linear.iter())
            .map(|((q, v), l)| q * v + l)
            .collect::<Vec<_>>()
            .into();
        if let Some(term) = &self.logistic {
            let margin = term.label * term.features.dot(x);
            let weight = -term.label * sigmoid(-margin);
            g.axpy(weight, &term.features);
        }
        g
    }

    fn lipschitz(&self) -> Option<f64> {
        let logistic = self
            .logistic
            .as_ref()
            .map_or(0.0, |t| 0.25 * t.label * t.label * t.features.norm_squared());
        let quad = self.quad.iter().copied().fold(0.0, f64::max);
        Some(logistic + quad)
    }
}

/// `sum_k quad_k x_k^2 + linear.x + offset`, convex for `quad >= 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagQuadraticConstraint {
    pub quad: Point,
    pub linear: Point,
    pub offset: f64,
}

impl DiagQuadraticConstraint {
    pub fn new(quad: Point, linear: Point, offset: f64) -> Result<Self, ProblemError> {
        let c = DiagQuadraticConstraint {
            quad,
            linear,
            offset,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn affine(linear: Point, offset: f64) -> Self {
        DiagQuadraticConstraint {
            quad: Point::zeros(linear.dim()),
            linear,
            offset,
        }
    }

    pub fn dim(&self) -> usize {
        self.linear.dim()
    }

    pub fn validate(&self) -> Result<(), ProblemError> {
        check_dim(self.linear.dim(), self.quad.dim())?;
        for (coord, &q) in self.quad.iter().enumerate() {
            if q < 0.0 {
                return Err(ProblemError::NonConvexConstraint { coord, value: q });
            }
        }
        Ok(())
    }
}

impl InequalityConstraint for DiagQuadraticConstraint {
    fn eval(&self, x: &Point) -> f64 {
        let quad: f64 = self.quad.iter().zip(x.iter()).map(|(q, v)| q * v * v).sum();
        quad + self.linear.dot(x) + self.offset
    }

    fn grad(&self, x: &Point) -> Point {
        self.quad
            .iter()
            .zip(x.iter())
            .zip(self.linear.iter())
            .map(|((q, v), l)| 2.0 * q * v + l)
            .collect::<Vec<_>>()
            .into()
    }
}

/// Axis-aligned box `[lower, upper]`; `lower_k == upper_k` pins a coordinate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BoxBounds")]
pub struct BoxSet {
    lower: Point,
    upper: Point,
}

#[derive(Deserialize)]
struct BoxBounds {
    lower: Point,
    upper: Point,
}

impl TryFrom<BoxBounds> for BoxSet {
    type Error = ProblemError;
    fn try_from(b: BoxBounds) -> Result<Self, Self::Error> {
        BoxSet::new(b.lower, b.upper)
    }
}

impl BoxSet {
    pub fn new(lower: Point, upper: Point) -> Result<Self, ProblemError> {
        check_dim(lower.dim(), upper.dim())?;
        for coord in 0..lower.dim() {
            let (lo, hi) = (lower[coord], upper[coord]);
            if !lo.is_finite() || !hi.is_finite() {
                return Err(ProblemError::NonFiniteBound { coord });
            }
            if lo > hi {
                return Err(ProblemError::EmptyBox {
                    coord,
                    lower: lo,
                    upper: hi,
                });
            }
        }
        Ok(BoxSet { lower, upper })
    }

    pub fn dim(&self) -> usize {
        self.lower.dim()
    }

    pub fn lower(&self) -> &Point {
        &self.lower
    }

    pub fn upper(&self) -> &Point {
        &self.upper
    }

    pub fn center(&self) -> Point {
        self.lower.add(&self.upper).scaled(0.5)
    }

    pub fn contains(&self, x: &Point) -> bool {
        x.iter()
            .zip(self.lower.iter().zip(self.upper.iter()))
            .all(|(v, (lo, hi))| lo <= v && v <= hi)
    }

    /// Euclidean projection: componentwise clamp.
    pub fn project(&self, x: &Point) -> Point {
        x.iter()
            .zip(self.lower.iter().zip(self.upper.iter()))
            .map(|(&v, (&lo, &hi))| v.clamp(lo, hi))
            .collect::<Vec<_>>()
            .into()
    }

    pub fn distance(&self, x: &Point) -> f64 {
        x.distance(&self.project(x))
    }

    /// Intersection of boxes of equal dimension.
    pub fn intersect_all<'a>(
        boxes: impl IntoIterator<Item = &'a BoxSet>,
    ) -> Result<BoxSet, ProblemError> {
        let mut iter = boxes.into_iter();
        let first = iter.next().ok_or(ProblemError::NoAgents)?;
        let mut lower = first.lower.clone();
        let mut upper = first.upper.clone();
        for b in iter {
            check_dim(lower.dim(), b.dim())?;
            for k in 0..lower.dim() {
                lower[k] = lower[k].max(b.lower[k]);
                upper[k] = upper[k].min(b.upper[k]);
            }
        }
        for coord in 0..lower.dim() {
            if lower[coord] > upper[coord] {
                return Err(ProblemError::EmptyIntersection { coord });
            }
        }
        Ok(BoxSet { lower, upper })
    }
}

/// Componentwise clamp onto `set`.
pub fn project_box(x: &Point, set: &BoxSet) -> Point {
    set.project(x)
}

/// Local data of one agent.
#[derive(Clone, Debug)]
pub struct Agent {
    pub objective: Arc<dyn SmoothObjective>,
    pub constraint: Arc<dyn InequalityConstraint>,
    pub set: BoxSet,
}

impl Agent {
    pub fn new(
        objective: impl SmoothObjective + 'static,
        constraint: impl InequalityConstraint + 'static,
        set: BoxSet,
    ) -> Self {
        Agent {
            objective: Arc::new(objective),
            constraint: Arc::new(constraint),
            set,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ConstrainedProblem {
    dim: usize,
    agents: Vec<Agent>,
    optimum: Option<Point>,
    optimal_value: Option<f64>,
}

impl ConstrainedProblem {
    pub fn new(dim: usize, agents: Vec<Agent>) -> Result<Self, ProblemError> {
        if agents.is_empty() {
            return Err(ProblemError::NoAgents);
        }
        for agent in &agents {
            check_dim(dim, agent.set.dim())?;
        }
        Ok(ConstrainedProblem {
            dim,
            agents,
            optimum: None,
            optimal_value: None,
        })
    }

    /// Attaches a known optimum; it must be feasible for every agent.
    /// The optimal value is derived from it.
    pub fn with_optimum(mut self, x: Point) -> Result<Self, ProblemError> {
        check_dim(self.dim, x.dim())?;
        for (agent, a) in self.agents.iter().enumerate() {
            if !a.set.contains(&x) {
                return Err(ProblemError::InfeasibleOptimum {
                    agent,
                    reason: "outside box".into(),
                });
            }
            let g = a.constraint.eval(&x);
            if g > 1e-9 {
                return Err(ProblemError::InfeasibleOptimum {
                    agent,
                    reason: format!("g = {g}"),
                });
            }
        }
        self.optimal_value = Some(global_objective(&self, &x));
        self.optimum = Some(x);
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_agents(&self) -> usize {
        self.agents.len()
    }

    pub fn agents(&self) -> &[Agent] {
        &self.agents
    }

    pub fn agent(&self, i: usize) -> &Agent {
        &self.agents[i]
    }

    pub fn optimum(&self) -> Option<&Point> {
        self.optimum.as_ref()
    }

    pub fn optimal_value(&self) -> Option<f64> {
        self.optimal_value
    }

    pub fn box_intersection(&self) -> Result<BoxSet, ProblemError> {
        BoxSet::intersect_all(self.agents.iter().map(|a| &a.set))
    }
}

fn check_dim(expected: usize, found: usize) -> Result<(), ProblemError> {
    if expected == found {
        Ok(())
    } else {
        Err(ProblemError::DimensionMismatch { expected, found })
    }
}

/// `(max(g(x), 0), d)` with `d = grad g(x)` if the constraint is violated,
/// else the fallback `d0`.
pub fn plus_part(
    c: &dyn InequalityConstraint,
    x: &Point,
    d0: &Point,
) -> Result<(f64, Point), ProblemError> {
    plus_part_with_floor(c, x, d0, DEFAULT_GRAD_FLOOR)
}

pub fn plus_part_with_floor(
    c: &dyn InequalityConstraint,
    x: &Point,
    d0: &Point,
    grad_floor: f64,
) -> Result<(f64, Point), ProblemError> {
    if d0.norm() == 0.0 {
        return Err(ProblemError::ZeroFallbackDirection);
    }
    let value = c.eval(x);
    if value > 0.0 {
        let d = c.grad(x);
        let norm = d.norm();
        if norm.is_nan() || norm < grad_floor {
            return Err(ProblemError::DegenerateConstraint { value, norm });
        }
        Ok((value, d))
    } else {
        Ok((0.0, d0.clone()))
    }
}

/// `f(x) = sum_i f_i(x)`, summed in agent order.
pub fn global_objective(p: &ConstrainedProblem, x: &Point) -> f64 {
    p.agents.iter().map(|a| a.objective.eval(x)).sum()
}

/// `max(max_i g_i^+(x), max_i dist(x, X_i))`.
pub fn feasibility_violation(p: &ConstrainedProblem, x: &Point) -> f64 {
    p.agents.iter().fold(0.0, |acc, a| {
        acc.max(a.constraint.eval(x).max(0.0)).max(a.set.distance(x))
    })
}

/// Logistic-plus-quadratic loss of the built-in families for 1-based
/// agent `label`: features `(0.01 i, 0.02 i, 1)`, label `(-1)^i`, and a
/// `(x^1)^2/4` penalty below `split`, `(x^2)^2/4` from `split` on.
fn experiment_objective(i: usize, split: usize) -> LogisticQuadratic {
    let fi = i as f64;
    let sign = if i.is_multiple_of(2) { 1.0 } else { -1.0 };
    let quad = if i < split {
        Point::from([0.5, 0.0, 0.0])
    } else {
        Point::from([0.0, 0.5, 0.0])
    };
    LogisticQuadratic {
        logistic: Some(LogisticTerm {
            label: sign,
            features: Point::from([0.01 * fi, 0.02 * fi, 1.0]),
        }),
        quad,
        linear: Point::zeros(3),
    }
}

/// `(x^1)^2 + coef (x^2) + x^3 - 10`
fn experiment_constraint(coef: f64) -> DiagQuadraticConstraint {
    DiagQuadraticConstraint {
        quad: Point::from([1.0, 0.0, 0.0]),
        linear: Point::from([0.0, coef, 1.0]),
        offset: -10.0,
    }
}

/// Eight agents in `R^3` whose boxes intersect in `[1,2] x [0.5,1] x {3}`,
/// with optimum `(1, 0.5, 3)`.
pub fn case_a_problem() -> ConstrainedProblem {
    let agents = (1..=8)
        .map(|i| {
            let h = i as f64 / 2.0;
            let set = BoxSet::new(
                Point::from([h - 3.0, h - 3.5, h - 1.0]),
                Point::from([h + 1.0, h + 0.5, h + 2.5]),
            )
            .expect("nonempty");
            Agent::new(
                experiment_objective(i, 5),
                experiment_constraint(i as f64),
                set,
            )
        })
        .collect();
    ConstrainedProblem::new(3, agents)
        .and_then(|p| p.with_optimum(Point::from([1.0, 0.5, 3.0])))
        .expect("case A optimum is feasible")
}

/// The large-network family with `n` agents and split `ceil(n/2) + 1`.
///
/// Only `n = 100` carries the known optimum `(1, 0.5, 3)`; other sizes
/// leave it unset so callers derive a reference.
pub fn case_b_problem(n: usize) -> Result<ConstrainedProblem, ProblemError> {
    if n < 2 {
        return Err(ProblemError::TooFewAgents { min: 2, got: n });
    }
    let split = n.div_ceil(2) + 1;
    let agents = (1..=n)
        .map(|i| {
            let s = 0.06 * i as f64;
            let set = BoxSet::new(
                Point::from([s - 5.0, s - 5.5, s - 3.0]),
                Point::from([s + 1.94, s + 0.94, s + 2.94]),
            )
            .expect("nonempty");
            Agent::new(
                experiment_objective(i, split),
                experiment_constraint(0.1 * i as f64),
                set,
            )
        })
        .collect();
    let p = ConstrainedProblem::new(3, agents)?;
    if n == 100 {
        p.with_optimum(Point::from([1.0, 0.5, 3.0]))
    } else {
        Ok(p)
    }
}
