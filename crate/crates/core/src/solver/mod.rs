//! The push-pull iteration with Polyak constraint correction.
//!
//! One synchronous round, for every agent `i` at once:
//!
//! ```text
//! v_i    = sum_j A_ij x_j - y_i
//! x_i'   = P_{X_i}(v_i - beta * g_i^+(v_i) / |d_i|^2 * d_i)
//! y_i'   = sum_j B_ij y_j + alpha(t+1) grad f_i(x_i') - alpha(t) grad f_i(x_i)
//! ```
//!
//! with `y_i(0) = alpha(0) grad f_i(x_i(0))`. Column-stochasticity of `B`
//! keeps `sum_i y_i(t) = alpha(t) sum_i grad f_i(x_i(t))` for every `t`.

mod audit;
mod checkpoint;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rayon::ThreadPool;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::graph::{build_weights, GraphError, GraphSchedule, ScheduleKind, WeightPair};
use crate::point::Point;
use crate::problem::{
    plus_part_with_floor, BoxSet, ConstrainedProblem, ProblemError, DEFAULT_GRAD_FLOOR,
};

pub use audit::{CertificateAudit, PolyakAudit, TrackingAudit};
pub use checkpoint::{Checkpoint, CHECKPOINT_VERSION};

#[derive(Debug, Error)]
pub enum SolverError {
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("agent {agent}: {source}")]
    Agent {
        agent: usize,
        #[source]
        source: ProblemError,
    },
    #[error("direction norm {norm:e} below floor {floor:e} for a violated constraint")]
    DegenerateDirection { norm: f64, floor: f64 },
    #[error("non-finite {term} for agent {agent} at t = {t}")]
    NumericalFailure {
        t: u64,
        agent: usize,
        term: &'static str,
    },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

impl SolverError {
    /// Numerical failures as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            SolverError::NumericalFailure { .. }
                | SolverError::DegenerateDirection { .. }
                | SolverError::Agent {
                    source: ProblemError::DegenerateConstraint { .. },
                    ..
                }
                | SolverError::Problem(ProblemError::DegenerateConstraint { .. })
        )
    }
}

/// `alpha(t) = c / (t + 1)^sigma` with `0.5 < sigma <= 1`, so the steps
/// are not summable but square-summable.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepSchedule {
    c: f64,
    sigma: f64,
}

impl StepSchedule {
    pub fn new(c: f64, sigma: f64) -> Result<Self, SolverError> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(SolverError::Config(format!("alpha.c must be positive, got {c}")));
        }
        if !(sigma > 0.5 && sigma <= 1.0) {
            return Err(SolverError::Config(format!(
                "alpha.sigma must lie in (0.5, 1], got {sigma}"
            )));
        }
        Ok(StepSchedule { c, sigma })
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn alpha(&self, t: u64) -> f64 {
        self.c / ((t + 1) as f64).powf(self.sigma)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum X0Mode {
    BoxCenter,
    /// Uniform in each agent's box, drawn from the config seed.
    SeededUniformInBox,
    Explicit(Vec<Point>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    pub beta: f64,
    /// Fallback direction for inactive constraints; `None` means the unit
    /// all-ones vector.
    pub d0: Option<Point>,
    pub grad_floor: f64,
    pub horizon: u64,
    pub x0: X0Mode,
    pub seed: u64,
    /// Worker threads for the per-agent map; 0 runs serially.
    pub threads: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            beta: 1.0,
            d0: None,
            grad_floor: DEFAULT_GRAD_FLOOR,
            horizon: 0,
            x0: X0Mode::BoxCenter,
            seed: 0,
            threads: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        if !(self.beta > 0.0 && self.beta < 2.0) {
            return Err(SolverError::Config(format!(
                "beta must lie in (0, 2), got {}",
                self.beta
            )));
        }
        if self.grad_floor.is_nan() || self.grad_floor <= 0.0 {
            return Err(SolverError::Config("grad_floor must be positive".into()));
        }
        if let Some(d0) = &self.d0 {
            if d0.norm() == 0.0 || !d0.is_finite() {
                return Err(SolverError::Config("d0 must be finite and nonzero".into()));
            }
        }
        Ok(())
    }

    pub fn fallback_direction(&self, dim: usize) -> Point {
        self.d0
            .clone()
            .unwrap_or_else(|| Point::filled(dim, 1.0 / (dim as f64).sqrt()))
    }
}

/// Iterate and tracker of every agent at iteration `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkState {
    t: u64,
    x: Vec<Point>,
    y: Vec<Point>,
    /// `grad f_i(x_i(t))`, kept so each gradient is evaluated once.
    grad: Vec<Point>,
}

impl NetworkState {
    /// Rebuilds a state from raw iterates; gradients are recomputed.
    pub fn from_parts(
        p: &ConstrainedProblem,
        t: u64,
        x: Vec<Point>,
        y: Vec<Point>,
    ) -> Result<Self, SolverError> {
        check_points(p, &x, "x")?;
        check_points(p, &y, "y")?;
        let grad = x
            .iter()
            .zip(p.agents())
            .map(|(xi, a)| a.objective.grad(xi))
            .collect();
        Ok(NetworkState { t, x, y, grad })
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn x(&self) -> &[Point] {
        &self.x
    }

    pub fn y(&self) -> &[Point] {
        &self.y
    }

    pub fn grads(&self) -> &[Point] {
        &self.grad
    }

    pub fn tracker_sum(&self) -> Point {
        sum_points(&self.y)
    }

    pub fn gradient_sum(&self) -> Point {
        sum_points(&self.grad)
    }
}

fn sum_points(points: &[Point]) -> Point {
    let mut acc = Point::zeros(points.first().map_or(0, Point::dim));
    for p in points {
        acc.add_assign(p);
    }
    acc
}

fn check_points(p: &ConstrainedProblem, pts: &[Point], what: &str) -> Result<(), SolverError> {
    if pts.len() != p.n_agents() {
        return Err(SolverError::Config(format!(
            "{what}: expected {} points, got {}",
            p.n_agents(),
            pts.len()
        )));
    }
    if let Some((i, bad)) = pts.iter().enumerate().find(|(_, q)| q.dim() != p.dim()) {
        return Err(SolverError::Config(format!(
            "{what}[{i}]: expected dimension {}, got {}",
            p.dim(),
            bad.dim()
        )));
    }
    Ok(())
}

/// `x_i(0)` per the configured mode and `y_i(0) = alpha(0) grad f_i(x_i(0))`.
pub fn initialize(
    p: &ConstrainedProblem,
    cfg: &SolverConfig,
    sched: &StepSchedule,
) -> Result<NetworkState, SolverError> {
    cfg.validate()?;
    let x: Vec<Point> = match &cfg.x0 {
        X0Mode::BoxCenter => p.agents().iter().map(|a| a.set.center()).collect(),
        X0Mode::SeededUniformInBox => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            p.agents()
                .iter()
                .map(|a| uniform_in_box(&mut rng, &a.set))
                .collect()
        }
        X0Mode::Explicit(points) => points.clone(),
    };
    check_points(p, &x, "x0")?;
    let alpha0 = sched.alpha(0);
    let grad: Vec<Point> = x
        .iter()
        .zip(p.agents())
        .map(|(xi, a)| a.objective.grad(xi))
        .collect();
    let y = grad.iter().map(|g| g.scaled(alpha0)).collect();
    Ok(NetworkState { t: 0, x, y, grad })
}

fn uniform_in_box(rng: &mut impl Rng, set: &BoxSet) -> Point {
    set.lower()
        .iter()
        .zip(set.upper().iter())
        .map(|(&lo, &hi)| if lo < hi { rng.random_range(lo..=hi) } else { lo })
        .collect::<Vec<_>>()
        .into()
}

/// `beta * (gplus / |d|^2) * d`; zero when `gplus = 0`.
pub fn polyak_correction(
    gplus: f64,
    d: &Point,
    beta: f64,
    grad_floor: f64,
) -> Result<Point, SolverError> {
    if gplus == 0.0 {
        return Ok(Point::zeros(d.dim()));
    }
    let norm_sq = d.norm_squared();
    let norm = norm_sq.sqrt();
    if norm.is_nan() || norm < grad_floor {
        return Err(SolverError::DegenerateDirection {
            norm,
            floor: grad_floor,
        });
    }
    Ok(d.scaled(beta * gplus / norm_sq))
}

/// Per-agent quantities of one round, kept for audits.
#[derive(Clone, Debug, PartialEq)]
pub struct AgentTrace {
    pub v: Point,
    pub gplus: f64,
    pub d: Point,
    /// `v - beta k` before projection.
    pub corrected: Point,
    /// `g^+` at `corrected`.
    pub gplus_after: f64,
    pub x_next: Point,
}

/// Trace of the round that produced state `t + 1` from state `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct StepTrace {
    pub t: u64,
    pub beta: f64,
    pub agents: Vec<AgentTrace>,
}

struct AgentUpdate {
    x: Point,
    y: Point,
    grad: Point,
    trace: Option<AgentTrace>,
}

fn finite(t: u64, agent: usize, term: &'static str, p: &Point) -> Result<(), SolverError> {
    if p.is_finite() {
        Ok(())
    } else {
        Err(SolverError::NumericalFailure { t, agent, term })
    }
}

struct RoundInputs<'a> {
    state: &'a NetworkState,
    weights: &'a WeightPair,
    problem: &'a ConstrainedProblem,
    beta: f64,
    grad_floor: f64,
    d0: &'a Point,
    alpha_now: f64,
    alpha_next: f64,
    keep_trace: bool,
}

impl RoundInputs<'_> {
    fn update(&self, i: usize) -> Result<AgentUpdate, SolverError> {
        let s = self.state;
        let t = s.t;
        let dim = self.problem.dim();
        let agent = self.problem.agent(i);
        let row = self.weights.row(i);

        let mut v = Point::zeros(dim);
        for e in row {
            v.axpy(e.a, &s.x[e.col]);
        }
        for (vk, yk) in v.as_mut_slice().iter_mut().zip(s.y[i].iter()) {
            *vk -= yk;
        }
        finite(t, i, "v", &v)?;

        let (gplus, d) = plus_part_with_floor(&*agent.constraint, &v, self.d0, self.grad_floor)
            .map_err(|source| SolverError::Agent { agent: i, source })?;
        let correction = polyak_correction(gplus, &d, self.beta, self.grad_floor)?;
        let corrected = v.sub(&correction);
        let x_next = agent.set.project(&corrected);
        finite(t, i, "x", &x_next)?;
        let grad_next = agent.objective.grad(&x_next);
        finite(t, i, "grad", &grad_next)?;

        let mut y_next = Point::zeros(dim);
        for e in row {
            y_next.axpy(e.b, &s.y[e.col]);
        }
        for ((yk, gn), go) in y_next
            .as_mut_slice()
            .iter_mut()
            .zip(grad_next.iter())
            .zip(s.grad[i].iter())
        {
            *yk += self.alpha_next * gn - self.alpha_now * go;
        }
        finite(t, i, "y", &y_next)?;

        let trace = self.keep_trace.then(|| AgentTrace {
            gplus_after: agent.constraint.eval(&corrected).max(0.0),
            v,
            gplus,
            d,
            corrected,
            x_next: x_next.clone(),
        });
        Ok(AgentUpdate {
            x: x_next,
            y: y_next,
            grad: grad_next,
            trace,
        })
    }
}

fn advance(
    s: &NetworkState,
    w: &WeightPair,
    p: &ConstrainedProblem,
    sched: &StepSchedule,
    cfg: &SolverConfig,
    pool: Option<&ThreadPool>,
    keep_trace: bool,
) -> Result<(NetworkState, Option<StepTrace>), SolverError> {
    let n = p.n_agents();
    if s.x.len() != n || w.n() != n {
        return Err(SolverError::Config(format!(
            "state has {} agents, weights {}, problem {n}",
            s.x.len(),
            w.n()
        )));
    }
    let d0 = cfg.fallback_direction(p.dim());
    let inputs = RoundInputs {
        state: s,
        weights: w,
        problem: p,
        beta: cfg.beta,
        grad_floor: cfg.grad_floor,
        d0: &d0,
        alpha_now: sched.alpha(s.t),
        alpha_next: sched.alpha(s.t + 1),
        keep_trace,
    };
    // Agents only read the snapshot `s`, so the parallel map is bit-identical
    // to the serial one.
    let updates: Vec<AgentUpdate> = match pool {
        Some(pool) => pool.install(|| {
            (0..n)
                .into_par_iter()
                .map(|i| inputs.update(i))
                .collect::<Result<_, _>>()
        })?,
        None => (0..n).map(|i| inputs.update(i)).collect::<Result<_, _>>()?,
    };

    let mut x = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    let mut grad = Vec::with_capacity(n);
    let mut traces = keep_trace.then(|| Vec::with_capacity(n));
    for u in updates {
        x.push(u.x);
        y.push(u.y);
        grad.push(u.grad);
        if let (Some(list), Some(tr)) = (traces.as_mut(), u.trace) {
            list.push(tr);
        }
    }
    let next = NetworkState {
        t: s.t + 1,
        x,
        y,
        grad,
    };
    let trace = traces.map(|agents| StepTrace {
        t: s.t,
        beta: cfg.beta,
        agents,
    });
    Ok((next, trace))
}

/// One synchronous round from `s.t` to `s.t + 1`.
pub fn step(
    s: &NetworkState,
    w: &WeightPair,
    p: &ConstrainedProblem,
    sched: &StepSchedule,
    cfg: &SolverConfig,
) -> Result<NetworkState, SolverError> {
    advance(s, w, p, sched, cfg, None, false).map(|(next, _)| next)
}

/// [`step`] that also returns the per-agent intermediate quantities.
pub fn step_traced(
    s: &NetworkState,
    w: &WeightPair,
    p: &ConstrainedProblem,
    sched: &StepSchedule,
    cfg: &SolverConfig,
) -> Result<(NetworkState, StepTrace), SolverError> {
    let (next, trace) = advance(s, w, p, sched, cfg, None, true)?;
    Ok((next, trace.expect("trace requested")))
}

/// What an [`Observer`] sees after every round (and once for `t = 0`).
pub struct Observation<'a> {
    pub state: &'a NetworkState,
    /// `alpha(state.t)`
    pub alpha: f64,
    /// The round that produced `state`; `None` for the initial state.
    pub trace: Option<&'a StepTrace>,
}

pub trait Observer {
    fn observe(&mut self, obs: &Observation<'_>) -> Result<(), SolverError>;

    /// Whether [`Observation::trace`] should be populated.
    fn wants_trace(&self) -> bool {
        false
    }
}

/// Discards everything.
pub struct NoObserver;

impl Observer for NoObserver {
    fn observe(&mut self, _: &Observation<'_>) -> Result<(), SolverError> {
        Ok(())
    }
}

/// Adapts a closure.
pub struct FnObserver<F>(pub F);

impl<F: FnMut(&Observation<'_>)> Observer for FnObserver<F> {
    fn observe(&mut self, obs: &Observation<'_>) -> Result<(), SolverError> {
        (self.0)(obs);
        Ok(())
    }
}

/// Fans an observation out to several observers in order.
pub struct Observers<'a>(pub Vec<&'a mut dyn Observer>);

impl Observer for Observers<'_> {
    fn observe(&mut self, obs: &Observation<'_>) -> Result<(), SolverError> {
        for o in self.0.iter_mut() {
            o.observe(obs)?;
        }
        Ok(())
    }

    fn wants_trace(&self) -> bool {
        self.0.iter().any(|o| o.wants_trace())
    }
}

enum WeightSource<'a> {
    Fixed(Vec<WeightPair>),
    Drawn(&'a GraphSchedule),
}

impl<'a> WeightSource<'a> {
    fn new(schedule: &'a GraphSchedule) -> Result<Self, SolverError> {
        Ok(match schedule.kind() {
            ScheduleKind::Static(g) => WeightSource::Fixed(vec![build_weights(g)?]),
            ScheduleKind::Rotating(gs) => {
                WeightSource::Fixed(gs.iter().map(build_weights).collect::<Result<_, _>>()?)
            }
            ScheduleKind::SeededRandom(_) => WeightSource::Drawn(schedule),
        })
    }

    fn at(&self, t: u64) -> Result<std::borrow::Cow<'_, WeightPair>, SolverError> {
        Ok(match self {
            WeightSource::Fixed(ws) => {
                std::borrow::Cow::Borrowed(&ws[(t % ws.len() as u64) as usize])
            }
            WeightSource::Drawn(s) => std::borrow::Cow::Owned(build_weights(&s.graph_at(t))?),
        })
    }
}

/// Initializes and iterates until `cfg.horizon`. The observer sees the
/// initial state and every subsequent one, in order.
pub fn run(
    p: &ConstrainedProblem,
    schedule: &GraphSchedule,
    sched: &StepSchedule,
    cfg: &SolverConfig,
    observer: &mut dyn Observer,
) -> Result<NetworkState, SolverError> {
    let state = initialize(p, cfg, sched)?;
    observer.observe(&Observation {
        state: &state,
        alpha: sched.alpha(0),
        trace: None,
    })?;
    run_from(state, p, schedule, sched, cfg, observer)
}

/// Continues from `state` until `cfg.horizon`; `state` itself is not
/// re-observed.
pub fn run_from(
    mut state: NetworkState,
    p: &ConstrainedProblem,
    schedule: &GraphSchedule,
    sched: &StepSchedule,
    cfg: &SolverConfig,
    observer: &mut dyn Observer,
) -> Result<NetworkState, SolverError> {
    cfg.validate()?;
    if schedule.n_nodes() != p.n_agents() {
        return Err(SolverError::Config(format!(
            "graph has {} nodes but problem has {} agents",
            schedule.n_nodes(),
            p.n_agents()
        )));
    }
    let pool = if cfg.threads > 0 {
        Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(cfg.threads)
                .build()
                .map_err(|e| SolverError::Config(format!("thread pool: {e}")))?,
        )
    } else {
        None
    };
    let weights = WeightSource::new(schedule)?;
    let keep_trace = observer.wants_trace();
    while state.t < cfg.horizon {
        let w = weights.at(state.t)?;
        let (next, trace) = advance(&state, &w, p, sched, cfg, pool.as_ref(), keep_trace)?;
        observer.observe(&Observation {
            state: &next,
            alpha: sched.alpha(next.t),
            trace: trace.as_ref(),
        })?;
        state = next;
    }
    Ok(state)
}

/// The single-agent iteration on the whole problem:
/// `v = x - alpha sum_i grad f_i(x)`, Polyak step on `g_0 = max_i g_i`,
/// projection onto `X = intersect X_i`.
#[derive(Clone, Debug)]
pub struct CentralizedOracle<'a> {
    problem: &'a ConstrainedProblem,
    set: BoxSet,
}

impl<'a> CentralizedOracle<'a> {
    pub fn new(problem: &'a ConstrainedProblem) -> Result<Self, SolverError> {
        Ok(CentralizedOracle {
            set: problem.box_intersection()?,
            problem,
        })
    }

    pub fn set(&self) -> &BoxSet {
        &self.set
    }

    pub fn iterate(
        &self,
        x: &Point,
        t: u64,
        sched: &StepSchedule,
        cfg: &SolverConfig,
    ) -> Result<Point, SolverError> {
        self.iterate_with_step(x, sched.alpha(t), cfg)
    }

    /// Ties in `max_i g_i` go to the smallest agent index.
    pub fn iterate_with_step(
        &self,
        x: &Point,
        alpha: f64,
        cfg: &SolverConfig,
    ) -> Result<Point, SolverError> {
        let mut grad_sum = Point::zeros(self.problem.dim());
        for a in self.problem.agents() {
            grad_sum.add_assign(&a.objective.grad(x));
        }
        let mut v = x.clone();
        for (vk, gk) in v.as_mut_slice().iter_mut().zip(grad_sum.iter()) {
            *vk -= alpha * gk;
        }
        let mut worst = 0;
        let mut worst_value = f64::NEG_INFINITY;
        for (i, a) in self.problem.agents().iter().enumerate() {
            let value = a.constraint.eval(&v);
            if value > worst_value {
                worst = i;
                worst_value = value;
            }
        }
        let d0 = cfg.fallback_direction(self.problem.dim());
        let (gplus, d) = plus_part_with_floor(
            &*self.problem.agent(worst).constraint,
            &v,
            &d0,
            cfg.grad_floor,
        )?;
        let correction = polyak_correction(gplus, &d, cfg.beta, cfg.grad_floor)?;
        let next = self.set.project(&v.sub(&correction));
        if !next.is_finite() {
            return Err(SolverError::NumericalFailure {
                t: 0,
                agent: 0,
                term: "centralized iterate",
            });
        }
        Ok(next)
    }
}

pub fn centralized_iterate(
    p: &ConstrainedProblem,
    x: &Point,
    t: u64,
    sched: &StepSchedule,
    cfg: &SolverConfig,
) -> Result<Point, SolverError> {
    CentralizedOracle::new(p)?.iterate(x, t, sched, cfg)
}

/// Reference minimizer for problems without a declared optimum: the
/// centralized iteration with constant step `1 / sum_i L_i`, started at
/// the center of the box intersection, until the update stalls.
pub fn reference_optimum(
    p: &ConstrainedProblem,
    cfg: &SolverConfig,
    max_iterations: usize,
) -> Result<Point, SolverError> {
    let oracle = CentralizedOracle::new(p)?;
    let lipschitz: f64 = p
        .agents()
        .iter()
        .map(|a| {
            a.objective.lipschitz().ok_or_else(|| {
                SolverError::Config("reference optimum needs Lipschitz constants".into())
            })
        })
        .sum::<Result<f64, _>>()?;
    let alpha = 1.0 / lipschitz.max(f64::MIN_POSITIVE);
    let mut x = oracle.set().center();
    for _ in 0..max_iterations {
        let next = oracle.iterate_with_step(&x, alpha, cfg)?;
        let moved = next.distance(&x);
        x = next;
        if moved <= 1e-15 * (1.0 + x.norm()) {
            break;
        }
    }
    Ok(x)
}

/// Slack of the Polyak descent inequality
/// `|x' - z|^2 <= |v - z|^2 - beta (2 - beta) (g^+)^2 / |d|^2`,
/// valid for `z` in the set with `g^+(z) = 0`; nonnegative when it holds.
pub fn descent_certificate(
    v: &Point,
    x_next: &Point,
    z: &Point,
    gplus: f64,
    d: &Point,
    beta: f64,
) -> f64 {
    let v_dist = v.sub(z).norm_squared();
    let x_dist = x_next.sub(z).norm_squared();
    let decrease = if gplus == 0.0 {
        0.0
    } else {
        beta * (2.0 - beta) * gplus * gplus / d.norm_squared()
    };
    v_dist - decrease - x_dist
}

/// SHA-256 over everything that determines a trajectory.
pub fn config_fingerprint(
    p: &ConstrainedProblem,
    schedule: &GraphSchedule,
    sched: &StepSchedule,
    cfg: &SolverConfig,
) -> String {
    let mut h = Sha256::new();
    h.update(format!("{:?}", p.agents()).as_bytes());
    h.update(schedule.fingerprint().as_bytes());
    h.update(format!("{:?}|{:?}", sched, cfg.x0).as_bytes());
    h.update(
        format!(
            "beta={:016x} floor={:016x} d0={:?} seed={}",
            cfg.beta.to_bits(),
            cfg.grad_floor.to_bits(),
            cfg.fallback_direction(p.dim()),
            cfg.seed
        )
        .as_bytes(),
    );
    hex::encode(h.finalize())
}
