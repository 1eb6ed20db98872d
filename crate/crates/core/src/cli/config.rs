//! TOML run configuration.
//!
//! ```toml
//! version = 1
//! horizon = 50000
//! beta = 1.0
//! seed = 0
//! log_every = 100
//! output = "case_a.csv"
//!
//! [problem]
//! builtin = "case-a"          # or "case-b", or inline [[problem.agents]]
//!
//! [alpha]
//! c = 0.05
//! sigma = 0.6
//!
//! [graph]
//! kind = "case-a"             # rotating | static | complete | cycle | self-loops | random
//!
//! [x0]
//! mode = "box-center"         # uniform | explicit (with points = [[...], ...])
//! ```
//!
//! Graph file paths are resolved against the config file's directory.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::graph::{
    case_a_schedule, load_edge_list, Digraph, GraphError, GraphSchedule,
};
use crate::point::Point;
use crate::problem::{
    case_a_problem, case_b_problem, Agent, BoxSet, ConstrainedProblem, DiagQuadraticConstraint,
    LogisticQuadratic,
};
use crate::solver::{SolverConfig, StepSchedule, X0Mode};

pub const CONFIG_VERSION: u32 = 1;

/// Step-size constant of the published experiments.
pub const PUBLISHED_ALPHA_C: f64 = 1e-3;
pub const DEFAULT_ALPHA_C: f64 = 0.05;
pub const DEFAULT_ALPHA_SIGMA: f64 = 0.6;
pub const DEFAULT_EDGE_PROB: f64 = 0.05;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error("field `{field}`: {message}")]
    Invalid { field: String, message: String },
    #[error(transparent)]
    Graph(#[from] GraphError),
}

fn invalid(field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field: field.into(),
        message: message.into(),
    }
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_version")]
    pub version: u32,
    #[serde(default)]
    pub problem: ProblemSection,
    pub agents: Option<usize>,
    #[serde(default)]
    pub graph: Option<GraphSection>,
    #[serde(default)]
    pub alpha: AlphaSection,
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default)]
    pub horizon: u64,
    #[serde(default)]
    pub x0: X0Section,
    #[serde(default)]
    pub seed: u64,
    pub output: Option<PathBuf>,
    #[serde(default = "default_log_every")]
    pub log_every: u64,
    /// Smallest `t` used by the rate-envelope fit.
    #[serde(default = "default_envelope_t_min")]
    pub envelope_t_min: u64,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_version() -> u32 {
    CONFIG_VERSION
}
fn default_beta() -> f64 {
    1.0
}
fn default_log_every() -> u64 {
    100
}
fn default_envelope_t_min() -> u64 {
    1000
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSection {
    pub builtin: Option<String>,
    #[serde(default)]
    pub agents: Vec<AgentSpec>,
    pub optimum: Option<Vec<f64>>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentSpec {
    pub objective: LogisticQuadratic,
    pub constraint: DiagQuadraticConstraint,
    pub set: BoxSet,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, tag = "kind", rename_all = "kebab-case")]
pub enum GraphSection {
    CaseA,
    Rotating {
        files: Vec<PathBuf>,
        window: Option<usize>,
    },
    Static {
        file: PathBuf,
    },
    Complete,
    Cycle,
    SelfLoops,
    Random {
        #[serde(default = "default_edge_prob")]
        p: f64,
        seed: Option<u64>,
        probe_horizon: Option<usize>,
        #[serde(default = "default_max_window")]
        max_window: usize,
        #[serde(default = "default_max_attempts")]
        max_attempts: u32,
    },
}

fn default_edge_prob() -> f64 {
    DEFAULT_EDGE_PROB
}
fn default_max_window() -> usize {
    32
}
fn default_max_attempts() -> u32 {
    16
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlphaSection {
    #[serde(default = "default_alpha_c")]
    pub c: f64,
    #[serde(default = "default_alpha_sigma")]
    pub sigma: f64,
}

impl Default for AlphaSection {
    fn default() -> Self {
        AlphaSection {
            c: DEFAULT_ALPHA_C,
            sigma: DEFAULT_ALPHA_SIGMA,
        }
    }
}

fn default_alpha_c() -> f64 {
    DEFAULT_ALPHA_C
}
fn default_alpha_sigma() -> f64 {
    DEFAULT_ALPHA_SIGMA
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, tag = "mode", rename_all = "kebab-case")]
pub enum X0Section {
    #[default]
    BoxCenter,
    Uniform,
    Explicit {
        points: Vec<Vec<f64>>,
    },
}

/// Command-line values that take precedence over the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub agents: Option<usize>,
    pub beta: Option<f64>,
    pub alpha_c: Option<f64>,
    pub alpha_sigma: Option<f64>,
    pub horizon: Option<u64>,
    pub seed: Option<u64>,
    pub paper_exact: bool,
    pub output: Option<PathBuf>,
    pub log_every: Option<u64>,
}

impl RunConfig {
    pub fn from_toml(text: &str, origin: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: origin.into(),
            message: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut cfg = Self::from_toml(&text, &path.display().to_string())?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    /// Built-in experiment defaults.
    pub fn builtin(name: &str) -> Self {
        RunConfig {
            version: CONFIG_VERSION,
            problem: ProblemSection {
                builtin: Some(name.into()),
                ..ProblemSection::default()
            },
            beta: default_beta(),
            horizon: 50_000,
            log_every: default_log_every(),
            envelope_t_min: default_envelope_t_min(),
            ..RunConfig::default()
        }
    }

    pub fn apply(&mut self, o: &Overrides) {
        if o.paper_exact {
            self.alpha.c = PUBLISHED_ALPHA_C;
            self.alpha.sigma = DEFAULT_ALPHA_SIGMA;
            self.beta = 1.0;
        }
        if let Some(v) = o.agents {
            self.agents = Some(v);
        }
        if let Some(v) = o.beta {
            self.beta = v;
        }
        if let Some(v) = o.alpha_c {
            self.alpha.c = v;
        }
        if let Some(v) = o.alpha_sigma {
            self.alpha.sigma = v;
        }
        if let Some(v) = o.horizon {
            self.horizon = v;
        }
        if let Some(v) = o.seed {
            self.seed = v;
        }
        if let Some(v) = &o.output {
            self.output = Some(v.clone());
        }
        if let Some(v) = o.log_every {
            self.log_every = v;
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.version != CONFIG_VERSION {
            return Err(invalid(
                "version",
                format!("unsupported version {}, expected {CONFIG_VERSION}", self.version),
            ));
        }
        if !(self.beta > 0.0 && self.beta < 2.0) {
            return Err(invalid("beta", format!("must lie in (0, 2), got {}", self.beta)));
        }
        if !(self.alpha.sigma > 0.5 && self.alpha.sigma <= 1.0) {
            return Err(invalid(
                "alpha.sigma",
                format!("must lie in (0.5, 1], got {}", self.alpha.sigma),
            ));
        }
        if !(self.alpha.c > 0.0 && self.alpha.c.is_finite()) {
            return Err(invalid("alpha.c", format!("must be positive, got {}", self.alpha.c)));
        }
        if self.log_every == 0 {
            return Err(invalid("log_every", "must be at least 1"));
        }
        if self.envelope_t_min < 10 {
            return Err(invalid("envelope_t_min", "must be at least 10"));
        }
        Ok(())
    }

    pub fn step_schedule(&self) -> Result<StepSchedule, ConfigError> {
        StepSchedule::new(self.alpha.c, self.alpha.sigma).map_err(|e| invalid("alpha", e.to_string()))
    }

    pub fn solver_config(&self, threads: usize) -> Result<SolverConfig, ConfigError> {
        let x0 = match &self.x0 {
            X0Section::BoxCenter => X0Mode::BoxCenter,
            X0Section::Uniform => X0Mode::SeededUniformInBox,
            X0Section::Explicit { points } => {
                X0Mode::Explicit(points.iter().cloned().map(Point::new).collect())
            }
        };
        Ok(SolverConfig {
            beta: self.beta,
            horizon: self.horizon,
            x0,
            seed: self.seed,
            threads,
            ..SolverConfig::default()
        })
    }

    pub fn problem_name(&self) -> String {
        self.problem
            .builtin
            .clone()
            .unwrap_or_else(|| "custom".into())
    }

    pub fn build_problem(&self) -> Result<ConstrainedProblem, ConfigError> {
        let section = &self.problem;
        let problem = match (section.builtin.as_deref(), section.agents.is_empty()) {
            (Some(_), false) => {
                return Err(invalid("problem", "give either `builtin` or `agents`, not both"))
            }
            (Some("case-a"), true) => {
                if let Some(n) = self.agents.filter(|&n| n != 8) {
                    return Err(invalid("agents", format!("case-a has 8 agents, got {n}")));
                }
                case_a_problem()
            }
            (Some("case-b"), true) => case_b_problem(self.agents.unwrap_or(100))
                .map_err(|e| invalid("agents", e.to_string()))?,
            (Some(other), true) => {
                return Err(invalid(
                    "problem.builtin",
                    format!("unknown problem `{other}` (expected case-a or case-b)"),
                ))
            }
            (None, true) => return Err(invalid("problem", "missing `builtin` or `agents`")),
            (None, false) => self.build_custom()?,
        };
        if section.builtin.is_some() && section.optimum.is_some() {
            return Err(invalid("problem.optimum", "only allowed with inline agents"));
        }
        Ok(problem)
    }

    fn build_custom(&self) -> Result<ConstrainedProblem, ConfigError> {
        let specs = &self.problem.agents;
        if let Some(n) = self.agents.filter(|&n| n != specs.len()) {
            return Err(invalid(
                "agents",
                format!("{n} agents requested but {} defined", specs.len()),
            ));
        }
        let dim = specs[0].set.dim();
        let mut agents = Vec::with_capacity(specs.len());
        for (i, s) in specs.iter().enumerate() {
            let field = format!("problem.agents[{i}]");
            s.objective
                .validate()
                .map_err(|e| invalid(&format!("{field}.objective"), e.to_string()))?;
            s.constraint
                .validate()
                .map_err(|e| invalid(&format!("{field}.constraint"), e.to_string()))?;
            if s.objective.dim() != dim || s.constraint.dim() != dim || s.set.dim() != dim {
                return Err(invalid(&field, format!("all parts must have dimension {dim}")));
            }
            agents.push(Agent::new(s.objective.clone(), s.constraint.clone(), s.set.clone()));
        }
        let p = ConstrainedProblem::new(dim, agents).map_err(|e| invalid("problem", e.to_string()))?;
        match &self.problem.optimum {
            Some(x) => p
                .with_optimum(Point::new(x.clone()))
                .map_err(|e| invalid("problem.optimum", e.to_string())),
            None => Ok(p),
        }
    }

    fn graph_section(&self) -> Result<GraphSection, ConfigError> {
        if let Some(g) = &self.graph {
            return Ok(g.clone());
        }
        match self.problem.builtin.as_deref() {
            Some("case-a") => Ok(GraphSection::CaseA),
            Some("case-b") => Ok(GraphSection::Random {
                p: DEFAULT_EDGE_PROB,
                seed: None,
                probe_horizon: None,
                max_window: default_max_window(),
                max_attempts: default_max_attempts(),
            }),
            _ => Err(invalid("graph", "required for custom problems")),
        }
    }

    /// Node count implied by the problem section (without building it).
    pub fn node_count(&self) -> Result<usize, ConfigError> {
        match self.problem.builtin.as_deref() {
            Some("case-a") => Ok(8),
            Some("case-b") => Ok(self.agents.unwrap_or(100)),
            _ if !self.problem.agents.is_empty() => Ok(self.problem.agents.len()),
            _ => self
                .agents
                .ok_or_else(|| invalid("agents", "cannot infer the number of nodes")),
        }
    }

    /// Builds the schedule; random draws use `graph.seed` or the run seed.
    pub fn build_schedule(&self, n_nodes: usize) -> Result<GraphSchedule, ConfigError> {
        let resolve = |p: &Path| -> PathBuf {
            if p.is_absolute() {
                p.to_path_buf()
            } else {
                self.base_dir.join(p)
            }
        };
        let check_nodes = |g: &Digraph| -> Result<(), ConfigError> {
            if g.n_nodes() == n_nodes {
                Ok(())
            } else {
                Err(invalid(
                    "graph",
                    format!("graph has {} nodes, problem has {n_nodes} agents", g.n_nodes()),
                ))
            }
        };
        let schedule = match self.graph_section()? {
            GraphSection::CaseA => {
                if n_nodes != 8 {
                    return Err(invalid("graph", "case-a schedule needs 8 agents"));
                }
                case_a_schedule()
            }
            GraphSection::Rotating { files, window } => {
                if files.is_empty() {
                    return Err(invalid("graph.files", "empty list"));
                }
                let graphs = files
                    .iter()
                    .map(|f| load_edge_list(&resolve(f)))
                    .collect::<Result<Vec<_>, _>>()?;
                for g in &graphs {
                    check_nodes(g)?;
                }
                let s = GraphSchedule::rotating(graphs)?;
                match window {
                    Some(w) => s.with_window(w),
                    None => s,
                }
            }
            GraphSection::Static { file } => {
                let g = load_edge_list(&resolve(&file))?;
                check_nodes(&g)?;
                GraphSchedule::new_static(g)?
            }
            GraphSection::Complete => GraphSchedule::new_static(Digraph::complete(n_nodes)?)?,
            GraphSection::Cycle => GraphSchedule::new_static(Digraph::cycle(n_nodes)?)?,
            GraphSection::SelfLoops => {
                GraphSchedule::new_static(Digraph::self_loops_only(n_nodes)?)?
            }
            GraphSection::Random {
                p,
                seed,
                probe_horizon,
                max_window,
                max_attempts,
            } => GraphSchedule::seeded_random(
                n_nodes,
                seed.unwrap_or(self.seed),
                p,
                probe_horizon.unwrap_or((10 * n_nodes).max(self.horizon as usize)),
                max_window,
                max_attempts,
            )?,
        };
        Ok(schedule)
    }
}
