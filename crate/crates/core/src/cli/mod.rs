//! Command-line front end.
//!
//! Exit codes: 0 ok, 1 output I/O failure, 2 configuration error,
//! 3 numerical failure, 4 connectivity failure.

pub mod config;
pub mod output;

use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::graph::{product_decay_diagnostic, verify_jointly_connected, GraphError, GraphSchedule};
use crate::metrics::{rate_envelope_fit, MetricsCollector, MetricsRecord, Reference};
use crate::problem::ConstrainedProblem;
use crate::solver::{
    config_fingerprint, initialize, reference_optimum, run_from, Checkpoint, Observation,
    Observer, Observers, SolverConfig, SolverError, TrackingAudit,
};

pub use config::{ConfigError, Overrides, RunConfig};
pub use output::{format_number, RunSummary, CSV_HEADER};

use output::{EnvelopeSummary, ReferenceSummary};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;
pub const EXIT_CONNECTIVITY: i32 = 4;

pub const THREADS_ENV: &str = "CPUSH_THREADS";

const REFERENCE_ITERATIONS: usize = 200_000;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(#[from] ConfigError),
    #[error("numerical failure: {0}")]
    Numeric(SolverError),
    #[error("solver error: {0}")]
    Solver(SolverError),
    #[error("connectivity: {0}")]
    Connectivity(String),
    #[error("writing {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(ConfigError::Graph(GraphError::NoConnectedDraw { .. })) => {
                EXIT_CONNECTIVITY
            }
            CliError::Config(_) | CliError::Solver(_) => EXIT_CONFIG,
            CliError::Numeric(_) => EXIT_NUMERIC,
            CliError::Connectivity(_) => EXIT_CONNECTIVITY,
            CliError::Io { .. } => EXIT_IO,
        }
    }
}

impl From<SolverError> for CliError {
    fn from(e: SolverError) -> Self {
        if e.is_numerical() {
            CliError::Numeric(e)
        } else {
            CliError::Solver(e)
        }
    }
}

fn io_error(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.display().to_string(),
        source,
    }
}

#[derive(Debug, Parser)]
#[command(name = "cpush", version, about = "Distributed constrained optimization over time-varying digraphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the experiment described by a TOML config.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        flags: RunFlags,
    },
    /// Built-in 8-agent experiment on the rotating four-graph schedule.
    CaseA {
        #[command(flatten)]
        flags: RunFlags,
    },
    /// Built-in large-network experiment on a seeded random schedule.
    CaseB {
        #[command(flatten)]
        flags: RunFlags,
    },
    /// Check joint connectivity and print the product-decay table.
    ValidateGraphs {
        #[arg(long, required_unless_present = "builtin")]
        config: Option<PathBuf>,
        /// `case-a` or `case-b` instead of a config file.
        #[arg(long, conflicts_with = "config")]
        builtin: Option<String>,
        #[arg(long)]
        agents: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 40)]
        k_max: usize,
        /// Verification horizon; defaults to max(10 N, 2 H, config horizon).
        #[arg(long)]
        horizon: Option<usize>,
    },
}

#[derive(Debug, Args)]
struct RunFlags {
    #[arg(long)]
    agents: Option<usize>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    alpha_c: Option<f64>,
    #[arg(long)]
    alpha_sigma: Option<f64>,
    #[arg(long)]
    horizon: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Use the published step-size constant c = 1e-3.
    #[arg(long)]
    paper_exact: bool,
    /// CSV path; the summary goes to `<output>.summary.json`.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    log_every: Option<u64>,
    /// Write the final state here.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Continue from a checkpoint written under the same configuration.
    #[arg(long)]
    resume: Option<PathBuf>,
}

impl RunFlags {
    fn overrides(&self) -> Overrides {
        Overrides {
            agents: self.agents,
            beta: self.beta,
            alpha_c: self.alpha_c,
            alpha_sigma: self.alpha_sigma,
            horizon: self.horizon,
            seed: self.seed,
            paper_exact: self.paper_exact,
            output: self.output.clone(),
            log_every: self.log_every,
        }
    }

    fn options(&self) -> Result<RunOptions, ConfigError> {
        Ok(RunOptions {
            threads: threads_from_env()?,
            checkpoint: self.checkpoint.clone(),
            resume: self.resume.clone(),
        })
    }
}

/// Execution knobs that do not affect the trajectory.
#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub threads: usize,
    pub checkpoint: Option<PathBuf>,
    pub resume: Option<PathBuf>,
}

pub fn threads_from_env() -> Result<usize, ConfigError> {
    match std::env::var(THREADS_ENV) {
        Ok(v) if !v.trim().is_empty() => v.trim().parse().map_err(|_| ConfigError::Invalid {
            field: THREADS_ENV.into(),
            message: format!("expected a non-negative integer, got `{v}`"),
        }),
        _ => Ok(0),
    }
}

pub struct RunOutcome {
    pub records: Vec<MetricsRecord>,
    pub csv: String,
    pub summary: RunSummary,
}

fn reference_for(p: &ConstrainedProblem, cfg: &SolverConfig) -> Result<ReferenceSummary, CliError> {
    let (x_star, source) = match p.optimum() {
        Some(x) => (x.clone(), "declared"),
        None => (reference_optimum(p, cfg, REFERENCE_ITERATIONS)?, "derived"),
    };
    let r = Reference::from_point(p, x_star);
    Ok(ReferenceSummary {
        x_star: r.x_star.into_vec(),
        f_star: r.f_star,
        source,
    })
}

fn probe_horizon(schedule: &GraphSchedule, n_agents: usize, run_horizon: u64) -> usize {
    (10 * n_agents).max(2 * schedule.window()).max(run_horizon as usize)
}

/// Runs a configured experiment. Apart from an optional checkpoint and a
/// connectivity warning on stderr, results are returned, not written.
pub fn execute(cfg: &RunConfig, opts: &RunOptions) -> Result<RunOutcome, CliError> {
    cfg.validate()?;
    let problem = cfg.build_problem()?;
    let schedule = cfg.build_schedule(problem.n_agents())?;
    let step_sched = cfg.step_schedule()?;
    let solver_cfg = cfg.solver_config(opts.threads)?;
    solver_cfg.validate()?;
    let fingerprint = config_fingerprint(&problem, &schedule, &step_sched, &solver_cfg);

    let connected = verify_jointly_connected(&schedule, probe_horizon(&schedule, problem.n_agents(), cfg.horizon));
    if !connected {
        eprintln!(
            "warning: schedule is not jointly strongly connected with window {}",
            schedule.window()
        );
    }

    let reference = reference_for(&problem, &solver_cfg)?;
    let mut collector = MetricsCollector::new(
        &problem,
        Reference {
            x_star: reference.x_star.clone().into(),
            f_star: reference.f_star,
        },
    );
    let mut tracking = TrackingAudit::default();

    let state = match &opts.resume {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
                path: path.display().to_string(),
                source,
            })?;
            Checkpoint::parse(&text)?.restore(&problem, &fingerprint)?
        }
        None => initialize(&problem, &solver_cfg, &step_sched)?,
    };
    let start_t = state.t();
    if start_t > cfg.horizon {
        return Err(CliError::Solver(SolverError::Checkpoint(format!(
            "checkpoint is at t = {start_t}, past the horizon {}",
            cfg.horizon
        ))));
    }
    {
        let first = Observation {
            state: &state,
            alpha: step_sched.alpha(start_t),
            trace: None,
        };
        collector.observe(&first)?;
        tracking.observe(&first)?;
    }
    let final_state = {
        let mut observers = Observers(vec![&mut collector, &mut tracking]);
        run_from(state, &problem, &schedule, &step_sched, &solver_cfg, &mut observers)?
    };

    if let Some(path) = &opts.checkpoint {
        let cp = Checkpoint::capture(&final_state, cfg.seed, &fingerprint);
        fs::write(path, cp.to_text()).map_err(io_error(path))?;
    }

    let records = collector.records.clone();
    let last = *records.last().expect("initial state recorded");
    let mut csv = Vec::new();
    output::write_csv(&mut csv, &records, cfg.log_every, cfg.horizon).expect("in-memory write");
    let envelope = match rate_envelope_fit(&records, cfg.envelope_t_min) {
        Ok(fit) => EnvelopeSummary::Fit(fit),
        Err(e) => EnvelopeSummary::Unavailable {
            unavailable: e.to_string(),
        },
    };
    let summary = RunSummary {
        problem: cfg.problem_name(),
        agents: problem.n_agents(),
        dim: problem.dim(),
        horizon: cfg.horizon,
        start_t,
        seed: cfg.seed,
        alpha_c: step_sched.c(),
        alpha_sigma: step_sched.sigma(),
        beta: cfg.beta,
        window: schedule.window(),
        jointly_connected: connected,
        config_fingerprint: fingerprint,
        reference,
        criterion_relative: collector.is_relative(),
        final_criterion: last.criterion,
        final_consensus_error: last.consensus_error,
        final_feasibility: last.feasibility,
        final_objective_gap: last.objective_gap,
        max_tracking_gap: tracking.max_relative_gap,
        envelope,
        final_x: final_state.x().iter().map(|p| p.as_slice().to_vec()).collect(),
    };
    Ok(RunOutcome {
        records,
        csv: String::from_utf8(csv).expect("ascii"),
        summary,
    })
}

/// `<output>.summary.json` next to the CSV.
pub fn summary_path(output: &Path) -> PathBuf {
    let mut s = output.as_os_str().to_owned();
    s.push(".summary.json");
    PathBuf::from(s)
}

fn cmd_run(cfg: RunConfig, opts: &RunOptions) -> Result<(), CliError> {
    let outcome = execute(&cfg, opts)?;
    let json = outcome.summary.to_json();
    match &cfg.output {
        Some(path) => {
            fs::write(path, &outcome.csv).map_err(io_error(path))?;
            let sp = summary_path(path);
            fs::write(&sp, &json).map_err(io_error(&sp))?;
        }
        None => {
            let stdout = Path::new("<stdout>");
            io::stdout()
                .write_all(outcome.csv.as_bytes())
                .map_err(io_error(stdout))?;
            io::stderr().write_all(json.as_bytes()).map_err(io_error(stdout))?;
        }
    }
    eprintln!(
        "t = {}: criterion {}, consensus error {}",
        cfg.horizon,
        format_number(outcome.summary.final_criterion),
        format_number(outcome.summary.final_consensus_error)
    );
    Ok(())
}

fn cmd_validate_graphs(
    cfg: RunConfig,
    k_max: usize,
    horizon: Option<usize>,
) -> Result<(), CliError> {
    let n = cfg.node_count()?;
    let schedule = cfg.build_schedule(n)?;
    let horizon = horizon.unwrap_or_else(|| probe_horizon(&schedule, n, cfg.horizon));
    let verified = verify_jointly_connected(&schedule, horizon);
    let rows = product_decay_diagnostic(&schedule, k_max).map_err(ConfigError::from)?;
    let mut out = io::stdout().lock();
    let stdout = Path::new("<stdout>");
    let mut emit = |line: String| writeln!(out, "{line}").map_err(io_error(stdout));
    emit(format!("nodes {n} window {} horizon {horizon}", schedule.window()))?;
    emit(format!(
        "jointly strongly connected: {}",
        if verified { "yes" } else { "no" }
    ))?;
    emit("k,spread_a,spread_b".into())?;
    for r in &rows {
        emit(format!(
            "{},{},{}",
            r.k,
            format_number(r.spread_a),
            format_number(r.spread_b)
        ))?;
    }
    if verified {
        Ok(())
    } else {
        Err(CliError::Connectivity(format!(
            "no window of length {} is guaranteed over {horizon} steps",
            schedule.window()
        )))
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run { config, flags } => {
            let mut cfg = RunConfig::load(&config)?;
            cfg.apply(&flags.overrides());
            cmd_run(cfg, &flags.options()?)
        }
        Command::CaseA { flags } => {
            let mut cfg = RunConfig::builtin("case-a");
            cfg.apply(&flags.overrides());
            cmd_run(cfg, &flags.options()?)
        }
        Command::CaseB { flags } => {
            let mut cfg = RunConfig::builtin("case-b");
            cfg.apply(&flags.overrides());
            cmd_run(cfg, &flags.options()?)
        }
        Command::ValidateGraphs {
            config,
            builtin,
            agents,
            seed,
            k_max,
            horizon,
        } => {
            let mut cfg = match (config, builtin) {
                (Some(path), _) => RunConfig::load(&path)?,
                (None, Some(name)) => RunConfig::builtin(&name),
                (None, None) => unreachable!("clap enforces one source"),
            };
            cfg.apply(&Overrides {
                agents,
                seed,
                ..Overrides::default()
            });
            cmd_validate_graphs(cfg, k_max, horizon)
        }
    }
}

/// Parses `args` (including the program name) and runs; returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match dispatch(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
