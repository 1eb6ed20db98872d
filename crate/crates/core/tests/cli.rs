use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use cpush::cli::CSV_HEADER;
use cpush::problem::case_b_problem;
use cpush::solver::{reference_optimum, SolverConfig};
use serde_json::Value;
use tempfile::TempDir;

fn cpush(args: &[&str]) -> Output {
    cpush_env(args, &[])
}

fn cpush_env(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_cpush"));
    cmd.args(args).env_remove("CPUSH_THREADS");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn summary(csv: &Path) -> Value {
    let text = fs::read_to_string(cpush::cli::summary_path(csv)).unwrap();
    serde_json::from_str(&text).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn criteria(csv: &Path) -> Vec<f64> {
    fs::read_to_string(csv)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(2).unwrap().parse().unwrap())
        .collect()
}

#[test]
fn missing_config_is_a_config_error() {
    let out = cpush(&["run", "--config", "/definitely/not/here.toml"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("not/here.toml"));
}

#[test]
fn parse_errors_report_line_and_field() {
    let dir = TempDir::new().unwrap();
    let bad = write(dir.path(), "bad.toml", "horizon = 5\nbeta = \n");
    let out = cpush(&["run", "--config", s(&bad)]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("line 2"), "{}", stderr(&out));

    let bad = write(dir.path(), "beta.toml", "beta = 2.5\n[problem]\nbuiltin = \"case-a\"\n");
    let out = cpush(&["run", "--config", s(&bad)]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("beta"), "{}", stderr(&out));

    let out = cpush(&["case-a", "--alpha-sigma", "0.4"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("alpha.sigma"));

    assert_eq!(code(&cpush(&["case-a", "--no-such-flag"])), 2);
    assert_eq!(code(&cpush_env(&["case-a", "--horizon", "1"], &[("CPUSH_THREADS", "lots")])), 2);
}

#[test]
fn zero_horizon_writes_header_and_initial_summary() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "t0.toml", "version = 1\nhorizon = 0\n[problem]\nbuiltin = \"case-a\"\n");
    let csv = dir.path().join("t0.csv");
    let out = cpush(&["run", "--config", s(&cfg), "--output", s(&csv)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(fs::read_to_string(&csv).unwrap(), format!("{CSV_HEADER}\n"));
    let sum = summary(&csv);
    let x0 = sum["final_x"][0].as_array().unwrap();
    let x0: Vec<f64> = x0.iter().map(|v| v.as_f64().unwrap()).collect();
    assert_eq!(x0, [-0.5, -1.0, 1.25]);
    assert!(sum["envelope"]["unavailable"].is_string());
}

#[test]
fn case_a_defaults_converge_and_are_reproducible() {
    let dir = TempDir::new().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let c = dir.path().join("c.csv");
    assert_eq!(code(&cpush(&["case-a", "--output", s(&a)])), 0);
    assert_eq!(code(&cpush(&["case-a", "--output", s(&b)])), 0);
    assert_eq!(code(&cpush_env(&["case-a", "--output", s(&c)], &[("CPUSH_THREADS", "4")])), 0);
    let bytes = fs::read(&a).unwrap();
    assert_eq!(bytes, fs::read(&b).unwrap());
    assert_eq!(bytes, fs::read(&c).unwrap());
    assert_eq!(
        fs::read(cpush::cli::summary_path(&a)).unwrap(),
        fs::read(cpush::cli::summary_path(&b)).unwrap()
    );
    let text = String::from_utf8(bytes).unwrap();
    assert!(text.ends_with('\n'));
    assert_eq!(text.lines().count(), 501);
    assert!(text.lines().skip(1).all(|l| l.split(',').count() == 6));
    let sum = summary(&a);
    assert!(sum["final_criterion"].as_f64().unwrap() < 5e-2);
    assert_eq!(sum["envelope"]["violations"].as_u64(), Some(0));
    for x in sum["final_x"].as_array().unwrap() {
        let x: Vec<f64> = x.as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
        assert!((x[0] - 1.0).abs() < 1e-2 && (x[1] - 0.5).abs() < 1e-2 && (x[2] - 3.0).abs() < 1e-2);
    }
}

#[test]
fn large_beta_still_converges() {
    let dir = TempDir::new().unwrap();
    let csv = dir.path().join("b19.csv");
    let out = cpush(&["case-a", "--beta", "1.9", "--horizon", "20000", "--output", s(&csv)]);
    assert_eq!(code(&out), 0);
    let c = criteria(&csv);
    assert!(c.windows(2).all(|w| w[1] < w[0]), "criterion not decreasing");
    assert!(*c.last().unwrap() < 5e-2);
}

#[test]
fn exact_flag_uses_published_constant() {
    let dir = TempDir::new().unwrap();
    let csv = dir.path().join("pe.csv");
    let out = cpush(&["case-a", "--paper-exact", "--horizon", "4000", "--output", s(&csv)]);
    assert_eq!(code(&out), 0);
    assert_eq!(summary(&csv)["alpha_c"].as_f64(), Some(1e-3));
    let c = criteria(&csv);
    assert!(c.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn scaled_case_b_tracks_its_derived_optimum() {
    let p = case_b_problem(20).unwrap();
    assert!(p.optimum().is_none());
    let x_ref = reference_optimum(&p, &SolverConfig::default(), 200_000).unwrap();
    assert!(p.box_intersection().unwrap().contains(&x_ref));
    for a in p.agents() {
        assert!(a.constraint.eval(&x_ref) <= 1e-9);
    }

    let dir = TempDir::new().unwrap();
    let csv = dir.path().join("b20.csv");
    let out = cpush(&[
        "case-b", "--agents", "20", "--horizon", "20000", "--log-every", "2000", "--output", s(&csv),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let sum = summary(&csv);
    assert_eq!(sum["reference"]["source"], "derived");
    assert_eq!(sum["agents"], 20);
    assert!(sum["jointly_connected"].as_bool().unwrap());
    let star: Vec<f64> = sum["reference"]["x_star"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .collect();
    for (a, b) in star.iter().zip(x_ref.iter()) {
        assert!((a - b).abs() < 1e-12);
    }
    // The intersection is wide at this size, so progress is gradient-driven
    // and slow: the agents agree early and then drift toward the optimum.
    let c = criteria(&csv);
    assert!(c.windows(2).all(|w| w[1] < w[0]), "{c:?}");
    assert!(*c.last().unwrap() < c[0] / 2.0);
    assert!(sum["final_consensus_error"].as_f64().unwrap() < 1e-3);
}

#[test]
fn numerical_failure_exits_three() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        dir.path(),
        "blowup.toml",
        r#"
horizon = 10
[alpha]
c = 1e10
[[problem.agents]]
objective = { quad = [1e300], linear = [1.0] }
constraint = { quad = [0.0], linear = [1.0], offset = -10.0 }
set = { lower = [-5.0], upper = [5.0] }
[graph]
kind = "self-loops"
"#,
    );
    let out = cpush(&["run", "--config", s(&cfg), "--output", s(&dir.path().join("x.csv"))]);
    assert_eq!(code(&out), 3);
    let err = stderr(&out);
    assert!(err.contains("agent 0") && err.contains('y'), "{err}");
}

#[test]
fn validate_graphs_exit_codes() {
    let out = cpush(&["validate-graphs", "--builtin", "case-a"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("window 4") && text.contains("k,spread_a,spread_b"));
    assert_eq!(text.lines().filter(|l| l.starts_with(|c: char| c.is_ascii_digit())).count(), 41);

    let dir = TempDir::new().unwrap();
    let loops = write(
        dir.path(),
        "loops.toml",
        "agents = 5\n[graph]\nkind = \"self-loops\"\n",
    );
    let out = cpush(&["validate-graphs", "--config", s(&loops)]);
    assert_eq!(code(&out), 4);

    let complete = write(
        dir.path(),
        "complete.toml",
        "agents = 5\n[graph]\nkind = \"complete\"\n",
    );
    let out = cpush(&["validate-graphs", "--config", s(&complete), "--k-max", "3"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    let row0 = text.lines().find(|l| l.starts_with("0,")).unwrap();
    let spread: Vec<f64> = row0.split(',').skip(1).map(|v| v.parse().unwrap()).collect();
    assert!(spread.iter().all(|v| v.abs() < 1e-15), "{row0}");

    let out = cpush(&["validate-graphs", "--builtin", "case-b", "--agents", "30", "--seed", "4"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
}

#[test]
fn rotating_edge_list_files_resolve_relative_to_config() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "g0.txt", "# half ring\nn 4\n1 0\n3 2\n");
    write(dir.path(), "g1.txt", "n 4\n2 1\n0 3\n");
    let body = |files: &str| {
        format!(
            r#"
horizon = 3000
log_every = 500
[[problem.agents]]
objective = {{ quad = [1.0], linear = [-1.0] }}
constraint = {{ quad = [0.0], linear = [1.0], offset = -0.5 }}
set = {{ lower = [-2.0], upper = [2.0] }}
[[problem.agents]]
objective = {{ quad = [1.0], linear = [0.0] }}
constraint = {{ quad = [1.0], linear = [0.0], offset = -4.0 }}
set = {{ lower = [-1.0], upper = [3.0] }}
[[problem.agents]]
objective = {{ quad = [0.5], linear = [0.5] }}
constraint = {{ quad = [0.0], linear = [-1.0], offset = -1.0 }}
set = {{ lower = [-3.0], upper = [1.0] }}
[[problem.agents]]
objective = {{ quad = [2.0], linear = [-2.0], logistic = {{ label = 1.0, features = [1.0] }} }}
constraint = {{ quad = [0.0], linear = [1.0], offset = -2.0 }}
set = {{ lower = [-2.0], upper = [2.0] }}
[graph]
kind = "rotating"
files = [{files}]
"#
        )
    };
    let sub = dir.path().join("configs");
    fs::create_dir(&sub).unwrap();
    let good = write(&sub, "ok.toml", &body("\"../g0.txt\", \"../g1.txt\""));
    let csv = dir.path().join("r.csv");
    let out = cpush(&["run", "--config", s(&good), "--output", s(&csv)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let sum = summary(&csv);
    assert_eq!(sum["window"], 2);
    assert!(sum["jointly_connected"].as_bool().unwrap());
    assert_eq!(sum["reference"]["source"], "derived");
    assert!(sum["final_criterion"].as_f64().unwrap() < 5e-2);

    let missing = write(&sub, "missing.toml", &body("\"../g0.txt\", \"../nope.txt\""));
    let out = cpush(&["run", "--config", s(&missing)]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("nope.txt"));
}

#[test]
fn disconnected_schedule_warns_but_runs() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        dir.path(),
        "iso.toml",
        r#"
horizon = 50
[[problem.agents]]
objective = { quad = [1.0], linear = [0.0] }
constraint = { quad = [0.0], linear = [1.0], offset = -1.0 }
set = { lower = [-1.0], upper = [1.0] }
[[problem.agents]]
objective = { quad = [1.0], linear = [0.0] }
constraint = { quad = [0.0], linear = [1.0], offset = -1.0 }
set = { lower = [-1.0], upper = [1.0] }
[problem]
optimum = [0.0]
[graph]
kind = "self-loops"
"#,
    );
    let out = cpush(&["run", "--config", s(&cfg), "--output", s(&dir.path().join("iso.csv"))]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(stderr(&out).contains("warning"));
    assert_eq!(summary(&dir.path().join("iso.csv"))["criterion_relative"], false);
}

#[test]
fn checkpoint_and_resume_match_a_straight_run() {
    let dir = TempDir::new().unwrap();
    let cp = dir.path().join("state.ckpt");
    let straight = dir.path().join("straight.csv");
    let first = dir.path().join("first.csv");
    let second = dir.path().join("second.csv");
    assert_eq!(code(&cpush(&["case-a", "--horizon", "3000", "--output", s(&straight)])), 0);
    let out = cpush(&[
        "case-a", "--horizon", "1234", "--output", s(&first), "--checkpoint", s(&cp),
    ]);
    assert_eq!(code(&out), 0);
    assert!(fs::read_to_string(&cp).unwrap().starts_with("cpush-checkpoint 1\n"));
    let out = cpush(&[
        "case-a", "--horizon", "3000", "--output", s(&second), "--resume", s(&cp),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(summary(&second)["final_x"], summary(&straight)["final_x"]);
    assert_eq!(summary(&second)["start_t"], 1234);

    // Criterion rows after the resume point match the straight run.
    let tail = |p: &Path| -> Vec<String> {
        fs::read_to_string(p)
            .unwrap()
            .lines()
            .skip(1)
            .filter(|l| l.split(',').next().unwrap().parse::<u64>().unwrap() > 1234)
            .map(|l| l.split(',').take(3).collect::<Vec<_>>().join(","))
            .collect()
    };
    assert_eq!(tail(&second), tail(&straight));

    let out = cpush(&["case-a", "--beta", "1.5", "--horizon", "3000", "--resume", s(&cp)]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("fingerprint"));
}

#[test]
fn shipped_configs_load_and_validate() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for name in ["case_a.toml", "case_b.toml", "rotating_ring.toml"] {
        let out = cpush(&["validate-graphs", "--config", s(&root.join(name)), "--k-max", "8"]);
        assert_eq!(code(&out), 0, "{name}: {}", stderr(&out));
    }
    let dir = TempDir::new().unwrap();
    let csv = dir.path().join("ring.csv");
    let out = cpush(&[
        "run", "--config", s(&root.join("rotating_ring.toml")), "--output", s(&csv),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(summary(&csv)["final_criterion"].as_f64().unwrap() < 5e-2);
}
