//! Text checkpoints that resume bit-identically.
//!
//! ```text
//! cpush-checkpoint 1
//! t 1200
//! seed 7
//! config 3f9a...            # SHA-256 config fingerprint
//! agents 8 dim 3
//! x 0 3ff0000000000000 ...  # IEEE-754 bit patterns, hex
//! y 0 ...
//! ```
//!
//! Every `x` line precedes the `y` lines; agents appear in index order.

use std::fmt::Write as _;

use super::{NetworkState, SolverError};
use crate::point::Point;
use crate::problem::ConstrainedProblem;

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub t: u64,
    pub seed: u64,
    pub config_hash: String,
    pub x: Vec<Point>,
    pub y: Vec<Point>,
}

impl Checkpoint {
    pub fn capture(state: &NetworkState, seed: u64, config_hash: &str) -> Self {
        Checkpoint {
            t: state.t(),
            seed,
            config_hash: config_hash.to_owned(),
            x: state.x().to_vec(),
            y: state.y().to_vec(),
        }
    }

    /// Rebuilds the state, refusing checkpoints taken under another config.
    pub fn restore(
        &self,
        p: &ConstrainedProblem,
        expected_hash: &str,
    ) -> Result<NetworkState, SolverError> {
        if self.config_hash != expected_hash {
            return Err(SolverError::Checkpoint(format!(
                "config fingerprint {} does not match current {}",
                self.config_hash, expected_hash
            )));
        }
        NetworkState::from_parts(p, self.t, self.x.clone(), self.y.clone())
            .map_err(|e| SolverError::Checkpoint(e.to_string()))
    }

    pub fn to_text(&self) -> String {
        let dim = self.x.first().map_or(0, Point::dim);
        let mut s = String::new();
        let _ = writeln!(s, "cpush-checkpoint {CHECKPOINT_VERSION}");
        let _ = writeln!(s, "t {}", self.t);
        let _ = writeln!(s, "seed {}", self.seed);
        let _ = writeln!(s, "config {}", self.config_hash);
        let _ = writeln!(s, "agents {} dim {}", self.x.len(), dim);
        for (tag, pts) in [("x", &self.x), ("y", &self.y)] {
            for (i, p) in pts.iter().enumerate() {
                let _ = write!(s, "{tag} {i}");
                for v in p.iter() {
                    let _ = write!(s, " {:016x}", v.to_bits());
                }
                s.push('\n');
            }
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self, SolverError> {
        let err = |line: usize, msg: &str| SolverError::Checkpoint(format!("line {line}: {msg}"));
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
        let mut header = |key: &str| -> Result<(usize, Vec<String>), SolverError> {
            let (no, line) = lines.next().ok_or_else(|| err(0, "truncated header"))?;
            let mut fields = line.split_whitespace();
            if fields.next() != Some(key) {
                return Err(err(no, &format!("expected `{key}`")));
            }
            Ok((no, fields.map(str::to_owned).collect()))
        };
        let (no, version) = header("cpush-checkpoint")?;
        if version.first().map(String::as_str) != Some(&CHECKPOINT_VERSION.to_string()) {
            return Err(err(no, "unsupported checkpoint version"));
        }
        let parse_u64 = |no: usize, f: &[String]| -> Result<u64, SolverError> {
            f.first()
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| err(no, "expected an integer"))
        };
        let (no, f) = header("t")?;
        let t = parse_u64(no, &f)?;
        let (no, f) = header("seed")?;
        let seed = parse_u64(no, &f)?;
        let (no, f) = header("config")?;
        let config_hash = f.first().cloned().ok_or_else(|| err(no, "missing hash"))?;
        let (no, f) = header("agents")?;
        if f.len() != 3 || f[1] != "dim" {
            return Err(err(no, "expected `agents N dim n`"));
        }
        let n: usize = f[0].parse().map_err(|_| err(no, "bad agent count"))?;
        let dim: usize = f[2].parse().map_err(|_| err(no, "bad dimension"))?;

        let mut read_block = |tag: &str| -> Result<Vec<Point>, SolverError> {
            (0..n)
                .map(|i| {
                    let (no, line) = lines.next().ok_or_else(|| err(0, "truncated body"))?;
                    let mut fields = line.split_whitespace();
                    if fields.next() != Some(tag)
                        || fields.next().and_then(|v| v.parse::<usize>().ok()) != Some(i)
                    {
                        return Err(err(no, &format!("expected `{tag} {i}`")));
                    }
                    let coords = fields
                        .map(|h| {
                            u64::from_str_radix(h, 16)
                                .map(f64::from_bits)
                                .map_err(|_| err(no, "bad hex float"))
                        })
                        .collect::<Result<Vec<_>, _>>()?;
                    if coords.len() != dim {
                        return Err(err(no, "wrong coordinate count"));
                    }
                    Ok(Point::new(coords))
                })
                .collect()
        };
        let x = read_block("x")?;
        let y = read_block("y")?;
        Ok(Checkpoint {
            t,
            seed,
            config_hash,
            x,
            y,
        })
    }
}
