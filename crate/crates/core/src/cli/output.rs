//! CSV rows and the JSON run summary.

use std::io::{self, Write};

use serde::Serialize;

use crate::metrics::{EnvelopeFit, MetricsRecord};

pub const CSV_HEADER: &str = "t,alpha,criterion,consensus_error,feasibility,objective_gap";

const SIGNIFICANT: usize = 12;

/// `%.12g`: 12 significant digits, trailing zeros dropped, exponent form
/// outside `[1e-4, 1e12)`.
pub fn format_number(v: f64) -> String {
    if !v.is_finite() {
        return if v.is_nan() {
            "nan".into()
        } else if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    if v == 0.0 {
        return if v.is_sign_negative() { "-0" } else { "0" }.into();
    }
    let sci = format!("{:.*e}", SIGNIFICANT - 1, v);
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..SIGNIFICANT as i32).contains(&exp) {
        let decimals = (SIGNIFICANT as i32 - 1 - exp).max(0) as usize;
        trim_zeros(format!("{v:.decimals$}"))
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_zeros(mantissa.to_owned()), exp.abs())
    }
}

fn trim_zeros(s: String) -> String {
    if !s.contains('.') {
        return s;
    }
    s.trim_end_matches('0').trim_end_matches('.').to_owned()
}

pub fn csv_row(r: &MetricsRecord) -> String {
    format!(
        "{},{},{},{},{},{}",
        r.t,
        format_number(r.alpha),
        format_number(r.criterion),
        format_number(r.consensus_error),
        format_number(r.feasibility),
        format_number(r.objective_gap)
    )
}

/// Rows at `t >= 1` with `t % every == 0`, plus the final iteration.
pub fn write_csv<W: Write>(
    out: &mut W,
    records: &[MetricsRecord],
    every: u64,
    horizon: u64,
) -> io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in records {
        if r.t >= 1 && (r.t % every == 0 || r.t == horizon) {
            writeln!(out, "{}", csv_row(r))?;
        }
    }
    out.flush()
}

#[derive(Clone, Debug, Serialize)]
pub struct ReferenceSummary {
    pub x_star: Vec<f64>,
    pub f_star: f64,
    /// `declared` or `derived`.
    pub source: &'static str,
}

#[derive(Clone, Debug, Serialize)]
#[serde(untagged)]
pub enum EnvelopeSummary {
    Fit(EnvelopeFit),
    Unavailable { unavailable: String },
}

#[derive(Clone, Debug, Serialize)]
pub struct RunSummary {
    pub problem: String,
    pub agents: usize,
    pub dim: usize,
    pub horizon: u64,
    pub start_t: u64,
    pub seed: u64,
    pub alpha_c: f64,
    pub alpha_sigma: f64,
    pub beta: f64,
    pub window: usize,
    pub jointly_connected: bool,
    pub config_fingerprint: String,
    pub reference: ReferenceSummary,
    pub criterion_relative: bool,
    pub final_criterion: f64,
    pub final_consensus_error: f64,
    pub final_feasibility: f64,
    pub final_objective_gap: f64,
    pub max_tracking_gap: f64,
    pub envelope: EnvelopeSummary,
    pub final_x: Vec<Vec<f64>>,
}

impl RunSummary {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("summary serializes");
        s.push('\n');
        s
    }
}
