//! Per-evaluation metrics rows and their CSV form.
//!
//! The CSV layout is fixed: header
//! `env_steps,episodes,hard_resets,early_aborts,eval_return,seed`, LF line
//! endings, reals with six significant digits.

use std::fmt::Write as _;

use crate::error::{Error, Result};

pub const METRICS_HEADER: &str = "env_steps,episodes,hard_resets,early_aborts,eval_return,seed";

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricsRecord {
    pub env_steps: u64,
    pub episodes: u64,
    pub hard_resets: u64,
    pub early_aborts: u64,
    pub eval_return: f64,
    pub seed: u64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct MetricsTable {
    pub rows: Vec<MetricsRecord>,
}

impl MetricsTable {
    pub fn last(&self) -> Option<&MetricsRecord> {
        self.rows.last()
    }

    pub fn final_hard_resets(&self) -> u64 {
        self.last().map_or(0, |r| r.hard_resets)
    }

    pub fn final_eval_return(&self) -> f64 {
        self.last().map_or(0.0, |r| r.eval_return)
    }

    /// Env steps at the first evaluation reaching `threshold`.
    pub fn steps_to_solve(&self, threshold: f64) -> Option<u64> {
        self.rows
            .iter()
            .find(|r| r.eval_return >= threshold)
            .map(|r| r.env_steps)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(32 * (self.rows.len() + 1));
        out.push_str(METRICS_HEADER);
        out.push('\n');
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                r.env_steps,
                r.episodes,
                r.hard_resets,
                r.early_aborts,
                format_real(r.eval_return),
                r.seed
            )
            .expect("writing to a String");
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        match lines.next() {
            Some(h) if h.trim_end() == METRICS_HEADER => {}
            Some(h) => return Err(Error::Csv(format!("unexpected header {h:?}"))),
            None => return Err(Error::Csv("empty metrics file".into())),
        }
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 6 {
                return Err(Error::Csv(format!("line {}: expected 6 fields", i + 2)));
            }
            let int = |s: &str| {
                s.trim()
                    .parse::<u64>()
                    .map_err(|e| Error::Csv(format!("line {}: {e}", i + 2)))
            };
            rows.push(MetricsRecord {
                env_steps: int(f[0])?,
                episodes: int(f[1])?,
                hard_resets: int(f[2])?,
                early_aborts: int(f[3])?,
                eval_return: f[4]
                    .trim()
                    .parse()
                    .map_err(|e| Error::Csv(format!("line {}: {e}", i + 2)))?,
                seed: int(f[5])?,
            });
        }
        Ok(MetricsTable { rows })
    }
}

/// Formats like C's `%.6g`: six significant digits, trailing zeros
/// dropped, exponent form outside `[1e-4, 1e6)`.
pub fn format_real(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    const SIG: i32 = 6;
    let sci = format!("{:.*e}", (SIG - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= SIG {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (SIG - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}
