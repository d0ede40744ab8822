//! Multi-seed experiments and parameter sweeps, with CSV output.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;

use crate::config::{build_env, ExperimentConfig};
use crate::controller::run_training;
use crate::error::{Error, Result};
use crate::metrics::{format_real, MetricsTable};

/// Everything kept from one seed's run.
#[derive(Clone, Debug, PartialEq)]
pub struct SeedRun {
    pub seed: u64,
    pub metrics: MetricsTable,
    /// `(row, col, count)` for gridworlds.
    pub abort_histogram: Option<Vec<(usize, usize, u64)>>,
    /// `(state, action, member, value)` of the reset ensemble for tabular envs.
    pub reset_q: Option<Vec<(usize, usize, usize, f64)>>,
}

/// Runs every seed of `cfg` in parallel, without touching the filesystem.
pub fn run_seeds(cfg: &ExperimentConfig) -> Result<Vec<SeedRun>> {
    cfg.validate()?;
    let env = build_env(&cfg.env)?;
    let training = cfg.training();
    cfg.seeds
        .par_iter()
        .map(|&seed| {
            let out = run_training(&training, env.as_ref(), cfg.mode, seed)?;
            let abort_histogram = match (out.abort_histogram(), env.grid_width()) {
                (Some(h), Some(w)) => Some(h.iter().enumerate().map(|(i, &c)| (i / w, i % w, c)).collect()),
                _ => None,
            };
            Ok(SeedRun {
                seed,
                abort_histogram,
                reset_q: out.reset.ensemble().table_rows(),
                metrics: out.metrics,
            })
        })
        .collect()
}

/// Writes `contents` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path
        .file_name()
        .ok_or_else(|| Error::InvalidState(format!("{} is not a file path", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp", name.to_string_lossy()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn histogram_csv(rows: &[(usize, usize, u64)]) -> String {
    let mut out = String::from("row,col,count\n");
    for (r, c, n) in rows {
        out.push_str(&format!("{r},{c},{n}\n"));
    }
    out
}

pub fn q_table_csv(rows: &[(usize, usize, usize, f64)]) -> String {
    let mut out = String::from("state,action,member,value\n");
    for (s, a, k, v) in rows {
        out.push_str(&format!("{s},{a},{k},{}\n", format_real(*v)));
    }
    out
}

fn manifest(cfg: &ExperimentConfig) -> String {
    format!(
        "# resetrl {} resolved configuration\n{}",
        env!("CARGO_PKG_VERSION"),
        cfg.to_toml()
    )
}

fn write_seed_files(dir: &Path, run: &SeedRun) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    let path = dir.join(format!("seed_{}.csv", run.seed));
    write_atomic(&path, run.metrics.to_csv().as_bytes())?;
    written.push(path);
    if let Some(h) = &run.abort_histogram {
        let path = dir.join(format!("aborts_seed_{}.csv", run.seed));
        write_atomic(&path, histogram_csv(h).as_bytes())?;
        written.push(path);
    }
    if let Some(q) = &run.reset_q {
        let path = dir.join(format!("reset_q_seed_{}.csv", run.seed));
        write_atomic(&path, q_table_csv(q).as_bytes())?;
        written.push(path);
    }
    Ok(written)
}

#[derive(Clone, Debug)]
pub struct ExperimentReport {
    pub dir: PathBuf,
    pub runs: Vec<SeedRun>,
    pub files: Vec<PathBuf>,
}

/// Runs all seeds and writes one metrics CSV per seed plus `manifest.toml`
/// into the config's output directory.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let runs = run_seeds(cfg)?;
    let dir = cfg.output_path();
    let mut files = Vec::new();
    for run in &runs {
        files.extend(write_seed_files(&dir, run)?);
    }
    let path = dir.join("manifest.toml");
    write_atomic(&path, manifest(cfg).as_bytes())?;
    files.push(path);
    Ok(ExperimentReport { dir, runs, files })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepAxis {
    QMin,
    ResetAttempts,
    EnsembleSize,
    Strategy,
    Mode,
}

impl SweepAxis {
    pub const ALL: [SweepAxis; 5] = [
        SweepAxis::QMin,
        SweepAxis::ResetAttempts,
        SweepAxis::EnsembleSize,
        SweepAxis::Strategy,
        SweepAxis::Mode,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::QMin => "q_min",
            SweepAxis::ResetAttempts => "reset_attempts",
            SweepAxis::EnsembleSize => "ensemble_size",
            SweepAxis::Strategy => "strategy",
            SweepAxis::Mode => "mode",
        }
    }

    /// Copy of `cfg` with this axis set to `value`.
    pub fn apply(self, cfg: &ExperimentConfig, value: &str) -> Result<ExperimentConfig> {
        let bad = |msg: String| Error::config(self.name(), msg);
        let mut out = cfg.clone();
        match self {
            SweepAxis::QMin => {
                out.lnt.q_min = value.parse().map_err(|_| bad(format!("{value:?} is not a number")))?
            }
            SweepAxis::ResetAttempts => {
                out.lnt.reset_attempts = value.parse().map_err(|_| bad(format!("{value:?} is not an integer")))?
            }
            SweepAxis::EnsembleSize => {
                out.lnt.ensemble_size = value.parse().map_err(|_| bad(format!("{value:?} is not an integer")))?
            }
            SweepAxis::Strategy => out.lnt.strategy = value.parse().map_err(bad)?,
            SweepAxis::Mode => out.mode = value.parse().map_err(bad)?,
        }
        out.output_dir = cfg.output_dir.join(format!("{}={value}", self.name()));
        out.validate()?;
        Ok(out)
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SweepAxis::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| {
                Error::config(
                    "axis",
                    format!("unknown axis {s:?} (expected q_min, reset_attempts, ensemble_size, strategy or mode)"),
                )
            })
    }
}

/// Median with the usual midpoint rule for even counts. Infinite entries
/// stand for runs that never reached a value.
pub fn median(values: &[f64]) -> f64 {
    assert!(!values.is_empty(), "median of nothing");
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else if v[n / 2 - 1] == v[n / 2] {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub value: String,
    pub median_hard_resets: f64,
    pub median_eval_return: f64,
    /// `None` when the median run never reached the solve threshold.
    pub median_steps_to_solve: Option<f64>,
    pub runs: Vec<SeedRun>,
}

/// Medians across seeds of the final counters and steps-to-solve.
pub fn summarize(value: &str, runs: Vec<SeedRun>, threshold: Option<f64>) -> SweepRow {
    let hard: Vec<f64> = runs.iter().map(|r| r.metrics.final_hard_resets() as f64).collect();
    let ret: Vec<f64> = runs.iter().map(|r| r.metrics.final_eval_return()).collect();
    let steps: Vec<f64> = runs
        .iter()
        .map(|r| {
            threshold
                .and_then(|t| r.metrics.steps_to_solve(t))
                .map_or(f64::INFINITY, |s| s as f64)
        })
        .collect();
    let s = median(&steps);
    SweepRow {
        value: value.to_string(),
        median_hard_resets: median(&hard),
        median_eval_return: median(&ret),
        median_steps_to_solve: s.is_finite().then_some(s),
        runs,
    }
}

#[derive(Clone, Debug)]
pub struct SweepSummary {
    pub axis: SweepAxis,
    pub rows: Vec<SweepRow>,
}

impl SweepSummary {
    pub fn to_csv(&self) -> String {
        let mut out = format!("{},median_hard_resets,median_eval_return,median_steps_to_solve,seeds\n", self.axis);
        for row in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                row.value,
                format_real(row.median_hard_resets),
                format_real(row.median_eval_return),
                row.median_steps_to_solve.map(format_real).unwrap_or_default(),
                row.runs.len()
            ));
        }
        out
    }
}

/// Runs every value of `axis` for every seed, in memory.
pub fn sweep_runs(cfg: &ExperimentConfig, axis: SweepAxis, values: &[String]) -> Result<SweepSummary> {
    if values.is_empty() {
        return Err(Error::config("values", "sweep needs at least one value"));
    }
    let cells: Vec<ExperimentConfig> = values
        .iter()
        .map(|v| axis.apply(cfg, v))
        .collect::<Result<_>>()?;
    let threshold = cfg.resolved_solve_threshold()?;
    let results: Vec<Result<Vec<SeedRun>>> = cells.par_iter().map(run_seeds).collect();
    let mut rows = Vec::with_capacity(values.len());
    for (v, runs) in values.iter().zip(results) {
        rows.push(summarize(v, runs?, threshold));
    }
    Ok(SweepSummary { axis, rows })
}

/// [`sweep_runs`], then writes per-cell seed CSVs, a manifest per cell and
/// `summary_<axis>.csv` under the config's output directory.
pub fn run_sweep(cfg: &ExperimentConfig, axis: SweepAxis, values: &[String]) -> Result<(SweepSummary, PathBuf)> {
    let summary = sweep_runs(cfg, axis, values)?;
    for (row, v) in summary.rows.iter().zip(values) {
        let cell = axis.apply(cfg, v)?;
        let dir = cell.output_path();
        for run in &row.runs {
            write_seed_files(&dir, run)?;
        }
        write_atomic(&dir.join("manifest.toml"), manifest(&cell).as_bytes())?;
    }
    let path = cfg.output_path().join(format!("summary_{axis}.csv"));
    write_atomic(&path, summary.to_csv().as_bytes())?;
    Ok((summary, path))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_rules() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert_eq!(median(&[1.0, f64::INFINITY, f64::INFINITY]), f64::INFINITY);
        assert_eq!(median(&[1.0, f64::INFINITY]), f64::INFINITY);
    }

    #[test]
    fn axis_parsing_and_application() {
        let cfg = ExperimentConfig::for_env("corridor3");
        let a: SweepAxis = "reset_attempts".parse().unwrap();
        assert_eq!(a.apply(&cfg, "4").unwrap().lnt.reset_attempts, 4);
        assert!(a.apply(&cfg, "0").is_err());
        assert!("gamma".parse::<SweepAxis>().is_err());
        let s = SweepAxis::Strategy.apply(&cfg, "optimistic").unwrap();
        assert_eq!(s.lnt.strategy.name(), "optimistic");
    }

    #[test]
    fn empty_sweep_is_an_error() {
        let cfg = ExperimentConfig::for_env("corridor3");
        assert!(sweep_runs(&cfg, SweepAxis::QMin, &[]).is_err());
    }

    #[test]
    fn atomic_write_leaves_no_temp() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a/b.csv");
        write_atomic(&p, b"x\n").unwrap();
        write_atomic(&p, b"y\n").unwrap();
        assert_eq!(fs::read(&p).unwrap(), b"y\n");
        assert_eq!(fs::read_dir(p.parent().unwrap()).unwrap().count(), 1);
    }
}
