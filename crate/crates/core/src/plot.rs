//! Deterministic SVG charts and gnuplot data from result CSVs.

use std::fmt::Write as _;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::metrics::MetricsTable;

const W: f64 = 640.0;
const H: f64 = 400.0;
const MARGIN: f64 = 50.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PlotKind {
    /// Evaluation return against env steps, one line per seed.
    Curves,
    /// Abort counts per grid cell from a `row,col,count` CSV.
    Heatmap,
    /// Median hard resets per value of a sweep summary.
    SweepBars,
}

impl FromStr for PlotKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "curves" => Ok(PlotKind::Curves),
            "heatmap" => Ok(PlotKind::Heatmap),
            "sweep_bars" => Ok(PlotKind::SweepBars),
            other => Err(Error::config(
                "kind",
                format!("unknown plot kind {other:?} (expected curves, heatmap or sweep_bars)"),
            )),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Plot {
    pub svg: String,
    /// Whitespace-separated columns for gnuplot.
    pub data: String,
    /// True when the input had no data rows.
    pub empty: bool,
}

pub fn render(csv: &str, kind: PlotKind) -> Result<Plot> {
    match kind {
        PlotKind::Curves => Ok(curves(&MetricsTable::from_csv(csv)?)),
        PlotKind::Heatmap => Ok(heatmap(&parse_histogram(csv)?)),
        PlotKind::SweepBars => {
            let (axis, rows) = parse_summary(csv)?;
            Ok(sweep_bars(&axis, &rows))
        }
    }
}

fn header(title: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="20" font-family="sans-serif" font-size="14" text-anchor="middle">{}</text>"#,
        W / 2.0,
        escape(title)
    );
    s
}

fn axes(s: &mut String, x_label: &str, y_label: &str, x: (f64, f64), y: (f64, f64)) {
    let (x0, y0, x1, y1) = (MARGIN, H - MARGIN, W - MARGIN / 2.0, MARGIN);
    let _ = writeln!(s, r#"<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>"#);
    let _ = writeln!(s, r#"<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>"#);
    let label = |s: &mut String, px: f64, py: f64, anchor: &str, t: &str| {
        let _ = writeln!(
            s,
            r#"<text x="{px:.2}" y="{py:.2}" font-family="sans-serif" font-size="11" text-anchor="{anchor}">{}</text>"#,
            escape(t)
        );
    };
    label(s, x0, y0 + 15.0, "middle", &tick(x.0));
    label(s, x1, y0 + 15.0, "middle", &tick(x.1));
    label(s, x0 - 5.0, y0 + 4.0, "end", &tick(y.0));
    label(s, x0 - 5.0, y1 + 4.0, "end", &tick(y.1));
    label(s, (x0 + x1) / 2.0, H - 10.0, "middle", x_label);
    let _ = writeln!(
        s,
        r#"<text x="14" y="{:.2}" font-family="sans-serif" font-size="11" text-anchor="middle" transform="rotate(-90 14 {:.2})">{}</text>"#,
        H / 2.0,
        H / 2.0,
        escape(y_label)
    );
}

fn tick(v: f64) -> String {
    crate::metrics::format_real(v)
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if lo == hi {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

fn project(v: f64, (lo, hi): (f64, f64), from: f64, to: f64) -> f64 {
    from + (v - lo) / (hi - lo) * (to - from)
}

pub fn curves(table: &MetricsTable) -> Plot {
    let mut seeds: Vec<u64> = table.rows.iter().map(|r| r.seed).collect();
    seeds.sort_unstable();
    seeds.dedup();
    let xr = range(table.rows.iter().map(|r| r.env_steps as f64));
    let xr = (xr.0.min(0.0), xr.1);
    let yr = range(table.rows.iter().map(|r| r.eval_return));
    let yr = (yr.0.min(0.0), yr.1);
    let mut svg = header("evaluation return");
    axes(&mut svg, "env steps", "eval return", xr, yr);
    let mut data = String::new();
    for (i, seed) in seeds.iter().enumerate() {
        let rows: Vec<_> = table.rows.iter().filter(|r| r.seed == *seed).collect();
        let _ = writeln!(data, "# seed {seed}\n# env_steps eval_return hard_resets");
        let mut points = String::new();
        for r in &rows {
            let px = project(r.env_steps as f64, xr, MARGIN, W - MARGIN / 2.0);
            let py = project(r.eval_return, yr, H - MARGIN, MARGIN);
            let _ = write!(points, "{px:.2},{py:.2} ");
            let _ = writeln!(
                data,
                "{} {} {}",
                r.env_steps,
                crate::metrics::format_real(r.eval_return),
                r.hard_resets
            );
        }
        data.push_str("\n\n");
        let _ = writeln!(
            svg,
            r#"<polyline fill="none" stroke="{}" stroke-width="1.5" points="{}"/>"#,
            PALETTE[i % PALETTE.len()],
            points.trim_end()
        );
    }
    svg.push_str("</svg>\n");
    Plot {
        svg,
        data,
        empty: table.rows.is_empty(),
    }
}

pub fn parse_histogram(csv: &str) -> Result<Vec<(usize, usize, u64)>> {
    let mut lines = csv.lines();
    match lines.next() {
        Some("row,col,count") => {}
        other => return Err(Error::Csv(format!("expected header row,col,count, got {other:?}"))),
    }
    lines
        .enumerate()
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, l)| {
            let f: Vec<&str> = l.split(',').collect();
            let bad = || Error::Csv(format!("line {}: {l:?}", i + 2));
            if f.len() != 3 {
                return Err(bad());
            }
            Ok((
                f[0].parse().map_err(|_| bad())?,
                f[1].parse().map_err(|_| bad())?,
                f[2].parse().map_err(|_| bad())?,
            ))
        })
        .collect()
}

/// Grid of cells shaded by count; the darkest cell holds the maximum.
pub fn heatmap(cells: &[(usize, usize, u64)]) -> Plot {
    let rows = cells.iter().map(|c| c.0 + 1).max().unwrap_or(0);
    let cols = cells.iter().map(|c| c.1 + 1).max().unwrap_or(0);
    let max = cells.iter().map(|c| c.2).max().unwrap_or(0);
    let mut svg = header("early aborts per cell");
    let mut data = String::from("# row col count\n");
    if rows > 0 {
        let size = ((W - 2.0 * MARGIN) / cols as f64).min((H - 2.0 * MARGIN) / rows as f64);
        let mut grid = vec![0u64; rows * cols];
        for &(r, c, n) in cells {
            grid[r * cols + c] = n;
        }
        for r in 0..rows {
            for c in 0..cols {
                let n = grid[r * cols + c];
                let shade = if max == 0 { 255 } else { 255 - (n * 255 / max) as u8 };
                let _ = writeln!(
                    svg,
                    r##"<rect x="{:.2}" y="{:.2}" width="{size:.2}" height="{size:.2}" fill="#ff{shade:02x}{shade:02x}" stroke="#999999"><title>({r},{c}) {n}</title></rect>"##,
                    MARGIN + c as f64 * size,
                    MARGIN + r as f64 * size,
                );
                let _ = writeln!(data, "{r} {c} {n}");
            }
            data.push('\n');
        }
    } else {
        axes(&mut svg, "col", "row", (0.0, 1.0), (0.0, 1.0));
    }
    svg.push_str("</svg>\n");
    Plot {
        svg,
        data,
        empty: cells.is_empty(),
    }
}

pub fn parse_summary(csv: &str) -> Result<(String, Vec<(String, f64)>)> {
    let mut lines = csv.lines();
    let head = lines.next().ok_or_else(|| Error::Csv("empty summary".into()))?;
    let cols: Vec<&str> = head.split(',').collect();
    if cols.len() < 2 || cols[1] != "median_hard_resets" {
        return Err(Error::Csv(format!("not a sweep summary header: {head:?}")));
    }
    let rows = lines
        .enumerate()
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, l)| {
            let f: Vec<&str> = l.split(',').collect();
            let v = f.get(1).and_then(|v| v.parse().ok());
            match v {
                Some(v) if f.len() == cols.len() => Ok((f[0].to_string(), v)),
                _ => Err(Error::Csv(format!("line {}: {l:?}", i + 2))),
            }
        })
        .collect::<Result<_>>()?;
    Ok((cols[0].to_string(), rows))
}

pub fn sweep_bars(axis: &str, rows: &[(String, f64)]) -> Plot {
    let yr = (0.0, rows.iter().map(|r| r.1).fold(1.0, f64::max));
    let mut svg = header(&format!("median hard resets by {axis}"));
    axes(&mut svg, axis, "median hard resets", (0.0, rows.len() as f64), yr);
    let mut data = format!("# {axis} median_hard_resets\n");
    let slot = (W - 1.5 * MARGIN) / rows.len().max(1) as f64;
    for (i, (label, v)) in rows.iter().enumerate() {
        let x = MARGIN + i as f64 * slot + slot * 0.15;
        let top = project(*v, yr, H - MARGIN, MARGIN);
        let _ = writeln!(
            svg,
            r#"<rect x="{x:.2}" y="{top:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#,
            slot * 0.7,
            H - MARGIN - top,
            PALETTE[0]
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="11" text-anchor="middle">{}</text>"#,
            x + slot * 0.35,
            H - MARGIN + 28.0,
            escape(label)
        );
        let _ = writeln!(data, "{label} {}", crate::metrics::format_real(*v));
    }
    svg.push_str("</svg>\n");
    Plot {
        svg,
        data,
        empty: rows.is_empty(),
    }
}
