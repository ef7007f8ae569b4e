//! Tables, sweep plots and run provenance.
//!
//! Numbers are rounded only here. CSV and text use fixed decimals; JSONL
//! carries the raw values.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::bench::{BenchReport, BottleneckResult, ModeSummary};
use crate::calibrate::SweepPoint;
use crate::error::{Error, Result};
use crate::router::Mode;

pub const BENCHMARK_COLUMNS: [&str; 5] = ["model", "its", "speedup", "map", "map_loss_pct"];
pub const ROUTING_COLUMNS: [&str; 4] = ["model", "cheap_path_rate", "escalated_rate", "threshold"];
pub const BOTTLENECK_COLUMNS: [&str; 7] = [
    "res_high",
    "res_low",
    "fps_high",
    "fps_low",
    "pixel_ratio",
    "fps_ratio",
    "verdict",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputDigest {
    pub name: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub config: Value,
    pub inputs: Vec<InputDigest>,
    /// Absent for commands that draw no random numbers.
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeSweep {
    pub mode: Mode,
    pub points: Vec<SweepPoint>,
    /// Threshold of the chosen operating point, if one was chosen.
    pub selected: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportBundle {
    pub bench: Option<BenchReport>,
    pub sweeps: Vec<ModeSweep>,
    pub bottleneck: Option<BottleneckResult>,
    pub provenance: Provenance,
}

impl ReportBundle {
    pub fn new(provenance: Provenance) -> Self {
        Self {
            bench: None,
            sweeps: Vec::new(),
            bottleneck: None,
            provenance,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableKind {
    Benchmark,
    Routing,
    Bottleneck,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Jsonl,
    Text,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Fixed-decimal formatting that never prints a negative zero.
pub fn fixed(v: f64, decimals: usize) -> String {
    let s = format!("{v:.decimals$}");
    match s.strip_prefix('-') {
        Some(rest) if rest.bytes().all(|b| b == b'0' || b == b'.') => rest.to_string(),
        _ => s,
    }
}

/// "1.85x"
pub fn format_speedup(v: f64) -> String {
    format!("{}x", fixed(v, 2))
}

/// "-5.51%"
pub fn format_loss_pct(v: f64) -> String {
    format!("{}%", fixed(v, 2))
}

struct Table {
    columns: Vec<&'static str>,
    rows: Vec<Vec<String>>,
    records: Vec<Value>,
}

fn bench_rows(bench: &BenchReport) -> Result<Vec<&ModeSummary>> {
    let rows: Vec<_> = bench.rows().collect();
    if rows.is_empty() {
        return Err(Error::MissingSection("benchmark"));
    }
    Ok(rows)
}

fn benchmark_table(bench: &BenchReport) -> Result<Table> {
    let compared = bench.speedup.is_some() && bench.map_loss_pct.is_some();
    let mut rows = Vec::new();
    let mut records = Vec::new();
    let mut push = |m: &ModeSummary, speedup: Option<f64>, loss: Option<f64>| {
        rows.push(vec![
            m.label.clone(),
            fixed(m.its, 2),
            speedup.map(|v| fixed(v, 2)).unwrap_or_default(),
            fixed(m.map_50_95, 3),
            loss.map(|v| fixed(v, 2)).unwrap_or_default(),
        ]);
        records.push(json!({
            "model": m.label,
            "its": m.its,
            "speedup": speedup,
            "map": m.map_50_95,
            "map_loss_pct": loss,
        }));
    };
    if let Some(b) = &bench.baseline {
        push(b, compared.then_some(1.0), compared.then_some(0.0));
    }
    if let Some(a) = &bench.adaptive {
        push(a, bench.speedup.filter(|_| compared), bench.map_loss_pct.filter(|_| compared));
    }
    if rows.is_empty() {
        return Err(Error::MissingSection("benchmark"));
    }
    Ok(Table {
        columns: BENCHMARK_COLUMNS.to_vec(),
        rows,
        records,
    })
}

fn routing_table(bench: &BenchReport) -> Result<Table> {
    let mut rows = Vec::new();
    let mut records = Vec::new();
    for m in bench_rows(bench)? {
        let r = &m.routing;
        rows.push(vec![
            m.label.clone(),
            fixed(r.cheap_path_rate, 3),
            fixed(r.escalated_rate, 3),
            fixed(r.threshold.value(), 3),
        ]);
        records.push(json!({
            "model": m.label,
            "cheap_path_rate": r.cheap_path_rate,
            "escalated_rate": r.escalated_rate,
            "threshold": r.threshold.value(),
        }));
    }
    Ok(Table {
        columns: ROUTING_COLUMNS.to_vec(),
        rows,
        records,
    })
}

fn bottleneck_table(b: &BottleneckResult) -> Table {
    Table {
        columns: BOTTLENECK_COLUMNS.to_vec(),
        rows: vec![vec![
            b.res_high.to_string(),
            b.res_low.to_string(),
            fixed(b.fps_high, 2),
            fixed(b.fps_low, 2),
            fixed(b.pixel_ratio, 2),
            fixed(b.fps_ratio, 2),
            b.verdict.as_str().to_string(),
        ]],
        records: vec![json!({
            "res_high": b.res_high,
            "res_low": b.res_low,
            "fps_high": b.fps_high,
            "fps_low": b.fps_low,
            "pixel_ratio": b.pixel_ratio,
            "fps_ratio": b.fps_ratio,
            "verdict": b.verdict.as_str(),
        })],
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn render(table: &Table, kind: TableKind, format: Format) -> String {
    let mut out = String::new();
    match format {
        Format::Csv => {
            out.push_str(&table.columns.join(","));
            out.push('\n');
            for row in &table.rows {
                let fields: Vec<_> = row.iter().map(|f| csv_field(f)).collect();
                out.push_str(&fields.join(","));
                out.push('\n');
            }
        }
        Format::Jsonl => {
            for rec in &table.records {
                out.push_str(&rec.to_string());
                out.push('\n');
            }
        }
        Format::Text => {
            let mut rows = table.rows.clone();
            if kind == TableKind::Benchmark {
                for row in &mut rows {
                    if !row[2].is_empty() {
                        row[2].push('x');
                    }
                    if !row[4].is_empty() {
                        row[4].push('%');
                    }
                }
            }
            let widths: Vec<usize> = (0..table.columns.len())
                .map(|c| rows.iter().map(|r| r[c].len()).chain([table.columns[c].len()]).max().unwrap_or(0))
                .collect();
            let line = |cells: Vec<&str>| {
                let mut s = String::new();
                for (c, cell) in cells.iter().enumerate() {
                    if c > 0 {
                        s.push_str("  ");
                    }
                    let w = widths[c];
                    if c == 0 {
                        let _ = write!(s, "{cell:<w$}");
                    } else {
                        let _ = write!(s, "{cell:>w$}");
                    }
                }
                s.trim_end().to_string()
            };
            out.push_str(&line(table.columns.clone()));
            out.push('\n');
            for row in &rows {
                out.push_str(&line(row.iter().map(String::as_str).collect()));
                out.push('\n');
            }
            if kind == TableKind::Benchmark && table.rows.iter().all(|r| r[2].is_empty()) {
                out.push_str("(speedup and mAP loss need both a baseline and an adaptive row)\n");
            }
        }
    }
    out
}

pub fn emit_table(bundle: &ReportBundle, which: TableKind, format: Format) -> Result<String> {
    let table = match which {
        TableKind::Benchmark => benchmark_table(bundle.bench.as_ref().ok_or(Error::MissingSection("benchmark"))?)?,
        TableKind::Routing => routing_table(bundle.bench.as_ref().ok_or(Error::MissingSection("routing"))?)?,
        TableKind::Bottleneck => bottleneck_table(bundle.bottleneck.as_ref().ok_or(Error::MissingSection("bottleneck"))?),
    };
    Ok(render(&table, which, format))
}

/// Pretty JSON of the whole bundle, newline terminated.
pub fn emit_bundle_json(bundle: &ReportBundle) -> Result<String> {
    let mut s = serde_json::to_string_pretty(bundle)?;
    s.push('\n');
    Ok(s)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axes {
    /// mAP against cheap-path rate, vertices in threshold order.
    MapVsRate,
    /// mAP and cheap-path rate against threshold.
    MapVsThreshold,
}

const PLOT_W: f64 = 480.0;
const PLOT_H: f64 = 320.0;
const MARGIN: f64 = 48.0;

fn px(v: f64) -> f64 {
    MARGIN + v * (PLOT_W - 2.0 * MARGIN)
}

fn py(v: f64) -> f64 {
    PLOT_H - MARGIN - v * (PLOT_H - 2.0 * MARGIN)
}

fn polyline(metric: &str, colour: &str, pts: &[(f64, f64)]) -> String {
    let coords: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y))).collect();
    format!(
        "<polyline data-metric=\"{metric}\" fill=\"none\" stroke=\"{colour}\" stroke-width=\"1.5\" points=\"{}\"/>\n",
        coords.join(" ")
    )
}

/// Renders a sweep as a standalone SVG document.
///
/// Both axes span [0, 1]. `selected` is the threshold of the point to mark; it
/// must be one of the sweep thresholds.
pub fn emit_sweep_plot(points: &[SweepPoint], axes: Axes, selected: Option<f64>) -> Result<String> {
    if points.len() < 2 {
        return Err(Error::InvalidPlot(format!("need at least 2 points, got {}", points.len())));
    }
    for p in points {
        if !p.map_50_95.is_finite() {
            return Err(Error::InvalidPlot(format!("mAP is not finite at threshold {}", p.threshold)));
        }
        if !p.cheap_path_rate.is_finite() || !p.threshold.is_finite() {
            return Err(Error::InvalidPlot(format!("rate is not finite at threshold {}", p.threshold)));
        }
    }
    let mark = match selected {
        Some(t) => Some(
            points
                .iter()
                .find(|p| (p.threshold - t).abs() < 1e-12)
                .ok_or_else(|| Error::InvalidPlot(format!("selected threshold {t} is not a sweep point")))?,
        ),
        None => None,
    };

    let (x_label, title) = match axes {
        Axes::MapVsRate => ("cheap-path rate", "mAP vs cheap-path rate"),
        Axes::MapVsThreshold => ("threshold", "mAP and cheap-path rate vs threshold"),
    };
    let x_of = |p: &SweepPoint| match axes {
        Axes::MapVsRate => p.cheap_path_rate,
        Axes::MapVsThreshold => p.threshold,
    };

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{PLOT_W}\" height=\"{PLOT_H}\" viewBox=\"0 0 {PLOT_W} {PLOT_H}\">"
    );
    let _ = writeln!(svg, "<title>{title}</title>");
    let _ = writeln!(svg, "<rect width=\"{PLOT_W}\" height=\"{PLOT_H}\" fill=\"white\"/>");
    let (x0, x1, y0, y1) = (px(0.0), px(1.0), py(0.0), py(1.0));
    let _ = writeln!(
        svg,
        "<path data-role=\"axes\" d=\"M{x0:.2},{y1:.2} L{x0:.2},{y0:.2} L{x1:.2},{y0:.2}\" stroke=\"black\" fill=\"none\"/>"
    );
    for i in 0..=4 {
        let v = f64::from(i) / 4.0;
        let _ = writeln!(
            svg,
            "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"10\" text-anchor=\"middle\">{v:.2}</text>",
            px(v),
            y0 + 14.0
        );
        let _ = writeln!(
            svg,
            "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"10\" text-anchor=\"end\">{v:.2}</text>",
            x0 - 4.0,
            py(v) + 3.0
        );
    }
    let _ = writeln!(
        svg,
        "<text data-role=\"x-label\" x=\"{:.2}\" y=\"{:.2}\" font-size=\"12\" text-anchor=\"middle\">{x_label}</text>",
        px(0.5),
        PLOT_H - 8.0
    );
    let _ = writeln!(
        svg,
        "<text data-role=\"y-label\" x=\"12\" y=\"{:.2}\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 12 {:.2})\">value</text>",
        py(0.5),
        py(0.5)
    );

    let map_pts: Vec<(f64, f64)> = points.iter().map(|p| (x_of(p), p.map_50_95)).collect();
    svg.push_str(&polyline("map", "#1f77b4", &map_pts));
    if axes == Axes::MapVsThreshold {
        let rate_pts: Vec<(f64, f64)> = points.iter().map(|p| (p.threshold, p.cheap_path_rate)).collect();
        svg.push_str(&polyline("cheap_path_rate", "#d62728", &rate_pts));
    }
    if let Some(p) = mark {
        let _ = writeln!(
            svg,
            "<circle data-role=\"selected\" data-threshold=\"{}\" cx=\"{:.2}\" cy=\"{:.2}\" r=\"4\" fill=\"black\"/>",
            p.threshold,
            px(x_of(p)),
            py(p.map_50_95)
        );
    }
    let _ = writeln!(
        svg,
        "<text x=\"{:.2}\" y=\"16\" font-size=\"11\" fill=\"#1f77b4\">mAP</text>",
        x1 - 80.0
    );
    if axes == Axes::MapVsThreshold {
        let _ = writeln!(
            svg,
            "<text x=\"{:.2}\" y=\"30\" font-size=\"11\" fill=\"#d62728\">cheap-path rate</text>",
            x1 - 80.0
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}
