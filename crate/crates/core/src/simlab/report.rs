//! Long-format CSV tables and a single SVG line chart.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{ExperimentConfig, InnovationDist};
use crate::methods::Method;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub method: Method,
    pub n: usize,
    pub p: usize,
    pub dist: InnovationDist,
    pub m: Option<usize>,
    pub s: Option<usize>,
    pub alpha: f64,
    pub estimate: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    /// `"size"` or `"power"`.
    pub kind: String,
    pub version: String,
    pub config: ExperimentConfig,
    pub rows: Vec<ReportRow>,
    /// Left empty unless the caller opts in, so reruns stay byte-identical.
    pub elapsed_seconds: Option<f64>,
}

fn opt(v: Option<usize>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl ExperimentReport {
    pub fn new(kind: &str, config: ExperimentConfig, rows: Vec<ReportRow>) -> Self {
        ExperimentReport {
            kind: kind.to_string(),
            version: TOOL_VERSION.to_string(),
            config,
            rows,
            elapsed_seconds: None,
        }
    }

    pub fn rows_for(&self, method: Method, alpha: f64) -> impl Iterator<Item = &ReportRow> {
        self.rows.iter().filter(move |r| r.method == method && r.alpha == alpha)
    }

    /// `#`-prefixed header lines (version, seed, resolved config as one-line
    /// JSON, optional timing) followed by the table.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let config = serde_json::to_string(&self.config).expect("config serializes");
        let _ = writeln!(out, "# ltest {} {}", self.version, self.kind);
        let _ = writeln!(out, "# seed: {}", self.config.seed);
        let _ = writeln!(out, "# config: {config}");
        if let Some(t) = self.elapsed_seconds {
            let _ = writeln!(out, "# elapsed_seconds: {t:.3}");
        }
        out.push_str("method,n,p,dist,m,s,alpha,estimate,stderr\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                r.method,
                r.n,
                r.p,
                r.dist,
                opt(r.m),
                opt(r.s),
                r.alpha,
                r.estimate,
                r.stderr
            );
        }
        out
    }

    /// Power (or size) against sparsity `s`, one polyline per method, at the
    /// first `α`. Size tables have no `s` and plot each method at `s = 0`.
    pub fn to_svg(&self) -> String {
        const W: f64 = 640.0;
        const H: f64 = 400.0;
        const L: f64 = 60.0;
        const R: f64 = 130.0;
        const T: f64 = 40.0;
        const B: f64 = 50.0;
        const COLORS: [&str; 8] = [
            "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
        ];
        let alpha = self.config.alphas.first().copied().unwrap_or(0.05);
        let max_s = self.rows.iter().filter_map(|r| r.s).max().unwrap_or(0).max(1) as f64;
        let x = |s: f64| L + s / max_s * (W - L - R);
        let y = |v: f64| H - B - v * (H - T - B);

        let mut svg = String::new();
        let _ = writeln!(
            svg,
            r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(svg, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
        let title = if self.kind == "power" { "Size-corrected power" } else { "Empirical size" };
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="24" text-anchor="middle" font-size="14">{title}, n={}, p={}, {}, alpha={alpha}</text>"#,
            (W - R + L) / 2.0,
            self.config.n,
            self.config.p,
            self.config.dist
        );
        let _ = writeln!(
            svg,
            r#"<path d="M{L} {T} V{:.1} H{:.1}" fill="none" stroke="black"/>"#,
            H - B,
            W - R
        );
        for i in 0..=5 {
            let v = i as f64 / 5.0;
            let _ = writeln!(
                svg,
                r#"<line x1="{:.1}" y1="{:.1}" x2="{L}" y2="{:.1}" stroke="black"/><text x="{:.1}" y="{:.1}" text-anchor="end">{v:.1}</text>"#,
                L - 4.0,
                y(v),
                y(v),
                L - 6.0,
                y(v) + 4.0
            );
        }
        let mut ticks: Vec<usize> = self.rows.iter().filter_map(|r| r.s).collect();
        ticks.sort_unstable();
        ticks.dedup();
        for s in &ticks {
            let sx = x(*s as f64);
            let _ = writeln!(
                svg,
                r#"<line x1="{sx:.1}" y1="{:.1}" x2="{sx:.1}" y2="{:.1}" stroke="black"/><text x="{sx:.1}" y="{:.1}" text-anchor="middle">{s}</text>"#,
                H - B,
                H - B + 4.0,
                H - B + 18.0
            );
        }
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">s</text>"#,
            (W - R + L) / 2.0,
            H - 12.0
        );

        let mut methods: Vec<Method> = Vec::new();
        for r in &self.rows {
            if !methods.contains(&r.method) {
                methods.push(r.method);
            }
        }
        for (i, method) in methods.iter().enumerate() {
            let color = COLORS[i % COLORS.len()];
            let pts: Vec<String> = self
                .rows_for(*method, alpha)
                .map(|r| format!("{:.1},{:.1}", x(r.s.unwrap_or(0) as f64), y(r.estimate)))
                .collect();
            let _ = writeln!(
                svg,
                r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
                pts.join(" ")
            );
            for pt in &pts {
                let (px, py) = pt.split_once(',').expect("point has two coordinates");
                let _ = writeln!(svg, r#"<circle cx="{px}" cy="{py}" r="3" fill="{color}"/>"#);
            }
            let ly = T + 16.0 * i as f64;
            let _ = writeln!(
                svg,
                r#"<line x1="{:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="2"/><text x="{:.1}" y="{:.1}">{method}</text>"#,
                W - R + 15.0,
                W - R + 35.0,
                W - R + 40.0,
                ly + 4.0
            );
        }
        svg.push_str("</svg>\n");
        svg
    }
}
