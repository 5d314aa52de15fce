//! SVG panel grids of summary metrics against sample size.
//!
//! One figure per (study, family, metric): rows are error variances,
//! columns are correlations, the x axis is `log n`, one line per method.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Serialize;
use varsel::{Family, MethodName};

use crate::records::{read_summary, SummaryRow};
use crate::runner::SUMMARY_FILE;

pub const METRICS: [&str; 3] = ["cir", "recall", "fdr"];
pub const FIGURE_DIR: &str = "figures";
pub const FIGURE_DATA_FILE: &str = "figure_data.csv";

const PANEL_W: f64 = 240.0;
const PANEL_H: f64 = 180.0;
const MARGIN_L: f64 = 44.0;
const MARGIN_B: f64 = 34.0;
const MARGIN_T: f64 = 22.0;
const MARGIN_R: f64 = 10.0;
const LEGEND_H: f64 = 40.0;
const PALETTE: [&str; 9] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#17becf",
];

#[derive(Debug, Clone, PartialEq)]
pub struct RenderReport {
    pub files: Vec<PathBuf>,
    pub figure_data: PathBuf,
    /// Panels in each figure, in the order of `files`.
    pub panels: Vec<usize>,
    /// Grid points without a summary row, as `study/family/method n= rho= sigma2=`.
    pub missing: Vec<String>,
}

#[derive(Serialize)]
struct FigurePoint<'a> {
    study: &'a str,
    family: Family,
    metric: &'a str,
    sigma2: f64,
    rho: f64,
    n: usize,
    method: MethodName,
    value: Option<f64>,
}

type Group = (String, Family);

pub fn render_dir(dir: &Path) -> anyhow::Result<RenderReport> {
    let summary_path = dir.join(SUMMARY_FILE);
    let rows = read_summary(&summary_path).with_context(|| format!("reading {}", summary_path.display()))?;
    let out = dir.join(FIGURE_DIR);
    fs::create_dir_all(&out)?;
    render_rows(&rows, &out)
}

pub fn render_rows(rows: &[SummaryRow], out: &Path) -> anyhow::Result<RenderReport> {
    let mut groups: BTreeMap<Group, Vec<&SummaryRow>> = BTreeMap::new();
    for r in rows {
        groups.entry((r.study.clone(), r.family)).or_default().push(r);
    }
    let mut files = Vec::new();
    let mut panels = Vec::new();
    let mut missing = Vec::new();
    let data_path = out.join(FIGURE_DATA_FILE);
    let mut data = csv::Writer::from_path(&data_path)?;

    for ((study, family), rows) in &groups {
        let grid = Grid::new(rows);
        for m in &grid.methods {
            for &s in &grid.sigma2 {
                for &r in &grid.rho {
                    for &n in &grid.n {
                        if !grid.values.contains_key(&(*m, s.to_bits(), r.to_bits(), n)) {
                            missing.push(format!("{study}/{family}/{m} n={n} rho={r} sigma2={s}"));
                        }
                    }
                }
            }
        }
        for metric in METRICS {
            let path = out.join(format!("{study}_{family}_{metric}.svg"));
            let (svg, count) = grid.svg(&format!("{study} ({family}): {}", metric.to_uppercase()), metric);
            fs::write(&path, svg)?;
            files.push(path);
            panels.push(count);
            for (&(method, s, r, n), row) in &grid.values {
                data.serialize(FigurePoint {
                    study,
                    family: *family,
                    metric,
                    sigma2: f64::from_bits(s),
                    rho: f64::from_bits(r),
                    n,
                    method,
                    value: row.metric(metric),
                })?;
            }
        }
    }
    data.flush()?;
    if !missing.is_empty() {
        log::warn!("MissingCells: {} grid points absent: {}", missing.len(), missing.join("; "));
    }
    Ok(RenderReport {
        files,
        figure_data: data_path,
        panels,
        missing,
    })
}

struct Grid<'a> {
    methods: BTreeSet<MethodName>,
    sigma2: Vec<f64>,
    rho: Vec<f64>,
    n: Vec<usize>,
    values: BTreeMap<(MethodName, u64, u64, usize), &'a SummaryRow>,
}

fn sorted_unique(v: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut v: Vec<f64> = v.collect();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

impl<'a> Grid<'a> {
    fn new(rows: &[&'a SummaryRow]) -> Self {
        let mut n: Vec<usize> = rows.iter().map(|r| r.n).collect();
        n.sort_unstable();
        n.dedup();
        Self {
            methods: rows.iter().map(|r| r.method).collect(),
            sigma2: sorted_unique(rows.iter().map(|r| r.sigma2)),
            rho: sorted_unique(rows.iter().map(|r| r.rho)),
            n,
            values: rows
                .iter()
                .map(|r| ((r.method, r.sigma2.to_bits(), r.rho.to_bits(), r.n), *r))
                .collect(),
        }
    }

    fn svg(&self, title: &str, metric: &str) -> (String, usize) {
        let (rows, cols) = (self.sigma2.len(), self.rho.len());
        let width = cols as f64 * PANEL_W;
        let height = LEGEND_H + rows as f64 * PANEL_H;
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="10">"#
        );
        let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(s, r#"<text x="6" y="14" font-size="12" font-weight="bold">{}</text>"#, escape(title));
        for (i, m) in self.methods.iter().enumerate() {
            let x = 6.0 + (i % 6) as f64 * 110.0;
            let y = 26.0 + (i / 6) as f64 * 12.0;
            let _ = writeln!(
                s,
                r#"<g class="legend"><line x1="{x}" y1="{y}" x2="{}" y2="{y}" stroke="{}" stroke-width="2"/><text x="{}" y="{}">{m}</text></g>"#,
                x + 16.0,
                self.color(*m),
                x + 20.0,
                y + 3.0
            );
        }

        let (lo, hi) = match (self.n.first(), self.n.last()) {
            (Some(&a), Some(&b)) if a < b => ((a as f64).ln(), (b as f64).ln()),
            (Some(&a), _) => ((a as f64).ln() - 0.5, (a as f64).ln() + 0.5),
            _ => (0.0, 1.0),
        };
        let mut count = 0;
        for (ri, &sigma2) in self.sigma2.iter().enumerate() {
            for (ci, &rho) in self.rho.iter().enumerate() {
                count += 1;
                let ox = ci as f64 * PANEL_W;
                let oy = LEGEND_H + ri as f64 * PANEL_H;
                let pw = PANEL_W - MARGIN_L - MARGIN_R;
                let ph = PANEL_H - MARGIN_T - MARGIN_B;
                let px = |n: usize| ox + MARGIN_L + ((n as f64).ln() - lo) / (hi - lo) * pw;
                let py = |v: f64| oy + MARGIN_T + (1.0 - v.clamp(0.0, 1.0)) * ph;
                let _ = writeln!(s, r#"<g class="panel" data-sigma2="{sigma2}" data-rho="{rho}">"#);
                let _ = writeln!(
                    s,
                    r##"<rect x="{}" y="{}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>"##,
                    ox + MARGIN_L,
                    oy + MARGIN_T
                );
                let _ = writeln!(
                    s,
                    r#"<text x="{}" y="{}">sigma2 = {sigma2}, rho = {rho}</text>"#,
                    ox + MARGIN_L,
                    oy + MARGIN_T - 6.0
                );
                for v in [0.0, 0.5, 1.0] {
                    let _ = writeln!(
                        s,
                        r#"<text x="{}" y="{}" text-anchor="end">{v:.1}</text>"#,
                        ox + MARGIN_L - 4.0,
                        py(v) + 3.0
                    );
                }
                for &n in &self.n {
                    let _ = writeln!(
                        s,
                        r#"<text x="{}" y="{}" text-anchor="middle">{n}</text>"#,
                        px(n),
                        oy + PANEL_H - MARGIN_B + 12.0
                    );
                }
                let _ = writeln!(
                    s,
                    r#"<text x="{}" y="{}" text-anchor="middle">n (log scale)</text>"#,
                    ox + MARGIN_L + pw / 2.0,
                    oy + PANEL_H - 6.0
                );
                if metric == "fdr" {
                    for r in [0.05, 0.10] {
                        let _ = writeln!(
                            s,
                            r##"<line class="reference" x1="{}" y1="{y}" x2="{}" y2="{y}" stroke="#999" stroke-dasharray="4 3"/>"##,
                            ox + MARGIN_L,
                            ox + MARGIN_L + pw,
                            y = py(r)
                        );
                    }
                }
                for &m in &self.methods {
                    let points: Vec<Option<(f64, f64)>> = self
                        .n
                        .iter()
                        .map(|&n| {
                            self.values
                                .get(&(m, sigma2.to_bits(), rho.to_bits(), n))
                                .and_then(|r| r.metric(metric))
                                .filter(|v| v.is_finite())
                                .map(|v| (px(n), py(v)))
                        })
                        .collect();
                    let color = self.color(m);
                    // NA values split the line into separate segments.
                    for segment in points.split(Option::is_none) {
                        let pts: Vec<String> = segment
                            .iter()
                            .flatten()
                            .map(|(x, y)| format!("{x:.2},{y:.2}"))
                            .collect();
                        if pts.len() > 1 {
                            let _ = writeln!(
                                s,
                                r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
                                pts.join(" ")
                            );
                        }
                    }
                    for (x, y) in points.iter().flatten() {
                        let _ = writeln!(s, r#"<circle cx="{x:.2}" cy="{y:.2}" r="2" fill="{color}"/>"#);
                    }
                }
                s.push_str("</g>\n");
            }
        }
        s.push_str("</svg>\n");
        (s, count)
    }

    fn color(&self, m: MethodName) -> &'static str {
        PALETTE[m.id() as usize % PALETTE.len()]
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
