//! Verification artifacts: the JSON summary printed to stdout, the
//! per-point CSV table, and the self-contained SVG residual chart.

use serde::Serialize;
use warpsol_core::{Grid, ResidualReport};

use crate::CliError;

#[derive(Debug, Serialize)]
pub struct LabeledSup {
    pub equation: String,
    pub sup_norm: f64,
}

#[derive(Debug, Serialize)]
pub struct CheckSummary {
    pub check: String,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub skipped: Option<String>,
    pub sup_norms: Vec<LabeledSup>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub excluded_points: Vec<usize>,
}

impl CheckSummary {
    pub fn from_report(name: &str, report: &ResidualReport) -> CheckSummary {
        CheckSummary {
            check: name.to_string(),
            pass: report.pass,
            skipped: None,
            sup_norms: report
                .series
                .iter()
                .map(|s| LabeledSup {
                    equation: s.label.clone(),
                    sup_norm: s.sup_norm,
                })
                .collect(),
            excluded_points: report.excluded_points(),
        }
    }

    pub fn skipped(name: &str, reason: &str) -> CheckSummary {
        CheckSummary {
            check: name.to_string(),
            pass: true,
            skipped: Some(reason.to_string()),
            sup_norms: Vec::new(),
            excluded_points: Vec::new(),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct VerifySummary {
    pub file: String,
    pub interval: [f64; 2],
    pub grid_points: usize,
    pub tolerance: f64,
    pub lambda: String,
    pub checks: Vec<CheckSummary>,
    pub pass: bool,
}

/// Fixed-width scientific formatting: 17 significant digits, so identical
/// inputs give byte-identical output.
pub fn format_value(x: f64) -> String {
    format!("{x:.16e}")
}

/// Write the per-point residual table. Columns: `s` then every residual
/// series of every executed check, in check order.
pub fn write_csv(path: &str, grid: &Grid, series: &[(String, Vec<f64>)]) -> Result<(), CliError> {
    let mut out = String::new();
    out.push('s');
    for (label, _) in series {
        out.push(',');
        out.push_str(label);
    }
    out.push('\n');
    for (j, s) in grid.points().enumerate() {
        out.push_str(&format_value(s));
        for (_, values) in series {
            out.push(',');
            out.push_str(&format_value(values[j]));
        }
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| CliError::input(format!("cannot write {path}: {e}")))
}

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

/// One log-scale line chart of |residual| against s, no external assets.
pub fn write_svg(path: &str, grid: &Grid, series: &[(String, Vec<f64>)]) -> Result<(), CliError> {
    let width = 880.0;
    let height = 520.0;
    let (l, r, t, b) = (70.0, 220.0, 30.0, 50.0);
    let plot_w = width - l - r;
    let plot_h = height - t - b;
    let (y_min, y_max) = (-18.0, 2.0); // log10 |residual| range
    let clamp = |v: f64| v.max(y_min).min(y_max);
    let x_of = |s: f64| l + (s - grid.a()) / (grid.b() - grid.a()) * plot_w;
    let y_of = |logv: f64| t + (y_max - clamp(logv)) / (y_max - y_min) * plot_h;

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" viewBox=\"0 0 {width} {height}\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"18\" font-family=\"sans-serif\" font-size=\"14\">residual magnitude (log scale)</text>\n",
        l
    ));
    // Decade gridlines.
    let mut decade = y_min as i64;
    while decade <= y_max as i64 {
        if decade % 4 == 0 || decade == -8 {
            let y = y_of(decade as f64);
            svg.push_str(&format!(
                "<line x1=\"{l}\" y1=\"{y:.1}\" x2=\"{:.1}\" y2=\"{y:.1}\" stroke=\"#dddddd\" stroke-width=\"1\"/>\n",
                l + plot_w
            ));
            svg.push_str(&format!(
                "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">1e{decade}</text>\n",
                l - 6.0,
                y + 4.0
            ));
        }
        decade += 1;
    }
    // Axis frame and x labels.
    svg.push_str(&format!(
        "<rect x=\"{l}\" y=\"{t}\" width=\"{plot_w}\" height=\"{plot_h}\" fill=\"none\" stroke=\"#333333\"/>\n"
    ));
    for (frac, s) in [
        (0.0, grid.a()),
        (0.5, 0.5 * (grid.a() + grid.b())),
        (1.0, grid.b()),
    ] {
        let x = l + frac * plot_w;
        svg.push_str(&format!(
            "<text x=\"{x:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">{s:.4}</text>\n",
            t + plot_h + 18.0
        ));
    }
    svg.push_str(&format!(
        "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">s</text>\n",
        l + plot_w / 2.0,
        height - 12.0
    ));

    for (idx, (label, values)) in series.iter().enumerate() {
        let color = PALETTE[idx % PALETTE.len()];
        let mut points = String::new();
        for (j, s) in grid.points().enumerate() {
            let v = values[j].abs().max(1e-300).log10();
            points.push_str(&format!("{:.2},{:.2} ", x_of(s), y_of(v)));
        }
        svg.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.4\" points=\"{}\"/>\n",
            points.trim_end()
        ));
        let ly = t + 16.0 * idx as f64 + 10.0;
        svg.push_str(&format!(
            "<line x1=\"{:.1}\" y1=\"{ly:.1}\" x2=\"{:.1}\" y2=\"{ly:.1}\" stroke=\"{color}\" stroke-width=\"2\"/>\n",
            l + plot_w + 10.0,
            l + plot_w + 30.0
        ));
        svg.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"11\">{label}</text>\n",
            l + plot_w + 36.0,
            ly + 4.0
        ));
    }
    svg.push_str("</svg>\n");
    std::fs::write(path, svg).map_err(|e| CliError::input(format!("cannot write {path}: {e}")))
}
