//! Writes benchmark reports as JSON, flat CSV, Markdown rank tables and SVG charts.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::experiment::BenchmarkReport;
use crate::error::{Result, SpinexError};
use crate::evalrank::{MetricKind, MetricRecord, RankTable};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Json,
    Csv,
    Md,
    Svg,
}

impl FromStr for ReportFormat {
    type Err = SpinexError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            "md" | "markdown" => Ok(ReportFormat::Md),
            "svg" => Ok(ReportFormat::Svg),
            other => Err(SpinexError::InvalidConfig(format!("unknown report format '{other}'"))),
        }
    }
}

/// Parses a comma-separated format list; an empty string selects nothing.
pub fn parse_formats(list: &str) -> Result<Vec<ReportFormat>> {
    let mut out: Vec<ReportFormat> =
        list.split(',').filter(|s| !s.trim().is_empty()).map(str::parse).collect::<Result<_>>()?;
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

/// Metrics written per record, in column order.
const CSV_METRICS: [MetricKind; 9] = [
    MetricKind::Mae,
    MetricKind::R2,
    MetricKind::Accuracy,
    MetricKind::Logloss,
    MetricKind::Auc,
    MetricKind::TrainTime,
    MetricKind::PredictTime,
    MetricKind::ModelSize,
    MetricKind::Energy,
];

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| SpinexError::io(path, e))
}

/// Writes the requested formats into `out_dir` and returns the created files.
pub fn emit_report(
    report: &BenchmarkReport,
    formats: &[ReportFormat],
    out_dir: impl AsRef<Path>,
    per_fold: bool,
) -> Result<Vec<PathBuf>> {
    let out_dir = out_dir.as_ref();
    if formats.is_empty() {
        return Ok(Vec::new());
    }
    std::fs::create_dir_all(out_dir).map_err(|e| SpinexError::io(out_dir, e))?;
    let mut written = Vec::new();
    for format in formats {
        match format {
            ReportFormat::Json => {
                let path = out_dir.join("report.json");
                write_file(&path, &serde_json::to_string_pretty(report)?)?;
                written.push(path);
            }
            ReportFormat::Csv => {
                let path = out_dir.join("results.csv");
                write_csv(report, &path, per_fold)?;
                written.push(path);
            }
            ReportFormat::Md => {
                let path = out_dir.join("rank_tables.md");
                write_file(&path, &markdown(report))?;
                written.push(path);
            }
            ReportFormat::Svg => written.extend(write_svgs(report, out_dir)?),
        }
    }
    Ok(written)
}

fn write_csv(report: &BenchmarkReport, path: &Path, per_fold: bool) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["model", "dataset", "fold", "metric", "value"])?;
    let mut emit = |rec: &MetricRecord, fold: &str| -> Result<()> {
        for m in CSV_METRICS {
            if let Some(v) = rec.get(m) {
                w.write_record([&rec.model_name, &rec.dataset_name, fold, m.name(), &format!("{v:?}")])?;
            }
        }
        Ok(())
    };
    for cell in &report.cells {
        emit(&cell.aggregate, "mean")?;
        if per_fold {
            for f in &cell.folds {
                emit(&f.metrics, &f.fold.to_string())?;
            }
        }
    }
    w.flush().map_err(|e| SpinexError::io(path, e))
}

/// Rank tables as Markdown: per-metric averages with ranks, rank sum and overall rank.
pub fn markdown(report: &BenchmarkReport) -> String {
    let mut out = format!("# Ranking results: {}\n\n", report.spec.suite);
    let groups =
        [("Accuracy group", &report.rank_tables.accuracy_group), ("Cost group", &report.rank_tables.cost_group)];
    for (title, table) in groups {
        let _ = writeln!(out, "## {title}\n");
        match table {
            Some(t) => out.push_str(&rank_table_markdown(t)),
            None => out.push_str("_not available_\n"),
        }
        out.push('\n');
    }
    if report.partial {
        let _ = writeln!(out, "**Partial report:** {}", report.error.as_deref().unwrap_or("aborted"));
    }
    out
}

pub fn rank_table_markdown(t: &RankTable) -> String {
    let mut out = String::from("| Model |");
    for m in &t.metrics {
        let _ = write!(out, " {} (rank) |", m.name());
    }
    out.push_str(" Rank sum | Overall rank |\n|---|");
    out.push_str(&"---|".repeat(t.metrics.len() + 2));
    out.push('\n');
    for row in &t.rows {
        let _ = write!(out, "| {} |", row.model);
        for (avg, rank) in row.averages.iter().zip(&row.ranks) {
            let _ = write!(out, " {avg:.6} ({rank}) |");
        }
        let _ = writeln!(out, " {} | {} |", row.rank_sum, row.overall_rank);
    }
    out
}

fn write_svgs(report: &BenchmarkReport, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for (label, table) in [("accuracy", &report.rank_tables.accuracy_group), ("cost", &report.rank_tables.cost_group)] {
        if let Some(t) = table {
            let names: Vec<String> = t.rows.iter().map(|r| r.model.clone()).collect();
            let sums: Vec<f64> = t.rows.iter().map(|r| r.rank_sum as f64).collect();
            let path = out_dir.join(format!("rank_sums_{label}.svg"));
            write_file(&path, &bar_chart_svg(&format!("Rank sums ({label} group)"), &names, &sums))?;
            written.push(path);
        }
    }
    for d in &report.datasets {
        let Some(e) = &d.explanation else { continue };
        let stem = sanitize(&d.name);
        let path = out_dir.join(format!("importance_{stem}.svg"));
        write_file(&path, &bar_chart_svg(&format!("Feature importance: {}", d.name), &e.feature_names, &e.importance))?;
        written.push(path);
        if let Some(im) = &e.interactions {
            let path = out_dir.join(format!("interactions_{stem}.svg"));
            write_file(&path, &heatmap_svg(&format!("Interaction effects: {}", d.name), &e.feature_names, &im.values))?;
            written.push(path);
        }
    }
    Ok(written)
}

fn sanitize(name: &str) -> String {
    name.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect()
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Horizontal bar chart; negative values extend left of the axis.
pub fn bar_chart_svg(title: &str, labels: &[String], values: &[f64]) -> String {
    let (label_w, bar_w, row_h, top) = (180.0, 400.0, 22.0, 40.0);
    let width = label_w + bar_w + 80.0;
    let height = top + row_h * values.len() as f64 + 20.0;
    let max_abs = values.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    let has_negative = values.iter().any(|v| *v < 0.0);
    let zero_x = if has_negative { label_w + bar_w / 2.0 } else { label_w };
    let scale = if has_negative { bar_w / 2.0 } else { bar_w } / max_abs;
    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" font-family=\"sans-serif\" font-size=\"12\">\n\
         <text x=\"10\" y=\"22\" font-size=\"15\">{}</text>\n",
        escape(title)
    );
    for (i, (label, v)) in labels.iter().zip(values).enumerate() {
        let y = top + row_h * i as f64;
        let len = (v.abs() * scale).max(0.0);
        let x = if *v < 0.0 { zero_x - len } else { zero_x };
        let _ = writeln!(
            svg,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{}</text>\
             <rect x=\"{x:.1}\" y=\"{:.1}\" width=\"{len:.1}\" height=\"{:.1}\" fill=\"#4878a8\"/>\
             <text x=\"{:.1}\" y=\"{:.1}\">{v:.4}</text>",
            label_w - 6.0,
            y + 14.0,
            escape(label),
            y + 3.0,
            row_h - 6.0,
            label_w + bar_w + 6.0,
            y + 14.0
        );
    }
    let _ = writeln!(
        svg,
        "<line x1=\"{zero_x:.1}\" y1=\"{top}\" x2=\"{zero_x:.1}\" y2=\"{:.1}\" stroke=\"#333\"/>\n</svg>",
        height - 20.0
    );
    svg
}

/// Grid of shaded cells: red for positive, blue for negative, scaled by the largest magnitude.
pub fn heatmap_svg(title: &str, labels: &[String], values: &Array2<f64>) -> String {
    let n = values.nrows();
    let (cell, margin, top) = (36.0, 120.0, 40.0);
    let size = margin + cell * n as f64 + 20.0;
    let max_abs = values.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{size}\" height=\"{:.1}\" font-family=\"sans-serif\" font-size=\"11\">\n\
         <text x=\"10\" y=\"22\" font-size=\"15\">{}</text>\n",
        size + top - margin + 20.0,
        escape(title)
    );
    for (i, label) in labels.iter().enumerate().take(n) {
        let c = margin + cell * i as f64 + cell / 2.0;
        let _ = writeln!(
            svg,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{}</text>\
             <text x=\"{c:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>",
            margin - 6.0,
            top + 20.0 + cell * i as f64 + cell / 2.0,
            escape(label),
            top + 12.0,
            escape(label)
        );
    }
    for ((i, j), v) in values.indexed_iter() {
        let t = (v.abs() / max_abs).clamp(0.0, 1.0);
        let fade = (255.0 * (1.0 - t)).round() as u8;
        let color = if *v >= 0.0 { format!("rgb(255,{fade},{fade})") } else { format!("rgb({fade},{fade},255)") };
        let _ = writeln!(
            svg,
            "<rect x=\"{:.1}\" y=\"{:.1}\" width=\"{cell}\" height=\"{cell}\" fill=\"{color}\" stroke=\"#ccc\"><title>{v:.6}</title></rect>",
            margin + cell * j as f64,
            top + 20.0 + cell * i as f64
        );
    }
    svg.push_str("</svg>\n");
    svg
}
