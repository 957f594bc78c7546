//! Run reports as CSV, TOML and standalone SVG line plots.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::pipeline::{AblationRow, ConfusionMatrix, RunReport};
use crate::{Error, Result};

pub const EPOCHS_CSV: &str = "epochs.csv";
pub const CONFUSION_CSV: &str = "confusion.csv";
pub const REPORT_TOML: &str = "report.toml";
pub const CURVES_SVG: &str = "curves.svg";

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::format("report", format!("{other:?}")),
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |v| v.to_string())
}

pub fn write_epochs_csv(path: &Path, report: &RunReport) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record([
        "epoch",
        "loss",
        "classification_loss",
        "reconstruction_loss",
        "fairness_loss",
        "train_accuracy",
        "train_top1",
        "eval_accuracy",
        "eval_top1",
        "lr",
        "iterations",
    ])
    .map_err(csv_err)?;
    for e in &report.epochs {
        w.write_record([
            e.epoch.to_string(),
            e.loss.to_string(),
            e.classification_loss.to_string(),
            e.reconstruction_loss.to_string(),
            opt(e.fairness_loss),
            e.train.accuracy.to_string(),
            e.train.top1.to_string(),
            opt(e.eval.map(|m| m.accuracy)),
            opt(e.eval.map(|m| m.top1)),
            e.lr.to_string(),
            e.iterations.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_confusion_csv(path: &Path, confusion: &ConfusionMatrix, class_names: &[String]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    let mut head = vec!["true\\predicted".to_string()];
    head.extend(class_names.iter().cloned());
    w.write_record(&head).map_err(csv_err)?;
    for (name, row) in class_names.iter().zip(confusion.rows()) {
        let mut rec = vec![name.clone()];
        rec.extend(row.iter().map(u64::to_string));
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Contents of `report.toml`: the full run report plus class names.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StoredReport {
    pub class_names: Vec<String>,
    pub report: RunReport,
}

pub fn write_report_toml(path: &Path, report: &RunReport, class_names: &[String]) -> Result<()> {
    let stored = StoredReport {
        class_names: class_names.to_vec(),
        report: report.clone(),
    };
    let text = toml::to_string(&stored).map_err(|e| Error::format("report", e.to_string()))?;
    fs::write(path, text)?;
    Ok(())
}

pub fn read_report_toml(path: &Path) -> Result<StoredReport> {
    let text = fs::read_to_string(path)?;
    toml::from_str(&text).map_err(|e| Error::format("report", e.message().to_string()))
}

/// One polyline of a plot.
pub struct Series<'a> {
    pub name: &'a str,
    pub color: &'a str,
    pub points: Vec<(f64, f64)>,
}

/// A standalone SVG line chart.
pub fn line_chart_svg(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    const W: f64 = 640.0;
    const H: f64 = 400.0;
    const L: f64 = 60.0;
    const R: f64 = 150.0;
    const T: f64 = 40.0;
    const B: f64 = 50.0;
    let pts = series.iter().flat_map(|s| s.points.iter()).filter(|p| p.0.is_finite() && p.1.is_finite());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 - x0 < 1e-12 {
        x1 = x0 + 1.0;
    }
    if y1 - y0 < 1e-12 {
        y0 -= 0.5;
        y1 += 0.5;
    }
    let sx = |x: f64| L + (x - x0) / (x1 - x0) * (W - L - R);
    let sy = |y: f64| H - B - (y - y0) / (y1 - y0) * (H - T - B);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#, W / 2.0, escape(title));
    let _ = writeln!(
        s,
        r#"<line x1="{L}" y1="{}" x2="{}" y2="{}" stroke="black"/><line x1="{L}" y1="{T}" x2="{L}" y2="{}" stroke="black"/>"#,
        H - B,
        W - R,
        H - B,
        H - B
    );
    for i in 0..=4 {
        let f = i as f64 / 4.0;
        let (xv, yv) = (x0 + f * (x1 - x0), y0 + f * (y1 - y0));
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{}" text-anchor="middle">{}</text><text x="{}" y="{:.1}" text-anchor="end">{}</text>"#,
            sx(xv),
            H - B + 16.0,
            tick(xv),
            L - 6.0,
            sy(yv) + 4.0,
            tick(yv)
        );
    }
    let _ = writeln!(s, r#"<text x="{:.1}" y="{}" text-anchor="middle">{}</text>"#, L + (W - L - R) / 2.0, H - 12.0, escape(x_label));
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">{}</text>"#,
        T + (H - T - B) / 2.0,
        T + (H - T - B) / 2.0,
        escape(y_label)
    );
    for (k, ser) in series.iter().enumerate() {
        let path: Vec<String> = ser
            .points
            .iter()
            .filter(|p| p.0.is_finite() && p.1.is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        if !path.is_empty() {
            let _ = writeln!(
                s,
                r#"<polyline fill="none" stroke="{}" stroke-width="2" points="{}"/>"#,
                ser.color,
                path.join(" ")
            );
        }
        let ly = T + 10.0 + 18.0 * k as f64;
        let _ = writeln!(
            s,
            r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{}" stroke-width="2"/><text x="{}" y="{}">{}</text>"#,
            W - R + 10.0,
            W - R + 30.0,
            ser.color,
            W - R + 36.0,
            ly + 4.0,
            escape(ser.name)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn tick(v: f64) -> String {
    if v.abs() >= 100.0 || v == v.round() {
        format!("{v:.0}")
    } else {
        format!("{v:.3}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Accuracy curves of one run.
pub fn accuracy_curves_svg(report: &RunReport) -> String {
    let e = &report.epochs;
    let mut series = vec![Series {
        name: "train top-1",
        color: "#1f77b4",
        points: e.iter().map(|r| (r.epoch as f64 + 1.0, r.train.top1)).collect(),
    }];
    if e.iter().any(|r| r.eval.is_some()) {
        series.push(Series {
            name: "test top-1",
            color: "#d62728",
            points: e
                .iter()
                .filter_map(|r| r.eval.map(|m| (r.epoch as f64 + 1.0, m.top1)))
                .collect(),
        });
    }
    line_chart_svg(&format!("{} accuracy", report.label), "epoch", "accuracy", &series)
}

/// Writes `epochs.csv`, `report.toml`, `curves.svg` and, when the run was
/// evaluated, `confusion.csv` into `dir`.
pub fn write_run_report(dir: &Path, report: &RunReport, class_names: &[String]) -> Result<()> {
    write_epochs_csv(&dir.join(EPOCHS_CSV), report)?;
    write_report_toml(&dir.join(REPORT_TOML), report, class_names)?;
    fs::write(dir.join(CURVES_SVG), accuracy_curves_svg(report))?;
    if let Some(c) = &report.confusion {
        write_confusion_csv(&dir.join(CONFUSION_CSV), c, class_names)?;
    }
    Ok(())
}

/// Ablation table with one row per sensor set.
pub fn write_ablation_csv(path: &Path, rows: &[AblationRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record([
        "sensor_set",
        "channels",
        "train_samples",
        "test_samples",
        "accuracy",
        "top1",
        "f1",
        "precision",
        "epochs_run",
        "epochs_to_convergence",
    ])
    .map_err(csv_err)?;
    for r in rows {
        let m = r.report.final_metrics;
        w.write_record([
            r.sensor_set.clone(),
            r.channels.to_string(),
            r.train_samples.to_string(),
            r.test_samples.to_string(),
            opt(m.map(|m| m.accuracy)),
            opt(m.map(|m| m.top1)),
            opt(m.map(|m| m.f1)),
            opt(m.map(|m| m.precision)),
            r.report.epochs.len().to_string(),
            r.report.epochs_to_convergence.map_or_else(String::new, |e| e.to_string()),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Test accuracy per sensor set as an SVG chart.
pub fn ablation_svg(rows: &[AblationRow]) -> String {
    let series = vec![Series {
        name: "test top-1",
        color: "#2ca02c",
        points: rows
            .iter()
            .map(|r| (r.channels as f64, r.report.final_metrics.map_or(f64::NAN, |m| m.top1)))
            .collect(),
    }];
    line_chart_svg("Sensor ablation", "input channels N", "accuracy", &series)
}
