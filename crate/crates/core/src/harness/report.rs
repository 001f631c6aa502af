//! CSV and SVG outputs. Every CSV may start with one `#` comment line
//! (the run's config hash) followed by a header row.

use std::fmt::Write as _;
use std::path::Path;

use super::ablation::AblationRow;
use super::metrics::Metrics;
use super::train::FoldReport;
use crate::biostats::PointBiserialMap;
use crate::error::{Error, Result};
use crate::fsutil::write_atomic;

pub fn csv_bytes(comment: Option<&str>, header: &[&str], rows: &[Vec<String>]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    if let Some(c) = comment {
        out.extend_from_slice(format!("# {c}\n").as_bytes());
    }
    let mut w = csv::Writer::from_writer(out);
    let err = |e: csv::Error| Error::Shape(format!("csv encoding: {e}"));
    w.write_record(header).map_err(err)?;
    for r in rows {
        w.write_record(r).map_err(err)?;
    }
    w.into_inner()
        .map_err(|e| Error::Shape(format!("csv encoding: {e}")))
}

pub fn write_csv(
    path: &Path,
    comment: Option<&str>,
    header: &[&str],
    rows: &[Vec<String>],
) -> Result<()> {
    write_atomic(path, &csv_bytes(comment, header, rows)?)
}

fn metric_cells(m: &Metrics) -> Vec<String> {
    [m.accuracy, m.precision, m.recall, m.f1, m.auc]
        .iter()
        .map(f64::to_string)
        .collect()
}

pub const METRICS_HEADER: [&str; 12] = [
    "fold",
    "best_epoch",
    "accuracy",
    "precision",
    "recall",
    "f1",
    "auc",
    "last_accuracy",
    "last_precision",
    "last_recall",
    "last_f1",
    "last_auc",
];

pub fn metrics_rows(report: &FoldReport) -> Vec<Vec<String>> {
    let mut rows: Vec<Vec<String>> = report
        .folds
        .iter()
        .map(|f| {
            let mut r = vec![f.fold.to_string(), f.best_epoch.to_string()];
            r.extend(metric_cells(&f.best));
            r.extend(metric_cells(&f.last));
            r
        })
        .collect();
    let mut mean = vec!["mean".to_string(), String::new()];
    mean.extend(metric_cells(&report.mean_best));
    mean.extend(metric_cells(&report.mean_last));
    rows.push(mean);
    rows
}

/// `metrics.csv` and one `roc_fold{i}.csv` per fold.
pub fn write_fold_report(dir: &Path, report: &FoldReport, comment: Option<&str>) -> Result<()> {
    write_csv(
        &dir.join("metrics.csv"),
        comment,
        &METRICS_HEADER,
        &metrics_rows(report),
    )?;
    for f in &report.folds {
        let rows: Vec<Vec<String>> = f
            .roc
            .iter()
            .map(|(x, y)| vec![x.to_string(), y.to_string()])
            .collect();
        write_csv(
            &dir.join(format!("roc_fold{}.csv", f.fold)),
            comment,
            &["fpr", "tpr"],
            &rows,
        )?;
    }
    Ok(())
}

pub fn write_ablation_k(path: &Path, rows: &[AblationRow], comment: Option<&str>) -> Result<()> {
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let m = &r.metrics;
            vec![
                r.k.to_string(),
                m.accuracy.to_string(),
                m.precision.to_string(),
                m.recall.to_string(),
                m.f1.to_string(),
            ]
        })
        .collect();
    write_csv(
        path,
        comment,
        &["k", "accuracy", "precision", "recall", "f1"],
        &body,
    )
}

pub fn write_ablation_fam(path: &Path, rows: &[AblationRow], comment: Option<&str>) -> Result<()> {
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let m = &r.metrics;
            vec![
                r.k.to_string(),
                if r.fam_enabled { "with" } else { "without" }.to_string(),
                m.accuracy.to_string(),
                m.precision.to_string(),
                m.recall.to_string(),
                m.f1.to_string(),
            ]
        })
        .collect();
    write_csv(
        path,
        comment,
        &["k", "fam", "accuracy", "precision", "recall", "f1"],
        &body,
    )
}

/// Rows are channels, columns are slots.
pub fn write_heatmap(path: &Path, map: &PointBiserialMap, comment: Option<&str>) -> Result<()> {
    let k = map.r.cols();
    let mut header = vec!["channel".to_string()];
    header.extend((0..k).map(|j| format!("slot{j}")));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows: Vec<Vec<String>> = (0..map.r.rows())
        .map(|c| {
            std::iter::once(c.to_string())
                .chain(map.r.row(c).iter().map(f64::to_string))
                .collect()
        })
        .collect();
    write_csv(path, comment, &header, &rows)
}

/// Line plot of the four classification metrics against k.
pub fn ablation_k_svg(rows: &[AblationRow]) -> String {
    const W: f64 = 640.0;
    const H: f64 = 400.0;
    const M: f64 = 50.0;
    let series: [(&str, &str, fn(&Metrics) -> f64); 4] = [
        ("accuracy", "#1f77b4", |m| m.accuracy),
        ("precision", "#ff7f0e", |m| m.precision),
        ("recall", "#2ca02c", |m| m.recall),
        ("f1", "#d62728", |m| m.f1),
    ];
    let (kmin, kmax) = rows
        .iter()
        .fold((usize::MAX, 0), |(lo, hi), r| (lo.min(r.k), hi.max(r.k)));
    let span = (kmax.saturating_sub(kmin)).max(1) as f64;
    let x = |k: usize| M + (k.saturating_sub(kmin)) as f64 / span * (W - 2.0 * M);
    let y = |v: f64| H - M - v.clamp(0.0, 1.0) * (H - 2.0 * M);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<polyline points="{M},{} {M},{} {},{}" fill="none" stroke="black"/>"#,
        M,
        H - M,
        W - M,
        H - M
    );
    for tick in 0..=4 {
        let v = f64::from(tick) / 4.0;
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-size="11" text-anchor="end">{v:.2}</text>"#,
            M - 6.0,
            y(v) + 4.0
        );
    }
    for r in rows {
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-size="11" text-anchor="middle">{}</text>"#,
            x(r.k),
            H - M + 16.0,
            r.k
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-size="12" text-anchor="middle">k</text>"#,
        W / 2.0,
        H - 12.0
    );
    for (i, (name, color, f)) in series.iter().enumerate() {
        let pts: Vec<String> = rows
            .iter()
            .map(|r| format!("{:.2},{:.2}", x(r.k), y(f(&r.metrics))))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            pts.join(" ")
        );
        let ly = M + 16.0 * i as f64;
        let _ = writeln!(
            s,
            r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#,
            W - M - 90.0,
            W - M - 70.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-size="11">{name}</text>"#,
            W - M - 64.0,
            ly + 4.0
        );
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::FoldResult;

    fn metrics(f1: f64) -> Metrics {
        Metrics {
            accuracy: 0.75,
            precision: 0.5,
            recall: 1.0,
            f1,
            auc: 0.8,
            ..Default::default()
        }
    }

    fn report() -> FoldReport {
        let folds = (0..4)
            .map(|fold| FoldResult {
                fold,
                n_train: 6,
                n_val: 2,
                best_epoch: fold,
                best: metrics(2.0 / 3.0),
                last: metrics(0.1 * fold as f64),
                roc: vec![(0.0, 0.0), (0.0, 0.5), (1.0, 1.0)],
                train_loss: vec![0.3, 0.2],
                val_f1: vec![0.1, 2.0 / 3.0],
            })
            .collect();
        FoldReport::new(folds)
    }

    #[test]
    fn metrics_csv_has_fold_rows_and_mean() {
        let bytes = csv_bytes(
            Some("config-sha256: abc"),
            &METRICS_HEADER,
            &metrics_rows(&report()),
        )
        .unwrap();
        let text = String::from_utf8(bytes).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "# config-sha256: abc");
        assert!(lines[1].starts_with("fold,best_epoch,accuracy"));
        assert_eq!(lines.len(), 2 + 5);
        assert!(lines[6].starts_with("mean,,0.75"));
    }

    #[test]
    fn fold_report_round_trips_through_json() {
        let r = report();
        let back: FoldReport = serde_json::from_str(&serde_json::to_string(&r).unwrap()).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn svg_has_four_series() {
        let rows: Vec<AblationRow> = (1..=3)
            .map(|k| AblationRow {
                k,
                fam_enabled: true,
                metrics: metrics(0.2 * k as f64),
                report: report(),
            })
            .collect();
        let svg = ablation_k_svg(&rows);
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("stroke-width=\"2\"/>").count(), 8);
    }
}
