//! Summaries of many validation records: CSV table, static SVG panel and
//! histogram data for standardized residuals.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gof::{normal, TestKind};
use crate::pipeline::ValidationRecord;

pub const CSV_HEADER: [&str; 8] = [
    "set_id",
    "coverage",
    "empirical_std",
    "predicted_std",
    "ks_p",
    "dap_p",
    "sw_p",
    "decisions",
];

/// Records ordered by coverage, ties broken by set id.
pub fn sorted_by_coverage(records: &[ValidationRecord]) -> Vec<&ValidationRecord> {
    let mut v: Vec<&ValidationRecord> = records.iter().collect();
    v.sort_by(|a, b| a.coverage.total_cmp(&b.coverage).then_with(|| a.set_id.cmp(&b.set_id)));
    v
}

/// `KS:accept;DAP:reject;…` in test order.
pub fn decisions(record: &ValidationRecord) -> String {
    record
        .reports
        .iter()
        .map(|r| format!("{}:{}", r.test, if r.reject_h0 { "reject" } else { "accept" }))
        .collect::<Vec<_>>()
        .join(";")
}

fn p_cell(record: &ValidationRecord, kind: TestKind) -> String {
    record.report(kind).map(|r| r.p_value.to_string()).unwrap_or_default()
}

/// One row per record, sorted by coverage. Floats use the shortest
/// representation that round-trips.
pub fn to_csv(records: &[ValidationRecord]) -> Result<String> {
    if records.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    let io_err = |e: csv::Error| Error::ConfigInvalid(format!("csv: {e}"));
    w.write_record(CSV_HEADER).map_err(io_err)?;
    for r in sorted_by_coverage(records) {
        w.write_record([
            r.set_id.clone(),
            r.coverage.to_string(),
            r.empirical_std.to_string(),
            r.predicted_std.to_string(),
            p_cell(r, TestKind::Ks),
            p_cell(r, TestKind::Dap),
            p_cell(r, TestKind::Sw),
            decisions(r),
        ])
        .map_err(io_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::ConfigInvalid(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv of UTF-8 fields is UTF-8"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    /// `bins + 1` increasing edges.
    pub edges: Vec<f64>,
    /// Values below the first edge land in the first bin, above the last in the
    /// last bin, so the counts sum to the sample size.
    pub counts: Vec<usize>,
    /// Standard normal density at each bin center.
    pub normal_pdf: Vec<f64>,
    /// Counts divided by `n · width`, comparable with `normal_pdf`.
    pub density: Vec<f64>,
}

pub fn histogram(values: &[f64], bins: usize, lo: f64, hi: f64) -> Result<Histogram> {
    if bins == 0 || !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::ConfigInvalid(format!(
            "bad histogram range [{lo}, {hi}] with {bins} bins"
        )));
    }
    let width = (hi - lo) / bins as f64;
    let edges: Vec<f64> = (0..=bins).map(|i| lo + i as f64 * width).collect();
    let mut counts = vec![0usize; bins];
    for (i, &v) in values.iter().enumerate() {
        if v.is_nan() {
            return Err(Error::NonFinite { index: i });
        }
        let b = ((v - lo) / width).floor();
        let b = if b < 0.0 { 0 } else { (b as usize).min(bins - 1) };
        counts[b] += 1;
    }
    let n = values.len().max(1) as f64;
    let normal_pdf = (0..bins).map(|i| normal::pdf(lo + (i as f64 + 0.5) * width)).collect();
    let density = counts.iter().map(|&c| c as f64 / (n * width)).collect();
    Ok(Histogram {
        edges,
        counts,
        normal_pdf,
        density,
    })
}

const W: f64 = 720.0;
const PLOT_H: f64 = 220.0;
const STRIP_H: f64 = 18.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 30.0;

/// Static SVG: residual standard deviations against coverage rank, and one
/// accept/reject strip per test underneath.
pub fn to_svg(records: &[ValidationRecord], title: &str) -> Result<String> {
    if records.is_empty() {
        return Err(Error::EmptyInput);
    }
    let recs = sorted_by_coverage(records);
    let n = recs.len();
    let kinds: Vec<TestKind> = TestKind::ALL
        .into_iter()
        .filter(|k| recs.iter().any(|r| r.report(*k).is_some()))
        .collect();
    let height = TOP + PLOT_H + 40.0 + kinds.len() as f64 * (STRIP_H + 6.0) + 30.0;
    let pw = W - LEFT - RIGHT;
    let x_of = |i: usize| LEFT + (i as f64 + 0.5) * pw / n as f64;
    let ymax = recs
        .iter()
        .map(|r| r.empirical_std.max(r.predicted_std))
        .fold(0.0f64, f64::max)
        .max(1e-12)
        * 1.1;
    let y_of = |v: f64| TOP + PLOT_H * (1.0 - v / ymax);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{height}" viewBox="0 0 {W} {height}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{LEFT}" y="18" font-size="13">{}</text>"#, escape(title));
    let _ = writeln!(
        s,
        r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{PLOT_H}" fill="none" stroke="black"/>"#
    );
    for t in 0..=4 {
        let v = ymax * t as f64 / 4.0;
        let y = y_of(v);
        let _ = writeln!(
            s,
            r##"<line x1="{}" y1="{y:.2}" x2="{LEFT}" y2="{y:.2}" stroke="black"/><text x="{}" y="{:.2}" text-anchor="end">{v:.3}</text>"##,
            LEFT - 4.0,
            LEFT - 6.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="14" y="{:.2}" transform="rotate(-90 14 {:.2})" text-anchor="middle">std [px]</text>"#,
        TOP + PLOT_H / 2.0,
        TOP + PLOT_H / 2.0
    );
    for (name, color, get) in [
        (
            "empirical",
            "#1f5fbf",
            (|r: &ValidationRecord| r.empirical_std) as fn(&ValidationRecord) -> f64,
        ),
        ("predicted", "#d0601a", |r: &ValidationRecord| r.predicted_std),
    ] {
        let pts: Vec<String> = recs
            .iter()
            .enumerate()
            .map(|(i, r)| format!("{:.2},{:.2}", x_of(i), y_of(get(r))))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"><title>{name}</title></polyline>"#,
            pts.join(" ")
        );
    }
    let _ = writeln!(
        s,
        r##"<text x="{:.2}" y="{:.2}" fill="#1f5fbf">empirical</text><text x="{:.2}" y="{:.2}" fill="#d0601a">predicted</text>"##,
        LEFT + 8.0,
        TOP + 14.0,
        LEFT + 80.0,
        TOP + 14.0
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">sets sorted by coverage (n = {n})</text>"#,
        LEFT + pw / 2.0,
        TOP + PLOT_H + 16.0
    );

    let cell = pw / n as f64;
    for (row, kind) in kinds.iter().enumerate() {
        let y = TOP + PLOT_H + 30.0 + row as f64 * (STRIP_H + 6.0);
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{kind}</text>"#,
            LEFT - 6.0,
            y + STRIP_H - 5.0
        );
        for (i, r) in recs.iter().enumerate() {
            let fill = match r.report(*kind) {
                Some(t) if t.reject_h0 => "#c0392b",
                Some(_) => "#27ae60",
                None => "#cccccc",
            };
            let _ = writeln!(
                s,
                r#"<rect x="{:.2}" y="{y:.2}" width="{:.2}" height="{STRIP_H}" fill="{fill}" stroke="white" stroke-width="0.5"/>"#,
                LEFT + i as f64 * cell,
                cell
            );
        }
    }
    let _ = writeln!(
        s,
        r##"<text x="{LEFT}" y="{:.2}"><tspan fill="#27ae60">■ H0 not rejected</tspan>  <tspan fill="#c0392b">■ H0 rejected</tspan></text>"##,
        height - 10.0
    );
    s.push_str("</svg>\n");
    Ok(s)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
