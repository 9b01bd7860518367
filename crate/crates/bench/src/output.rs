use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::runner::ResultRow;
use crate::BenchError;

pub fn to_csv_string(rows: &[ResultRow]) -> Result<String, BenchError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    if rows.is_empty() {
        w.write_record(["scenario", "estimator", "N", "d", "eps", "rank", "trial", "error", "runtime_ms", "seed", "status"])
            .map_err(|e| BenchError::Csv(e.to_string()))?;
    }
    for r in rows {
        w.serialize(r).map_err(|e| BenchError::Csv(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| BenchError::Csv(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| BenchError::Csv(e.to_string()))
}

pub fn emit_csv(rows: &[ResultRow], path: &Path) -> Result<(), BenchError> {
    std::fs::write(path, to_csv_string(rows)?).map_err(|e| BenchError::io(path, e))
}

pub fn parse_csv(text: &str) -> Result<Vec<ResultRow>, BenchError> {
    csv::Reader::from_reader(text.as_bytes())
        .deserialize()
        .map(|r| r.map_err(|e| BenchError::Csv(e.to_string())))
        .collect()
}

fn field(row: &ResultRow, name: &str) -> Result<f64, BenchError> {
    Ok(match name {
        "N" => row.n as f64,
        "d" => row.d as f64,
        "eps" => row.eps,
        "rank" => row.rank,
        "trial" => row.trial as f64,
        "error" => row.error,
        "runtime_ms" => row.runtime_ms,
        other => return Err(BenchError::Config(format!("`{other}` is not a numeric column"))),
    })
}

fn group_label(row: &ResultRow, name: &str) -> Result<String, BenchError> {
    Ok(match name {
        "scenario" => row.scenario.clone(),
        "estimator" => row.estimator.clone(),
        "status" => row.status.clone(),
        other => format!("{other}={}", field(row, other)?),
    })
}

fn median(xs: &mut [f64]) -> f64 {
    xs.sort_by(f64::total_cmp);
    xs[(xs.len() - 1) / 2]
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub scenario: String,
    pub estimator: String,
    #[serde(rename = "N")]
    pub n: usize,
    pub d: usize,
    pub eps: f64,
    pub rank: f64,
    pub trials: usize,
    pub failures: usize,
    /// Median of the finite errors; `NaN` when every trial failed.
    pub median_error: f64,
}

/// Median error per (scenario, estimator, N, d, eps, rank), in key order.
pub fn summarize(rows: &[ResultRow]) -> Vec<SummaryRow> {
    let mut groups: Vec<(SummaryRow, Vec<f64>)> = Vec::new();
    for r in rows {
        let same = groups.last().is_some_and(|(s, _)| {
            s.scenario == r.scenario
                && s.estimator == r.estimator
                && s.n == r.n
                && s.d == r.d
                && s.eps.to_bits() == r.eps.to_bits()
                && s.rank.to_bits() == r.rank.to_bits()
        });
        if !same {
            groups.push((
                SummaryRow {
                    scenario: r.scenario.clone(),
                    estimator: r.estimator.clone(),
                    n: r.n,
                    d: r.d,
                    eps: r.eps,
                    rank: r.rank,
                    trials: 0,
                    failures: 0,
                    median_error: f64::NAN,
                },
                Vec::new(),
            ));
        }
        let (s, errs) = groups.last_mut().expect("pushed above");
        s.trials += 1;
        if r.error.is_finite() {
            errs.push(r.error);
        } else {
            s.failures += 1;
        }
    }
    groups
        .into_iter()
        .map(|(mut s, mut errs)| {
            if !errs.is_empty() {
                s.median_error = median(&mut errs);
            }
            s
        })
        .collect()
}

const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

/// Line chart of the median of `y_field` against `x_field`, one polyline per
/// value of `group_field`. Axes are logarithmic when every plotted value is
/// positive. Points with a non-finite median are skipped.
pub fn svg_lines(rows: &[ResultRow], x_field: &str, y_field: &str, group_field: &str) -> Result<String, BenchError> {
    if rows.is_empty() {
        return Err(BenchError::Config("no rows to plot".into()));
    }
    let mut raw: BTreeMap<String, BTreeMap<u64, (f64, Vec<f64>)>> = BTreeMap::new();
    for r in rows {
        let x = field(r, x_field)?;
        let y = field(r, y_field)?;
        let entry = raw.entry(group_label(r, group_field)?).or_default().entry(x.to_bits()).or_insert((x, Vec::new()));
        if y.is_finite() {
            entry.1.push(y);
        }
    }
    let mut series: Vec<(String, Vec<(f64, f64)>)> = raw
        .into_iter()
        .map(|(g, pts)| {
            let mut line: Vec<(f64, f64)> =
                pts.into_values().filter(|(_, ys)| !ys.is_empty()).map(|(x, mut ys)| (x, median(&mut ys))).collect();
            line.sort_by(|a, b| a.0.total_cmp(&b.0));
            (g, line)
        })
        .collect();
    series.retain(|(_, line)| !line.is_empty());
    let all: Vec<(f64, f64)> = series.iter().flat_map(|(_, l)| l.iter().copied()).collect();
    let log_x = all.iter().all(|p| p.0 > 0.0);
    let log_y = all.iter().all(|p| p.1 > 0.0);
    let tx = |v: f64| if log_x { v.log10() } else { v };
    let ty = |v: f64| if log_y { v.log10() } else { v };
    let span = |vals: Vec<f64>| -> (f64, f64) {
        let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !lo.is_finite() {
            (0.0, 1.0)
        } else if hi - lo < 1e-12 {
            (lo - 0.5, hi + 0.5)
        } else {
            (lo, hi)
        }
    };
    let (x0, x1) = span(all.iter().map(|p| tx(p.0)).collect());
    let (y0, y1) = span(all.iter().map(|p| ty(p.1)).collect());
    let (w, h, m) = (640.0, 400.0, 60.0);
    let px = |v: f64| m + (tx(v) - x0) / (x1 - x0) * (w - 2.0 * m);
    let py = |v: f64| h - m - (ty(v) - y0) / (y1 - y0) * (h - 2.0 * m);

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<path d="M{m} {m} V{} H{}" fill="none" stroke="black"/>"#,
        h - m,
        w - m
    );
    let scale_name = |log: bool| if log { "log" } else { "linear" };
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle" font-size="12">{} ({})</text>"#,
        w / 2.0,
        h - 15.0,
        xml_escape(x_field),
        scale_name(log_x)
    );
    let _ = writeln!(
        s,
        r#"<text x="15" y="{}" text-anchor="middle" font-size="12" transform="rotate(-90 15 {})">median {} ({})</text>"#,
        h / 2.0,
        h / 2.0,
        xml_escape(y_field),
        scale_name(log_y)
    );
    for (label, v, x, y) in [
        ("x", x0, m, h - m + 15.0),
        ("x", x1, w - m, h - m + 15.0),
        ("y", y0, m - 5.0, h - m),
        ("y", y1, m - 5.0, m + 4.0),
    ] {
        let log = if label == "x" { log_x } else { log_y };
        let value = if log { 10f64.powf(v) } else { v };
        let anchor = if label == "x" { "middle" } else { "end" };
        let _ = writeln!(s, r#"<text x="{x}" y="{y}" text-anchor="{anchor}" font-size="10">{value:.3e}</text>"#);
    }
    for (i, (group, line)) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let pts: Vec<String> = line.iter().map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y))).collect();
        let _ = writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#, pts.join(" "));
        for &(x, y) in line {
            let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#, px(x), py(y));
        }
        let ly = m + 14.0 * i as f64;
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{ly}" font-size="11" fill="{color}">{}</text>"#,
            w - m + 5.0 - 120.0,
            xml_escape(group)
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}

pub fn emit_svg_lines(
    rows: &[ResultRow],
    x_field: &str,
    y_field: &str,
    group_field: &str,
    path: &Path,
) -> Result<(), BenchError> {
    let svg = svg_lines(rows, x_field, y_field, group_field)?;
    std::fs::write(path, svg).map_err(|e| BenchError::io(path, e))
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}
