//! CSV and SVG emission.

use std::fmt::Write as _;
use std::path::Path;

use super::data::csv_io;
use super::metrics::MetricsRow;
use crate::error::{Error, Result};

/// C `%.17g`: 17 significant digits, trailing zeros dropped, exponent form
/// outside `1e-4 <= |x| < 1e17`. Parsing the result gives back `x` exactly.
pub fn fmt_g17(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{x:.16e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..17).contains(&exp) {
        let fixed = format!("{x:.*}", (16 - exp) as usize);
        strip_zeros(&fixed).to_string()
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", strip_zeros(mantissa), exp.abs())
    }
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// A named `(t, rmse, nll)` trajectory.
pub type MetricSeries = (String, Vec<(usize, f64, f64)>);

pub const METRICS_HEADER: [&str; 4] = ["t", "rmse", "nll", "wall_ms"];
pub const PREDICTIONS_HEADER: [&str; 4] = ["index", "mean", "variance", "y_true"];

/// `t,rmse,nll,wall_ms[,min_eig,diverged_at]`. The optional columns appear
/// when any row carries a value; empty cells mean "not recorded".
pub fn write_metrics_csv(path: &Path, rows: &[MetricsRow]) -> Result<()> {
    let with_eig = rows.iter().any(|r| r.min_eig.is_some());
    let with_div = rows.iter().any(|r| r.diverged_at.is_some());
    let mut header: Vec<&str> = METRICS_HEADER.to_vec();
    if with_eig {
        header.push("min_eig");
    }
    if with_div {
        header.push("diverged_at");
    }
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_io(path, e))?;
    w.write_record(&header).map_err(|e| csv_io(path, e))?;
    for r in rows {
        let mut rec = vec![r.t.to_string(), fmt_g17(r.rmse), fmt_g17(r.nll), fmt_g17(r.wall_ms)];
        if with_eig {
            rec.push(r.min_eig.map(fmt_g17).unwrap_or_default());
        }
        if with_div {
            rec.push(r.diverged_at.map(|t| t.to_string()).unwrap_or_default());
        }
        w.write_record(&rec).map_err(|e| csv_io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Final-state predictions on the test set.
pub fn write_predictions_csv(path: &Path, means: &[f64], variances: &[f64], targets: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_io(path, e))?;
    w.write_record(PREDICTIONS_HEADER).map_err(|e| csv_io(path, e))?;
    for (i, ((m, v), y)) in means.iter().zip(variances).zip(targets).enumerate() {
        w.write_record([i.to_string(), fmt_g17(*m), fmt_g17(*v), fmt_g17(*y)])
            .map_err(|e| csv_io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads a metrics file back as `(t, rmse, nll)` triples.
pub fn read_metrics_csv(path: &Path) -> Result<Vec<(usize, f64, f64)>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_io(path, e))?;
    let headers = r.headers().map_err(|e| csv_io(path, e))?.clone();
    if headers.iter().take(4).ne(METRICS_HEADER) {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            message: "not a metrics file".into(),
        });
    }
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| csv_io(path, e))?;
        let bad = |col: &str| Error::Parse {
            path: path.to_path_buf(),
            message: format!("row {}, column `{col}`", i + 2),
        };
        let t = rec[0].parse().map_err(|_| bad("t"))?;
        let rmse = rec[1].parse().map_err(|_| bad("rmse"))?;
        let nll = rec[2].parse().map_err(|_| bad("nll"))?;
        out.push((t, rmse, nll));
    }
    Ok(out)
}

/// Outer join of several metric series on `t`:
/// `t,<name>_rmse,<name>_nll,...`, empty where a series has no row.
pub fn write_joined_metrics(path: &Path, series: &[MetricSeries]) -> Result<()> {
    let mut ts: Vec<usize> = series.iter().flat_map(|(_, s)| s.iter().map(|p| p.0)).collect();
    ts.sort_unstable();
    ts.dedup();
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_io(path, e))?;
    let mut header = vec!["t".to_string()];
    for (name, _) in series {
        header.push(format!("{name}_rmse"));
        header.push(format!("{name}_nll"));
    }
    w.write_record(&header).map_err(|e| csv_io(path, e))?;
    for t in ts {
        let mut rec = vec![t.to_string()];
        for (_, s) in series {
            match s.iter().find(|p| p.0 == t) {
                Some(p) => rec.extend([fmt_g17(p.1), fmt_g17(p.2)]),
                None => rec.extend([String::new(), String::new()]),
            }
        }
        w.write_record(&rec).map_err(|e| csv_io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Two stacked panels, RMSE and NLL against `t`, one polyline per series.
pub fn write_plot_svg(path: &Path, series: &[MetricSeries]) -> Result<()> {
    const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];
    let (w, h, pad) = (640.0, 260.0, 50.0);
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{}" font-family="sans-serif" font-size="12">"#,
        2.0 * h
    );
    for (panel, label) in ["RMSE", "NLL"].iter().enumerate() {
        let y0 = panel as f64 * h;
        let pick = |p: &(usize, f64, f64)| if panel == 0 { p.1 } else { p.2 };
        let pts: Vec<(f64, f64)> = series
            .iter()
            .flat_map(|(_, s)| s.iter().map(|p| (p.0 as f64, pick(p))))
            .filter(|p| p.1.is_finite())
            .collect();
        let (tmin, tmax) = bounds(pts.iter().map(|p| p.0));
        let (vmin, vmax) = bounds(pts.iter().map(|p| p.1));
        let sx = |t: f64| pad + (t - tmin) / (tmax - tmin) * (w - 2.0 * pad);
        let sy = |v: f64| y0 + h - pad + (vmin - v) / (vmax - vmin) * (h - 2.0 * pad);
        let _ = writeln!(
            svg,
            r#"<rect x="{pad}" y="{}" width="{}" height="{}" fill="none" stroke="black"/>"#,
            y0 + pad,
            w - 2.0 * pad,
            h - 2.0 * pad
        );
        let _ = writeln!(svg, r#"<text x="{pad}" y="{}">{label}</text>"#, y0 + pad - 8.0);
        let _ = writeln!(svg, r#"<text x="5" y="{}">{}</text>"#, y0 + pad + 4.0, short(vmax));
        let _ = writeln!(svg, r#"<text x="5" y="{}">{}</text>"#, y0 + h - pad, short(vmin));
        let _ = writeln!(svg, r#"<text x="{}" y="{}">t</text>"#, w / 2.0, y0 + h - 15.0);
        for (k, (name, s)) in series.iter().enumerate() {
            let line: Vec<String> = s
                .iter()
                .filter(|p| pick(p).is_finite())
                .map(|p| format!("{:.2},{:.2}", sx(p.0 as f64), sy(pick(p))))
                .collect();
            let color = COLORS[k % COLORS.len()];
            let _ = writeln!(
                svg,
                r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
                line.join(" ")
            );
            if panel == 0 {
                let _ = writeln!(
                    svg,
                    r#"<text x="{}" y="{}" fill="{color}">{name}</text>"#,
                    w - pad - 120.0,
                    y0 + pad + 16.0 * (k as f64 + 1.0)
                );
            }
        }
    }
    svg.push_str("</svg>\n");
    std::fs::write(path, svg).map_err(|e| Error::io(path, e))
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if hi > lo {
        (lo, hi)
    } else {
        (lo - 0.5, hi + 0.5)
    }
}

fn short(v: f64) -> String {
    format!("{v:.4}")
}
