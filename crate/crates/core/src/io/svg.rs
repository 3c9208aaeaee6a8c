use std::fmt::Write;

use crate::error::{Error, Result};
use crate::io::series::{header, row};
use crate::model::DiagnosticRecord;

const W: f64 = 720.0;
const H: f64 = 420.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;
const COLORS: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#e377c2"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn tick(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 1e4 || v.abs() < 1e-3 {
        format!("{v:.2e}")
    } else {
        format!("{v:.4}").trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

/// Line plot of `columns` of the series against t. Non-finite points are
/// skipped.
pub fn render_svg(records: &[DiagnosticRecord], columns: &[&str], title: &str, config_hash: &str) -> Result<String> {
    let first = records.first().ok_or_else(|| Error::Series("nothing to plot".into()))?;
    let names = header(first);
    let mut idx = Vec::new();
    for c in columns {
        let i = names.iter().position(|n| n == c).ok_or_else(|| Error::Series(format!("no column `{c}`")))?;
        idx.push(i);
    }
    let rows: Vec<Vec<f64>> = records.iter().map(|r| row(r, first)).collect::<Result<_>>()?;
    let ts: Vec<f64> = rows.iter().map(|r| r[0]).collect();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for r in &rows {
        for &i in &idx {
            if r[i].is_finite() {
                lo = lo.min(r[i]);
                hi = hi.max(r[i]);
            }
        }
    }
    if !lo.is_finite() {
        lo = 0.0;
        hi = 1.0;
    }
    if hi == lo {
        let pad = if lo == 0.0 { 1.0 } else { 0.05 * lo.abs() };
        lo -= pad;
        hi += pad;
    }
    let (t0, t1) = (ts[0], ts[ts.len() - 1].max(ts[0] + f64::EPSILON));
    let pw = W - LEFT - RIGHT;
    let ph = H - TOP - BOTTOM;
    let px = |t: f64| LEFT + (t - t0) / (t1 - t0) * pw;
    let py = |y: f64| TOP + (hi - y) / (hi - lo) * ph;

    let mut s = String::new();
    let hash = escape(config_hash);
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(s, "<!-- config_hash={hash} -->");
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" data-config-hash="{hash}">"#
    );
    let _ = writeln!(s, "<title>{}</title>", escape(title));
    let _ = writeln!(s, "<desc>config_hash={hash}</desc>");
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="24" font-family="sans-serif" font-size="15" text-anchor="middle">{}</text>"#,
        LEFT + pw / 2.0,
        escape(title)
    );
    let _ = writeln!(
        s,
        r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black" stroke-width="1"/>"#
    );
    for k in 0..=4 {
        let f = k as f64 / 4.0;
        let y = lo + f * (hi - lo);
        let t = t0 + f * (t1 - t0);
        let _ = writeln!(
            s,
            r##"<line x1="{LEFT}" y1="{yy}" x2="{x2}" y2="{yy}" stroke="#ddd"/><text x="{tx}" y="{ty}" font-family="sans-serif" font-size="11" text-anchor="end">{lab}</text>"##,
            yy = py(y),
            x2 = LEFT + pw,
            tx = LEFT - 6.0,
            ty = py(y) + 4.0,
            lab = tick(y)
        );
        let _ = writeln!(
            s,
            r#"<text x="{x}" y="{y}" font-family="sans-serif" font-size="11" text-anchor="middle">{lab}</text>"#,
            x = px(t),
            y = TOP + ph + 16.0,
            lab = tick(t)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="12" text-anchor="middle">t</text>"#,
        LEFT + pw / 2.0,
        H - 12.0
    );
    for (n, (&i, name)) in idx.iter().zip(columns).enumerate() {
        let color = COLORS[n % COLORS.len()];
        let mut pts = String::new();
        for (r, t) in rows.iter().zip(&ts) {
            if r[i].is_finite() {
                let _ = write!(pts, "{:.2},{:.2} ", px(*t), py(r[i]));
            }
        }
        let _ =
            writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#, pts.trim_end());
        let ly = TOP + 14.0 + 18.0 * n as f64;
        let lx = LEFT + pw + 12.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{}" y="{}" font-family="sans-serif" font-size="11">{}</text>"#,
            lx + 20.0,
            lx + 26.0,
            ly + 4.0,
            escape(name)
        );
    }
    let _ = writeln!(s, "</svg>");
    Ok(s)
}
