//! Minimal static SVG line plots for quick inspection of CSV artifacts.
//! Data emission is the real interface; this is a convenience only.

use std::fmt::Write;

use crate::error::{Error, Result};

const WIDTH: f64 = 860.0;
const HEIGHT: f64 = 520.0;
const MARGIN_L: f64 = 78.0;
const MARGIN_R: f64 = 24.0;
const MARGIN_T: f64 = 42.0;
const MARGIN_B: f64 = 58.0;
const COLORS: &[&str] = &["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

/// One named series of (x, y) points.
pub struct Series<'a> {
    pub label: &'a str,
    pub points: &'a [(f64, f64)],
}

fn nice_ticks(lo: f64, hi: f64) -> Vec<f64> {
    let span = hi - lo;
    if !(span > 0.0) {
        return vec![lo];
    }
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 2.5, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| span / s <= 6.0)
        .unwrap_or(mag * 10.0);
    let mut t = (lo / step).ceil() * step;
    let mut out = Vec::new();
    while t <= hi + step * 1e-9 {
        out.push(t);
        t += step;
    }
    out
}

fn fmt_tick(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if a >= 1e4 || a < 1e-3 {
        format!("{v:.2e}")
    } else {
        let s = format!("{v:.4}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

/// Render series as an SVG line plot with linear axes.
pub fn line_plot_svg(
    title: &str,
    x_label: &str,
    y_label: &str,
    series: &[Series<'_>],
) -> Result<String> {
    if series.is_empty() || series.iter().all(|s| s.points.is_empty()) {
        return Err(Error::invalid("plot", "no data points"));
    }
    let finite = |v: f64| v.is_finite();
    let mut x_lo = f64::INFINITY;
    let mut x_hi = f64::NEG_INFINITY;
    let mut y_lo = f64::INFINITY;
    let mut y_hi = f64::NEG_INFINITY;
    for s in series {
        for &(x, y) in s.points {
            if !finite(x) || !finite(y) {
                return Err(Error::NonFinite { what: "plot data" });
            }
            x_lo = x_lo.min(x);
            x_hi = x_hi.max(x);
            y_lo = y_lo.min(y);
            y_hi = y_hi.max(y);
        }
    }
    if x_hi == x_lo {
        x_hi = x_lo + 1.0;
    }
    if y_hi == y_lo {
        y_hi = y_lo + 1.0;
    }
    let pad = (y_hi - y_lo) * 0.05;
    y_lo -= pad;
    y_hi += pad;

    let pw = WIDTH - MARGIN_L - MARGIN_R;
    let ph = HEIGHT - MARGIN_T - MARGIN_B;
    let px = |x: f64| MARGIN_L + (x - x_lo) / (x_hi - x_lo) * pw;
    let py = |y: f64| MARGIN_T + (1.0 - (y - y_lo) / (y_hi - y_lo)) * ph;

    let mut svg = String::new();
    write!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">
<rect width="100%" height="100%" fill="white"/>
<text x="{tx}" y="24" text-anchor="middle" font-family="sans-serif" font-size="16">{title}</text>
"#,
        tx = WIDTH / 2.0,
    )
    .expect("string write");

    for t in nice_ticks(x_lo, x_hi) {
        let x = px(t);
        writeln!(
            svg,
            r##"<line x1="{x:.1}" y1="{y0:.1}" x2="{x:.1}" y2="{y1:.1}" stroke="#ddd"/>
<text x="{x:.1}" y="{ly:.1}" text-anchor="middle" font-family="sans-serif" font-size="11">{lbl}</text>"##,
            y0 = MARGIN_T,
            y1 = MARGIN_T + ph,
            ly = MARGIN_T + ph + 18.0,
            lbl = fmt_tick(t),
        )
        .expect("string write");
    }
    for t in nice_ticks(y_lo, y_hi) {
        let y = py(t);
        writeln!(
            svg,
            r##"<line x1="{x0:.1}" y1="{y:.1}" x2="{x1:.1}" y2="{y:.1}" stroke="#ddd"/>
<text x="{lx:.1}" y="{ty:.1}" text-anchor="end" font-family="sans-serif" font-size="11">{lbl}</text>"##,
            x0 = MARGIN_L,
            x1 = MARGIN_L + pw,
            lx = MARGIN_L - 6.0,
            ty = y + 4.0,
            lbl = fmt_tick(t),
        )
        .expect("string write");
    }
    writeln!(
        svg,
        r##"<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{pw}" height="{ph}" fill="none" stroke="#333"/>
<text x="{cx:.1}" y="{by:.1}" text-anchor="middle" font-family="sans-serif" font-size="13">{x_label}</text>
<text x="18" y="{cy:.1}" text-anchor="middle" font-family="sans-serif" font-size="13" transform="rotate(-90 18 {cy:.1})">{y_label}</text>"##,
        cx = MARGIN_L + pw / 2.0,
        by = HEIGHT - 14.0,
        cy = MARGIN_T + ph / 2.0,
    )
    .expect("string write");

    for (i, s) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let mut points = String::new();
        for &(x, y) in s.points {
            write!(points, "{:.2},{:.2} ", px(x), py(y)).expect("string write");
        }
        writeln!(
            svg,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.4"/>"#,
            points.trim_end()
        )
        .expect("string write");
        writeln!(
            svg,
            r#"<text x="{lx:.1}" y="{ly:.1}" font-family="sans-serif" font-size="12" fill="{color}">{}</text>"#,
            s.label,
            lx = MARGIN_L + pw - 150.0,
            ly = MARGIN_T + 18.0 + 16.0 * i as f64,
        )
        .expect("string write");
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}
