//! Minimal hand-emitted SVG: polyline charts and grid heatmaps. Plots are a
//! viewing convenience; all analysis rests on the CSV numbers.

use std::fmt::Write as _;

const W: f64 = 640.0;
const H: f64 = 420.0;
const MARGIN: f64 = 60.0;

fn scale(v: f64, lo: f64, hi: f64, out_lo: f64, out_hi: f64) -> f64 {
    if (hi - lo).abs() < 1e-300 {
        return 0.5 * (out_lo + out_hi);
    }
    out_lo + (v - lo) / (hi - lo) * (out_hi - out_lo)
}

fn axis_bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in values {
        if v.is_finite() {
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if lo == hi {
        return (lo - 0.5, hi + 0.5);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

/// A named series of (x, y) points.
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

const COLORS: [&str; 5] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"];

/// Renders line series with axis labels.
pub fn line_plot(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let (x_lo, x_hi) = axis_bounds(series.iter().flat_map(|s| s.points.iter().map(|p| p.0)));
    let (y_lo, y_hi) = axis_bounds(series.iter().flat_map(|s| s.points.iter().map(|p| p.1)));
    let mut svg = String::new();
    let _ = write!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = write!(
        svg,
        r#"<rect width="{W}" height="{H}" fill="white"/><text x="{}" y="24" text-anchor="middle" font-size="16">{title}</text>"#,
        W / 2.0
    );
    // Axes.
    let _ = write!(
        svg,
        r#"<line x1="{m}" y1="{b}" x2="{r}" y2="{b}" stroke="black"/><line x1="{m}" y1="{t}" x2="{m}" y2="{b}" stroke="black"/>"#,
        m = MARGIN,
        r = W - MARGIN / 2.0,
        t = MARGIN / 2.0,
        b = H - MARGIN
    );
    let _ = write!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle" font-size="12">{x_label}</text>"#,
        W / 2.0,
        H - 12.0
    );
    let _ = write!(
        svg,
        r#"<text x="16" y="{}" text-anchor="middle" font-size="12" transform="rotate(-90 16 {})">{y_label}</text>"#,
        H / 2.0,
        H / 2.0
    );
    for (ticks, along_x) in [(true, true), (true, false)] {
        let _ = ticks;
        for f in [0.0, 0.25, 0.5, 0.75, 1.0] {
            if along_x {
                let v = x_lo + f * (x_hi - x_lo);
                let px = scale(v, x_lo, x_hi, MARGIN, W - MARGIN / 2.0);
                let _ = write!(
                    svg,
                    r#"<text x="{px}" y="{}" text-anchor="middle" font-size="10">{v:.3}</text>"#,
                    H - MARGIN + 16.0
                );
            } else {
                let v = y_lo + f * (y_hi - y_lo);
                let py = scale(v, y_lo, y_hi, H - MARGIN, MARGIN / 2.0);
                let _ = write!(
                    svg,
                    r#"<text x="{}" y="{py}" text-anchor="end" font-size="10">{v:.3}</text>"#,
                    MARGIN - 6.0
                );
            }
        }
    }
    for (si, s) in series.iter().enumerate() {
        let color = COLORS[si % COLORS.len()];
        let mut path = String::new();
        for (x, y) in &s.points {
            let px = scale(*x, x_lo, x_hi, MARGIN, W - MARGIN / 2.0);
            let py = scale(*y, y_lo, y_hi, H - MARGIN, MARGIN / 2.0);
            let _ = write!(path, "{px:.2},{py:.2} ");
            let _ = write!(
                svg,
                r#"<circle cx="{px:.2}" cy="{py:.2}" r="2.5" fill="{color}"/>"#
            );
        }
        let _ = write!(
            svg,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
            path.trim_end()
        );
        let _ = write!(
            svg,
            r#"<text x="{}" y="{}" font-size="11" fill="{color}">{}</text>"#,
            W - MARGIN - 120.0,
            MARGIN / 2.0 + 16.0 * si as f64,
            s.label
        );
    }
    svg.push_str("</svg>");
    svg
}

/// Grid heatmap: `values[i][j]` in [0, 1] drawn over `x_values` x `y_values`.
pub fn heatmap(
    title: &str,
    x_label: &str,
    y_label: &str,
    x_values: &[f64],
    y_values: &[f64],
    values: &[Vec<f64>],
) -> String {
    let nx = x_values.len();
    let ny = y_values.len();
    let cell_w = (W - 2.0 * MARGIN) / nx.max(1) as f64;
    let cell_h = (H - 2.0 * MARGIN) / ny.max(1) as f64;
    let mut svg = String::new();
    let _ = write!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = write!(
        svg,
        r#"<rect width="{W}" height="{H}" fill="white"/><text x="{}" y="24" text-anchor="middle" font-size="16">{title}</text>"#,
        W / 2.0
    );
    for (i, _x) in x_values.iter().enumerate() {
        for (j, _y) in y_values.iter().enumerate() {
            let v = values[i][j].clamp(0.0, 1.0);
            let level = (v * 255.0).round() as u8;
            let px = MARGIN + i as f64 * cell_w;
            // y grows upward: last row at the top.
            let py = H - MARGIN - (j + 1) as f64 * cell_h;
            let _ = write!(
                svg,
                r##"<rect x="{px:.2}" y="{py:.2}" width="{cell_w:.2}" height="{cell_h:.2}" fill="rgb({level},{level},{level})" stroke="#888" stroke-width="0.3"/>"##
            );
        }
    }
    for (i, x) in x_values.iter().enumerate() {
        let _ = write!(
            svg,
            r#"<text x="{:.2}" y="{}" text-anchor="middle" font-size="10">{x}</text>"#,
            MARGIN + (i as f64 + 0.5) * cell_w,
            H - MARGIN + 16.0
        );
    }
    for (j, y) in y_values.iter().enumerate() {
        let _ = write!(
            svg,
            r#"<text x="{}" y="{:.2}" text-anchor="end" font-size="10">{y}</text>"#,
            MARGIN - 6.0,
            H - MARGIN - (j as f64 + 0.5) * cell_h + 4.0
        );
    }
    let _ = write!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle" font-size="12">{x_label}</text>"#,
        W / 2.0,
        H - 12.0
    );
    let _ = write!(
        svg,
        r#"<text x="16" y="{}" text-anchor="middle" font-size="12" transform="rotate(-90 16 {})">{y_label}</text>"#,
        H / 2.0,
        H / 2.0
    );
    svg.push_str("</svg>");
    svg
}
