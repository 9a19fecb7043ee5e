//! Minimal SVG bar charts for influence plots and rating histograms.

use std::fmt::Write as _;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 50.0;

/// Vertical bars, one per value, with a zero baseline when values span both
/// signs.
pub fn bar_chart(title: &str, x_label: &str, y_label: &str, values: &[f64]) -> String {
    let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    let hi = finite.iter().copied().fold(0.0f64, f64::max);
    let lo = finite.iter().copied().fold(0.0f64, f64::min);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let plot_w = WIDTH - 2.0 * MARGIN;
    let plot_h = HEIGHT - 2.0 * MARGIN;
    let y = |v: f64| MARGIN + (hi - v) / span * plot_h;
    let bar_w = plot_w / values.len().max(1) as f64;

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<text x="{}" y="20" text-anchor="middle">{}</text>"#, WIDTH / 2.0, escape(title));
    for (k, &v) in values.iter().enumerate() {
        if !v.is_finite() {
            continue;
        }
        let (top, bottom) = if v >= 0.0 { (y(v), y(0.0)) } else { (y(0.0), y(v)) };
        let _ = writeln!(
            out,
            r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#,
            MARGIN + k as f64 * bar_w,
            top,
            (bar_w * 0.9).max(0.5),
            (bottom - top).max(0.0),
            if v >= 0.0 { "#4477aa" } else { "#cc6677" }
        );
    }
    let _ = writeln!(
        out,
        r#"<line x1="{MARGIN}" y1="{0:.2}" x2="{1}" y2="{0:.2}" stroke="black"/>"#,
        y(0.0),
        WIDTH - MARGIN
    );
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        HEIGHT - 15.0,
        escape(x_label)
    );
    let _ = writeln!(
        out,
        r#"<text x="15" y="{0}" transform="rotate(-90 15 {0})" text-anchor="middle">{1}</text>"#,
        HEIGHT / 2.0,
        escape(y_label)
    );
    let _ = writeln!(out, r#"<text x="{}" y="{:.2}" text-anchor="end">{hi:.4}</text>"#, MARGIN - 4.0, MARGIN);
    let _ = writeln!(out, r#"<text x="{}" y="{:.2}" text-anchor="end">{lo:.4}</text>"#, MARGIN - 4.0, MARGIN + plot_h);
    out.push_str("</svg>\n");
    out
}

/// Counts per equal-width bin over `[min, max]`.
pub fn histogram(values: &[usize], bins: usize) -> Vec<f64> {
    let (Some(&min), Some(&max)) = (values.iter().min(), values.iter().max()) else {
        return Vec::new();
    };
    let bins = bins.max(1);
    let width = ((max - min) as f64 / bins as f64).max(f64::MIN_POSITIVE);
    let mut counts = vec![0.0; bins];
    for &v in values {
        let b = (((v - min) as f64 / width) as usize).min(bins - 1);
        counts[b] += 1.0;
    }
    counts
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
