//! Minimal SVG renderings for inspection: stacked waveform panels and the
//! ratio bar graph.

use std::fmt::Write;

use crate::matrix_est::RatioHistogram;
use crate::signal::SignalMatrix;

const WIDTH: f64 = 800.0;
const PANEL_HEIGHT: f64 = 120.0;
const MARGIN: f64 = 40.0;

fn header(out: &mut String, height: f64, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {WIDTH} {height}" width="{WIDTH}" height="{height}">"#
    );
    let _ = writeln!(out, r#"<rect x="0" y="0" width="{WIDTH}" height="{height}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{MARGIN}" y="20" font-family="sans-serif" font-size="14">{}</text>"#,
        escape(title)
    );
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// One polyline panel per column, each scaled to its own peak.
pub fn waveform_svg(title: &str, label_prefix: &str, signal: &SignalMatrix) -> String {
    let height = MARGIN + PANEL_HEIGHT * signal.cols() as f64;
    let mut out = String::new();
    header(&mut out, height, title);
    let plot_w = WIDTH - 2.0 * MARGIN;
    let x_step = if signal.rows() > 1 {
        plot_w / (signal.rows() - 1) as f64
    } else {
        0.0
    };
    for k in 0..signal.cols() {
        let top = MARGIN + PANEL_HEIGHT * k as f64;
        let mid = top + PANEL_HEIGHT / 2.0;
        let half = PANEL_HEIGHT / 2.0 - 10.0;
        let peak = signal.column_peak(k);
        let scale = if peak > 0.0 { half / peak } else { 0.0 };
        let _ = writeln!(
            out,
            r#"<line x1="{MARGIN}" y1="{mid}" x2="{}" y2="{mid}" stroke="lightgray"/>"#,
            WIDTH - MARGIN
        );
        let _ = writeln!(
            out,
            r#"<text x="4" y="{mid}" font-family="sans-serif" font-size="12">{}{}</text>"#,
            escape(label_prefix),
            k + 1
        );
        out.push_str(r#"<polyline fill="none" stroke="steelblue" stroke-width="1" points=""#);
        for (t, row) in signal.iter_rows().enumerate() {
            if t > 0 {
                out.push(' ');
            }
            let _ = write!(out, "{:.2},{:.2}", MARGIN + x_step * t as f64, mid - row[k] * scale);
        }
        out.push_str("\"/>\n");
    }
    out.push_str("</svg>\n");
    out
}

/// Bars at each ratio bin, heights proportional to counts.
pub fn bar_graph_svg(title: &str, hist: &RatioHistogram) -> String {
    let height = 320.0;
    let mut out = String::new();
    header(&mut out, height, title);
    let base = height - MARGIN;
    let _ = writeln!(
        out,
        r#"<line x1="{MARGIN}" y1="{base}" x2="{}" y2="{base}" stroke="black"/>"#,
        WIDTH - MARGIN
    );
    let bins: Vec<(f64, u64)> = hist.bins().collect();
    if let (Some(first), Some(last)) = (bins.first(), bins.last()) {
        let (lo, hi) = (first.0, last.0);
        let span = if hi > lo { hi - lo } else { 1.0 };
        let max = bins.iter().map(|b| b.1).max().unwrap_or(1) as f64;
        let plot_w = WIDTH - 2.0 * MARGIN - 6.0;
        let plot_h = base - MARGIN;
        let decimals = hist.quantum().decimals();
        for &(ratio, count) in &bins {
            let x = MARGIN + (ratio - lo) / span * plot_w;
            let h = count as f64 / max * plot_h;
            let _ = writeln!(
                out,
                r#"<rect x="{x:.2}" y="{:.2}" width="6" height="{h:.2}" fill="steelblue"><title>{ratio:.decimals$}: {count}</title></rect>"#,
                base - h
            );
        }
        let _ = writeln!(
            out,
            r#"<text x="{MARGIN}" y="{}" font-family="sans-serif" font-size="12">{lo:.decimals$}</text>"#,
            base + 16.0
        );
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="12" text-anchor="end">{hi:.decimals$}</text>"#,
            WIDTH - MARGIN,
            base + 16.0
        );
    }
    out.push_str("</svg>\n");
    out
}
