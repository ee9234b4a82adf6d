//! Plain SVG renderings of plot series. Layout is deliberately simple: bar
//! kinds become labelled horizontal bars, the rest become scatter/line charts.

use std::fmt::Write;

use crate::viz::{PlotKind, PlotPoint, PlotSeries};

const WIDTH: f64 = 720.0;
const MARGIN_LEFT: f64 = 240.0;
const MARGIN: f64 = 30.0;
const ROW: f64 = 16.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn point_label(p: &PlotPoint) -> String {
    p.labels
        .iter()
        .filter(|(k, _)| !matches!(k.as_str(), "privileged" | "verdict" | "criterion" | "skipped" | "skipped_metrics"))
        .map(|(_, v)| v.as_str())
        .collect::<Vec<_>>()
        .join(" / ")
}

pub fn render(series: &PlotSeries) -> String {
    match series.kind {
        PlotKind::Pca
        | PlotKind::PerformanceAndFairness
        | PlotKind::AllCutoffs
        | PlotKind::CeterisParibusCutoff
        | PlotKind::Density => xy_chart(series),
        _ => bar_chart(series),
    }
}

fn header(out: &mut String, height: f64, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" viewBox="0 0 {WIDTH} {height}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(out, r#"<text x="{MARGIN}" y="18" font-size="14">{}</text>"#, escape(title));
}

fn bar_chart(series: &PlotSeries) -> String {
    let bars: Vec<(String, Option<f64>)> = series.points.iter().map(|p| (point_label(p), p.values[0])).collect();
    let is_ratio = series.kind == PlotKind::FairnessCheckBars;
    let band = series.params.get("band").and_then(|b| {
        let lo = b.get(0)?.as_f64()?;
        let hi = b.get(1)?.as_f64()?;
        Some((lo, hi))
    });
    let mut lo = if is_ratio { 1.0f64 } else { 0.0 };
    let mut hi = lo;
    for v in bars.iter().filter_map(|b| b.1) {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if let Some((a, b)) = band {
        lo = lo.min(a);
        hi = hi.max(b);
    }
    if hi - lo < 1e-12 {
        hi = lo + 1.0;
    }
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN;
    let x = |v: f64| MARGIN_LEFT + (v - lo) / (hi - lo) * plot_w;
    let top = 2.0 * MARGIN;
    let height = top + bars.len() as f64 * ROW + MARGIN;

    let mut out = String::new();
    header(&mut out, height, series.kind.name());
    if let Some((a, b)) = band {
        let _ = writeln!(
            out,
            r##"<rect x="{:.2}" y="{top}" width="{:.2}" height="{:.2}" fill="#d8f0d8"/>"##,
            x(a),
            x(b) - x(a),
            bars.len() as f64 * ROW
        );
    }
    let base = x(if is_ratio { 1.0 } else { 0.0f64.clamp(lo, hi) });
    for (i, (label, value)) in bars.iter().enumerate() {
        let y = top + i as f64 * ROW;
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            MARGIN_LEFT - 6.0,
            y + ROW * 0.75,
            escape(label)
        );
        match value {
            Some(v) => {
                let (a, b) = (base.min(x(*v)), base.max(x(*v)));
                let _ = writeln!(
                    out,
                    r##"<rect x="{a:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="#4a7ab5"/>"##,
                    y + 2.0,
                    (b - a).max(0.5),
                    ROW - 4.0
                );
            }
            None => {
                let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}" fill="gray">undefined</text>"#, base + 4.0, y + ROW * 0.75);
            }
        }
    }
    let _ = writeln!(
        out,
        r#"<line x1="{base:.2}" y1="{top}" x2="{base:.2}" y2="{:.2}" stroke="black"/>"#,
        top + bars.len() as f64 * ROW
    );
    out.push_str("</svg>\n");
    out
}

fn xy(series: &PlotSeries, p: &PlotPoint) -> Option<(f64, f64)> {
    match series.kind {
        PlotKind::Density => Some(((p.values[0]? + p.values[1]?) / 2.0, p.values[2]?)),
        _ => Some((p.values[0]?, (*p.values.get(1)?)?)),
    }
}

fn xy_chart(series: &PlotSeries) -> String {
    let pts: Vec<(f64, f64, String)> = series
        .points
        .iter()
        .filter_map(|p| xy(series, p).map(|(x, y)| (x, y, point_label(p))))
        .collect();
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for (x, y, _) in &pts {
        x0 = x0.min(*x);
        x1 = x1.max(*x);
        y0 = y0.min(*y);
        y1 = y1.max(*y);
    }
    if pts.is_empty() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 - x0 < 1e-12 {
        x1 = x0 + 1.0;
    }
    if y1 - y0 < 1e-12 {
        y1 = y0 + 1.0;
    }
    let height = 480.0;
    let (left, right, top, bottom) = (3.0 * MARGIN, WIDTH - MARGIN, 2.0 * MARGIN, height - 2.0 * MARGIN);
    let sx = |x: f64| left + (x - x0) / (x1 - x0) * (right - left);
    let sy = |y: f64| bottom - (y - y0) / (y1 - y0) * (bottom - top);

    let mut out = String::new();
    header(&mut out, height, series.kind.name());
    let _ = writeln!(out, r#"<line x1="{left}" y1="{bottom}" x2="{right}" y2="{bottom}" stroke="black"/>"#);
    let _ = writeln!(out, r#"<line x1="{left}" y1="{top}" x2="{left}" y2="{bottom}" stroke="black"/>"#);
    for (i, a) in series.axes.iter().take(2).enumerate() {
        let (tx, ty) = if i == 0 { ((left + right) / 2.0, height - MARGIN / 2.0) } else { (MARGIN / 2.0, (top + bottom) / 2.0) };
        let _ = writeln!(out, r#"<text x="{tx:.2}" y="{ty:.2}" text-anchor="middle">{}</text>"#, escape(&a.name));
    }
    let _ = writeln!(out, r#"<text x="{left}" y="{:.2}">{x0:.3}</text>"#, bottom + 14.0);
    let _ = writeln!(out, r#"<text x="{right}" y="{:.2}" text-anchor="end">{x1:.3}</text>"#, bottom + 14.0);
    let _ = writeln!(out, r#"<text x="{:.2}" y="{bottom}" text-anchor="end">{y0:.3}</text>"#, left - 4.0);
    let _ = writeln!(out, r#"<text x="{:.2}" y="{top}" text-anchor="end">{y1:.3}</text>"#, left - 4.0);
    let labelled = matches!(series.kind, PlotKind::Pca | PlotKind::PerformanceAndFairness);
    for (x, y, label) in &pts {
        let _ = writeln!(out, r##"<circle cx="{:.2}" cy="{:.2}" r="3" fill="#4a7ab5"/>"##, sx(*x), sy(*y));
        if labelled {
            let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}">{}</text>"#, sx(*x) + 5.0, sy(*y) - 5.0, escape(label));
        }
    }
    out.push_str("</svg>\n");
    out
}
