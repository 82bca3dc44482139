//! Minimal self-contained SVG line charts.

use std::fmt::Write;

const PANEL_W: f64 = 320.0;
const PANEL_H: f64 = 240.0;
const MARGIN_L: f64 = 48.0;
const MARGIN_R: f64 = 12.0;
const MARGIN_T: f64 = 28.0;
const MARGIN_B: f64 = 40.0;
const HEADER: f64 = 36.0;
const LEGEND_ROW: f64 = 18.0;
const COLUMNS: usize = 2;

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    /// `(d, frequency)` with `d` in `[0, 1]`.
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    pub title: String,
    pub series: Vec<Series>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Renders panels in a two-column grid with a shared legend. Series keep
/// their colour across panels by label.
pub fn render(title: &str, panels: &[Panel]) -> String {
    let mut labels: Vec<&str> = Vec::new();
    for s in panels.iter().flat_map(|p| &p.series) {
        if !labels.contains(&s.label.as_str()) {
            labels.push(&s.label);
        }
    }
    let colour = |label: &str| PALETTE[labels.iter().position(|l| *l == label).unwrap_or(0) % PALETTE.len()];

    let (x_min, x_max) = panels
        .iter()
        .flat_map(|p| &p.series)
        .flat_map(|s| &s.points)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(x, _)| (lo.min(x), hi.max(x)));
    let (x_min, x_max) = if x_min.is_finite() && x_max > x_min {
        (x_min, x_max)
    } else if x_min.is_finite() {
        (x_min - 0.05, x_min + 0.05)
    } else {
        (0.0, 0.5)
    };

    let cols = COLUMNS.min(panels.len().max(1));
    let rows = panels.len().div_ceil(cols).max(1);
    let legend_h = LEGEND_ROW * labels.len() as f64 + 12.0;
    let width = PANEL_W * cols as f64;
    let height = HEADER + PANEL_H * rows as f64 + legend_h;

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        width / 2.0,
        escape(title)
    );

    for (k, panel) in panels.iter().enumerate() {
        let ox = PANEL_W * (k % cols) as f64;
        let oy = HEADER + PANEL_H * (k / cols) as f64;
        let (left, top) = (ox + MARGIN_L, oy + MARGIN_T);
        let (w, h) = (PANEL_W - MARGIN_L - MARGIN_R, PANEL_H - MARGIN_T - MARGIN_B);
        let sx = |x: f64| left + (x - x_min) / (x_max - x_min) * w;
        let sy = |y: f64| top + (1.0 - y) * h;

        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="12">{}</text>"#,
            left + w / 2.0,
            oy + 18.0,
            escape(&panel.title)
        );
        let _ = writeln!(
            out,
            r##"<rect x="{left:.1}" y="{top:.1}" width="{w:.1}" height="{h:.1}" fill="none" stroke="#444"/>"##
        );
        for tick in [0.0, 0.25, 0.5, 0.75, 1.0] {
            let y = sy(tick);
            let _ = writeln!(
                out,
                r##"<line x1="{left:.1}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="#ddd"/><text x="{:.1}" y="{:.1}" text-anchor="end">{tick:.2}</text>"##,
                left + w,
                left - 4.0,
                y + 4.0
            );
        }
        let ticks: Vec<f64> = {
            let mut t: Vec<f64> = panel.series.iter().flat_map(|s| s.points.iter().map(|p| p.0)).collect();
            t.sort_by(f64::total_cmp);
            t.dedup();
            t
        };
        for x in ticks {
            let px = sx(x);
            let _ = writeln!(
                out,
                r##"<line x1="{px:.1}" y1="{:.1}" x2="{px:.1}" y2="{:.1}" stroke="#444"/><text x="{px:.1}" y="{:.1}" text-anchor="middle">{:.0}</text>"##,
                top + h,
                top + h + 4.0,
                top + h + 16.0,
                x * 100.0
            );
        }
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">missing (%)</text>"#,
            left + w / 2.0,
            top + h + 32.0
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" transform="rotate(-90 {:.1} {:.1})">correct</text>"#,
            ox + 12.0,
            top + h / 2.0,
            ox + 12.0,
            top + h / 2.0
        );
        for s in &panel.series {
            let mut pts = s.points.clone();
            pts.sort_by(|a, b| a.0.total_cmp(&b.0));
            let path: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.1},{:.1}", sx(x), sy(y))).collect();
            let c = colour(&s.label);
            let _ = writeln!(
                out,
                r#"<polyline points="{}" fill="none" stroke="{c}" stroke-width="1.5"/>"#,
                path.join(" ")
            );
            for &(x, y) in &pts {
                let _ = writeln!(out, r#"<circle cx="{:.1}" cy="{:.1}" r="2.2" fill="{c}"/>"#, sx(x), sy(y));
            }
        }
    }

    let ly = HEADER + PANEL_H * rows as f64 + 6.0;
    for (k, label) in labels.iter().enumerate() {
        let y = ly + LEGEND_ROW * k as f64;
        let _ = writeln!(
            out,
            r#"<line x1="{:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="{}" stroke-width="2"/><text x="{:.1}" y="{:.1}">{}</text>"#,
            MARGIN_L,
            y + 6.0,
            MARGIN_L + 24.0,
            y + 6.0,
            colour(label),
            MARGIN_L + 30.0,
            y + 10.0,
            escape(label)
        );
    }
    out.push_str("</svg>\n");
    out
}
