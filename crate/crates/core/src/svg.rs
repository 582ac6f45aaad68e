//! Minimal hand-written SVG output for reports and planned paths.

use std::fmt::Write as _;

use crate::error::Result;
use crate::trajectory::ConfigPath;
use crate::world::Scene;

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

/// One line of a chart: `(x, mean, standard error)` points.
#[derive(Clone, Debug)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64, f64)>,
}

/// One chart panel with its own axes.
#[derive(Clone, Debug)]
pub struct Panel {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
}

const PANEL_W: f64 = 420.0;
const PANEL_H: f64 = 300.0;
const MARGIN_L: f64 = 64.0;
const MARGIN_R: f64 = 16.0;
const MARGIN_T: f64 = 32.0;
const MARGIN_B: f64 = 44.0;

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in values.filter(|v| v.is_finite()) {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        return (lo - 0.5, hi + 0.5);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

/// Side-by-side panels of mean curves with error bars.
pub fn error_bar_chart(title: &str, panels: &[Panel]) -> String {
    let width = PANEL_W * panels.len().max(1) as f64;
    let height = PANEL_H + 24.0 + 18.0 * max_series(panels) as f64;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="16" text-anchor="middle" font-size="14">{}</text>"#,
        width / 2.0,
        escape(title)
    );
    for (k, panel) in panels.iter().enumerate() {
        draw_panel(&mut out, panel, k as f64 * PANEL_W, 20.0);
    }
    out.push_str("</svg>\n");
    out
}

fn max_series(panels: &[Panel]) -> usize {
    panels.iter().map(|p| p.series.len()).max().unwrap_or(0)
}

fn draw_panel(out: &mut String, panel: &Panel, x0: f64, y0: f64) {
    let pts = || panel.series.iter().flat_map(|s| s.points.iter());
    let (xmin, xmax) = range(pts().map(|p| p.0));
    let (ymin, ymax) = range(pts().flat_map(|p| [p.1 - p.2, p.1 + p.2]));
    let plot_w = PANEL_W - MARGIN_L - MARGIN_R;
    let plot_h = PANEL_H - MARGIN_T - MARGIN_B;
    let sx = |x: f64| x0 + MARGIN_L + (x - xmin) / (xmax - xmin) * plot_w;
    let sy = |y: f64| y0 + MARGIN_T + (ymax - y) / (ymax - ymin) * plot_h;

    let _ = writeln!(
        out,
        r##"<rect x="{}" y="{}" width="{plot_w}" height="{plot_h}" fill="none" stroke="#444"/>"##,
        x0 + MARGIN_L,
        y0 + MARGIN_T
    );
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle" font-size="12">{}</text>"#,
        x0 + MARGIN_L + plot_w / 2.0,
        y0 + MARGIN_T - 8.0,
        escape(&panel.title)
    );
    for i in 0..=4 {
        let fy = ymin + (ymax - ymin) * i as f64 / 4.0;
        let fx = xmin + (xmax - xmin) * i as f64 / 4.0;
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#,
            x0 + MARGIN_L - 4.0,
            sy(fy) + 4.0,
            tick(fy)
        );
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            sx(fx),
            y0 + MARGIN_T + plot_h + 14.0,
            tick(fx)
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        x0 + MARGIN_L + plot_w / 2.0,
        y0 + PANEL_H - 12.0,
        escape(&panel.x_label)
    );
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle" transform="rotate(-90 {} {})">{}</text>"#,
        x0 + 14.0,
        y0 + MARGIN_T + plot_h / 2.0,
        x0 + 14.0,
        y0 + MARGIN_T + plot_h / 2.0,
        escape(&panel.y_label)
    );

    for (k, s) in panel.series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let line: Vec<String> = s
            .points
            .iter()
            .map(|&(x, y, _)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
            line.join(" ")
        );
        for &(x, y, e) in &s.points {
            if e > 0.0 {
                let _ = writeln!(
                    out,
                    r#"<line x1="{0:.2}" y1="{1:.2}" x2="{0:.2}" y2="{2:.2}" stroke="{color}"/>"#,
                    sx(x),
                    sy(y - e),
                    sy(y + e)
                );
            }
        }
        let ly = y0 + PANEL_H + 4.0 + 18.0 * k as f64;
        let _ = writeln!(
            out,
            r#"<rect x="{}" y="{}" width="12" height="3" fill="{color}"/><text x="{}" y="{}">{}</text>"#,
            x0 + MARGIN_L,
            ly - 4.0,
            x0 + MARGIN_L + 18.0,
            ly,
            escape(&s.name)
        );
    }
}

fn tick(v: f64) -> String {
    if v != 0.0 && (v.abs() < 1e-2 || v.abs() >= 1e4) {
        format!("{v:.1e}")
    } else {
        format!("{v:.3}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Workspace drawing: obstacles, the ε margin, the arm at `poses` evenly
/// spaced times and the end-effector trace.
pub fn scene_svg<P: ConfigPath + ?Sized>(scene: &Scene, path: &P, poses: usize) -> Result<String> {
    const SIZE: f64 = 600.0;
    let arm = scene.arm();
    let reach = arm.reach() * 1.1;
    let scale = SIZE / (2.0 * reach);
    let px = |x: f64| (x + reach) * scale;
    let py = |y: f64| (reach - y) * scale;

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for c in scene.obstacles() {
        let _ = writeln!(
            out,
            r##"<circle cx="{:.2}" cy="{:.2}" r="{:.2}" fill="none" stroke="#bbb" stroke-dasharray="4 3"/>"##,
            px(c.cx),
            py(c.cy),
            (c.r + scene.epsilon()) * scale
        );
        let _ = writeln!(
            out,
            r##"<circle cx="{:.2}" cy="{:.2}" r="{:.2}" fill="#888"/>"##,
            px(c.cx),
            py(c.cy),
            c.r * scale
        );
    }

    let trace_samples = 200;
    let mut trace = Vec::with_capacity(trace_samples);
    for i in 0..trace_samples {
        let q = path.config(i as f64 / (trace_samples - 1) as f64)?;
        let p = arm.fk(&q, arm.end_effector())?;
        trace.push(format!("{:.2},{:.2}", px(p.x), py(p.y)));
    }
    let _ = writeln!(
        out,
        r##"<polyline points="{}" fill="none" stroke="#d62728" stroke-width="1.5"/>"##,
        trace.join(" ")
    );

    let poses = poses.max(2);
    for i in 0..poses {
        let t = i as f64 / (poses - 1) as f64;
        let q = path.config(t)?;
        let joints: Vec<String> = arm
            .joint_origins(&q)?
            .iter()
            .map(|p| format!("{:.2},{:.2}", px(p.x), py(p.y)))
            .collect();
        let shade = (40.0 + 160.0 * (1.0 - t)) as u8;
        let _ = writeln!(
            out,
            r#"<polyline points="{}" fill="none" stroke="rgb({shade},{shade},255)" stroke-width="2"/>"#,
            joints.join(" ")
        );
    }
    let _ = writeln!(
        out,
        r##"<circle cx="{:.2}" cy="{:.2}" r="4" fill="#000"/>"##,
        px(0.0),
        py(0.0)
    );
    out.push_str("</svg>\n");
    Ok(out)
}
