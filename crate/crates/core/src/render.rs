//! Static SVG plots: precision-recall curves, recall per round, and
//! bird's-eye-view scenes.

use std::fmt::Write as _;

use crate::geometry3d::bev_polygon;
use crate::kitti_io::Box3D;

pub const GT_COLOR: &str = "#2ca02c";
pub const INITIAL_COLOR: &str = "#e377c2";
pub const REFINED_COLOR: &str = "#7b3294";

const PALETTE: [&str; 6] = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b"];

const W: f64 = 640.0;
const H: f64 = 420.0;
const MARGIN: f64 = 50.0;

fn header(out: &mut String, w: f64, h: f64) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Unit-square plot frame: maps `(x, y)` in `[0,1]^2` to canvas pixels.
fn frame(out: &mut String, title: &str, xlabel: &str, ylabel: &str) -> impl Fn(f64, f64) -> (f64, f64) {
    let (pw, ph) = (W - 2.0 * MARGIN, H - 2.0 * MARGIN);
    let _ = writeln!(
        out,
        r#"<rect x="{MARGIN}" y="{MARGIN}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    for k in 0..=5 {
        let t = k as f64 / 5.0;
        let x = MARGIN + t * pw;
        let y = H - MARGIN - t * ph;
        let _ = writeln!(out, r#"<text x="{x}" y="{}" text-anchor="middle">{t:.1}</text>"#, H - MARGIN + 16.0);
        let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="end">{t:.1}</text>"#, MARGIN - 6.0, y + 4.0);
    }
    let _ = writeln!(out, r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#, W / 2.0, escape(title));
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, W / 2.0, H - 12.0, escape(xlabel));
    let _ = writeln!(
        out,
        r#"<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">{}</text>"#,
        H / 2.0,
        H / 2.0,
        escape(ylabel)
    );
    move |x, y| (MARGIN + x * pw, H - MARGIN - y * ph)
}

/// Interpolated precision at recall `k / n`, `k = 1..=n`, one line per series.
pub fn pr_curves_svg(title: &str, series: &[(String, Vec<f64>)]) -> String {
    let mut out = String::new();
    header(&mut out, W, H);
    let map = frame(&mut out, title, "recall", "precision");
    for (i, (name, precision)) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let n = precision.len() as f64;
        let pts: Vec<String> = precision
            .iter()
            .enumerate()
            .map(|(k, &p)| {
                let (x, y) = map((k + 1) as f64 / n, p.clamp(0.0, 1.0));
                format!("{x:.2},{y:.2}")
            })
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            pts.join(" ")
        );
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" fill="{color}">{}</text>"#,
            W - MARGIN - 150.0,
            MARGIN + 18.0 * (i + 1) as f64,
            escape(name)
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Grouped bars: one group per round label, one bar per series value.
pub fn recall_bars_svg(title: &str, rounds: &[String], series: &[(String, Vec<f64>)]) -> String {
    let mut out = String::new();
    header(&mut out, W, H);
    let map = frame(&mut out, title, "round", "recall");
    let groups = rounds.len().max(1) as f64;
    let bars = series.len().max(1) as f64;
    let group_w = 1.0 / groups;
    let bar_w = 0.8 * group_w / bars;
    for (g, label) in rounds.iter().enumerate() {
        let (lx, _) = map((g as f64 + 0.5) * group_w, 0.0);
        let _ = writeln!(
            out,
            r#"<text x="{lx:.2}" y="{}" text-anchor="middle">{}</text>"#,
            H - MARGIN + 30.0,
            escape(label)
        );
        for (s, (_, values)) in series.iter().enumerate() {
            let v = values.get(g).copied().unwrap_or(0.0).clamp(0.0, 1.0);
            let x0 = g as f64 * group_w + 0.1 * group_w + s as f64 * bar_w;
            let (x, y) = map(x0, v);
            let (x1, y0) = map(x0 + bar_w, 0.0);
            let _ = writeln!(
                out,
                r#"<rect x="{x:.2}" y="{y:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#,
                x1 - x,
                y0 - y,
                PALETTE[s % PALETTE.len()]
            );
        }
    }
    for (s, (name, _)) in series.iter().enumerate() {
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" fill="{}">{}</text>"#,
            MARGIN + 10.0,
            MARGIN + 18.0 * (s + 1) as f64,
            PALETTE[s % PALETTE.len()],
            escape(name)
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Top-down view window in camera coordinates (x right, z forward).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BevView {
    pub x_range: [f64; 2],
    pub z_range: [f64; 2],
    /// Canvas pixels per metre.
    pub scale: f64,
}

impl Default for BevView {
    fn default() -> Self {
        Self {
            x_range: [-20.0, 20.0],
            z_range: [0.0, 50.0],
            scale: 12.0,
        }
    }
}

impl BevView {
    /// Smallest window (with `pad` metres around) holding every box.
    pub fn fitting(boxes: &[Box3D], pad: f64, scale: f64) -> Self {
        let mut x = [f64::INFINITY, f64::NEG_INFINITY];
        let mut z = [0.0, f64::NEG_INFINITY];
        for b in boxes {
            for [px, pz] in bev_polygon(b) {
                x = [x[0].min(px), x[1].max(px)];
                z = [z[0].min(pz), z[1].max(pz)];
            }
        }
        if !x[0].is_finite() {
            return Self::default();
        }
        Self {
            x_range: [x[0] - pad, x[1] + pad],
            z_range: [z[0] - pad, z[1] + pad],
            scale,
        }
    }

    pub fn canvas_size(&self) -> (f64, f64) {
        (
            (self.x_range[1] - self.x_range[0]) * self.scale,
            (self.z_range[1] - self.z_range[0]) * self.scale,
        )
    }

    /// Canvas position of a ground point; far is up.
    pub fn to_canvas(&self, x: f64, z: f64) -> (f64, f64) {
        (
            (x - self.x_range[0]) * self.scale,
            (self.z_range[1] - z) * self.scale,
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BevLayer {
    pub label: String,
    pub color: String,
    pub boxes: Vec<Box3D>,
}

/// Box footprints per layer, with the heading edge drawn thicker and the
/// sensor marked at the origin.
pub fn bev_scene_svg(view: &BevView, layers: &[BevLayer], points: &[[f64; 2]]) -> String {
    let (w, h) = view.canvas_size();
    let mut out = String::new();
    header(&mut out, w, h);
    for &[x, z] in points {
        if x < view.x_range[0] || x > view.x_range[1] || z < view.z_range[0] || z > view.z_range[1] {
            continue;
        }
        let (cx, cy) = view.to_canvas(x, z);
        let _ = writeln!(out, r##"<circle cx="{cx:.1}" cy="{cy:.1}" r="0.8" fill="#888"/>"##);
    }
    let (sx, sy) = view.to_canvas(0.0, 0.0);
    let _ = writeln!(out, r#"<circle cx="{sx:.1}" cy="{sy:.1}" r="4" fill="black"/>"#);
    for (i, layer) in layers.iter().enumerate() {
        for b in &layer.boxes {
            let poly = bev_polygon(b);
            let pts: Vec<String> = poly
                .iter()
                .map(|&[x, z]| {
                    let (cx, cy) = view.to_canvas(x, z);
                    format!("{cx:.2},{cy:.2}")
                })
                .collect();
            let _ = writeln!(
                out,
                r#"<polygon points="{}" fill="none" stroke="{}" stroke-width="1.5"/>"#,
                pts.join(" "),
                layer.color
            );
            let (a, c) = (view.to_canvas(poly[0][0], poly[0][1]), view.to_canvas(poly[3][0], poly[3][1]));
            let _ = writeln!(
                out,
                r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{}" stroke-width="3"/>"#,
                a.0, a.1, c.0, c.1, layer.color
            );
        }
        let _ = writeln!(
            out,
            r#"<text x="8" y="{}" fill="{}">{}</text>"#,
            18.0 * (i + 1) as f64,
            layer.color,
            escape(&layer.label)
        );
    }
    out.push_str("</svg>\n");
    out
}
