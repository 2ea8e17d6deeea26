//! SVG 1.1 scatter plots of point sequences.
//!
//! Each point is a filled disk of radius `R/2`, so two disks touch exactly
//! when their centers are neighbors. Three-dimensional sequences are drawn as
//! their projection on the first two axes; one-dimensional ones on a strip.

use std::fmt::Write as _;

use crate::simulator::PointSequence;

#[derive(Debug, Clone)]
pub struct RenderOptions {
    /// Width of the drawing in pixels.
    pub size: f64,
    pub fill: String,
    pub frame: bool,
}

impl Default for RenderOptions {
    fn default() -> Self {
        Self {
            size: 800.0,
            fill: "black".into(),
            frame: true,
        }
    }
}

pub fn render_svg(seq: &PointSequence, opts: &RenderOptions) -> String {
    let side = seq.domain.side();
    let h = seq.domain.half_side();
    let s = opts.size / side;
    let r = 0.5 * seq.radius * s;
    let one_d = seq.domain.dim() == 1;
    let height = if one_d { (4.0 * r).max(opts.size / 20.0) } else { opts.size };

    let mut out = String::new();
    let _ = writeln!(out, r#"<?xml version="1.0" encoding="UTF-8" standalone="no"?>"#);
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{w}" height="{height}" viewBox="0 0 {w} {height}">"#,
        w = opts.size
    );
    if opts.frame {
        let _ = writeln!(
            out,
            r#"  <rect x="0" y="0" width="{}" height="{height}" fill="white" stroke="black" stroke-width="1"/>"#,
            opts.size
        );
    }
    let _ = writeln!(out, r#"  <g fill="{}" stroke="none">"#, opts.fill);
    for p in &seq.points {
        let c = p.coords();
        let x = (c[0] + h) * s;
        let y = if one_d { 0.5 * height } else { (h - c[1]) * s };
        let _ = writeln!(out, r#"    <circle cx="{x:.3}" cy="{y:.3}" r="{r:.3}"/>"#);
    }
    out.push_str("  </g>\n</svg>\n");
    out
}
