//! Deterministic SVG panels.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::mesh::StructuredGrid;

use super::principal::PrincipalDirections;
use super::streamlines::Streamline;

const CANVAS: f64 = 800.0;
const MARGIN: f64 = 10.0;
const LEGEND: f64 = 30.0;

/// Viridis-like stops, low to high.
const STOPS: [[f64; 3]; 5] = [
    [68.0, 1.0, 84.0],
    [59.0, 82.0, 139.0],
    [33.0, 145.0, 140.0],
    [94.0, 201.0, 98.0],
    [253.0, 231.0, 37.0],
];

#[derive(Debug, Clone, Copy)]
pub enum Layer<'a> {
    /// Per-element scalar colored on the fixed range `[lo, hi]`.
    Heatmap { label: &'a str, values: &'a [f64], range: (f64, f64) },
    /// Short fiber glyph through every element center.
    Orientation(&'a [[f64; 2]]),
    Streamlines(&'a [Streamline]),
    /// Major principal direction glyphs; red for tension, blue for compression.
    Principal(&'a PrincipalDirections),
}

/// `(0, max |v|)`, the range used for magnitude maps.
pub fn magnitude_range(values: &[f64]) -> (f64, f64) {
    (0.0, values.iter().fold(0.0f64, |a, v| a.max(v.abs())))
}

pub fn colormap(t: f64) -> [u8; 3] {
    let t = if t.is_finite() { t.clamp(0.0, 1.0) } else { 0.0 };
    let x = t * (STOPS.len() - 1) as f64;
    let k = (x.floor() as usize).min(STOPS.len() - 2);
    let f = x - k as f64;
    let c = |i: usize| (STOPS[k][i] + f * (STOPS[k + 1][i] - STOPS[k][i])).round() as u8;
    [c(0), c(1), c(2)]
}

struct Frame {
    scale: f64,
    height: f64,
}

impl Frame {
    fn x(&self, x: f64) -> f64 {
        MARGIN + x * self.scale
    }

    fn y(&self, y: f64) -> f64 {
        MARGIN + (self.height - y) * self.scale
    }
}

pub fn render_svg(grid: &StructuredGrid, layers: &[Layer<'_>]) -> String {
    let (w, h) = (grid.width(), grid.height());
    let f = Frame {
        scale: CANVAS / w.max(h),
        height: h,
    };
    let (pw, ph) = (2.0 * MARGIN + w * f.scale, 2.0 * MARGIN + h * f.scale + LEGEND);
    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{pw:.1}" height="{ph:.1}" viewBox="0 0 {pw:.1} {ph:.1}">"#
    );
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{pw:.1}" height="{ph:.1}" fill="white"/>"#);
    let (hx, hy) = (grid.hx(), grid.hy());
    let glyph = 0.4 * hx.min(hy);

    let mut legend_y = 2.0 * MARGIN + h * f.scale + 12.0;
    for layer in layers {
        match *layer {
            Layer::Heatmap { label, values, range } => {
                let (lo, hi) = range;
                let _ = writeln!(s, r#"<g id="heatmap-{label}" data-min="{lo:e}" data-max="{hi:e}" stroke="none">"#);
                for (e, &v) in values.iter().enumerate().take(grid.n_elements()) {
                    let t = if hi > lo { (v - lo) / (hi - lo) } else { 0.0 };
                    let [r, g, b] = colormap(t);
                    let (i, j) = grid.element_cell(e);
                    let (x0, y1) = (i as f64 * hx, (j + 1) as f64 * hy);
                    let _ = writeln!(
                        s,
                        r#"<rect x="{:.3}" y="{:.3}" width="{:.3}" height="{:.3}" fill="rgb({r},{g},{b})"/>"#,
                        f.x(x0),
                        f.y(y1),
                        hx * f.scale,
                        hy * f.scale
                    );
                }
                let _ = writeln!(s, "</g>");
                let _ = writeln!(
                    s,
                    r#"<text x="{MARGIN:.1}" y="{legend_y:.1}" font-family="sans-serif" font-size="11">{label}: {lo:.4e} to {hi:.4e}</text>"#
                );
                legend_y += 12.0;
            }
            Layer::Orientation(field) => {
                let _ = writeln!(s, r#"<path id="orientation" fill="none" stroke="black" stroke-width="1" d=""#);
                for (e, &[m, n]) in field.iter().enumerate().take(grid.n_elements()) {
                    let [cx, cy] = grid.centroid(e);
                    let norm = m.hypot(n).max(1e-300);
                    let (dx, dy) = (glyph * m / norm, glyph * n / norm);
                    let _ = writeln!(s, "M{:.3} {:.3}L{:.3} {:.3}", f.x(cx - dx), f.y(cy - dy), f.x(cx + dx), f.y(cy + dy));
                }
                let _ = writeln!(s, r#""/>"#);
            }
            Layer::Streamlines(lines) => {
                let _ = writeln!(s, r#"<g id="streamlines" fill="none" stroke="black" stroke-width="1">"#);
                for l in lines.iter().filter(|l| l.points.len() > 1) {
                    s.push_str(r#"<polyline points=""#);
                    for (k, p) in l.points.iter().enumerate() {
                        let sep = if k == 0 { "" } else { " " };
                        let _ = write!(s, "{sep}{:.3},{:.3}", f.x(p[0]), f.y(p[1]));
                    }
                    s.push_str("\"/>\n");
                }
                let _ = writeln!(s, "</g>");
            }
            Layer::Principal(pd) => {
                let peak = pd.sigma_major.iter().fold(0.0f64, |a, v| a.max(v.abs()));
                let _ = writeln!(s, r#"<g id="principal" fill="none" stroke-width="1.5">"#);
                for e in 0..grid.n_elements().min(pd.major.len()) {
                    let len = if peak > 0.0 { glyph * (pd.sigma_major[e].abs() / peak).sqrt() } else { 0.0 };
                    let [cx, cy] = grid.centroid(e);
                    let [dx, dy] = pd.major[e];
                    let color = if pd.sigma_major[e] >= 0.0 { "red" } else { "blue" };
                    let _ = writeln!(
                        s,
                        r#"<line x1="{:.3}" y1="{:.3}" x2="{:.3}" y2="{:.3}" stroke="{color}"/>"#,
                        f.x(cx - len * dx),
                        f.y(cy - len * dy),
                        f.x(cx + len * dx),
                        f.y(cy + len * dy)
                    );
                }
                let _ = writeln!(s, "</g>");
            }
        }
    }

    // Domain outline: element sides without an active neighbor.
    let _ = writeln!(s, r#"<path id="outline" fill="none" stroke="black" stroke-width="1.5" d=""#);
    for e in 0..grid.n_elements() {
        let (i, j) = grid.element_cell(e);
        let nb = grid.neighbors(e);
        let (x0, x1, y0, y1) = (i as f64 * hx, (i + 1) as f64 * hx, j as f64 * hy, (j + 1) as f64 * hy);
        let sides = [
            (nb.down, (x0, y0), (x1, y0)),
            (nb.right, (x1, y0), (x1, y1)),
            (nb.up, (x1, y1), (x0, y1)),
            (nb.left, (x0, y1), (x0, y0)),
        ];
        for (nb, a, b) in sides {
            if nb.is_none() {
                let _ = writeln!(s, "M{:.3} {:.3}L{:.3} {:.3}", f.x(a.0), f.y(a.1), f.x(b.0), f.y(b.1));
            }
        }
    }
    let _ = writeln!(s, r#""/>"#);
    s.push_str("</svg>\n");
    s
}

pub fn write_svg(path: &Path, grid: &StructuredGrid, layers: &[Layer<'_>]) -> Result<()> {
    std::fs::write(path, render_svg(grid, layers)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_preset, ProblemPreset};

    #[test]
    fn empty_layers_draw_outline_only() {
        let grid = StructuredGrid::rectangle(3, 2, 1.0, 1.0).unwrap();
        let svg = render_svg(&grid, &[]);
        assert!(svg.starts_with("<?xml") && svg.trim_end().ends_with("</svg>"));
        assert!(svg.contains(r#"id="outline""#));
        assert!(!svg.contains("<rect x=\"10"));
        // 3 + 3 + 2 + 2 boundary sides.
        assert_eq!(svg.matches('M').count(), 10);
    }

    #[test]
    fn constant_field_is_single_color() {
        let grid = build_preset(&ProblemPreset::lbracket().with_resolution(10, 10)).unwrap().0;
        let zeros = vec![0.0; grid.n_elements()];
        let svg = render_svg(
            &grid,
            &[Layer::Heatmap {
                label: "kappa",
                values: &zeros,
                range: magnitude_range(&zeros),
            }],
        );
        let fills: std::collections::BTreeSet<&str> = svg
            .lines()
            .filter(|l| l.starts_with("<rect x=\"1"))
            .filter_map(|l| l.split("fill=").nth(1))
            .collect();
        assert_eq!(fills.len(), 1);
        assert!(fills.contains(r#""rgb(68,1,84)"/>"#));
        assert!(svg.contains(r#"data-min="0e0" data-max="0e0""#));
    }

    #[test]
    fn output_is_deterministic() {
        let grid = build_preset(&ProblemPreset::lbracket().with_resolution(12, 12)).unwrap().0;
        let field: Vec<[f64; 2]> = (0..grid.n_elements()).map(|e| [(e as f64).cos(), (e as f64).sin()]).collect();
        let vals: Vec<f64> = (0..grid.n_elements()).map(|e| e as f64 * 0.1).collect();
        let lines = super::super::trace_streamlines(&grid, &field, 0.1).unwrap();
        let layers = [
            Layer::Heatmap {
                label: "psi",
                values: &vals,
                range: magnitude_range(&vals),
            },
            Layer::Orientation(&field),
            Layer::Streamlines(&lines),
        ];
        assert_eq!(render_svg(&grid, &layers), render_svg(&grid, &layers));
    }

    #[test]
    fn colormap_endpoints() {
        assert_eq!(colormap(0.0), [68, 1, 84]);
        assert_eq!(colormap(1.0), [253, 231, 37]);
        assert_eq!(colormap(f64::NAN), [68, 1, 84]);
    }
}
