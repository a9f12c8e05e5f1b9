//! Deterministic SVG drawings of planar complexes.

use crate::complex::Complex;
use crate::error::{Error, Result};
use crate::exact::{to_f64, Point};
use std::fmt::Write;

/// Fill colours handed out by index.
pub const PALETTE: [&str; 8] = ["#8dd3c7", "#ffffb3", "#bebada", "#fb8072", "#80b1d3", "#fdb462", "#b3de69", "#fccde5"];

#[derive(Clone, Debug)]
pub struct RenderSpec<'a> {
    pub complex: &'a Complex,
    /// Coordinates to draw when the ambient dimension exceeds 2.
    pub axes: Option<(usize, usize)>,
    pub labels: bool,
    /// Fill per maximal simplex (indexed like `complex.maximal()`); `None` leaves it white.
    pub fills: Vec<Option<String>>,
    /// Arrows from a point to its image.
    pub arrows: Vec<(Point, Point)>,
    pub width: u32,
    pub stroke: String,
}

impl<'a> RenderSpec<'a> {
    pub fn new(complex: &'a Complex) -> RenderSpec<'a> {
        RenderSpec { complex, axes: None, labels: true, fills: Vec::new(), arrows: Vec::new(), width: 480, stroke: "#333333".into() }
    }
}

fn project(p: &[crate::exact::Rational], axes: (usize, usize)) -> (f64, f64) {
    let x = p.get(axes.0).map_or(0.0, to_f64);
    let y = p.get(axes.1).map_or(0.0, to_f64);
    (x, y)
}

pub fn render_svg(spec: &RenderSpec) -> Result<String> {
    let k = spec.complex;
    let n = k.ambient_dim();
    let axes = match spec.axes {
        Some((a, b)) if a < n.max(1) && b < n.max(2) => (a, b),
        Some(_) => return Err(Error::UnsupportedDimension(n)),
        None if n <= 2 => (0, 1),
        None => return Err(Error::UnsupportedDimension(n)),
    };
    let w = spec.width as f64;
    let margin = 28.0;
    let mut pts: Vec<(f64, f64)> = k.points().iter().map(|p| project(p, axes)).collect();
    for (a, b) in &spec.arrows {
        pts.push(project(a, axes));
        pts.push(project(b, axes));
    }
    let mut out = String::new();
    if pts.is_empty() {
        writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{0}" height="{0}" viewBox="0 0 {0} {0}"></svg>"#, spec.width).unwrap();
        return Ok(out);
    }
    let (mut x0, mut y0, mut x1, mut y1) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
    for &(x, y) in &pts {
        x0 = x0.min(x);
        y0 = y0.min(y);
        x1 = x1.max(x);
        y1 = y1.max(y);
    }
    let span = (x1 - x0).max(y1 - y0).max(1e-9);
    let s = (w - 2.0 * margin) / span;
    let h = ((y1 - y0) * s + 2.0 * margin).round().max(2.0 * margin);
    let tx = |x: f64| margin + (x - x0) * s;
    let ty = |y: f64| h - margin - (y - y0) * s;
    let xy = |p: &Point| {
        let (x, y) = project(p, axes);
        format!("{:.3},{:.3}", tx(x), ty(y))
    };

    writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" viewBox="0 0 {} {}">"#, spec.width, h, spec.width, h).unwrap();
    writeln!(out, r##"<defs><marker id="head" markerWidth="8" markerHeight="6" refX="8" refY="3" orient="auto"><path d="M0,0 L8,3 L0,6 z" fill="#c0392b"/></marker></defs>"##).unwrap();
    writeln!(out, r#"<g stroke="{}" stroke-width="1" stroke-linejoin="round">"#, spec.stroke).unwrap();
    for (i, m) in k.maximal().iter().enumerate() {
        let fill = spec.fills.get(i).cloned().flatten().unwrap_or_else(|| "#ffffff".into());
        if m.len() == 2 {
            let p = k.simplex_points(m);
            writeln!(out, r#"<polyline points="{} {}" fill="none"/>"#, xy(p[0]), xy(p[1])).unwrap();
        }
        if m.len() >= 3 && fill != "#ffffff" {
            // Colour every triangle of a higher cell the same.
            for t in crate::complex::faces_of(m).filter(|f| f.len() == 3) {
                let p = k.simplex_points(&t);
                writeln!(out, r#"<polygon points="{} {} {}" fill="{}" stroke="none"/>"#, xy(p[0]), xy(p[1]), xy(p[2]), fill).unwrap();
            }
        }
    }
    for t in k.simplices(2) {
        let p = k.simplex_points(t);
        writeln!(out, r#"<polygon points="{} {} {}" fill="none"/>"#, xy(p[0]), xy(p[1]), xy(p[2])).unwrap();
    }
    writeln!(out, "</g>").unwrap();
    for (a, b) in &spec.arrows {
        let (ax, ay) = project(a, axes);
        let (bx, by) = project(b, axes);
        writeln!(
            out,
            r##"<line x1="{:.3}" y1="{:.3}" x2="{:.3}" y2="{:.3}" stroke="#c0392b" stroke-width="1" marker-end="url(#head)"/>"##,
            tx(ax),
            ty(ay),
            tx(bx),
            ty(by)
        )
        .unwrap();
    }
    let dot = if k.num_vertices() > 200 { 1.0 } else { 2.5 };
    for v in 0..k.num_vertices() as u32 {
        let (x, y) = project(k.point(v), axes);
        writeln!(out, r#"<circle cx="{:.3}" cy="{:.3}" r="{dot}" fill="{}"/>"#, tx(x), ty(y), spec.stroke).unwrap();
    }
    if spec.labels {
        for v in 0..k.num_vertices() as u32 {
            let (x, y) = project(k.point(v), axes);
            writeln!(out, r#"<text x="{:.3}" y="{:.3}" font-family="sans-serif" font-size="11">{}</text>"#, tx(x) + 4.0, ty(y) - 4.0, escape(k.id(v))).unwrap();
        }
    }
    writeln!(out, "</svg>").unwrap();
    Ok(out)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complex::key;
    use crate::exact::point_int;
    use crate::fixtures;

    #[test]
    fn square_with_diagonal() {
        let l = fixtures::square_l();
        let svg = render_svg(&RenderSpec::new(&l)).unwrap();
        assert_eq!(svg.matches("<polygon").count(), 2);
        assert_eq!(svg.matches("<text").count(), 4);
        for w in ["w0", "w1", "w2", "w3"] {
            assert!(svg.contains(&format!(">{w}</text>")));
        }
    }

    #[test]
    fn second_subdivision_has_36_triangles() {
        let k = fixtures::standard_simplex().sd_k(2, 1000).unwrap();
        let mut spec = RenderSpec::new(&k);
        spec.labels = false;
        let svg = render_svg(&spec).unwrap();
        assert_eq!(svg.matches("<polygon").count(), 36);
        assert_eq!(render_svg(&spec).unwrap(), svg);
    }

    #[test]
    fn empty_complex_is_an_empty_canvas() {
        let k = Complex::from_parts(2, vec![], vec![], vec![]);
        let svg = render_svg(&RenderSpec::new(&k)).unwrap();
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert!(!svg.contains("<polygon") && !svg.contains("<circle"));
    }

    #[test]
    fn three_dimensions_need_axes() {
        let t = Complex::from_parts(
            3,
            vec!["a".into(), "b".into(), "c".into(), "d".into()],
            vec![point_int(&[0, 0, 0]), point_int(&[1, 0, 0]), point_int(&[0, 1, 0]), point_int(&[0, 0, 1])],
            vec![key(&[0, 1, 2, 3])],
        );
        assert!(matches!(render_svg(&RenderSpec::new(&t)), Err(Error::UnsupportedDimension(3))));
        let mut spec = RenderSpec::new(&t);
        spec.axes = Some((0, 2));
        assert_eq!(render_svg(&spec).unwrap().matches("<polygon").count(), 4);
    }

    #[test]
    fn fills_and_arrows() {
        let l = fixtures::square_l();
        let mut spec = RenderSpec::new(&l);
        spec.fills = vec![Some(PALETTE[0].into()), None];
        spec.arrows = vec![(point_int(&[0, 0]), point_int(&[1, 1]))];
        let svg = render_svg(&spec).unwrap();
        assert_eq!(svg.matches(PALETTE[0]).count(), 1);
        assert!(svg.contains("marker-end"));
    }
}
