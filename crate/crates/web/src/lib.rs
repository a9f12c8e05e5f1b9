//! Drawing operations behind the demo page in `www/`.
//!
//! Every function takes JSON text and returns SVG (or JSON holding SVG), so the
//! page needs nothing beyond `innerHTML`.

use plsurj::approx::{surjectivize, Budgets};
use plsurj::complex::{Complex, RawComplex};
use plsurj::exact::{parse_rational, Point, Rational};
use plsurj::io;
use plsurj::maps::{is_surjective, VertexOrder};
use plsurj::render::{render_svg, RenderSpec, PALETTE};
use plsurj::squeeze::SqueezeSpec;
use serde_json::{json, Value};
use std::path::Path;
use std::sync::Arc;
use wasm_bindgen::prelude::*;

/// Largest complex the page will draw.
const DRAW_CAP: usize = 20_000;

fn complex(text: &str) -> Result<Complex, String> {
    let raw: RawComplex = serde_json::from_str(text).map_err(|e| format!("complex: {e}"))?;
    Complex::validate(&raw).map_err(|e| e.to_string())
}

/// `sd^k` of a complex.
#[wasm_bindgen]
pub fn subdivide(complex_json: &str, k: usize) -> Result<String, String> {
    let c = complex(complex_json)?.sd_k(k, DRAW_CAP).map_err(|e| e.to_string())?;
    let mut spec = RenderSpec::new(&c);
    spec.labels = k == 0;
    render_svg(&spec).map_err(|e| e.to_string())
}

/// Barycentric grid of step `1/n` in every maximal triangle, boundary included.
fn grid(c: &Complex, n: usize) -> Vec<Point> {
    let n = n.max(1);
    let mut out: Vec<Point> = Vec::new();
    for m in c.maximal().iter().filter(|m| m.len() == 3) {
        let p = c.simplex_points(m);
        for i in 0..=n {
            for j in 0..=n - i {
                let w = [i, j, n - i - j].map(|a| Rational::new((a as i64).into(), (n as i64).into()));
                out.push(plsurj::exact::combination(&p, &w));
            }
        }
    }
    out.sort_by(|a, b| plsurj::exact::cmp_points(a, b));
    out.dedup();
    out
}

/// Arrows from a grid of points to their images under the squeeze with one ratio.
#[wasm_bindgen]
pub fn squeeze(complex_json: &str, ratio: &str, n: usize) -> Result<String, String> {
    let c = Arc::new(complex(complex_json)?);
    let r = parse_rational(ratio).map_err(|e| e.to_string())?;
    let spec = SqueezeSpec::with_ratio(c.clone(), &r).map_err(|e| e.to_string())?;
    let mut draw = RenderSpec::new(&c);
    for x in grid(&c, n.min(24)) {
        let y = spec.evaluate(&x).map_err(|e| e.to_string())?;
        if y != x {
            draw.arrows.push((x, y));
        }
    }
    render_svg(&draw).map_err(|e| e.to_string())
}

/// Surjective simplicial approximation of a map given as JSON (inline objects or
/// `{"kind": "fixture", ...}`). Triangles of the subdivided domain are coloured by
/// the codomain triangle they land on; collapsed ones stay white.
///
/// Returns `{"svg": ..., "summary": ...}`.
#[wasm_bindgen]
pub fn surjectivize_map(map_json: &str) -> Result<String, String> {
    let v: Value = serde_json::from_str(map_json).map_err(|e| format!("map: {e}"))?;
    let m = io::map_from_value(&v, Path::new("")).map_err(|e| e.to_string())?;
    let l = m.codomain.clone().ok_or("the map needs a codomain")?;
    let b = Budgets { cap: DRAW_CAP, ..Budgets::default() };
    let r = surjectivize(m.oracle.as_ref(), &m.domain, &l, &VertexOrder::lexicographic(&l), &b).map_err(|e| e.to_string())?;
    let w = r.h.domain();
    let mut spec = RenderSpec::new(w);
    spec.labels = false;
    spec.fills = w
        .maximal()
        .iter()
        .map(|s| {
            let img = r.h.image_of_simplex(s);
            l.maximal().iter().position(|t| *t == img).map(|j| PALETTE[j % PALETTE.len()].to_string())
        })
        .collect();
    let svg = render_svg(&spec).map_err(|e| e.to_string())?;
    let summary = format!(
        "κ = {}, surjective = {}, {} witness cell(s) reassigned, classical map surjective = {}",
        r.kappa,
        is_surjective(&r.h).surjective,
        r.reassigned.len(),
        r.h_star_surjective
    );
    Ok(json!({"svg": svg, "summary": summary}).to_string())
}
