//! Exact rational scalars, points and the geometric predicates built on them.
//!
//! Every quantity the kernel compares is a rational. Euclidean norms are kept
//! squared so no square root is ever needed for a decision; where a square root
//! has to be *reported* (a homothety ratio, a Lipschitz slack) the bracketing
//! helpers [`sqrt_lower`] and [`sqrt_upper`] give certified rational bounds.

use crate::error::{Error, Result};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use std::cmp::Ordering;

pub type Rational = BigRational;
pub type Point = Vec<Rational>;

/// Largest simplex dimension accepted by the face-enumerating predicates.
pub const MAX_SIMPLEX_DIM: usize = 8;

pub fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

/// `n/d`, normalized. Panics on `d == 0`.
pub fn rat(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

pub fn zero() -> Rational {
    Rational::zero()
}

pub fn one() -> Rational {
    Rational::one()
}

pub fn point(coords: &[(i64, i64)]) -> Point {
    coords.iter().map(|&(n, d)| rat(n, d)).collect()
}

pub fn point_int(coords: &[i64]) -> Point {
    coords.iter().map(|&n| int(n)).collect()
}

/// Parses `"p/q"`, `"p"` or a plain decimal such as `"0.25"`.
pub fn parse_rational(s: &str) -> Result<Rational> {
    let s = s.trim();
    let bad = || Error::Parse(format!("not a rational: {s:?}"));
    if let Some((p, q)) = s.split_once('/') {
        let p: BigInt = p.trim().parse().map_err(|_| bad())?;
        let q: BigInt = q.trim().parse().map_err(|_| bad())?;
        if q.is_zero() {
            return Err(Error::Parse(format!("zero denominator in {s:?}")));
        }
        return Ok(Rational::new(p, q));
    }
    if let Some((whole, frac)) = s.split_once('.') {
        if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let neg = whole.starts_with('-');
        let digits = format!("{}{}", whole.trim_start_matches(['-', '+']), frac);
        let n: BigInt = digits.parse().map_err(|_| bad())?;
        let d = num_traits::pow(BigInt::from(10), frac.len());
        let r = Rational::new(n, d);
        return Ok(if neg { -r } else { r });
    }
    let n: BigInt = s.parse().map_err(|_| bad())?;
    Ok(Rational::from_integer(n))
}

/// Canonical text form: `"p/q"`, with `"/q"` dropped when `q = 1`.
pub fn format_rational(r: &Rational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

pub fn format_point(p: &[Rational]) -> String {
    let parts: Vec<String> = p.iter().map(format_rational).collect();
    format!("({})", parts.join(","))
}

/// Lossy conversion, used only for decimal renderings and drawing.
pub fn to_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap_or_else(|| {
        let n = r.numer().to_f64().unwrap_or(f64::NAN);
        let d = r.denom().to_f64().unwrap_or(f64::NAN);
        n / d
    })
}

/// Decimal rendering with a fixed number of significant digits. Cosmetic.
pub fn decimal(r: &Rational) -> String {
    format!("{:.6e}", to_f64(r))
}

/// Serde adapter for a single rational stored as a `"p/q"` string.
pub mod serde_rational {
    use super::*;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(r: &Rational, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&format_rational(r))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Rational, D::Error> {
        let v = serde_json::Value::deserialize(d)?;
        value_to_rational(&v).map_err(serde::de::Error::custom)
    }
}

/// Serde adapter for a point stored as an array of `"p/q"` strings.
pub mod serde_point {
    use super::*;
    use serde::ser::SerializeSeq;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(p: &[Rational], s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(p.len()))?;
        for r in p {
            seq.serialize_element(&format_rational(r))?;
        }
        seq.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Point, D::Error> {
        let v = serde_json::Value::deserialize(d)?;
        value_to_point(&v).map_err(serde::de::Error::custom)
    }
}

/// Accepts a JSON string (`"p/q"`) or an integer literal.
pub fn value_to_rational(v: &serde_json::Value) -> Result<Rational> {
    match v {
        serde_json::Value::String(s) => parse_rational(s),
        serde_json::Value::Number(n) => parse_rational(&n.to_string()),
        other => Err(Error::Parse(format!("expected a rational, found {other}"))),
    }
}

pub fn value_to_point(v: &serde_json::Value) -> Result<Point> {
    match v {
        serde_json::Value::Array(items) => items.iter().map(value_to_rational).collect(),
        other => Err(Error::Parse(format!("expected a point, found {other}"))),
    }
}

pub fn rational_to_value(r: &Rational) -> serde_json::Value {
    serde_json::Value::String(format_rational(r))
}

pub fn point_to_value(p: &[Rational]) -> serde_json::Value {
    serde_json::Value::Array(p.iter().map(rational_to_value).collect())
}

// ---------------------------------------------------------------------------
// vectors

pub fn check_dim(expected: usize, p: &[Rational]) -> Result<()> {
    if p.len() != expected {
        return Err(Error::DimensionMismatch { expected, found: p.len() });
    }
    Ok(())
}

pub fn add(a: &[Rational], b: &[Rational]) -> Point {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn sub(a: &[Rational], b: &[Rational]) -> Point {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn scale(a: &[Rational], s: &Rational) -> Point {
    a.iter().map(|x| x * s).collect()
}

pub fn dot(a: &[Rational], b: &[Rational]) -> Rational {
    a.iter().zip(b).fold(Rational::zero(), |acc, (x, y)| acc + x * y)
}

pub fn norm2(a: &[Rational]) -> Rational {
    dot(a, a)
}

pub fn dist2(a: &[Rational], b: &[Rational]) -> Rational {
    a.iter().zip(b).fold(Rational::zero(), |acc, (x, y)| {
        let d = x - y;
        acc + &d * &d
    })
}

/// `Σ w_i p_i`.
pub fn combination(points: &[&Point], weights: &[Rational]) -> Point {
    let n = points.first().map_or(0, |p| p.len());
    let mut out = vec![Rational::zero(); n];
    for (p, w) in points.iter().zip(weights) {
        if w.is_zero() {
            continue;
        }
        for (o, c) in out.iter_mut().zip(p.iter()) {
            *o += c * w;
        }
    }
    out
}

pub fn barycentre(points: &[&Point]) -> Point {
    let k = Rational::from_integer(BigInt::from(points.len()));
    let w = vec![Rational::one() / k; points.len()];
    combination(points, &w)
}

pub fn squared_diameter(points: &[&Point]) -> Rational {
    let mut best = Rational::zero();
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            let d = dist2(points[i], points[j]);
            if d > best {
                best = d;
            }
        }
    }
    best
}

// ---------------------------------------------------------------------------
// affine forms

/// `x ↦ gradient·x + offset`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AffineForm {
    pub gradient: Vec<Rational>,
    pub offset: Rational,
}

impl AffineForm {
    pub fn new(gradient: Vec<Rational>, offset: Rational) -> Self {
        AffineForm { gradient, offset }
    }

    pub fn eval(&self, x: &[Rational]) -> Rational {
        dot(&self.gradient, x) + &self.offset
    }

    pub fn scaled(&self, s: &Rational) -> AffineForm {
        AffineForm { gradient: scale(&self.gradient, s), offset: &self.offset * s }
    }
}

// ---------------------------------------------------------------------------
// linear algebra

/// Row-reduces `m` in place to reduced row echelon form and returns the pivot columns.
/// Only the first `ncols` columns are eligible as pivots.
fn rref(m: &mut [Vec<Rational>], ncols: usize) -> Vec<usize> {
    let rows = m.len();
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..ncols {
        if r == rows {
            break;
        }
        let Some(p) = (r..rows).find(|&i| !m[i][c].is_zero()) else {
            continue;
        };
        m.swap(r, p);
        let inv = Rational::one() / &m[r][c];
        for x in m[r].iter_mut() {
            *x *= &inv;
        }
        for i in 0..rows {
            if i != r && !m[i][c].is_zero() {
                let f = m[i][c].clone();
                let (top, rest) = if i < r {
                    let (a, b) = m.split_at_mut(r);
                    (&b[0], &mut a[i])
                } else {
                    let (a, b) = m.split_at_mut(i);
                    (&a[r], &mut b[0])
                };
                for (x, y) in rest.iter_mut().zip(top.iter()) {
                    if !y.is_zero() {
                        *x -= &f * y;
                    }
                }
            }
        }
        pivots.push(c);
        r += 1;
    }
    pivots
}

/// Rank of a list of vectors.
pub fn rank(vectors: &[Point]) -> usize {
    if vectors.is_empty() {
        return 0;
    }
    let ncols = vectors[0].len();
    let mut m: Vec<Vec<Rational>> = vectors.to_vec();
    rref(&mut m, ncols).len()
}

/// Solves `Σ_j cols[j] * s_j = rhs` for `s`.
///
/// Returns `Ok(Some(s))` for the unique solution, `Ok(None)` when the system is
/// inconsistent, and `Err(())` when the columns are linearly dependent.
pub fn solve_columns(cols: &[Point], rhs: &[Rational]) -> std::result::Result<Option<Vec<Rational>>, ()> {
    let k = cols.len();
    let n = rhs.len();
    let mut m: Vec<Vec<Rational>> = (0..n)
        .map(|i| {
            let mut row: Vec<Rational> = cols.iter().map(|c| c[i].clone()).collect();
            row.push(rhs[i].clone());
            row
        })
        .collect();
    let pivots = rref(&mut m, k);
    if pivots.len() < k {
        return Err(());
    }
    for row in m.iter().skip(k) {
        if !row[k].is_zero() {
            return Ok(None);
        }
    }
    Ok(Some(m.iter().take(k).map(|row| row[k].clone()).collect()))
}

/// Solves the square system `a x = b`; `None` if singular.
pub fn solve_square(a: &[Vec<Rational>], b: &[Rational]) -> Option<Vec<Rational>> {
    let n = a.len();
    let mut m: Vec<Vec<Rational>> = a
        .iter()
        .zip(b)
        .map(|(row, bi)| {
            let mut r = row.clone();
            r.push(bi.clone());
            r
        })
        .collect();
    let pivots = rref(&mut m, n);
    if pivots.len() < n {
        return None;
    }
    Some(m.into_iter().map(|row| row[n].clone()).collect())
}

/// Inverse of a square matrix; `None` if singular.
pub fn invert(a: &[Vec<Rational>]) -> Option<Vec<Vec<Rational>>> {
    let n = a.len();
    let mut m: Vec<Vec<Rational>> = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { Rational::one() } else { Rational::zero() }));
            r
        })
        .collect();
    if rref(&mut m, n).len() < n {
        return None;
    }
    Some(m.into_iter().map(|row| row[n..].to_vec()).collect())
}

/// Absolute determinant of a square matrix.
pub fn abs_det(a: &[Vec<Rational>]) -> Rational {
    let n = a.len();
    let mut m = a.to_vec();
    let mut det = Rational::one();
    for c in 0..n {
        let Some(p) = (c..n).find(|&i| !m[i][c].is_zero()) else {
            return Rational::zero();
        };
        m.swap(c, p);
        let piv = m[c][c].clone();
        det *= &piv;
        for i in c + 1..n {
            if m[i][c].is_zero() {
                continue;
            }
            let f = &m[i][c] / &piv;
            for j in c..n {
                let t = &f * &m[c][j];
                m[i][j] -= t;
            }
        }
    }
    det.abs()
}

pub fn affine_independent(points: &[Point]) -> bool {
    if points.len() <= 1 {
        return true;
    }
    let n = points[0].len();
    if points.iter().any(|p| p.len() != n) || points.len() > n + 1 {
        return false;
    }
    let diffs: Vec<Point> = points[1..].iter().map(|p| sub(p, &points[0])).collect();
    rank(&diffs) == diffs.len()
}

fn check_simplex(vertices: &[&Point], n: usize) -> Result<()> {
    if vertices.is_empty() {
        return Err(Error::DegenerateSimplex("empty vertex list".into()));
    }
    if vertices.len() > MAX_SIMPLEX_DIM + 1 {
        return Err(Error::SimplexTooLarge(vertices.len() - 1));
    }
    for v in vertices {
        check_dim(n, v)?;
    }
    Ok(())
}

/// Affine coordinates of `x` with respect to `vertices`, which may be negative.
/// `Ok(None)` when `x` is off the affine hull.
pub fn affine_coordinates(x: &[Rational], vertices: &[&Point]) -> Result<Option<Vec<Rational>>> {
    check_simplex(vertices, x.len())?;
    let v0 = vertices[0];
    let cols: Vec<Point> = vertices[1..].iter().map(|v| sub(v, v0)).collect();
    let rhs = sub(x, v0);
    match solve_columns(&cols, &rhs) {
        Err(()) => Err(Error::DegenerateSimplex(
            vertices.iter().map(|v| format_point(v)).collect::<Vec<_>>().join(" "),
        )),
        Ok(None) => Ok(None),
        Ok(Some(s)) => {
            let rest: Rational = s.iter().fold(Rational::zero(), |a, b| a + b);
            let mut out = Vec::with_capacity(vertices.len());
            out.push(Rational::one() - rest);
            out.extend(s);
            Ok(Some(out))
        }
    }
}

/// Barycentric coordinates of `x` in the simplex; `Ok(None)` means outside
/// (off the hull, or some coordinate negative).
pub fn barycentric_coordinates(x: &[Rational], vertices: &[&Point]) -> Result<Option<Vec<Rational>>> {
    Ok(affine_coordinates(x, vertices)?.filter(|c| c.iter().all(|l| !l.is_negative())))
}

/// Orthogonal projection of `x` onto the affine hull, as affine coordinates.
fn project_to_hull(x: &[Rational], vertices: &[&Point]) -> Option<Vec<Rational>> {
    let v0 = vertices[0];
    let edges: Vec<Point> = vertices[1..].iter().map(|v| sub(v, v0)).collect();
    let d = edges.len();
    let rel = sub(x, v0);
    let gram: Vec<Vec<Rational>> =
        (0..d).map(|i| (0..d).map(|j| dot(&edges[i], &edges[j])).collect()).collect();
    let rhs: Vec<Rational> = edges.iter().map(|e| dot(e, &rel)).collect();
    let s = solve_square(&gram, &rhs)?;
    let rest: Rational = s.iter().fold(Rational::zero(), |a, b| a + b);
    let mut out = vec![Rational::one() - rest];
    out.extend(s);
    Some(out)
}

fn subsets(n: usize) -> impl Iterator<Item = Vec<usize>> {
    (1u32..(1u32 << n)).map(move |mask| (0..n).filter(|i| mask & (1 << i) != 0).collect())
}

/// `min_{y ∈ conv(vertices)} |x − y|²`, exactly.
pub fn squared_distance_point_simplex(x: &[Rational], vertices: &[&Point]) -> Result<Rational> {
    check_simplex(vertices, x.len())?;
    let pts: Vec<Point> = vertices.iter().map(|v| (*v).clone()).collect();
    if !affine_independent(&pts) {
        return Err(Error::DegenerateSimplex(
            vertices.iter().map(|v| format_point(v)).collect::<Vec<_>>().join(" "),
        ));
    }
    let mut best: Option<Rational> = None;
    for face in subsets(vertices.len()) {
        let fv: Vec<&Point> = face.iter().map(|&i| vertices[i]).collect();
        let Some(c) = project_to_hull(x, &fv) else { continue };
        if c.iter().any(|l| l.is_negative()) {
            continue;
        }
        let y = combination(&fv, &c);
        let d = dist2(x, &y);
        if best.as_ref().map_or(true, |b| d < *b) {
            best = Some(d);
        }
    }
    Ok(best.expect("vertex faces always project"))
}

/// `min |a − b|²` over `a ∈ conv(A)`, `b ∈ conv(B)`, exactly.
///
/// The optimum is attained at a pair of faces whose combined direction vectors
/// are independent, so it suffices to solve the joint normal equations for every
/// such face pair and keep the feasible ones.
pub fn squared_distance_simplex_simplex(a: &[&Point], b: &[&Point]) -> Result<Rational> {
    let n = a.first().map_or(0, |p| p.len());
    check_simplex(a, n)?;
    check_simplex(b, n)?;
    let mut best: Option<Rational> = None;
    for fa in subsets(a.len()) {
        for fb in subsets(b.len()) {
            let pa: Vec<&Point> = fa.iter().map(|&i| a[i]).collect();
            let pb: Vec<&Point> = fb.iter().map(|&i| b[i]).collect();
            let Some((ca, cb)) = closest_pair_on_hulls(&pa, &pb) else { continue };
            if ca.iter().chain(cb.iter()).any(|l| l.is_negative()) {
                continue;
            }
            let d = dist2(&combination(&pa, &ca), &combination(&pb, &cb));
            if best.as_ref().map_or(true, |x| d < *x) {
                best = Some(d);
            }
        }
    }
    Ok(best.expect("vertex pairs always qualify"))
}

fn closest_pair_on_hulls(a: &[&Point], b: &[&Point]) -> Option<(Vec<Rational>, Vec<Rational>)> {
    let a0 = a[0];
    let b0 = b[0];
    let mut cols: Vec<Point> = a[1..].iter().map(|v| sub(v, a0)).collect();
    let da = cols.len();
    cols.extend(b[1..].iter().map(|v| sub(b0, v)));
    let k = cols.len();
    let rhs0 = sub(b0, a0);
    let gram: Vec<Vec<Rational>> =
        (0..k).map(|i| (0..k).map(|j| dot(&cols[i], &cols[j])).collect()).collect();
    let rhs: Vec<Rational> = cols.iter().map(|c| dot(c, &rhs0)).collect();
    let s = solve_square(&gram, &rhs)?;
    let (sa, sb) = s.split_at(da);
    let wrap = |t: &[Rational]| {
        let rest: Rational = t.iter().fold(Rational::zero(), |x, y| x + y);
        let mut out = vec![Rational::one() - rest];
        out.extend(t.iter().cloned());
        out
    };
    Some((wrap(sa), wrap(sb)))
}

/// Exact intersection point of two affine hulls when it is a single point.
/// Returns affine coordinates in both hulls.
pub fn hull_intersection_point(a: &[&Point], b: &[&Point]) -> Option<(Vec<Rational>, Vec<Rational>)> {
    let a0 = a[0];
    let b0 = b[0];
    let mut cols: Vec<Point> = a[1..].iter().map(|v| sub(v, a0)).collect();
    let da = cols.len();
    cols.extend(b[1..].iter().map(|v| sub(b0, v)));
    let rhs = sub(b0, a0);
    let s = solve_columns(&cols, &rhs).ok()??;
    let (sa, sb) = s.split_at(da);
    let wrap = |t: &[Rational]| {
        let rest: Rational = t.iter().fold(Rational::zero(), |x, y| x + y);
        let mut out = vec![Rational::one() - rest];
        out.extend(t.iter().cloned());
        out
    };
    Some((wrap(sa), wrap(sb)))
}

/// Facet forms of a full-dimensional simplex in its own hull: the barycentric
/// coordinate functions, so `h_i(v_j) = [i == j]` and `h_i` vanishes on the facet
/// opposite `v_i`. Expressed in ambient coordinates; on points of the hull the
/// forms sum to 1.
pub fn barycentric_forms(vertices: &[&Point]) -> Result<Vec<AffineForm>> {
    let n = vertices.first().map_or(0, |p| p.len());
    check_simplex(vertices, n)?;
    let d = vertices.len() - 1;
    if d == 0 {
        return Err(Error::DegenerateSimplex("a vertex has no facets".into()));
    }
    let v0 = vertices[0];
    let edges: Vec<Point> = vertices[1..].iter().map(|v| sub(v, v0)).collect();
    let gram: Vec<Vec<Rational>> =
        (0..d).map(|i| (0..d).map(|j| dot(&edges[i], &edges[j])).collect()).collect();
    let ginv = invert(&gram).ok_or_else(|| {
        Error::DegenerateSimplex(vertices.iter().map(|v| format_point(v)).collect::<Vec<_>>().join(" "))
    })?;
    // s(x) = G⁻¹ Eᵀ (x − v0); coordinate i ≥ 1 is s_i, coordinate 0 is 1 − Σ s_i.
    let mut forms = Vec::with_capacity(d + 1);
    let mut s_forms = Vec::with_capacity(d);
    for row in ginv.iter() {
        let mut grad = vec![Rational::zero(); n];
        for (g, e) in row.iter().zip(&edges) {
            if g.is_zero() {
                continue;
            }
            for (gc, ec) in grad.iter_mut().zip(e) {
                *gc += g * ec;
            }
        }
        let offset = -dot(&grad, v0);
        s_forms.push(AffineForm::new(grad, offset));
    }
    let mut g0 = vec![Rational::zero(); n];
    let mut o0 = Rational::one();
    for f in &s_forms {
        g0 = sub(&g0, &f.gradient);
        o0 -= &f.offset;
    }
    forms.push(AffineForm::new(g0, o0));
    forms.extend(s_forms);
    Ok(forms)
}

/// Exit factor of the ray from `z` through `x`: the `λ > 0` with
/// `z + λ(x − z)` on the boundary of `{h_i ≥ 0}`.
pub fn ray_exit_factor(z: &[Rational], x: &[Rational], facet_forms: &[AffineForm]) -> Result<Rational> {
    let mut inv: Option<Rational> = None;
    for h in facet_forms {
        let hz = h.eval(z);
        if !hz.is_positive() {
            return Err(Error::CenterOnBoundary);
        }
        let ratio = (&hz - h.eval(x)) / &hz;
        if inv.as_ref().map_or(true, |m| ratio > *m) {
            inv = Some(ratio);
        }
    }
    match inv {
        Some(m) if m.is_positive() => Ok(Rational::one() / m),
        _ => Err(Error::RayDoesNotExit),
    }
}

// ---------------------------------------------------------------------------
// square-root brackets

fn isqrt(n: &BigInt) -> BigInt {
    n.sqrt()
}

/// A rational `s` with `s ≤ √q` and `√q − s < 2^-bits · (1/denominator(q))`.
pub fn sqrt_lower(q: &Rational, bits: u32) -> Rational {
    assert!(!q.is_negative(), "square root of a negative rational");
    let scale = BigInt::one() << bits;
    let p = q.numer() * q.denom() * &scale * &scale;
    Rational::new(isqrt(&p), q.denom() * scale)
}

/// A rational `s ≥ √q`, exact when `q` is a perfect square.
pub fn sqrt_upper(q: &Rational, bits: u32) -> Rational {
    assert!(!q.is_negative(), "square root of a negative rational");
    let scale = BigInt::one() << bits;
    let p = q.numer() * q.denom() * &scale * &scale;
    let r = isqrt(&p);
    let up = if &r * &r == p { r } else { r + 1 };
    Rational::new(up, q.denom() * scale)
}

/// Exact square root when `q` is the square of a rational.
pub fn sqrt_exact(q: &Rational) -> Option<Rational> {
    if q.is_negative() {
        return None;
    }
    let n = isqrt(q.numer());
    let d = isqrt(q.denom());
    (&n * &n == *q.numer() && &d * &d == *q.denom()).then(|| Rational::new(n, d))
}

/// Lexicographic comparison of points.
pub fn cmp_points(a: &[Rational], b: &[Rational]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.cmp(y) {
            Ordering::Equal => continue,
            o => return o,
        }
    }
    a.len().cmp(&b.len())
}

pub fn min_rational<'a>(it: impl IntoIterator<Item = &'a Rational>) -> Option<Rational> {
    it.into_iter().min().cloned()
}
