//! Radial retractions, the squeezing map of a complex, the ε budget, and the
//! correction that makes a perturbed surjective map surjective again.

use crate::complex::{Complex, Key};
use crate::error::{Error, Result};
use crate::exact::{
    self, add, barycentric_forms, dist2, format_point, format_rational, norm2, ray_exit_factor, scale,
    squared_distance_point_simplex, squared_distance_simplex_simplex, squared_diameter, sqrt_lower, sqrt_upper,
    sub, AffineForm, Point, Rational,
};
use crate::maps::{
    certified_sup_distance, is_surjective, subdivide_simplex, MapOracle, PieceKey, SimplicialMap, SupInterval,
    SupOptions, SQRT_BITS,
};
use num_traits::{One, Signed, Zero};
use std::sync::Arc;

/// Facet forms of τ, normalized so each is positive at the barycentre.
///
/// These are τ's barycentric coordinate functions: form `i` vanishes on the
/// facet opposite vertex `i`.
pub fn facet_functionals(vertices: &[&Point]) -> Result<Vec<AffineForm>> {
    if vertices.len() < 2 {
        return Err(Error::DegenerateSimplex("a vertex has no facets".into()));
    }
    barycentric_forms(vertices)
}

/// The point where the ray from `z` through `x` leaves τ.
pub fn radial_retraction(forms: &[AffineForm], z: &[Rational], x: &[Rational]) -> Result<Point> {
    if x == z {
        return Err(Error::CenterOnBoundary);
    }
    let lambda = ray_exit_factor(z, x, forms)?;
    Ok(add(z, &scale(&sub(x, z), &lambda)))
}

/// Squeezing data for one maximal simplex.
#[derive(Clone, Debug)]
pub struct TauData {
    pub tau: Key,
    pub barycentre: Point,
    pub forms: Vec<AffineForm>,
    /// Squared distance from the barycentre to the boundary.
    pub squared_delta: Rational,
    pub squared_diam: Rational,
    /// Homothety ratio `r ∈ (0,1)`.
    pub ratio: Rational,
}

impl TauData {
    pub fn new(l: &Complex, tau: &[u32], ratio: Rational) -> Result<TauData> {
        let pts = l.simplex_points(tau);
        let forms = facet_functionals(&pts)?;
        let barycentre = exact::barycentre(&pts);
        let squared_delta = squared_delta(&pts)?;
        if ratio <= Rational::zero() || ratio >= Rational::one() {
            return Err(Error::EpsilonTooLarge(format_rational(&ratio)));
        }
        Ok(TauData { tau: tau.into(), barycentre, forms, squared_delta, squared_diam: squared_diameter(&pts), ratio })
    }

    /// Whether `x` lies in the shrunken copy `b + r(τ − b)`.
    pub fn in_shrunken(&self, x: &[Rational]) -> bool {
        let s = Rational::one() - &self.ratio;
        self.forms.iter().all(|h| h.eval(x) >= &s * h.eval(&self.barycentre))
    }

    /// The homothety θ with centre `b` and ratio `r`.
    pub fn theta(&self, x: &[Rational]) -> Point {
        add(&self.barycentre, &scale(&sub(x, &self.barycentre), &self.ratio))
    }

    pub fn contains(&self, x: &[Rational]) -> bool {
        self.forms.iter().all(|h| !h.eval(x).is_negative())
    }

    /// `π_τ`: θ⁻¹ on the shrunken copy, radial retraction onto ∂τ outside it.
    pub fn pi(&self, x: &[Rational]) -> Result<Point> {
        if !self.contains(x) {
            return Err(Error::OutsideSimplex(format_point(x)));
        }
        if self.in_shrunken(x) {
            let inv = Rational::one() / &self.ratio;
            Ok(add(&self.barycentre, &scale(&sub(x, &self.barycentre), &inv)))
        } else {
            radial_retraction(&self.forms, &self.barycentre, x)
        }
    }
}

/// Squared distance from the barycentre of a simplex to its boundary.
pub fn squared_delta(pts: &[&Point]) -> Result<Rational> {
    let b = exact::barycentre(pts);
    let mut best: Option<Rational> = None;
    for i in 0..pts.len() {
        let facet: Vec<&Point> = pts.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, p)| *p).collect();
        let d = squared_distance_point_simplex(&b, &facet)?;
        if best.as_ref().map_or(true, |x| d < *x) {
            best = Some(d);
        }
    }
    best.ok_or_else(|| Error::DegenerateSimplex("empty simplex".into()))
}

/// `r = √(ε²/δ²)`, exact when possible, otherwise rounded down.
pub fn ratio_for(eps2: &Rational, squared_delta: &Rational) -> Rational {
    let q = eps2 / squared_delta;
    exact::sqrt_exact(&q).unwrap_or_else(|| sqrt_lower(&q, SQRT_BITS))
}

/// The squeezing map π of a complex: the composition of `π̂_τ` over maximal τ of dimension ≥ 1.
#[derive(Clone, Debug)]
pub struct SqueezeSpec {
    l: Arc<Complex>,
    /// Indexed like `l.maximal()`; `None` for isolated vertices.
    taus: Vec<Option<TauData>>,
}

impl SqueezeSpec {
    /// One ratio for every maximal simplex.
    pub fn with_ratio(l: Arc<Complex>, r: &Rational) -> Result<SqueezeSpec> {
        SqueezeSpec::build(l, |_| r.clone())
    }

    /// Ratios `ε/δ_τ` for a squared ε.
    pub fn for_epsilon(l: Arc<Complex>, eps2: &Rational) -> Result<SqueezeSpec> {
        SqueezeSpec::build(l, |t| ratio_for(eps2, &t))
    }

    fn build(l: Arc<Complex>, ratio: impl Fn(Rational) -> Rational) -> Result<SqueezeSpec> {
        let mut taus = Vec::with_capacity(l.maximal().len());
        for t in l.maximal() {
            if t.len() < 2 {
                taus.push(None);
                continue;
            }
            let d = squared_delta(&l.simplex_points(t))?;
            taus.push(Some(TauData::new(&l, t, ratio(d))?));
        }
        Ok(SqueezeSpec { l, taus })
    }

    pub fn complex(&self) -> &Arc<Complex> {
        &self.l
    }

    pub fn taus(&self) -> impl Iterator<Item = &TauData> {
        self.taus.iter().flatten()
    }

    pub fn tau(&self, maximal_index: usize) -> Option<&TauData> {
        self.taus[maximal_index].as_ref()
    }

    pub fn evaluate(&self, x: &[Rational]) -> Result<Point> {
        let (i, coords) = self.l.locate(x).ok_or_else(|| Error::OutsideDomain(format_point(x)))?;
        match &self.taus[i as usize] {
            Some(t) if coords.iter().all(|c| !c.is_zero()) => t.pi(x),
            _ => Ok(x.to_vec()),
        }
    }

    /// The factor `π̂_τ` for the maximal simplex with this index: `π_τ` on the open cell, identity elsewhere.
    pub fn factor(&self, maximal_index: usize, x: &[Rational]) -> Result<Point> {
        let Some(t) = &self.taus[maximal_index] else { return Ok(x.to_vec()) };
        match self.l.coords_in(&t.tau, x) {
            Some(c) if c.iter().all(|v| !v.is_zero()) => t.pi(x),
            _ => Ok(x.to_vec()),
        }
    }

    /// Applies the factors one after another in the given order.
    pub fn compose(&self, order: &[usize], x: &[Rational]) -> Result<Point> {
        let mut y = x.to_vec();
        for &i in order {
            y = self.factor(i, &y)?;
        }
        Ok(y)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TauBudget {
    pub tau: String,
    pub squared_delta: Rational,
    pub squared_diam: Rational,
    /// `(δ²)² / (4 diam²)`, the square of `δ²/(2 diam)`.
    pub squared_eps_star: Rational,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EpsilonBudget {
    pub per_tau: Vec<TauBudget>,
    /// `None` when no simplex lies outside any star (the bound is vacuous).
    pub squared_eps1: Option<Rational>,
    pub squared_eps3: Rational,
    pub squared_mesh_cap: Rational,
    pub squared_delta_min: Rational,
    pub recommended: Rational,
    /// Which of eps1, eps3, mesh attains the minimum.
    pub binding: &'static str,
}

/// The constants of the squeezing argument for a complex.
pub fn epsilon_budget(l: &Complex) -> Result<EpsilonBudget> {
    let mut per_tau = Vec::new();
    let mut eps1: Option<Rational> = None;
    let (blo, bhi) = bounding_box(l);
    let extent = dist2(&blo, &bhi);
    let mesh = l.squared_mesh();
    for t in l.maximal() {
        if t.len() < 2 {
            continue;
        }
        let pts = l.simplex_points(t);
        let sd = squared_delta(&pts)?;
        let diam = squared_diameter(&pts);
        let star = &sd * &sd / (Rational::from_integer(4.into()) * &diam);
        per_tau.push(TauBudget { tau: l.simplex_name(t), squared_delta: sd, squared_diam: diam, squared_eps_star: star });
        if let Some(d) = distance_to_star_boundary(l, t, &extent, &mesh) {
            if eps1.as_ref().map_or(true, |e| d < *e) {
                eps1 = Some(d);
            }
        }
    }
    if per_tau.is_empty() {
        return Err(Error::ZeroDimensionalL);
    }
    let eps3 = per_tau.iter().map(|t| &t.squared_eps_star).min().expect("nonempty") / Rational::from_integer(4.into());
    let delta_min = per_tau.iter().map(|t| &t.squared_delta).min().expect("nonempty").clone();
    let mut recommended = eps3.clone();
    let mut binding = "eps3";
    if let Some(e1) = &eps1 {
        if *e1 < recommended {
            recommended = e1.clone();
            binding = "eps1";
        }
    }
    if mesh < recommended {
        recommended = mesh.clone();
        binding = "mesh";
    }
    Ok(EpsilonBudget {
        per_tau,
        squared_eps1: eps1,
        squared_eps3: eps3,
        squared_mesh_cap: mesh,
        squared_delta_min: delta_min,
        recommended,
        binding,
    })
}

fn bounding_box(l: &Complex) -> (Point, Point) {
    let n = l.ambient_dim();
    let mut lo = vec![Rational::zero(); n];
    let mut hi = vec![Rational::zero(); n];
    for (i, p) in l.points().iter().enumerate() {
        for a in 0..n {
            if i == 0 || p[a] < lo[a] {
                lo[a] = p[a].clone();
            }
            if i == 0 || p[a] > hi[a] {
                hi[a] = p[a].clone();
            }
        }
    }
    (lo, hi)
}

fn point_box(pts: &[&Point]) -> (Point, Point) {
    let mut lo = pts[0].clone();
    let mut hi = pts[0].clone();
    for p in pts {
        for a in 0..lo.len() {
            if p[a] < lo[a] {
                lo[a] = p[a].clone();
            }
            if p[a] > hi[a] {
                hi[a] = p[a].clone();
            }
        }
    }
    (lo, hi)
}

fn box_gap2(a: &(Point, Point), b: &(Point, Point)) -> Rational {
    let mut s = Rational::zero();
    for i in 0..a.0.len() {
        let g = if b.0[i] > a.1[i] {
            &b.0[i] - &a.1[i]
        } else if a.0[i] > b.1[i] {
            &a.0[i] - &b.1[i]
        } else {
            continue;
        };
        s += &g * &g;
    }
    s
}

/// Squared distance from τ to the union of simplices of `l` disjoint from τ.
fn distance_to_star_boundary(l: &Complex, t: &[u32], extent2: &Rational, mesh2: &Rational) -> Option<Rational> {
    let pts = l.simplex_points(t);
    let tbox = point_box(&pts);
    let mut h = sqrt_upper(mesh2, 8).max(Rational::one() / Rational::from_integer(1024.into()));
    loop {
        let lo: Point = tbox.0.iter().map(|c| c - &h).collect();
        let hi: Point = tbox.1.iter().map(|c| c + &h).collect();
        let mut faces: Vec<(Rational, Key)> = Vec::new();
        let mut seen = std::collections::BTreeSet::new();
        for mi in l.maximal_in_box(&lo, &hi) {
            let face: Key = l.maximal()[mi as usize].iter().copied().filter(|v| !t.contains(v)).collect();
            if face.is_empty() || !seen.insert(face.clone()) {
                continue;
            }
            let fp: Vec<&Point> = face.iter().map(|&v| l.point(v)).collect();
            faces.push((box_gap2(&tbox, &point_box(&fp)), face));
        }
        faces.sort();
        let mut best: Option<Rational> = None;
        for (gap, face) in &faces {
            if best.as_ref().is_some_and(|b| gap >= b) {
                break;
            }
            let fp: Vec<&Point> = face.iter().map(|&v| l.point(v)).collect();
            let d = squared_distance_simplex_simplex(&pts, &fp).expect("simplices of a complex are nondegenerate");
            if best.as_ref().map_or(true, |b| d < *b) {
                best = Some(d);
            }
        }
        // Everything outside the box is farther than h.
        if let Some(b) = &best {
            if *b <= &h * &h {
                return best;
            }
        }
        if &h * &h > *extent2 {
            return best;
        }
        h = h * Rational::from_integer(2.into());
    }
}

/// `ρ_τ`: barycentric renormalization onto τ, defined on `{x : d(x,τ)² < ε1²}`.
#[derive(Clone, Debug)]
pub struct StarRetraction {
    l: Arc<Complex>,
    tau: Key,
    squared_eps1: Option<Rational>,
}

impl StarRetraction {
    pub fn new(l: Arc<Complex>, tau: Key, squared_eps1: Option<Rational>) -> StarRetraction {
        StarRetraction { l, tau, squared_eps1 }
    }

    pub fn evaluate(&self, x: &[Rational]) -> Result<Point> {
        if let Some(e) = &self.squared_eps1 {
            let d = squared_distance_point_simplex(x, &self.l.simplex_points(&self.tau))?;
            if d >= *e {
                return Err(Error::OutsideU(format_point(x)));
            }
        }
        let (c, coords) = self.l.carrier_with_coords(x).ok_or_else(|| Error::OutsideU(format_point(x)))?;
        let mut pts = Vec::new();
        let mut w = Vec::new();
        for (v, l) in c.iter().zip(coords) {
            if self.tau.contains(v) {
                pts.push(self.l.point(*v));
                w.push(l);
            }
        }
        let s: Rational = w.iter().fold(Rational::zero(), |a, b| a + b);
        if s.is_zero() {
            return Err(Error::OutsideU(format_point(x)));
        }
        let w: Vec<Rational> = w.into_iter().map(|l| l / &s).collect();
        Ok(exact::combination(&pts, &w))
    }

    /// Squared Lipschitz bound of `ρ_τ` on the points of |L| within `e` of τ, `e < ε1`.
    ///
    /// On a cell `c` write `ρ = Ñ/s` with `s` the sum of τ's coordinates and
    /// `Ñ = Σ λ_i (v_i − p)`; then `|Dρ| ≤ (|DÑ| + diam(F)|∇s|)/s` and
    /// `s ≥ (ε1 − e)/diam(c)`.
    pub fn squared_lipschitz(&self, eps1_lb: &Rational, e_ub: &Rational) -> Option<Rational> {
        let slack = eps1_lb - e_ub;
        if !slack.is_positive() {
            return None;
        }
        let mut best = Rational::zero();
        for m in self.l.maximal() {
            let f: Vec<usize> = (0..m.len()).filter(|&i| self.tau.contains(&m[i])).collect();
            if f.is_empty() || m.len() < 2 {
                continue;
            }
            let pts = self.l.simplex_points(m);
            let forms = barycentric_forms(&pts).ok()?;
            let p = pts[f[0]];
            let n = self.l.ambient_dim();
            let mut dn = vec![vec![Rational::zero(); n]; n];
            let mut grad_s = vec![Rational::zero(); n];
            for &i in &f {
                let d = sub(pts[i], p);
                for a in 0..n {
                    for b in 0..n {
                        dn[a][b] += &d[a] * &forms[i].gradient[b];
                    }
                }
                grad_s = add(&grad_s, &forms[i].gradient);
            }
            let fro2: Rational = dn.iter().flatten().map(|x| x * x).fold(Rational::zero(), |a, b| a + b);
            let fpts: Vec<&Point> = f.iter().map(|&i| pts[i]).collect();
            let diam_f = sqrt_upper(&squared_diameter(&fpts), SQRT_BITS);
            let diam_c = sqrt_upper(&squared_diameter(&pts), SQRT_BITS);
            let s_lb = &slack / diam_c;
            let num = sqrt_upper(&fro2, SQRT_BITS) + diam_f * sqrt_upper(&norm2(&grad_s), SQRT_BITS);
            let lc = num / s_lb;
            let l2 = &lc * &lc;
            if l2 > best {
                best = l2;
            }
        }
        Some(best)
    }
}

/// `π ∘ g`.
#[derive(Clone)]
pub struct Squeezed {
    pub g: Arc<dyn MapOracle>,
    pub spec: Arc<SqueezeSpec>,
}

impl Squeezed {
    pub fn evaluate(&self, x: &[Rational]) -> Result<Point> {
        self.spec.evaluate(&self.g.eval(x)?)
    }
}

/// `ρ_τ ∘ g` with a supplied Lipschitz bound.
struct Retracted<'a> {
    g: &'a dyn MapOracle,
    rho: &'a StarRetraction,
    lipschitz2: Rational,
}

impl MapOracle for Retracted<'_> {
    fn domain(&self) -> &Complex {
        self.g.domain()
    }
    fn target_dim(&self) -> usize {
        self.g.target_dim()
    }
    fn eval_keyed(&self, x: &[Rational]) -> Result<(Point, PieceKey)> {
        let (y, k) = self.g.eval_keyed(x)?;
        Ok((self.rho.evaluate(&y)?, k))
    }
    fn affine_on(&self, _: &[&PieceKey]) -> bool {
        false
    }
    fn squared_lipschitz(&self) -> Rational {
        self.lipschitz2.clone()
    }
}

/// Exact upper bound on `|ρ_τ∘g − h|²` over the cells, or `None` when some
/// piece never becomes affine with its image in one simplex of L.
///
/// On such a piece `ρ_τ∘g − h = q/s` with `q` quadratic in the barycentric
/// coordinates and `s > 0` affine, so `|q|` is at most its largest Bernstein
/// control point and `s` at least its least vertex value. Cells are refined
/// until the bound drops below `target` or `max_depth` is reached.
fn retracted_deviation(
    l: &Complex,
    tau: &[u32],
    g: &dyn MapOracle,
    h: &SimplicialMap,
    cells: Vec<Vec<Point>>,
    target: &Rational,
    max_depth: usize,
) -> Result<Option<Rational>> {
    let mut worst = Rational::zero();
    let mut work: Vec<(Vec<Point>, usize)> = cells.into_iter().map(|c| (c, 0)).collect();
    while let Some((c, depth)) = work.pop() {
        let bound = piece_deviation(l, tau, g, h, &c)?;
        match bound {
            Some(b) if b < *target || depth >= max_depth => {
                if b > worst {
                    worst = b;
                }
            }
            None if depth >= max_depth => return Ok(None),
            _ => work.extend(subdivide_simplex(&c).into_iter().map(|s| (s, depth + 1))),
        }
    }
    Ok(Some(worst))
}

fn piece_deviation(l: &Complex, tau: &[u32], g: &dyn MapOracle, h: &SimplicialMap, c: &[Point]) -> Result<Option<Rational>> {
    let (imgs, keys): (Vec<Point>, Vec<PieceKey>) = c.iter().map(|p| g.eval_keyed(p)).collect::<Result<Vec<_>>>()?.into_iter().unzip();
    if !g.affine_on(&keys.iter().collect::<Vec<_>>()) {
        return Ok(None);
    }
    let mut carrier = Key::new();
    for y in &imgs {
        match l.carrier_of_point(y) {
            Some(k) => carrier = crate::complex::union(&carrier, &k),
            None => return Ok(None),
        }
    }
    if !l.contains(&carrier) {
        if c.len() != 2 {
            return Ok(None);
        }
        // An edge whose image crosses simplices of L: split it where it crosses.
        let (a, b) = (&imgs[0], &imgs[1]);
        let lo: Point = a.iter().zip(b).map(|(x, y)| x.min(y).clone()).collect();
        let hi: Point = a.iter().zip(b).map(|(x, y)| x.max(y).clone()).collect();
        let mut worst = Rational::zero();
        for mi in l.maximal_in_box(&lo, &hi) {
            let m = &l.maximal()[mi as usize];
            if m.len() != l.ambient_dim() + 1 {
                return Ok(None);
            }
            let hp: Vec<(Point, Rational)> = barycentric_forms(&l.simplex_points(m))?.into_iter().map(|f| (f.gradient, -f.offset)).collect();
            let Some((t0, t1)) = clip(a, b, &hp) else { continue };
            if t0 >= t1 {
                continue;
            }
            let d = sub(&c[1], &c[0]);
            let part = [add(&c[0], &scale(&d, &t0)), add(&c[0], &scale(&d, &t1))];
            match piece_deviation(l, tau, g, h, &part)? {
                Some(v) if v > worst => worst = v,
                Some(_) => {}
                None => return Ok(None),
            }
        }
        return Ok(Some(worst));
    }
    let mut ns = Vec::with_capacity(c.len());
    let mut ss = Vec::with_capacity(c.len());
    let mut hs = Vec::with_capacity(c.len());
    for (p, y) in c.iter().zip(&imgs) {
        let coords = l.coords_in(&carrier, y).expect("the carrier contains every image");
        let mut sum = Rational::zero();
        let mut num = vec![Rational::zero(); y.len()];
        for (i, &v) in carrier.iter().enumerate() {
            if tau.contains(&v) {
                sum += &coords[i];
                num = add(&num, &scale(l.point(v), &coords[i]));
            }
        }
        if !sum.is_positive() {
            return Ok(None);
        }
        ns.push(num);
        ss.push(sum);
        hs.push(h.evaluate(p)?);
    }
    let two = Rational::from_integer(2.into());
    let mut top = Rational::zero();
    for i in 0..c.len() {
        for j in i..c.len() {
            let b = if i == j {
                sub(&ns[i], &scale(&hs[i], &ss[i]))
            } else {
                let a = sub(&add(&ns[i], &ns[j]), &add(&scale(&hs[j], &ss[i]), &scale(&hs[i], &ss[j])));
                scale(&a, &(Rational::one() / &two))
            };
            let n = norm2(&b);
            if n > top {
                top = n;
            }
        }
    }
    let smin = ss.iter().min().expect("nonempty piece");
    Ok(Some(top / (smin * smin)))
}

/// Subdivides the given cells until every oracle is affine on each piece.
///
/// Each piece comes with the images of its vertices under the first oracle.
pub fn affine_pieces(
    oracles: &[&dyn MapOracle],
    cells: Vec<Vec<Point>>,
    max_depth: usize,
) -> Result<Option<Vec<(Vec<Point>, Vec<Point>)>>> {
    let mut out = Vec::new();
    let mut work: Vec<(Vec<Point>, usize)> = cells.into_iter().map(|c| (c, 0)).collect();
    while let Some((c, depth)) = work.pop() {
        let mut ok = true;
        let mut first = Vec::new();
        for (i, o) in oracles.iter().enumerate() {
            let (imgs, keys): (Vec<Point>, Vec<PieceKey>) = c.iter().map(|p| o.eval_keyed(p)).collect::<Result<Vec<_>>>()?.into_iter().unzip();
            if i == 0 {
                first = imgs;
            }
            if !o.affine_on(&keys.iter().collect::<Vec<_>>()) {
                ok = false;
                break;
            }
        }
        if ok {
            out.push((c, first));
        } else if depth >= max_depth {
            return Ok(None);
        } else {
            work.extend(subdivide_simplex(&c).into_iter().map(|s| (s, depth + 1)));
        }
    }
    Ok(Some(out))
}

/// Whether the convex hull of the points lies in |L| (exact; 2D for non-simplex images).
pub fn hull_in_polyhedron(l: &Complex, pts: &[Point]) -> Result<bool> {
    let mut carrier = Key::new();
    for p in pts {
        match l.carrier_of_point(p) {
            Some(c) => carrier = crate::complex::union(&carrier, &c),
            None => return Ok(false),
        }
    }
    if l.contains(&carrier) {
        return Ok(true);
    }
    if l.ambient_dim() != 2 {
        return Err(Error::UnsupportedDimension(l.ambient_dim()));
    }
    let mut uniq: Vec<Point> = Vec::new();
    for p in pts {
        if !uniq.contains(p) {
            uniq.push(p.clone());
        }
    }
    let hull = planar_hull(&uniq);
    for i in 0..hull.len() {
        let a = &hull[i];
        let b = &hull[(i + 1) % hull.len()];
        if !segment_in_polyhedron(l, a, b) {
            return Ok(false);
        }
    }
    if hull.len() < 3 {
        return Ok(true);
    }
    // No frontier edge of L may pass through the open hull.
    for e in l.simplices(1) {
        let cofaces = l.maximal_containing(e[0])
            .iter()
            .filter(|&&mi| {
                let m = &l.maximal()[mi as usize];
                m.len() == 3 && m.contains(&e[1])
            })
            .count();
        if cofaces >= 2 {
            continue;
        }
        if segment_meets_open_polygon(l.point(e[0]), l.point(e[1]), &hull) {
            return Ok(false);
        }
    }
    Ok(true)
}

fn cross(o: &Point, a: &Point, b: &Point) -> Rational {
    (&a[0] - &o[0]) * (&b[1] - &o[1]) - (&a[1] - &o[1]) * (&b[0] - &o[0])
}

/// Convex hull in counter-clockwise order (collinear points dropped).
fn planar_hull(pts: &[Point]) -> Vec<Point> {
    let mut p = pts.to_vec();
    p.sort_by(|a, b| exact::cmp_points(a, b));
    if p.len() < 3 {
        return p;
    }
    let mut lower: Vec<Point> = Vec::new();
    for q in &p {
        while lower.len() >= 2 && !cross(&lower[lower.len() - 2], &lower[lower.len() - 1], q).is_positive() {
            lower.pop();
        }
        lower.push(q.clone());
    }
    let mut upper: Vec<Point> = Vec::new();
    for q in p.iter().rev() {
        while upper.len() >= 2 && !cross(&upper[upper.len() - 2], &upper[upper.len() - 1], q).is_positive() {
            upper.pop();
        }
        upper.push(q.clone());
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

/// Parameter interval of `a + t(b − a)`, `t ∈ [0,1]`, inside a closed convex polygon given by
/// half-planes `n·x ≥ c`.
fn clip(a: &Point, b: &Point, halfplanes: &[(Point, Rational)]) -> Option<(Rational, Rational)> {
    let mut t0 = Rational::zero();
    let mut t1 = Rational::one();
    let d = sub(b, a);
    for (n, c) in halfplanes {
        let na = exact::dot(n, a) - c;
        let nd = exact::dot(n, &d);
        if nd.is_zero() {
            if na.is_negative() {
                return None;
            }
        } else {
            let t = -&na / &nd;
            if nd.is_positive() {
                if t > t0 {
                    t0 = t;
                }
            } else if t < t1 {
                t1 = t;
            }
        }
    }
    (t0 <= t1).then_some((t0, t1))
}

fn triangle_halfplanes(p: &[&Point]) -> Vec<(Point, Rational)> {
    let forms = barycentric_forms(p).expect("triangles of a complex are nondegenerate");
    forms.into_iter().map(|f| (f.gradient, -f.offset)).collect()
}

fn segment_in_polyhedron(l: &Complex, a: &Point, b: &Point) -> bool {
    let lo: Point = a.iter().zip(b).map(|(x, y)| x.min(y).clone()).collect();
    let hi: Point = a.iter().zip(b).map(|(x, y)| x.max(y).clone()).collect();
    let mut ivs: Vec<(Rational, Rational)> = Vec::new();
    for mi in l.maximal_in_box(&lo, &hi) {
        let m = &l.maximal()[mi as usize];
        let pts = l.simplex_points(m);
        if m.len() == 3 {
            if let Some(iv) = clip(a, b, &triangle_halfplanes(&pts)) {
                ivs.push(iv);
            }
        }
    }
    ivs.sort();
    let mut reach = Rational::zero();
    for (s, e) in ivs {
        if s > reach {
            return false;
        }
        if e > reach {
            reach = e;
        }
    }
    reach >= Rational::one()
}

fn segment_meets_open_polygon(a: &Point, b: &Point, hull: &[Point]) -> bool {
    let n = hull.len();
    let hp: Vec<(Point, Rational)> = (0..n)
        .map(|i| {
            let p = &hull[i];
            let q = &hull[(i + 1) % n];
            // inward normal of a counter-clockwise edge
            let nrm = vec![-(&q[1] - &p[1]), &q[0] - &p[0]];
            let c = exact::dot(&nrm, p);
            (nrm, c)
        })
        .collect();
    let Some((t0, t1)) = clip(a, b, &hp) else { return false };
    let t = (t0 + t1) / Rational::from_integer(2.into());
    let x = add(a, &scale(&sub(b, a), &t));
    hp.iter().all(|(nrm, c)| exact::dot(nrm, &x) > *c)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Density {
    /// Cells of `sd^resolution(L)` that must be hit.
    pub resolution: usize,
    pub depth: usize,
    pub cells: usize,
    pub hit: usize,
    pub passed: bool,
}

#[derive(Clone, Debug)]
pub struct RestoreOptions {
    /// Squared ε for the squeeze; defaults to the recommended value.
    pub eps2: Option<Rational>,
    pub density_resolution: usize,
    pub density_depth: usize,
    /// Subdivision depth allowed when looking for pieces where g is affine.
    pub affine_depth: usize,
    pub sup: SupOptions,
    /// Complex whose iterated subdivisions provide the density samples; defaults to h's domain.
    pub sample_base: Option<Arc<Complex>>,
}

impl Default for RestoreOptions {
    fn default() -> Self {
        RestoreOptions { eps2: None, density_resolution: 1, density_depth: 5, affine_depth: 6, sup: SupOptions::default(), sample_base: None }
    }
}

#[derive(Clone, Debug)]
pub struct RestoreCertificate {
    pub budget: EpsilonBudget,
    pub eps2: Rational,
    pub sup_hg: SupInterval,
    pub checks: Vec<Check>,
    pub density: Density,
    /// Upper bound on `‖h − π∘g‖²`.
    pub displacement2: Rational,
}

fn not_certified(check: &str, detail: String) -> Error {
    Error::HypothesisNotCertified { check: check.to_string(), detail }
}

/// Verifies the hypotheses under which `π ∘ g` is surjective and returns it.
pub fn restore_surjectivity(h: &SimplicialMap, g: Arc<dyn MapOracle>, opts: &RestoreOptions) -> Result<(Squeezed, RestoreCertificate)> {
    let l = h.codomain_arc().clone();
    let budget = epsilon_budget(&l)?;
    let eps2 = opts.eps2.clone().unwrap_or_else(|| budget.recommended.clone());
    let mut checks = Vec::new();
    if eps2 > budget.recommended || !eps2.is_positive() {
        return Err(not_certified(
            "epsilon within budget",
            format!("ε² = {} exceeds the {} bound {}", format_rational(&eps2), budget.binding, format_rational(&budget.recommended)),
        ));
    }

    // 1. g is close to h.
    let sopts = SupOptions { stop_below: Some(eps2.clone()), ..opts.sup.clone() };
    let sup_hg = certified_sup_distance(h, g.as_ref(), h.domain(), &sopts)?;
    let name = format!("sup-norm below {}", budget.binding);
    let detail = format!(
        "‖h − g‖² ≤ {} against ε² = {} ({} bound)",
        format_rational(&sup_hg.hi2),
        format_rational(&eps2),
        budget.binding
    );
    if sup_hg.hi2 >= eps2 {
        return Err(not_certified(&name, detail));
    }
    checks.push(Check { name, passed: true, detail });

    // 2. g maps into |L|.
    let cells: Vec<Vec<Point>> = h.domain().maximal().iter().map(|m| h.domain().simplex_points(m).into_iter().cloned().collect()).collect();
    let pieces = affine_pieces(&[g.as_ref()], cells, opts.affine_depth)?
        .ok_or_else(|| not_certified("image in |L|", format!("g is not piecewise affine at depth {}", opts.affine_depth)))?;
    for (c, imgs) in &pieces {
        if !hull_in_polyhedron(&l, imgs)? {
            let at: Vec<String> = c.iter().map(|p| format_point(p)).collect();
            return Err(not_certified("image in |L|", format!("g leaves |L| on the cell {}", at.join(" "))));
        }
    }
    checks.push(Check { name: "image in |L|".into(), passed: true, detail: format!("{} affine pieces checked", pieces.len()) });

    // 3. On the boundary of each witness face, ρ_τ∘g stays within δ/2 of h.
    let half_delta2 = &budget.squared_delta_min / Rational::from_integer(4.into());
    let e_ub = sqrt_upper(&sup_hg.hi2, SQRT_BITS);
    let surj = is_surjective(h);
    if !surj.surjective {
        return Err(not_certified("h surjective", format!("{} maximal simplices uncovered", surj.uncovered.len())));
    }
    let mut worst = Rational::zero();
    let mut lipschitz_used = 0usize;
    for (tau, sigma) in &surj.witnesses {
        if tau.len() < 2 {
            continue;
        }
        let rho = h.preimage_face(sigma, tau).expect("witness maps onto τ");
        let facets: Vec<Vec<Point>> = (0..rho.len())
            .map(|i| rho.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, &v)| h.domain().point(v).clone()).collect())
            .collect();
        let exact_dev = match affine_pieces(&[g.as_ref()], facets.clone(), opts.affine_depth)? {
            Some(pieces) => {
                let mut dev = Rational::zero();
                let mut inside = true;
                for (c, imgs) in &pieces {
                    for (p, gp) in c.iter().zip(imgs) {
                        if l.coords_in(tau, gp).is_none() {
                            inside = false;
                        }
                        let d = dist2(gp, &h.evaluate(p)?);
                        if d > dev {
                            dev = d;
                        }
                    }
                }
                inside.then_some(dev)
            }
            None => None,
        };
        let exact_dev = match exact_dev {
            Some(d) => Some(d),
            None => retracted_deviation(&l, tau, g.as_ref(), h, facets, &half_delta2, opts.affine_depth)?,
        };
        let dev = match exact_dev {
            Some(d) => d,
            None => {
                lipschitz_used += 1;
                let eps1 = budget.squared_eps1.clone();
                let rt = StarRetraction::new(l.clone(), tau.clone(), eps1.clone());
                let eps1_lb = eps1.map(|e| sqrt_lower(&e, SQRT_BITS)).unwrap_or_else(|| Rational::from_integer(1_000_000.into()));
                let lr2 = rt.squared_lipschitz(&eps1_lb, &e_ub).ok_or_else(|| {
                    not_certified("boundary deviation", format!("‖h − g‖ is not below ε1 near {}", l.simplex_name(tau)))
                })?;
                let comp = Retracted { g: g.as_ref(), rho: &rt, lipschitz2: lr2 * g.squared_lipschitz() };
                let ids: Vec<String> = rho.iter().map(|&v| h.domain().id(v).to_string()).collect();
                let pts: Vec<Point> = rho.iter().map(|&v| h.domain().point(v).clone()).collect();
                let n = rho.len() as u32;
                let bfacets = (0..n).map(|i| (0..n).filter(|&j| j != i).collect()).collect();
                let boundary = Complex::from_parts(h.domain().ambient_dim(), ids, pts, bfacets);
                let so = SupOptions { stop_below: Some(half_delta2.clone()), ..opts.sup.clone() };
                let r = certified_sup_distance(&comp, h, &boundary, &so).map_err(|e| match e {
                    Error::OutsideU(p) => not_certified("boundary deviation", format!("g({p}) leaves the retraction neighbourhood")),
                    e => e,
                })?;
                r.hi2
            }
        };
        if dev >= half_delta2 {
            return Err(not_certified(
                "boundary deviation",
                format!(
                    "on ∂{} the deviation² {} is not below δ²/4 = {}",
                    l.simplex_name(tau),
                    format_rational(&dev),
                    format_rational(&half_delta2)
                ),
            ));
        }
        if dev > worst {
            worst = dev;
        }
    }
    checks.push(Check {
        name: "boundary deviation".into(),
        passed: true,
        detail: format!(
            "max deviation² {} < δ²/4 = {} ({} faces by Lipschitz bound)",
            format_rational(&worst),
            format_rational(&half_delta2),
            lipschitz_used
        ),
    });

    let spec = Arc::new(SqueezeSpec::for_epsilon(l.clone(), &eps2)?);
    let squeezed = Squeezed { g: g.clone(), spec };

    // 4. Density of the sampled image.
    let grid = l.sd_k(opts.density_resolution, crate::complex::DEFAULT_SIMPLEX_CAP.max(l.subdivision_count() as usize))?;
    let mut hit = vec![false; grid.maximal().len()];
    let base = opts.sample_base.as_deref().unwrap_or(h.domain());
    let mut cells: Vec<Vec<Point>> = base.maximal().iter().map(|m| base.simplex_points(m).into_iter().cloned().collect()).collect();
    for j in 0..=opts.density_depth {
        if j > 0 {
            cells = cells.iter().flat_map(|c| subdivide_simplex(c)).collect();
        }
        for c in &cells {
            let x = exact::barycentre(&c.iter().collect::<Vec<_>>());
            let y = g.eval(&x)?;
            // Only points of the shrunken copies land in open top cells.
            let Some((ti, coords)) = l.locate(&y) else {
                return Err(Error::OracleDomainError(format!("g({}) is outside |L|", format_point(&x))));
            };
            if coords.iter().any(|v| v.is_zero()) {
                continue;
            }
            let z = match squeezed.spec.tau(ti as usize) {
                Some(t) if t.in_shrunken(&y) => t.pi(&y)?,
                Some(_) => continue,
                None => y,
            };
            if let Some((i, coords)) = grid.locate(&z) {
                if coords.iter().all(|v| !v.is_zero()) {
                    hit[i as usize] = true;
                }
            }
        }
    }
    let nhit = hit.iter().filter(|&&b| b).count();
    let density = Density {
        resolution: opts.density_resolution,
        depth: opts.density_depth,
        cells: hit.len(),
        hit: nhit,
        passed: nhit == hit.len(),
    };

    // 5. ‖h − π∘g‖ ≤ ‖h − g‖ + max diam τ < 2 max diam τ.
    let md2 = budget.per_tau.iter().map(|t| &t.squared_diam).max().expect("nonempty").clone();
    let s = &e_ub + sqrt_upper(&md2, SQRT_BITS);
    let displacement2 = &s * &s;
    let four = Rational::from_integer(4.into());
    let detail = format!("‖h − π∘g‖² ≤ {} < 4·{}", format_rational(&displacement2), format_rational(&md2));
    if displacement2 >= &four * &md2 {
        return Err(not_certified("displacement", detail));
    }
    checks.push(Check { name: "displacement".into(), passed: true, detail });

    Ok((squeezed, RestoreCertificate { budget, eps2, sup_hg, checks, density, displacement2 }))
}
