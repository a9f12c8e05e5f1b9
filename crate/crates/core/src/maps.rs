//! Piecewise-affine and simplicial maps, the continuous-map oracle interface,
//! and certified sup-norm bounds.

use crate::complex::{faces_of, key, Complex, Key};
use crate::error::{Error, Result};
use crate::exact::{self, add, combination, dist2, dot, format_point, sqrt_upper, sub, Point, Rational};
use num_traits::{One, Zero};
use smallvec::SmallVec;
use std::collections::HashMap;
use std::sync::{Arc, OnceLock};

/// Bits of precision used when a square root has to be bracketed.
pub const SQRT_BITS: u32 = 40;

/// Carrier of the evaluation point at every stage of an oracle.
pub type PieceKey = SmallVec<[Key; 2]>;

/// A continuous map presented by an exact evaluator and a Lipschitz certificate.
///
/// `squared_lipschitz` bounds `|f(x) − f(y)|² ≤ Λ²|x − y|²` for `x, y` in a
/// common closed simplex of the domain's polyhedron.
pub trait MapOracle: Send + Sync {
    /// A complex whose polyhedron is the domain.
    fn domain(&self) -> &Complex;
    fn target_dim(&self) -> usize;
    /// Image of `x` together with the piece it was evaluated on.
    fn eval_keyed(&self, x: &[Rational]) -> Result<(Point, PieceKey)>;
    /// Whether the map is affine on the convex hull of points evaluated on these pieces.
    fn affine_on(&self, keys: &[&PieceKey]) -> bool;
    fn squared_lipschitz(&self) -> Rational;

    fn eval(&self, x: &[Rational]) -> Result<Point> {
        Ok(self.eval_keyed(x)?.0)
    }
}

/// A piecewise-affine map given by images of the domain's vertices.
#[derive(Clone, Debug)]
pub struct PLMap {
    domain: Arc<Complex>,
    codomain: Option<Arc<Complex>>,
    target_dim: usize,
    images: Vec<Point>,
    lipschitz: OnceLock<Rational>,
}

impl PLMap {
    /// Checks that every vertex image lies in `|codomain|`.
    pub fn new(domain: Arc<Complex>, codomain: Arc<Complex>, images: Vec<Point>) -> Result<PLMap> {
        if images.len() != domain.num_vertices() {
            return Err(Error::InvalidComplex(format!(
                "{} vertex images for {} vertices",
                images.len(),
                domain.num_vertices()
            )));
        }
        for (v, p) in images.iter().enumerate() {
            exact::check_dim(codomain.ambient_dim(), p)?;
            if !codomain.contains_point(p) {
                return Err(Error::OutsideDomain(format!(
                    "image {} of {} is outside the codomain",
                    format_point(p),
                    domain.id(v as u32)
                )));
            }
        }
        let target_dim = codomain.ambient_dim();
        Ok(PLMap { domain, codomain: Some(codomain), target_dim, images, lipschitz: OnceLock::new() })
    }

    /// A map into `R^target_dim` with no codomain complex (e.g. a displacement field).
    pub fn into_space(domain: Arc<Complex>, target_dim: usize, images: Vec<Point>) -> Result<PLMap> {
        if images.len() != domain.num_vertices() {
            return Err(Error::InvalidComplex("vertex image count mismatch".into()));
        }
        for p in &images {
            exact::check_dim(target_dim, p)?;
        }
        Ok(PLMap { domain, codomain: None, target_dim, images, lipschitz: OnceLock::new() })
    }

    /// The identity of `|k|`, as a map into `k`.
    pub fn identity(k: Arc<Complex>) -> PLMap {
        let images = k.points().to_vec();
        let target_dim = k.ambient_dim();
        PLMap { domain: k.clone(), codomain: Some(k), target_dim, images, lipschitz: OnceLock::new() }
    }

    pub fn domain_arc(&self) -> &Arc<Complex> {
        &self.domain
    }

    pub fn codomain(&self) -> Option<&Arc<Complex>> {
        self.codomain.as_ref()
    }

    pub fn images(&self) -> &[Point] {
        &self.images
    }

    pub fn image(&self, v: u32) -> &Point {
        &self.images[v as usize]
    }

    /// Value at a point of simplex `k` with barycentric coordinates `coords`.
    pub fn eval_on(&self, k: &[u32], coords: &[Rational]) -> Point {
        let pts: Vec<&Point> = k.iter().map(|&v| &self.images[v as usize]).collect();
        combination(&pts, coords)
    }

    pub fn evaluate(&self, x: &[Rational]) -> Result<Point> {
        Ok(self.eval_keyed(x)?.0)
    }

    /// `max_σ ‖A_σ‖_F²` over maximal simplices, `A_σ` the linear part on σ.
    fn compute_lipschitz(&self) -> Rational {
        let mut best = Rational::zero();
        for m in self.domain.maximal() {
            if m.len() < 2 {
                continue;
            }
            let p0 = self.domain.point(m[0]);
            let q0 = &self.images[m[0] as usize];
            let e: Vec<Point> = m[1..].iter().map(|&v| sub(self.domain.point(v), p0)).collect();
            let f: Vec<Point> = m[1..].iter().map(|&v| sub(&self.images[v as usize], q0)).collect();
            let d = e.len();
            let g: Vec<Vec<Rational>> = (0..d).map(|i| (0..d).map(|j| dot(&e[i], &e[j])).collect()).collect();
            let gi = exact::invert(&g).expect("simplices of a valid complex are nondegenerate");
            let mut tr = Rational::zero();
            for i in 0..d {
                for j in 0..d {
                    if !gi[i][j].is_zero() {
                        tr += &gi[i][j] * dot(&f[i], &f[j]);
                    }
                }
            }
            if tr > best {
                best = tr;
            }
        }
        best
    }
}

impl MapOracle for PLMap {
    fn domain(&self) -> &Complex {
        &self.domain
    }

    fn target_dim(&self) -> usize {
        self.target_dim
    }

    fn eval_keyed(&self, x: &[Rational]) -> Result<(Point, PieceKey)> {
        let (carrier, coords) = self
            .domain
            .carrier_with_coords(x)
            .ok_or_else(|| Error::OutsideDomain(format_point(x)))?;
        let y = self.eval_on(&carrier, &coords);
        Ok((y, SmallVec::from_elem(carrier, 1)))
    }

    fn affine_on(&self, keys: &[&PieceKey]) -> bool {
        let mut u = Key::new();
        for k in keys {
            u.extend(k[0].iter().copied());
        }
        self.domain.contains(&key(&u))
    }

    fn squared_lipschitz(&self) -> Rational {
        self.lipschitz.get_or_init(|| self.compute_lipschitz()).clone()
    }
}

/// A composition of PL maps, applied left to right.
#[derive(Clone, Debug)]
pub struct Chain {
    stages: Vec<PLMap>,
    lipschitz: Option<Rational>,
}

impl Chain {
    pub fn new(stages: Vec<PLMap>) -> Result<Chain> {
        if stages.is_empty() {
            return Err(Error::InvalidComplex("empty map chain".into()));
        }
        for w in stages.windows(2) {
            if w[0].target_dim != w[1].domain.ambient_dim() {
                return Err(Error::DimensionMismatch {
                    expected: w[1].domain.ambient_dim(),
                    found: w[0].target_dim,
                });
            }
        }
        Ok(Chain { stages, lipschitz: None })
    }

    /// Replaces the derived certificate by a supplied one.
    pub fn with_squared_lipschitz(mut self, l2: Rational) -> Chain {
        self.lipschitz = Some(l2);
        self
    }

    pub fn stages(&self) -> &[PLMap] {
        &self.stages
    }

    /// The codomain complex of the last stage, if any.
    pub fn codomain(&self) -> Option<&Arc<Complex>> {
        self.stages.last().and_then(|s| s.codomain())
    }
}

impl MapOracle for Chain {
    fn domain(&self) -> &Complex {
        &self.stages[0].domain
    }

    fn target_dim(&self) -> usize {
        self.stages.last().expect("nonempty").target_dim
    }

    fn eval_keyed(&self, x: &[Rational]) -> Result<(Point, PieceKey)> {
        let mut keys = PieceKey::new();
        let mut cur = x.to_vec();
        for (i, s) in self.stages.iter().enumerate() {
            let (c, coords) = s.domain.carrier_with_coords(&cur).ok_or_else(|| {
                if i == 0 {
                    Error::OutsideDomain(format_point(&cur))
                } else {
                    Error::OracleDomainError(format!("stage {i} received {} outside its domain", format_point(&cur)))
                }
            })?;
            cur = s.eval_on(&c, &coords);
            keys.push(c);
        }
        Ok((cur, keys))
    }

    fn affine_on(&self, keys: &[&PieceKey]) -> bool {
        // Each stage is affine on the hull of its inputs when their carriers
        // span one simplex; by induction the hull of the stage inputs is the
        // image of the hull of the original points.
        (0..self.stages.len()).all(|i| {
            let mut u = Key::new();
            for k in keys {
                u.extend(k[i].iter().copied());
            }
            self.stages[i].domain.contains(&key(&u))
        })
    }

    fn squared_lipschitz(&self) -> Rational {
        if let Some(l) = &self.lipschitz {
            return l.clone();
        }
        self.stages.iter().fold(Rational::one(), |acc, s| acc * s.squared_lipschitz())
    }
}

/// `x ↦ base(x) + bump(x)`: a map perturbed by a PL displacement field.
pub struct Perturbed {
    base: Arc<dyn MapOracle>,
    bump: PLMap,
}

impl Perturbed {
    pub fn new(base: Arc<dyn MapOracle>, bump: PLMap) -> Result<Perturbed> {
        if bump.target_dim != base.target_dim() {
            return Err(Error::DimensionMismatch { expected: base.target_dim(), found: bump.target_dim });
        }
        Ok(Perturbed { base, bump })
    }

    pub fn bump(&self) -> &PLMap {
        &self.bump
    }
}

impl MapOracle for Perturbed {
    fn domain(&self) -> &Complex {
        self.base.domain()
    }

    fn target_dim(&self) -> usize {
        self.base.target_dim()
    }

    fn eval_keyed(&self, x: &[Rational]) -> Result<(Point, PieceKey)> {
        let (y, mut k) = self.base.eval_keyed(x)?;
        let (d, kd) = self.bump.eval_keyed(x)?;
        k.extend(kd);
        Ok((add(&y, &d), k))
    }

    fn affine_on(&self, keys: &[&PieceKey]) -> bool {
        let split = keys.first().map_or(0, |k| k.len() - 1);
        let base: Vec<PieceKey> = keys.iter().map(|k| k[..split].iter().cloned().collect()).collect();
        let bump: Vec<PieceKey> = keys.iter().map(|k| k[split..].iter().cloned().collect()).collect();
        self.base.affine_on(&base.iter().collect::<Vec<_>>()) && self.bump.affine_on(&bump.iter().collect::<Vec<_>>())
    }

    fn squared_lipschitz(&self) -> Rational {
        let a = sqrt_upper(&self.base.squared_lipschitz(), SQRT_BITS);
        let b = sqrt_upper(&self.bump.squared_lipschitz(), SQRT_BITS);
        let s = a + b;
        &s * &s
    }
}

// ---------------------------------------------------------------------------
// simplicial maps

/// A strict total order on the vertices of a codomain complex.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VertexOrder {
    rank: Vec<u32>,
}

impl VertexOrder {
    /// Lexicographic on (coordinates, id).
    pub fn lexicographic(l: &Complex) -> VertexOrder {
        let mut vs: Vec<u32> = (0..l.num_vertices() as u32).collect();
        vs.sort_by(|&a, &b| exact::cmp_points(l.point(a), l.point(b)).then_with(|| l.id(a).cmp(l.id(b))));
        VertexOrder::from_sequence(l.num_vertices(), &vs)
    }

    /// Vertices listed from least to greatest; unlisted vertices follow in lexicographic order.
    pub fn from_ids(l: &Complex, ids: &[String]) -> Result<VertexOrder> {
        let mut seq = Vec::new();
        for id in ids {
            seq.push(l.vertex(id)?);
        }
        let lex = VertexOrder::lexicographic(l);
        let mut rest: Vec<u32> = (0..l.num_vertices() as u32).filter(|v| !seq.contains(v)).collect();
        rest.sort_by_key(|&v| lex.rank(v));
        seq.extend(rest);
        Ok(VertexOrder::from_sequence(l.num_vertices(), &seq))
    }

    fn from_sequence(n: usize, seq: &[u32]) -> VertexOrder {
        let mut rank = vec![0u32; n];
        for (i, &v) in seq.iter().enumerate() {
            rank[v as usize] = i as u32;
        }
        VertexOrder { rank }
    }

    pub fn rank(&self, v: u32) -> u32 {
        self.rank[v as usize]
    }

    pub fn min_of(&self, vs: impl IntoIterator<Item = u32>) -> Option<u32> {
        vs.into_iter().min_by_key(|&v| self.rank(v))
    }

    /// Vertices sorted from least to greatest.
    pub fn sorted(&self, vs: &[u32]) -> Vec<u32> {
        let mut out = vs.to_vec();
        out.sort_by_key(|&v| self.rank(v));
        out
    }
}

/// A PL map sending vertices to vertices so that every simplex goes onto a simplex.
#[derive(Clone, Debug)]
pub struct SimplicialMap {
    pl: PLMap,
    vmap: Vec<u32>,
}

impl SimplicialMap {
    pub fn from_vertex_map(domain: Arc<Complex>, codomain: Arc<Complex>, vmap: Vec<u32>) -> Result<SimplicialMap> {
        let images = vmap.iter().map(|&w| codomain.point(w).clone()).collect();
        let target_dim = codomain.ambient_dim();
        let pl = PLMap { domain, codomain: Some(codomain), target_dim, images, lipschitz: OnceLock::new() };
        let h = SimplicialMap { pl, vmap };
        h.verify()?;
        Ok(h)
    }

    fn verify(&self) -> Result<()> {
        let l = self.codomain();
        for m in self.domain().maximal() {
            let img = self.image_of_simplex(m);
            if !l.contains(&img) {
                return Err(Error::NotSimplicial {
                    simplex: self.domain().simplex_name(m),
                    image: format!("{{{}}}", l.simplex_ids(&img).join(",")),
                });
            }
        }
        Ok(())
    }

    pub fn domain(&self) -> &Complex {
        &self.pl.domain
    }

    pub fn domain_arc(&self) -> &Arc<Complex> {
        &self.pl.domain
    }

    pub fn codomain(&self) -> &Complex {
        self.pl.codomain.as_ref().expect("simplicial maps have a codomain")
    }

    pub fn codomain_arc(&self) -> &Arc<Complex> {
        self.pl.codomain.as_ref().expect("simplicial maps have a codomain")
    }

    pub fn as_pl(&self) -> &PLMap {
        &self.pl
    }

    pub fn vertex_image(&self, v: u32) -> u32 {
        self.vmap[v as usize]
    }

    pub fn vertex_map(&self) -> &[u32] {
        &self.vmap
    }

    /// The codomain simplex spanned by the images of σ's vertices.
    pub fn image_of_simplex(&self, s: &[u32]) -> Key {
        key(&s.iter().map(|&v| self.vmap[v as usize]).collect::<Vec<_>>())
    }

    pub fn evaluate(&self, x: &[Rational]) -> Result<Point> {
        self.pl.evaluate(x)
    }

    /// Vertex table as (domain id, codomain id), sorted by domain id.
    pub fn table(&self) -> Vec<(String, String)> {
        let mut t: Vec<(String, String)> = (0..self.vmap.len())
            .map(|v| (self.domain().id(v as u32).to_string(), self.codomain().id(self.vmap[v]).to_string()))
            .collect();
        t.sort();
        t
    }

    /// A face of σ mapped bijectively onto `image`, choosing the least preimage of each vertex.
    pub fn preimage_face(&self, s: &[u32], image: &[u32]) -> Option<Key> {
        let mut out = Key::new();
        for &w in image {
            out.push(*s.iter().find(|&&v| self.vmap[v as usize] == w)?);
        }
        Some(key(&out))
    }
}

impl MapOracle for SimplicialMap {
    fn domain(&self) -> &Complex {
        self.pl.domain()
    }
    fn target_dim(&self) -> usize {
        self.pl.target_dim
    }
    fn eval_keyed(&self, x: &[Rational]) -> Result<(Point, PieceKey)> {
        self.pl.eval_keyed(x)
    }
    fn affine_on(&self, keys: &[&PieceKey]) -> bool {
        self.pl.affine_on(keys)
    }
    fn squared_lipschitz(&self) -> Rational {
        self.pl.squared_lipschitz()
    }
}

/// Upgrades a PL map whose vertex images are codomain vertices.
pub fn check_simplicial(m: &PLMap) -> Result<SimplicialMap> {
    let l = m.codomain.as_ref().ok_or_else(|| Error::InvalidComplex("map has no codomain complex".into()))?;
    let mut vmap = Vec::with_capacity(m.images.len());
    for (v, p) in m.images.iter().enumerate() {
        match l.vertex_at(p) {
            Some(w) => vmap.push(w),
            None => {
                return Err(Error::NotSimplicial {
                    simplex: m.domain.id(v as u32).to_string(),
                    image: format_point(p),
                })
            }
        }
    }
    SimplicialMap::from_vertex_map(m.domain.clone(), l.clone(), vmap)
}

/// Result of a surjectivity check.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Surjectivity {
    pub surjective: bool,
    /// (maximal codomain simplex, a maximal domain simplex mapping onto it)
    pub witnesses: Vec<(Key, Key)>,
    pub uncovered: Vec<Key>,
}

pub fn is_surjective(h: &SimplicialMap) -> Surjectivity {
    let l = h.codomain();
    let mut found: HashMap<Key, Key> = HashMap::new();
    for m in h.domain().maximal() {
        let img = h.image_of_simplex(m);
        if l.is_maximal(&img) {
            found.entry(img).or_insert_with(|| m.clone());
        }
    }
    let mut witnesses = Vec::new();
    let mut uncovered = Vec::new();
    for t in l.maximal() {
        match found.get(t) {
            Some(s) => witnesses.push((t.clone(), s.clone())),
            None => uncovered.push(t.clone()),
        }
    }
    Surjectivity { surjective: uncovered.is_empty(), witnesses, uncovered }
}

// ---------------------------------------------------------------------------
// certified sup distance

#[derive(Clone, Debug)]
pub struct SupOptions {
    /// Maximum recursive subdivision depth of a single cell.
    pub max_depth: usize,
    /// Maximum number of leaf cells.
    pub max_cells: usize,
    /// Stop refining once the upper bound is below this squared value.
    pub stop_below: Option<Rational>,
    /// Stop refining once `hi − lo` is at most this (unsquared) value.
    pub gap: Option<Rational>,
}

impl Default for SupOptions {
    fn default() -> Self {
        SupOptions { max_depth: 6, max_cells: 200_000, stop_below: None, gap: None }
    }
}

/// `lo² ≤ ‖f − g‖² ≤ hi²`, exact rationals.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SupInterval {
    pub lo2: Rational,
    pub hi2: Rational,
    /// Both maps were affine on every leaf cell, so `lo2 = hi2` is the exact maximum.
    pub exact: bool,
    pub converged: bool,
    pub depth: usize,
    pub cells: usize,
}

impl SupInterval {
    pub fn zero() -> SupInterval {
        SupInterval { lo2: Rational::zero(), hi2: Rational::zero(), exact: true, converged: true, depth: 0, cells: 0 }
    }

    /// Errors with the best interval when the requested tolerance was not reached.
    pub fn require_converged(self) -> Result<SupInterval> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::BudgetExceeded(format!(
                "sup-norm interval [{}, {}] (squared) did not close at depth {}",
                exact::format_rational(&self.lo2),
                exact::format_rational(&self.hi2),
                self.depth
            )))
        }
    }
}

struct Sample {
    f: Point,
    kf: PieceKey,
    g: Point,
    kg: PieceKey,
    d2: Rational,
}

struct Cell {
    verts: Vec<usize>,
    depth: usize,
}

struct SupState<'a> {
    f: &'a dyn MapOracle,
    g: &'a dyn MapOracle,
    points: Vec<Point>,
    samples: Vec<Sample>,
    index: HashMap<Point, usize>,
    lf2: Rational,
    lg2: Rational,
    lf: Rational,
    lg: Rational,
}

impl SupState<'_> {
    fn sample(&mut self, x: &Point) -> Result<usize> {
        if let Some(&i) = self.index.get(x) {
            return Ok(i);
        }
        let (f, kf) = self.f.eval_keyed(x)?;
        let (g, kg) = self.g.eval_keyed(x)?;
        if f.len() != g.len() {
            return Err(Error::DimensionMismatch { expected: f.len(), found: g.len() });
        }
        let d2 = dist2(&f, &g);
        let i = self.samples.len();
        self.samples.push(Sample { f, kf, g, kg, d2 });
        self.points.push(x.clone());
        self.index.insert(x.clone(), i);
        Ok(i)
    }

    fn spot_check(&self, c: &Cell) -> Result<()> {
        for a in 0..c.verts.len() {
            for b in a + 1..c.verts.len() {
                let (i, j) = (c.verts[a], c.verts[b]);
                let dx = dist2(&self.points[i], &self.points[j]);
                let (si, sj) = (&self.samples[i], &self.samples[j]);
                for (name, lhs, l2) in [("f", dist2(&si.f, &sj.f), &self.lf2), ("g", dist2(&si.g, &sj.g), &self.lg2)] {
                    if lhs > l2 * &dx {
                        return Err(Error::LipschitzViolation(format!(
                            "{name} between {} and {}",
                            format_point(&self.points[i]),
                            format_point(&self.points[j])
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    fn is_exact(&self, c: &Cell) -> bool {
        let kf: Vec<&PieceKey> = c.verts.iter().map(|&i| &self.samples[i].kf).collect();
        let kg: Vec<&PieceKey> = c.verts.iter().map(|&i| &self.samples[i].kg).collect();
        self.f.affine_on(&kf) && self.g.affine_on(&kg)
    }

    fn max_d2(&self, c: &Cell) -> Rational {
        c.verts.iter().map(|&i| &self.samples[i].d2).max().cloned().unwrap_or_else(Rational::zero)
    }

    /// `min_v (|f(v) − g(v)| + (Λf + Λg)·max_u |u − v|)`, squared.
    fn lipschitz_bound(&self, c: &Cell) -> Rational {
        let l = &self.lf + &self.lg;
        let mut best: Option<Rational> = None;
        for &i in &c.verts {
            let r2 = c.verts.iter().map(|&j| dist2(&self.points[i], &self.points[j])).max().unwrap_or_else(Rational::zero);
            let b = sqrt_upper(&self.samples[i].d2, SQRT_BITS) + &l * sqrt_upper(&r2, SQRT_BITS);
            if best.as_ref().map_or(true, |x| b < *x) {
                best = Some(b);
            }
        }
        let b = best.unwrap_or_else(Rational::zero);
        &b * &b
    }
}

/// Geometric barycentric subdivision of one simplex, as lists of points.
pub fn subdivide_simplex(verts: &[Point]) -> Vec<Vec<Point>> {
    let n = verts.len();
    if n == 1 {
        return vec![verts.to_vec()];
    }
    let idx: Vec<u32> = (0..n as u32).collect();
    let mut bary: HashMap<Key, Point> = HashMap::new();
    for f in faces_of(&idx) {
        let pts: Vec<&Point> = f.iter().map(|&i| &verts[i as usize]).collect();
        bary.insert(f.clone(), exact::barycentre(&pts));
    }
    let mut out = Vec::new();
    let mut perm = idx.clone();
    permute(&mut perm, 0, &mut |p| {
        let mut cell = Vec::with_capacity(n);
        for i in 0..n {
            let k = key(&p[..=i]);
            cell.push(bary[&k].clone());
        }
        out.push(cell);
    });
    out
}

fn permute(v: &mut Vec<u32>, k: usize, f: &mut dyn FnMut(&[u32])) {
    if k == v.len() {
        f(v);
        return;
    }
    for i in k..v.len() {
        v.swap(k, i);
        permute(v, k + 1, f);
        v.swap(k, i);
    }
}

/// Certified interval for `sup_{x ∈ |base|} |f(x) − g(x)|`, in squared form.
///
/// On cells where both maps are affine the maximum sits at a vertex and is
/// exact. Elsewhere the Lipschitz slack bounds the excess, and such cells are
/// subdivided until the requested tolerance or the budget is reached.
pub fn certified_sup_distance(
    f: &dyn MapOracle,
    g: &dyn MapOracle,
    base: &Complex,
    opts: &SupOptions,
) -> Result<SupInterval> {
    let lf2 = f.squared_lipschitz();
    let lg2 = g.squared_lipschitz();
    let mut st = SupState {
        f,
        g,
        points: Vec::new(),
        samples: Vec::new(),
        index: HashMap::new(),
        lf: sqrt_upper(&lf2, SQRT_BITS),
        lg: sqrt_upper(&lg2, SQRT_BITS),
        lf2,
        lg2,
    };
    let mut work: Vec<Cell> = Vec::new();
    for m in base.maximal() {
        let mut verts = Vec::with_capacity(m.len());
        for &v in m {
            verts.push(st.sample(base.point(v))?);
        }
        work.push(Cell { verts, depth: 0 });
    }
    let mut leaves: Vec<(Rational, bool)> = Vec::new();
    let mut pending: Vec<(Cell, Rational)> = Vec::new();
    let mut max_depth = 0;
    while let Some(c) = work.pop() {
        st.spot_check(&c)?;
        max_depth = max_depth.max(c.depth);
        if st.is_exact(&c) {
            leaves.push((st.max_d2(&c), true));
            continue;
        }
        let b = st.lipschitz_bound(&c);
        let settled = opts.stop_below.as_ref().is_some_and(|s| b < *s);
        let cells_used = leaves.len() + work.len() + pending.len();
        let room = cells_used + c.verts.len().max(2) * 6 <= opts.max_cells;
        if settled || c.depth >= opts.max_depth || c.verts.len() == 1 || !room {
            pending.push((c, b));
            continue;
        }
        if let Some(gap) = &opts.gap {
            let lo = st.samples.iter().map(|s| &s.d2).max().cloned().unwrap_or_else(Rational::zero);
            let target = exact::sqrt_lower(&lo, SQRT_BITS) + gap;
            if b <= &target * &target {
                pending.push((c, b));
                continue;
            }
        }
        let pts: Vec<Point> = c.verts.iter().map(|&i| st.points[i].clone()).collect();
        for child in subdivide_simplex(&pts) {
            let mut verts = Vec::with_capacity(child.len());
            for p in &child {
                verts.push(st.sample(p)?);
            }
            work.push(Cell { verts, depth: c.depth + 1 });
        }
    }
    let lo2 = st.samples.iter().map(|s| &s.d2).max().cloned().unwrap_or_else(Rational::zero);
    let mut hi2 = lo2.clone();
    let mut exact_all = true;
    for (b, _) in &leaves {
        if *b > hi2 {
            hi2 = b.clone();
        }
    }
    for (_, b) in &pending {
        exact_all = false;
        if *b > hi2 {
            hi2 = b.clone();
        }
    }
    let converged = exact_all
        || opts.stop_below.as_ref().is_some_and(|s| hi2 < *s)
        || opts.gap.as_ref().is_some_and(|gap| {
            let d = sqrt_upper(&hi2, SQRT_BITS) - exact::sqrt_lower(&lo2, SQRT_BITS);
            d <= *gap
        });
    Ok(SupInterval {
        lo2,
        hi2,
        exact: exact_all,
        converged,
        depth: max_depth,
        cells: leaves.len() + pending.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complex::DEFAULT_SIMPLEX_CAP;
    use crate::exact::{int, point, point_int, rat};
    use crate::fixtures;
    use proptest::prelude::*;

    fn interval(n: usize) -> Arc<Complex> {
        // [0,1] split into n equal edges
        let ids = (0..=n).map(|i| format!("x{i:02}")).collect();
        let pts = (0..=n).map(|i| vec![rat(i as i64, n as i64)]).collect();
        let simplices = (0..n as u32).map(|i| key(&[i, i + 1])).collect();
        Arc::new(Complex::from_parts(1, ids, pts, simplices))
    }

    #[test]
    fn identity_and_doubling() {
        let l = Arc::new(fixtures::square_l());
        let id = PLMap::identity(l.clone());
        for x in [point(&[(1, 3), (1, 7)]), point_int(&[2, 2]), point(&[(3, 2), (1, 2)])] {
            assert_eq!(id.evaluate(&x).unwrap(), x);
        }
        assert!(matches!(id.evaluate(&point_int(&[3, 3])), Err(Error::OutsideDomain(_))));
        let k = interval(1);
        let two = Arc::new(Complex::from_parts(1, vec!["a".into(), "b".into()], vec![point_int(&[0]), point_int(&[2])], vec![key(&[0, 1])]));
        let dbl = PLMap::new(k, two, vec![point_int(&[0]), point_int(&[2])]).unwrap();
        assert_eq!(dbl.evaluate(&point(&[(1, 3)])).unwrap(), point(&[(2, 3)]));
        assert_eq!(dbl.squared_lipschitz(), int(4));
    }

    #[test]
    fn simplicial_checks() {
        let l = Arc::new(fixtures::square_l());
        let h = check_simplicial(&PLMap::identity(l.clone())).unwrap();
        for m in l.maximal() {
            assert_eq!(&h.image_of_simplex(m), m);
        }
        assert!(is_surjective(&h).surjective);
        // Collapsing an edge.
        let e = interval(1);
        let w = |s: &str| l.vertex(s).unwrap();
        let c = SimplicialMap::from_vertex_map(e.clone(), l.clone(), vec![w("w0"), w("w0")]).unwrap();
        assert_eq!(c.image_of_simplex(&key(&[0, 1])), key(&[w("w0")]));
        // No edge w1w3.
        let bad = SimplicialMap::from_vertex_map(e, l.clone(), vec![w("w1"), w("w3")]);
        assert!(matches!(bad, Err(Error::NotSimplicial { .. })));
    }

    #[test]
    fn diagonal_map_is_not_surjective() {
        let l = Arc::new(fixtures::square_l());
        let s = Arc::new(fixtures::standard_simplex());
        let w = |n: &str| l.vertex(n).unwrap();
        let h = SimplicialMap::from_vertex_map(s.clone(), l.clone(), vec![w("w0"), w("w2"), w("w2")]).unwrap();
        let img = h.image_of_simplex(&key(&[0, 1, 2]));
        assert_eq!(img, key(&[w("w0"), w("w2")]));
        let r = is_surjective(&h);
        assert!(!r.surjective);
        assert_eq!(r.uncovered.len(), 2);
        // Value at the barycentre: (1/3)w0 + (2/3)w2.
        let b = s.simplex_barycentre(&key(&[0, 1, 2]));
        assert_eq!(h.evaluate(&b).unwrap(), point(&[(4, 3), (4, 3)]));
    }

    #[test]
    fn vertex_order_default_and_override() {
        let l = fixtures::square_l();
        let o = VertexOrder::lexicographic(&l);
        let names: Vec<&str> = o.sorted(&[0, 1, 2, 3]).into_iter().map(|v| l.id(v)).collect();
        assert_eq!(names, vec!["w0", "w3", "w1", "w2"]);
        let o2 = VertexOrder::from_ids(&l, &["w2".into()]).unwrap();
        assert_eq!(o2.min_of([0, 2]), Some(2));
    }

    #[test]
    fn sup_distance_of_map_with_itself_is_zero() {
        let l = Arc::new(fixtures::square_l());
        let id = PLMap::identity(l.clone());
        let r = certified_sup_distance(&id, &id, &l, &SupOptions::default()).unwrap();
        assert!(r.exact && r.lo2.is_zero() && r.hi2.is_zero());
    }

    #[test]
    fn sup_distance_closes_after_one_level() {
        let k = interval(1);
        let fine = interval(2);
        let id = PLMap::identity(k.clone());
        let g = PLMap::into_space(fine, 1, vec![point_int(&[0]), point(&[(5, 8)]), point_int(&[1])]).unwrap();
        let opts = SupOptions { max_depth: 3, ..SupOptions::default() };
        let r = certified_sup_distance(&id, &g, &k, &opts).unwrap();
        assert!(r.exact);
        assert_eq!(r.lo2, rat(1, 64));
        assert_eq!(r.hi2, rat(1, 64));
        assert!(r.depth >= 1);
        // With no refinement allowed only the Lipschitz bound is available.
        let r0 = certified_sup_distance(&id, &g, &k, &SupOptions { max_depth: 0, ..SupOptions::default() }).unwrap();
        assert!(!r0.exact && r0.hi2 > rat(1, 64) && r0.lo2.is_zero());
        assert!(r0.clone().require_converged().is_err());
    }

    #[test]
    fn lipschitz_violation_is_reported() {
        let k = interval(2);
        let g = PLMap::into_space(k.clone(), 1, vec![point_int(&[0]), point_int(&[3]), point_int(&[0])]).unwrap();
        let lying = Chain::new(vec![g]).unwrap().with_squared_lipschitz(int(1));
        let id = PLMap::identity(k.clone());
        let r = certified_sup_distance(&lying, &id, &k, &SupOptions::default());
        assert!(matches!(r, Err(Error::LipschitzViolation(_))));
    }

    #[test]
    fn chain_evaluates_left_to_right() {
        let l = Arc::new(fixtures::square_l());
        let half = Arc::new(Complex::from_parts(
            2,
            vec!["a".into(), "b".into(), "c".into()],
            vec![point_int(&[0, 0]), point_int(&[4, 0]), point_int(&[0, 4])],
            vec![key(&[0, 1, 2])],
        ));
        // scale by 1/2 into the big triangle, then fold nothing: identity there
        let shrink = PLMap::new(l.clone(), half.clone(), l.points().iter().map(|p| exact::scale(p, &rat(1, 2))).collect()).unwrap();
        let id = PLMap::identity(half);
        let c = Chain::new(vec![shrink, id]).unwrap();
        assert_eq!(c.eval(&point_int(&[2, 2])).unwrap(), point_int(&[1, 1]));
        assert_eq!(c.squared_lipschitz(), rat(1, 2) * int(2));
    }

    /// Dense-grid oracle for 2D sup distance: max over a grid of |f − g|².
    fn grid_max(f: &dyn MapOracle, g: &dyn MapOracle, n: i64) -> Rational {
        let mut best = Rational::zero();
        for i in 0..=n {
            for j in 0..=n {
                let x = point(&[(2 * i, n), (2 * j, n)]);
                let d = dist2(&f.eval(&x).unwrap(), &g.eval(&x).unwrap());
                if d > best {
                    best = d;
                }
            }
        }
        best
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn shared_faces_and_commutation(a in 0i64..=6, b in 0i64..=6) {
            prop_assume!(a + b <= 6);
            let l = Arc::new(fixtures::square_l().barycentric_subdivision(DEFAULT_SIMPLEX_CAP).unwrap());
            let imgs: Vec<Point> = l.points().iter().map(|p| vec![&p[0] * &p[1], &p[0] + &p[1]]).collect();
            let m = PLMap::into_space(l.clone(), 2, imgs).unwrap();
            for s in l.maximal() {
                let w = vec![rat(6 - a - b, 6), rat(a, 6), rat(b, 6)];
                let pts = l.simplex_points(s);
                let x = combination(&pts, &w);
                let via_carrier = m.evaluate(&x).unwrap();
                prop_assert_eq!(via_carrier, m.eval_on(s, &w));
            }
        }

        #[test]
        fn sup_bound_dominates_grid(dx in -3i64..=3, dy in -3i64..=3) {
            let l = Arc::new(fixtures::square_l());
            let sd = Arc::new(l.barycentric_subdivision(DEFAULT_SIMPLEX_CAP).unwrap());
            let c = sd.vertex("b(w0.w1.w2)").unwrap();
            let mut imgs = sd.points().to_vec();
            imgs[c as usize] = add(&imgs[c as usize], &point(&[(dx, 10), (dy, 10)]));
            let g = PLMap::into_space(sd.clone(), 2, imgs).unwrap();
            let id = PLMap::identity(l.clone());
            let r = certified_sup_distance(&id, &g, &l, &SupOptions { max_depth: 2, ..SupOptions::default() }).unwrap();
            prop_assert!(r.lo2 <= r.hi2);
            prop_assert!(grid_max(&id, &g, 12) <= r.hi2);
            prop_assert!(r.exact);
            prop_assert_eq!(r.hi2, rat(dx * dx + dy * dy, 100));
        }
    }
}
