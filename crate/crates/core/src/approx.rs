//! Simplicial approximation with certified star conditions, and the
//! construction of surjective simplicial approximations.

use crate::complex::{key, union, Complex, Key, DEFAULT_SIMPLEX_CAP};
use crate::error::{Error, Result};
use crate::exact::{self, dist2, format_point, squared_distance_point_simplex, sqrt_upper, Point, Rational};
use crate::maps::{
    certified_sup_distance, is_surjective, subdivide_simplex, MapOracle, PieceKey, SimplicialMap, SupInterval,
    SupOptions, VertexOrder, SQRT_BITS,
};
use num_traits::{One, Zero};
use std::sync::Arc;

#[derive(Clone, Debug)]
pub struct Budgets {
    /// Largest domain subdivision level tried.
    pub kappa_max: usize,
    /// Deepest subdivision sampled by the witness search.
    pub depth: usize,
    /// Largest codomain subdivision level tried.
    pub ell_max: usize,
    /// Simplex cap for every subdivision.
    pub cap: usize,
    pub sup: SupOptions,
}

impl Default for Budgets {
    fn default() -> Self {
        Budgets { kappa_max: 6, depth: 4, ell_max: 6, cap: DEFAULT_SIMPLEX_CAP, sup: SupOptions::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Route {
    /// f is affine on every simplex of the star and the image stays in one simplex of L.
    Affine,
    /// `margin = d²(f(ν), L ∖ st) − Λ²R² > 0`.
    Lipschitz,
    /// Follows from the certificate of a vertex of the carrier in a coarser complex.
    Inherited { from: String },
}

/// Certifies `f(st(ν)) ⊂ st(A, L)` for one vertex ν.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StarCertificate {
    pub vertex: String,
    /// The codomain vertex ω (or the centre of the second star).
    pub target: String,
    pub route: Route,
    /// Lower bound on the slack, for the Lipschitz route.
    pub margin: Option<Rational>,
}

/// Cached evaluations of `f` on the vertices of a domain complex.
pub struct Certifier<'a> {
    f: &'a dyn MapOracle,
    p: &'a Complex,
    l: &'a Complex,
    lam2: Rational,
    fv: Vec<Point>,
    lc: Vec<Key>,
    affine_ok: Vec<bool>,
    lipschitz_only: bool,
}

impl<'a> Certifier<'a> {
    pub fn new(f: &'a dyn MapOracle, p: &'a Complex, l: &'a Complex) -> Result<Certifier<'a>> {
        let mut fv = Vec::with_capacity(p.num_vertices());
        let mut fk: Vec<PieceKey> = Vec::with_capacity(p.num_vertices());
        let mut lc = Vec::with_capacity(p.num_vertices());
        for v in 0..p.num_vertices() as u32 {
            let (y, k) = f.eval_keyed(p.point(v)).map_err(|e| match e {
                Error::OutsideDomain(s) => Error::OracleDomainError(format!("f is undefined at {s}")),
                e => e,
            })?;
            let c = l.carrier_of_point(&y).ok_or_else(|| {
                Error::OracleDomainError(format!("f({}) = {} is outside |L|", p.id(v), format_point(&y)))
            })?;
            fv.push(y);
            fk.push(k);
            lc.push(c);
        }
        let affine_ok = p
            .maximal()
            .iter()
            .map(|m| {
                let keys: Vec<&PieceKey> = m.iter().map(|&v| &fk[v as usize]).collect();
                if !f.affine_on(&keys) {
                    return false;
                }
                let mut u = Key::new();
                for &v in m {
                    u = union(&u, &lc[v as usize]);
                }
                l.contains(&u)
            })
            .collect();
        Ok(Certifier { f, p, l, lam2: f.squared_lipschitz(), fv, lc, affine_ok, lipschitz_only: false })
    }

    /// Ignore affinity and certify through Lipschitz margins only.
    pub fn lipschitz_only(mut self) -> Self {
        self.lipschitz_only = true;
        self
    }

    pub fn image(&self, v: u32) -> &Point {
        &self.fv[v as usize]
    }

    /// Carrier in L of `f(v)`.
    pub fn image_carrier(&self, v: u32) -> &Key {
        &self.lc[v as usize]
    }

    /// Route and margin certifying `f(st(v)) ⊂ st(A, L)`, or `None`.
    pub fn check(&self, v: u32, a: &[u32]) -> Option<(Route, Option<Rational>)> {
        if !self.lc[v as usize].iter().any(|w| a.contains(w)) {
            return None;
        }
        let pv = self.p.point(v);
        let mut r2 = Rational::zero();
        let mut all_affine = true;
        for &mi in self.p.maximal_containing(v) {
            if !self.lipschitz_only && self.affine_ok[mi as usize] {
                continue;
            }
            all_affine = false;
            for &u in &self.p.maximal()[mi as usize] {
                let d = dist2(self.p.point(u), pv);
                if d > r2 {
                    r2 = d;
                }
            }
        }
        if all_affine {
            return Some((Route::Affine, None));
        }
        let need = &self.lam2 * &r2;
        let mut h = sqrt_upper(&need, SQRT_BITS) * Rational::from_integer(2.into());
        if h.is_zero() {
            h = Rational::one();
        }
        let y = &self.fv[v as usize];
        let lo: Point = y.iter().map(|c| c - &h).collect();
        let hi: Point = y.iter().map(|c| c + &h).collect();
        let mut d = &h * &h;
        for ti in self.l.maximal_in_box(&lo, &hi) {
            let t = &self.l.maximal()[ti as usize];
            let face: Vec<&Point> = t.iter().filter(|w| !a.contains(w)).map(|&w| self.l.point(w)).collect();
            if face.is_empty() {
                continue;
            }
            let dd = squared_distance_point_simplex(y, &face).expect("faces of L are nondegenerate");
            if dd < d {
                d = dd;
            }
        }
        let margin = d - need;
        (margin > Rational::zero()).then_some((Route::Lipschitz, Some(margin)))
    }

    /// Least vertex ω (in `order`) with `f(st(v)) ⊂ st(ω)`.
    pub fn classical(&self, v: u32, order: &VertexOrder) -> Option<(u32, StarCertificate)> {
        for w in order.sorted(&self.lc[v as usize]) {
            if let Some((route, margin)) = self.check(v, &[w]) {
                let cert = StarCertificate {
                    vertex: self.p.id(v).to_string(),
                    target: self.l.id(w).to_string(),
                    route,
                    margin,
                };
                return Some((w, cert));
            }
        }
        None
    }

    /// Vertex assignment for all of P, or the first vertex that could not be certified.
    pub fn assign_all(&self, order: &VertexOrder) -> std::result::Result<(Vec<u32>, Vec<StarCertificate>), u32> {
        let mut vmap = Vec::with_capacity(self.p.num_vertices());
        let mut certs = Vec::with_capacity(self.p.num_vertices());
        for v in 0..self.p.num_vertices() as u32 {
            let (w, c) = self.classical(v, order).ok_or(v)?;
            vmap.push(w);
            certs.push(c);
        }
        Ok((vmap, certs))
    }

    pub fn oracle(&self) -> &dyn MapOracle {
        self.f
    }
}

/// Single-vertex form of the star condition `f(st(ν, K)) ⊂ st(ω, L)`.
pub fn star_condition(f: &dyn MapOracle, nu: u32, omega: u32, k: &Complex, l: &Complex) -> Result<Option<StarCertificate>> {
    let c = Certifier::new(f, k, l)?;
    Ok(c.check(nu, &[omega]).map(|(route, margin)| StarCertificate {
        vertex: k.id(nu).to_string(),
        target: l.id(omega).to_string(),
        route,
        margin,
    }))
}

#[derive(Clone, Debug)]
pub struct Approximation {
    pub kappa: usize,
    pub h: SimplicialMap,
    pub certificates: Vec<StarCertificate>,
}

/// Smallest κ in `[kappa_min, kappa_max]` for which every vertex of sd^κ(K)
/// has a certified star condition; `h` is the induced simplicial map.
pub fn simplicial_approximation(
    f: &dyn MapOracle,
    k: &Complex,
    l: &Arc<Complex>,
    order: &VertexOrder,
    kappa_min: usize,
    kappa_max: usize,
    cap: usize,
) -> Result<Approximation> {
    let mut p = k.sd_k(kappa_min, cap)?;
    let mut last = String::new();
    for kappa in kappa_min..=kappa_max {
        if kappa > kappa_min {
            p = p.barycentric_subdivision(cap)?;
        }
        let cert = Certifier::new(f, &p, l)?;
        match cert.assign_all(order) {
            Ok((vmap, certificates)) => {
                let h = SimplicialMap::from_vertex_map(Arc::new(p), l.clone(), vmap).map_err(|e| {
                    Error::InternalCheckFailed(format!("vertex assignment with star certificates is not simplicial: {e}"))
                })?;
                return Ok(Approximation { kappa, h, certificates });
            }
            Err(v) => last = p.id(v).to_string(),
        }
    }
    Err(Error::BudgetExceeded(format!(
        "no certified simplicial approximation up to level {kappa_max} (vertex {last} failed)"
    )))
}

/// Least ℓ ≤ `ell_max` with `squared_mesh(sd^ℓ(L)) < eps2`, with that subdivision.
pub fn fine_codomain(l: &Complex, eps2: &Rational, ell_max: usize, cap: usize) -> Result<(usize, Complex)> {
    let mut c = l.clone();
    for ell in 0..=ell_max {
        if c.squared_mesh() < *eps2 {
            return Ok((ell, c));
        }
        if ell < ell_max {
            c = c.barycentric_subdivision(cap)?;
        }
    }
    Err(Error::BudgetExceeded(format!(
        "mesh² of sd^{ell_max}(L) is still {} ≥ {}",
        exact::format_rational(&c.squared_mesh()),
        exact::format_rational(eps2)
    )))
}

/// `h*(ν) = min h(carrier of ν)`: the descent of `h` to a refinement of its domain.
pub fn descend_map(h: &SimplicialMap, k_star: Arc<Complex>, order: &VertexOrder) -> Result<SimplicialMap> {
    let k = h.domain();
    if !(k_star.descends_from(k) || k_star.is_refinement_of(k)) {
        return Err(Error::NotARefinement(format!(
            "complex with {} vertices does not refine the domain",
            k_star.num_vertices()
        )));
    }
    let mut vmap = Vec::with_capacity(k_star.num_vertices());
    for v in 0..k_star.num_vertices() as u32 {
        let c = k_star.minimal_carrier(v, k)?;
        let w = order.min_of(c.iter().map(|&u| h.vertex_image(u))).expect("carriers are nonempty");
        vmap.push(w);
    }
    SimplicialMap::from_vertex_map(k_star, h.codomain_arc().clone(), vmap)
        .map_err(|e| Error::InternalCheckFailed(format!("descended map is not simplicial: {e}")))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Witness {
    /// Maximal simplex of L.
    pub tau: Key,
    /// Maximal simplex of K whose open cell contains `x`.
    pub sigma: Key,
    pub x: Point,
    /// `f(x)`, in the open cell of `tau`.
    pub fx: Point,
    pub depth: usize,
}

/// For each maximal τ of L, a point `x` with `f(x)` in the open cell of τ.
///
/// Samples are barycentres of the cells of `sd^j(σ)`, `j = 0..=depth`, for
/// maximal σ of K taken by decreasing dimension then key.
pub fn find_witnesses(f: &dyn MapOracle, k: &Complex, l: &Complex, depth: usize) -> Result<Vec<Witness>> {
    let mut sigmas: Vec<&Key> = k.maximal().iter().collect();
    sigmas.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));
    let mut found: Vec<Option<Witness>> = vec![None; l.maximal().len()];
    let mut remaining = found.len();
    let mut cells: Vec<Vec<Vec<Point>>> =
        sigmas.iter().map(|s| vec![k.simplex_points(s).into_iter().cloned().collect()]).collect();
    'outer: for j in 0..=depth {
        for (si, s) in sigmas.iter().enumerate() {
            if j > 0 {
                cells[si] = cells[si].iter().flat_map(|c| subdivide_simplex(c)).collect();
            }
            for c in &cells[si] {
                let x = exact::barycentre(&c.iter().collect::<Vec<_>>());
                let y = f.eval(&x)?;
                let Some((ti, coords)) = l.locate(&y) else {
                    return Err(Error::OracleDomainError(format!("f({}) is outside |L|", format_point(&x))));
                };
                if coords.iter().any(|c| c.is_zero()) {
                    continue;
                }
                let slot = &mut found[ti as usize];
                if slot.is_none() {
                    *slot = Some(Witness { tau: l.maximal()[ti as usize].clone(), sigma: (*s).clone(), x, fx: y, depth: j });
                    remaining -= 1;
                    if remaining == 0 {
                        break 'outer;
                    }
                }
            }
        }
    }
    let kdim = k.maximal().iter().map(|m| m.len()).max().unwrap_or(0);
    let mut out = Vec::with_capacity(found.len());
    for (ti, w) in found.into_iter().enumerate() {
        let t = &l.maximal()[ti];
        match w {
            Some(w) if w.sigma.len() < t.len() => {
                return Err(Error::WitnessNotFound {
                    simplex: l.simplex_name(t),
                    reason: format!(
                        "witness lies in {} of dimension {} below the target dimension {}",
                        k.simplex_name(&w.sigma),
                        w.sigma.len() - 1,
                        t.len() - 1
                    ),
                })
            }
            Some(w) => out.push(w),
            None if kdim < t.len() => {
                return Err(Error::WitnessNotFound {
                    simplex: l.simplex_name(t),
                    reason: format!("no domain simplex of dimension >= {}", t.len() - 1),
                })
            }
            None => {
                return Err(Error::WitnessNotFound {
                    simplex: l.simplex_name(t),
                    reason: format!("not hit by barycentre samples up to depth {depth}"),
                })
            }
        }
    }
    Ok(out)
}

/// Pairwise distinct maximal cells σ'_k of `p` with `x_k ∈ σ'_k`, each having
/// an interior point mapped into the open cell of τ_k; `None` if the witnesses
/// are not yet separated at this level.
pub fn separate_at(f: &dyn MapOracle, p: &Complex, l: &Complex, ws: &[Witness]) -> Result<Option<Vec<Key>>> {
    let mut used: std::collections::HashSet<Key> = std::collections::HashSet::new();
    let mut out = Vec::with_capacity(ws.len());
    for w in ws {
        let lo = w.x.clone();
        let mut cands: Vec<Key> = Vec::new();
        for mi in p.maximal_in_box(&lo, &lo) {
            let m = &p.maximal()[mi as usize];
            let Some(coords) = p.coords_in(m, &w.x) else { continue };
            let interior = coords.iter().all(|c| !c.is_zero());
            let good = interior || {
                let b = p.simplex_barycentre(m);
                let y = f.eval(&b)?;
                l.carrier_of_point(&y).is_some_and(|c| c == w.tau)
            };
            if good {
                cands.push(m.clone());
            }
        }
        cands.sort();
        match cands.into_iter().find(|c| !used.contains(c)) {
            Some(c) => {
                used.insert(c.clone());
                out.push(c);
            }
            None => return Ok(None),
        }
    }
    Ok(Some(out))
}

/// Least κ ≥ `kappa_floor` at which the witnesses separate.
pub fn separate_witnesses(
    f: &dyn MapOracle,
    k: &Complex,
    l: &Complex,
    ws: &[Witness],
    kappa_floor: usize,
    kappa_max: usize,
    cap: usize,
) -> Result<(usize, Complex, Vec<Key>)> {
    let mut p = k.sd_k(kappa_floor, cap)?;
    for kappa in kappa_floor..=kappa_max {
        if kappa > kappa_floor {
            p = p.barycentric_subdivision(cap)?;
        }
        if let Some(cells) = separate_at(f, &p, l, ws)? {
            return Ok((kappa, p, cells));
        }
    }
    Err(Error::BudgetExceeded(format!("witnesses not separated up to level {kappa_max}")))
}

#[derive(Clone, Debug)]
pub struct SurjectiveApprox {
    /// Subdivision level of the final domain `sd^kappa(K)`, equal to `kappa_star + 2`.
    pub kappa: usize,
    /// Level at which the classical approximation and the witness separation hold.
    pub kappa_star: usize,
    /// Codomain subdivision level (0 when called on L directly).
    pub ell: usize,
    pub h: SimplicialMap,
    /// The descended classical approximation before the witness cells were reassigned.
    pub h_star: SimplicialMap,
    pub h_star_surjective: bool,
    pub witnesses: Vec<Witness>,
    /// The witness cells in `sd^kappa_star(K)`.
    pub witness_cells: Vec<Key>,
    /// The reassigned simplices of the final domain, one per witness.
    pub reassigned: Vec<Key>,
    /// `f(st(ν)) ⊂ st²(h(ν))` for every vertex of the final domain.
    pub second_star: Vec<StarCertificate>,
    pub sup: Option<SupInterval>,
}

/// A surjective simplicial map `sd^(κ*+2)(K) → L` approximating `f`.
pub fn surjectivize(f: &dyn MapOracle, k: &Complex, l: &Arc<Complex>, order: &VertexOrder, b: &Budgets) -> Result<SurjectiveApprox> {
    if l.maximal().iter().all(|t| t.len() < 2) {
        return Err(Error::ZeroDimensionalL);
    }
    let ws = find_witnesses(f, k, l, b.depth)?;
    let mut p = k.clone();
    let mut found = None;
    let mut fail = String::new();
    for kappa in 0..=b.kappa_max {
        if kappa > 0 {
            p = p.barycentric_subdivision(b.cap)?;
        }
        let cert = Certifier::new(f, &p, l)?;
        let assigned = match cert.assign_all(order) {
            Ok(a) => a,
            Err(v) => {
                fail = format!("star condition fails at vertex {}", p.id(v));
                continue;
            }
        };
        match separate_at(f, &p, l, &ws)? {
            Some(cells) => {
                found = Some((kappa, assigned, cells));
                break;
            }
            None => fail = "witnesses share a cell".into(),
        }
    }
    let Some((kappa_star, (vmap0, certs0), cells)) = found else {
        return Err(Error::BudgetExceeded(format!("no level up to {} works: {fail}", b.kappa_max)));
    };
    let p = Arc::new(p);
    let h0 = SimplicialMap::from_vertex_map(p.clone(), l.clone(), vmap0)
        .map_err(|e| Error::InternalCheckFailed(format!("classical approximation is not simplicial: {e}")))?;
    let w = Arc::new(p.sd_k(2, b.cap)?);
    let h_star = descend_map(&h0, w.clone(), order)?;

    let mut vmap = h_star.vertex_map().to_vec();
    let mut reassigned = Vec::with_capacity(ws.len());
    let mut touched = vec![false; w.num_vertices()];
    for (wit, sigma) in ws.iter().zip(&cells) {
        let img0 = h0.image_of_simplex(sigma);
        if !crate::complex::is_face(&img0, &wit.tau) {
            return Err(Error::InternalCheckFailed(format!(
                "h0({}) is not a face of {}",
                p.simplex_name(sigma),
                l.simplex_name(&wit.tau)
            )));
        }
        let bk = w.vertex_at(&p.simplex_barycentre(sigma)).ok_or_else(|| {
            Error::InternalCheckFailed(format!("barycentre of {} is not a vertex", p.simplex_name(sigma)))
        })?;
        let sigma_prime = w
            .maximal_containing(bk)
            .iter()
            .map(|&mi| &w.maximal()[mi as usize])
            .filter(|m| m.len() == sigma.len())
            .min()
            .cloned()
            .ok_or_else(|| Error::InternalCheckFailed("no top cell at the barycentre".into()))?;
        let omegas = order.sorted(&wit.tau);
        let mut rest: Vec<u32> = sigma_prime.iter().copied().filter(|&v| v != bk).collect();
        rest.sort_by(|&a, &c| w.id(a).cmp(w.id(c)));
        vmap[bk as usize] = omegas[0];
        touched[bk as usize] = true;
        for (i, v) in rest.into_iter().enumerate() {
            vmap[v as usize] = omegas.get(i + 1).copied().unwrap_or(omegas[0]);
            touched[v as usize] = true;
        }
        reassigned.push(sigma_prime);
    }
    let h = SimplicialMap::from_vertex_map(w.clone(), l.clone(), vmap)
        .map_err(|e| Error::InternalCheckFailed(format!("modified map is not simplicial: {e}")))?;

    for (wit, s) in ws.iter().zip(&reassigned) {
        if h.image_of_simplex(s) != wit.tau {
            return Err(Error::InternalCheckFailed(format!("{} does not map onto {}", w.simplex_name(s), l.simplex_name(&wit.tau))));
        }
    }
    for v in 0..w.num_vertices() {
        if !touched[v] && h.vertex_image(v as u32) != h_star.vertex_image(v as u32) {
            return Err(Error::InternalCheckFailed(format!("vertex {} changed outside the witness cells", w.id(v as u32))));
        }
    }
    if !is_surjective(&h).surjective {
        return Err(Error::InternalCheckFailed("modified map is not surjective".into()));
    }

    // st(ν, W) lies in the open star of each vertex u of ν's carrier in P, and
    // h0(u) is a vertex of the closed star of h(ν), so the certificate of u carries over.
    let mut second_star = Vec::with_capacity(w.num_vertices());
    for v in 0..w.num_vertices() as u32 {
        let hv = h.vertex_image(v);
        let csv = l.closed_star_vertices(hv);
        let c = w.minimal_carrier(v, &p)?;
        let u = c
            .iter()
            .copied()
            .find(|&u| csv.contains(&h0.vertex_image(u)))
            .ok_or_else(|| Error::InternalCheckFailed(format!("second star of {} has no inherited certificate", w.id(v))))?;
        let parent = &certs0[u as usize];
        second_star.push(StarCertificate {
            vertex: w.id(v).to_string(),
            target: format!("st2({})", l.id(hv)),
            route: Route::Inherited { from: p.id(u).to_string() },
            margin: parent.margin.clone(),
        });
    }

    let h_star_surjective = is_surjective(&h_star).surjective;
    Ok(SurjectiveApprox {
        kappa: kappa_star + 2,
        kappa_star,
        ell: 0,
        h,
        h_star,
        h_star_surjective,
        witnesses: ws,
        witness_cells: cells,
        reassigned,
        second_star,
        sup: None,
    })
}

/// A surjective simplicial approximation `h: sd^κ(K) → sd^ℓ(L)` with certified `‖f − h‖² < eps2`.
///
/// ℓ starts at `start_ell` and grows until the certified bound holds, up to the
/// level where the mesh of `sd^ℓ(L)` falls below `eps2/9`.
pub fn surjective_simplicial_approximation(
    f: &dyn MapOracle,
    k: &Complex,
    l0: &Complex,
    eps2: &Rational,
    order_ids: &[String],
    start_ell: usize,
    b: &Budgets,
) -> Result<SurjectiveApprox> {
    let ninth = eps2 / Rational::from_integer(9.into());
    // Beyond the mesh level the bound is already implied; short of it, every allowed level is tried.
    let ell_cap = match fine_codomain(l0, &ninth, b.ell_max, b.cap) {
        Ok((e, _)) => e,
        Err(Error::BudgetExceeded(_)) => b.ell_max,
        Err(e) => return Err(e),
    };
    let mut l = l0.sd_k(start_ell.min(ell_cap), b.cap)?;
    let mut last = None;
    for ell in start_ell.min(ell_cap)..=ell_cap {
        if ell > start_ell.min(ell_cap) {
            l = l.barycentric_subdivision(b.cap)?;
        }
        let la = Arc::new(l.clone());
        let order = VertexOrder::from_ids(&la, order_ids).unwrap_or_else(|_| VertexOrder::lexicographic(&la));
        let mut r = surjectivize(f, k, &la, &order, b)?;
        r.ell = ell;
        let opts = SupOptions { stop_below: Some(eps2.clone()), ..b.sup.clone() };
        let sup = certified_sup_distance(f, &r.h, r.h.domain(), &opts)?;
        let ok = sup.hi2 < *eps2;
        r.sup = Some(sup);
        if ok {
            return Ok(r);
        }
        last = r.sup;
    }
    let s = last.expect("at least one level is tried");
    Err(Error::SupBoundNotMet(format!(
        "best certified ‖f − h‖² ≤ {} at ℓ = {ell_cap}, need < {}",
        exact::format_rational(&s.hi2),
        exact::format_rational(eps2)
    )))
}

/// Key of the simplex of `l` spanned by the given ids.
pub fn simplex_of(l: &Complex, ids: &[&str]) -> Result<Key> {
    let mut v = Vec::new();
    for id in ids {
        v.push(l.vertex(id)?);
    }
    Ok(key(&v))
}
