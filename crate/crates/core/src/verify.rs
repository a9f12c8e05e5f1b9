//! Result files and their brute-force recheck.
//!
//! A result records the map, the base complexes and the vertex table of `h`;
//! [`verify`] rebuilds the subdivisions from scratch and rechecks everything
//! on sample points without reading any stored certificate.

use crate::approx::{Approximation, Route, StarCertificate, SurjectiveApprox};
use crate::complex::{Complex, Key};
use crate::error::{Error, Result};
use crate::exact::{self, dist2, format_rational, sqrt_upper, Point, Rational};
use crate::io::{self, exact_from_value, exact_value, sup_to_value};
use crate::maps::{is_surjective, MapOracle, Perturbed, SimplicialMap, SQRT_BITS};
use crate::pipeline::PipelineReport;
use crate::squeeze::SqueezeSpec;
use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};
use std::path::Path;
use std::sync::Arc;

/// Inputs shared by every result kind.
pub struct ResultInputs<'a> {
    /// Self-contained map description (see [`io::LoadedMap::canonical`]).
    pub map: &'a Value,
    pub domain: &'a Complex,
    pub codomain: &'a Complex,
    pub order: &'a [String],
}

fn vertex_table(h: &SimplicialMap) -> Value {
    Value::Object(h.table().into_iter().map(|(a, b)| (a, Value::String(b))).collect())
}

fn certificate_summary(certs: &[StarCertificate]) -> Value {
    let (mut affine, mut lipschitz, mut inherited) = (0usize, 0usize, 0usize);
    let mut least: Option<&Rational> = None;
    for c in certs {
        match &c.route {
            Route::Affine => affine += 1,
            Route::Lipschitz => lipschitz += 1,
            Route::Inherited { .. } => inherited += 1,
        }
        if let Some(m) = &c.margin {
            if least.map_or(true, |l| m < l) {
                least = Some(m);
            }
        }
    }
    json!({
        "affine": affine,
        "lipschitz": lipschitz,
        "inherited": inherited,
        "least_margin": least.map(exact_value),
    })
}

fn base_value(kind: &str, inputs: &ResultInputs, kappa: usize, ell: usize, h: &SimplicialMap) -> Map<String, Value> {
    let mut o = Map::new();
    o.insert("kind".into(), json!(kind));
    o.insert("map".into(), inputs.map.clone());
    o.insert("domain".into(), io::complex_to_value(inputs.domain));
    o.insert("codomain".into(), io::complex_to_value(inputs.codomain));
    o.insert("order".into(), json!(inputs.order));
    o.insert("kappa".into(), json!(kappa));
    o.insert("ell".into(), json!(ell));
    o.insert("vertex_map".into(), vertex_table(h));
    let s = is_surjective(h);
    o.insert("surjective".into(), json!(s.surjective));
    o.insert("witnesses".into(), witness_names(h, &s.witnesses));
    o
}

fn witness_names(h: &SimplicialMap, ws: &[(Key, Key)]) -> Value {
    Value::Array(
        ws.iter()
            .map(|(t, s)| json!({"tau": h.codomain().simplex_name(t), "sigma": h.domain().simplex_name(s)}))
            .collect(),
    )
}

/// `ell` is the subdivision level of `inputs.codomain` that `a.h` maps into.
pub fn approx_result(inputs: &ResultInputs, a: &Approximation, ell: usize, sup: Option<&crate::maps::SupInterval>) -> Value {
    let mut o = base_value("approx", inputs, a.kappa, ell, &a.h);
    o.insert("certificates".into(), certificate_summary(&a.certificates));
    if let Some(s) = sup {
        o.insert("sup_f_h".into(), sup_to_value(s));
    }
    Value::Object(o)
}

pub fn surjectivize_result(inputs: &ResultInputs, r: &SurjectiveApprox) -> Value {
    let mut o = base_value("surjectivize", inputs, r.kappa, r.ell, &r.h);
    o.insert("kappa_star".into(), json!(r.kappa_star));
    o.insert("h_star_surjective".into(), json!(r.h_star_surjective));
    o.insert("certificates".into(), certificate_summary(&r.second_star));
    let l = r.h.codomain();
    o.insert(
        "separated".into(),
        Value::Array(
            r.witnesses
                .iter()
                .zip(&r.reassigned)
                .map(|(w, s)| json!({"tau": l.simplex_name(&w.tau), "sigma": r.h.domain().simplex_name(s), "x": exact::point_to_value(&w.x)}))
                .collect(),
        ),
    );
    if let Some(s) = &r.sup {
        o.insert("sup_f_h".into(), sup_to_value(s));
    }
    Value::Object(o)
}

/// SHA-256 of the canonical JSON of everything the pipeline reads.
pub fn inputs_digest(inputs: &ResultInputs, bump: Option<&Value>, eps2: &Rational, budgets: &Value) -> String {
    let v = json!({
        "map": inputs.map,
        "domain": io::complex_to_value(inputs.domain),
        "codomain": io::complex_to_value(inputs.codomain),
        "order": inputs.order,
        "bump": bump,
        "eps2": format_rational(eps2),
        "budgets": budgets,
    });
    let mut h = Sha256::new();
    h.update(io::to_json_string(&v).as_bytes());
    format!("sha256:{:x}", h.finalize())
}

pub fn report_value(r: &PipelineReport, digest: &str) -> Value {
    json!({
        "inputs_digest": digest,
        "eps2": exact_value(&r.eps2),
        "kappa": r.kappa,
        "ell": r.ell,
        "stages": {
            "f_h": sup_to_value(&r.stage1),
            "h_g": sup_to_value(&r.stage2),
            "f_pi_g": {"lo2": exact_value(&r.stage3_lo2), "hi2": exact_value(&r.final_hi2)},
        },
        "roots": r.roots.iter().map(exact_value).collect::<Vec<_>>(),
        "sqrt_bits": SQRT_BITS,
        "final_hi2": exact_value(&r.final_hi2),
        "witnesses": r.witnesses.iter().map(|(t, s)| json!({"tau": t, "sigma": s})).collect::<Vec<_>>(),
        "h_star_surjective": r.h_star_surjective,
        "squeeze_eps2": exact_value(&r.squeeze_eps2),
        "checks": r.checks.iter().map(|c| json!({"name": c.name, "passed": c.passed, "detail": c.detail})).collect::<Vec<_>>(),
        "density": {
            "resolution": r.density.resolution,
            "depth": r.density.depth,
            "cells": r.density.cells,
            "hit": r.density.hit,
            "passed": r.density.passed,
        },
    })
}

pub fn pipeline_result(inputs: &ResultInputs, out: &crate::pipeline::PipelineOutput, bump: Option<&Value>, digest: &str) -> Value {
    let mut o = base_value("pipeline", inputs, out.approx.kappa, out.approx.ell, &out.approx.h);
    o.insert("bump".into(), bump.cloned().unwrap_or(Value::Null));
    o.insert("report".into(), report_value(&out.report, digest));
    Value::Object(o)
}

// ---------------------------------------------------------------------------
// verification

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Recheck {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Verdict {
    pub kind: String,
    pub checks: Vec<Recheck>,
}

impl Verdict {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    /// Check names with their outcome, without sample counts.
    pub fn summary(&self) -> Vec<(String, bool)> {
        self.checks.iter().map(|c| (c.name.clone(), c.passed)).collect()
    }

    pub fn to_value(&self) -> Value {
        json!({
            "kind": self.kind,
            "passed": self.passed(),
            "checks": self.checks.iter().map(|c| json!({"name": c.name, "passed": c.passed, "detail": c.detail})).collect::<Vec<_>>(),
        })
    }
}

struct Verifier {
    checks: Vec<Recheck>,
}

impl Verifier {
    fn push(&mut self, name: &str, passed: bool, detail: impl Into<String>) {
        self.checks.push(Recheck { name: name.into(), passed, detail: detail.into() });
    }
}

/// Sample points of `|k|`: vertices, barycentres of the cells of the
/// iterated barycentric subdivision of each maximal simplex up to `depth`,
/// and 64 seeded random points.
pub fn sample_points(k: &Complex, depth: usize, seed: u64) -> Vec<Point> {
    let mut out: Vec<Point> = k.points().to_vec();
    let mut cells: Vec<Vec<Point>> = k.maximal().iter().map(|m| k.simplex_points(m).into_iter().cloned().collect()).collect();
    for j in 0..=depth {
        for c in &cells {
            out.push(exact::barycentre(&c.iter().collect::<Vec<_>>()));
        }
        if j < depth {
            cells = cells.iter().flat_map(|c| crate::maps::subdivide_simplex(c)).collect();
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let maximal = k.maximal();
    if !maximal.is_empty() {
        for _ in 0..64 {
            let m = &maximal[rng.gen_range(0..maximal.len())];
            let w: Vec<i64> = m.iter().map(|_| rng.gen_range(1..=1024)).collect();
            let total: i64 = w.iter().sum();
            let weights: Vec<Rational> = w.iter().map(|&a| Rational::new(a.into(), total.into())).collect();
            out.push(exact::combination(&k.simplex_points(m), &weights));
        }
    }
    out
}

/// Rechecks a result file. Errors only when the file cannot be read at all;
/// every failed recheck is reported in the verdict.
pub fn verify(result: &Value, depth: usize, seed: u64) -> Result<Verdict> {
    let kind = result.get("kind").and_then(Value::as_str).ok_or_else(|| Error::Parse("result has no kind".into()))?.to_string();
    let mut v = Verifier { checks: Vec::new() };
    let base = Path::new("");
    let map = io::map_from_value(result.get("map").ok_or_else(|| Error::Parse("result has no map".into()))?, base)?;
    let k = io::complex_from_value(&result["domain"], base)?;
    let l0 = io::complex_from_value(&result["codomain"], base)?;
    let get_n = |name: &str| result.get(name).and_then(Value::as_u64).map(|n| n as usize).ok_or_else(|| Error::Parse(format!("result has no {name}")));
    let (kappa, ell) = (get_n("kappa")?, get_n("ell")?);
    let cap = usize::MAX / 2;
    let w = Arc::new(k.sd_k(kappa, cap)?);
    let l = Arc::new(l0.sd_k(ell, cap)?);

    // vertex table
    let table = result.get("vertex_map").and_then(Value::as_object).ok_or_else(|| Error::Parse("result has no vertex_map".into()))?;
    let mut vmap = vec![u32::MAX; w.num_vertices()];
    let mut problems = Vec::new();
    for (a, b) in table {
        match (w.vertex_index(a), b.as_str().and_then(|b| l.vertex_index(b))) {
            (Some(x), Some(y)) => vmap[x as usize] = y,
            _ => problems.push(format!("{a} -> {b}")),
        }
    }
    let missing = vmap.iter().filter(|&&y| y == u32::MAX).count();
    let table_ok = problems.is_empty() && missing == 0;
    v.push(
        "vertex table",
        table_ok,
        format!("{} entries, {} unknown, {} vertices without image", table.len(), problems.len(), missing),
    );
    if !table_ok {
        return Ok(Verdict { kind, checks: v.checks });
    }

    // simpliciality, recomputed over every maximal simplex
    let h = match SimplicialMap::from_vertex_map(w.clone(), l.clone(), vmap) {
        Ok(h) => {
            v.push("simpliciality", true, format!("{} maximal simplices", w.maximal().len()));
            h
        }
        Err(e) => {
            v.push("simpliciality", false, e.to_string());
            return Ok(Verdict { kind, checks: v.checks });
        }
    };

    let second_star = kind != "approx";
    if second_star {
        let s = is_surjective(&h);
        v.push("surjectivity", s.surjective, format!("{} uncovered maximal simplices", s.uncovered.len()));
    }

    // sampled distances and star memberships
    let samples = sample_points(&k, depth, seed);
    let f = map.oracle.as_ref();
    let mut worst_fh = Rational::zero();
    let mut star_fail = Vec::new();
    for x in &samples {
        let y = f.eval(x)?;
        let d = dist2(&y, &h.evaluate(x)?);
        if d > worst_fh {
            worst_fh = d;
        }
        let Some(lc) = l.carrier_of_point(&y) else {
            star_fail.push(format!("f({}) is outside |L|", exact::format_point(x)));
            continue;
        };
        let wc = w.carrier_of_point(x).expect("samples lie in |K|");
        for &nu in &wc {
            let omega = h.vertex_image(nu);
            let ok = if second_star {
                let around = l.closed_star_vertices(omega);
                lc.iter().any(|c| around.contains(c))
            } else {
                lc.contains(&omega)
            };
            if !ok && star_fail.len() < 5 {
                star_fail.push(format!("{} at {}", w.id(nu), exact::format_point(x)));
            }
        }
    }
    let star_name = if second_star { "sampled second-star membership" } else { "sampled star membership" };
    v.push(star_name, star_fail.is_empty(), if star_fail.is_empty() { format!("{} samples", samples.len()) } else { star_fail.join("; ") });

    let stored = |path: &[&str]| -> Option<Rational> {
        let mut cur = result;
        for p in path {
            cur = cur.get(*p)?;
        }
        exact_from_value(cur).ok()
    };
    let fh_bound = if kind == "pipeline" { stored(&["report", "stages", "f_h", "hi2"]) } else { stored(&["sup_f_h", "hi2"]) };
    if let Some(b) = &fh_bound {
        v.push(
            "sampled |f - h|^2",
            worst_fh <= *b,
            format!("max {} against bound {}", format_rational(&worst_fh), format_rational(b)),
        );
    } else {
        // Without a stored bound the mesh of L bounds |f − h| for a simplicial approximation.
        let mesh = l.squared_mesh();
        v.push("sampled |f - h|^2", worst_fh < mesh, format!("max {} against mesh² {}", format_rational(&worst_fh), format_rational(&mesh)));
    }

    if kind == "pipeline" {
        verify_pipeline(result, &mut v, &h, f, &l, &samples)?;
    }
    Ok(Verdict { kind, checks: v.checks })
}

fn verify_pipeline(result: &Value, v: &mut Verifier, h: &SimplicialMap, f: &dyn MapOracle, l: &Arc<Complex>, samples: &[Point]) -> Result<()> {
    let report = &result["report"];
    let r = |path: &[&str]| -> Result<Rational> {
        let mut cur = report;
        for p in path {
            cur = cur.get(*p).ok_or_else(|| Error::Parse(format!("report has no {}", path.join("."))))?;
        }
        exact_from_value(cur)
    };
    let hg = r(&["stages", "h_g", "hi2"])?;
    let fh = r(&["stages", "f_h", "hi2"])?;
    let final_hi2 = r(&["final_hi2"])?;
    let eps2 = r(&["eps2"])?;
    let bits = report.get("sqrt_bits").and_then(Value::as_u64).unwrap_or(SQRT_BITS as u64) as u32;
    let sum = sqrt_upper(&fh, bits) + sqrt_upper(&hg, bits) + sqrt_upper(&l.squared_mesh(), bits);
    let recomputed = &sum * &sum;
    v.push(
        "final bound recomputation",
        recomputed == final_hi2 && final_hi2 < eps2,
        format!("({} + {} + mesh)² = {}, ε² = {}", format_rational(&fh), format_rational(&hg), format_rational(&recomputed), format_rational(&eps2)),
    );

    let hm: Arc<dyn MapOracle> = Arc::new(h.clone());
    let g: Arc<dyn MapOracle> = match result.get("bump") {
        Some(Value::Null) | None => hm.clone(),
        Some(b) => {
            let bump = io::map_from_value(b, Path::new(""))?.pl.ok_or_else(|| Error::Parse("bump must be a PL map".into()))?;
            Arc::new(Perturbed::new(hm.clone(), bump)?)
        }
    };
    let spec = SqueezeSpec::for_epsilon(l.clone(), &r(&["squeeze_eps2"])?)?;
    let (mut worst_hg, mut worst_f) = (Rational::zero(), Rational::zero());
    let mut outside = 0usize;
    for x in samples {
        let gx = g.eval(x)?;
        let d = dist2(&gx, &h.evaluate(x)?);
        if d > worst_hg {
            worst_hg = d;
        }
        match spec.evaluate(&gx) {
            Ok(p) => {
                let d = dist2(&p, &f.eval(x)?);
                if d > worst_f {
                    worst_f = d;
                }
            }
            Err(_) => outside += 1,
        }
    }
    v.push("sampled |h - g|^2", worst_hg <= hg, format!("max {} against bound {}", format_rational(&worst_hg), format_rational(&hg)));
    v.push(
        "sampled |f - pi g|^2",
        outside == 0 && worst_f <= final_hi2,
        format!("max {} against bound {}, {} samples with g outside |L|", format_rational(&worst_f), format_rational(&final_hi2), outside),
    );
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::approx::{simplicial_approximation, surjectivize, Budgets};
    use crate::fixtures;
    use crate::maps::{PLMap, VertexOrder};

    fn surjectivized() -> Value {
        let l = Arc::new(fixtures::square_l());
        let f = PLMap::identity(l.clone());
        let order = VertexOrder::lexicographic(&l);
        let r = surjectivize(&f, &l, &l, &order, &Budgets::default()).unwrap();
        let canon = io::map_to_value(&f);
        surjectivize_result(&ResultInputs { map: &canon, domain: &l, codomain: &l, order: &[] }, &r)
    }

    #[test]
    fn fresh_output_is_green() {
        let verdict = verify(&surjectivized(), 2, 7).unwrap();
        assert!(verdict.passed(), "{verdict:?}");
        let names: Vec<_> = verdict.checks.iter().map(|c| c.name.as_str()).collect();
        assert_eq!(names, ["vertex table", "simpliciality", "surjectivity", "sampled second-star membership", "sampled |f - h|^2"]);
    }

    #[test]
    fn lower_depth_same_verdict() {
        let r = surjectivized();
        assert_eq!(verify(&r, 2, 7).unwrap().summary(), verify(&r, 0, 7).unwrap().summary());
        assert_eq!(verify(&r, 1, 1).unwrap().summary(), verify(&r, 1, 2).unwrap().summary());
    }

    #[test]
    fn swapped_image_is_caught() {
        let mut r = surjectivized();
        let table = r["vertex_map"].as_object_mut().unwrap();
        let (a, b) = (table["w1"].clone(), table["w3"].clone());
        table.insert("w1".into(), b);
        table.insert("w3".into(), a);
        let verdict = verify(&r, 1, 7).unwrap();
        assert!(!verdict.passed());
        let failed: Vec<_> = verdict.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
        assert!(failed.contains(&"simpliciality") || failed.contains(&"surjectivity"), "{failed:?}");
    }

    #[test]
    fn unknown_vertex_is_reported() {
        let mut r = surjectivized();
        r["vertex_map"].as_object_mut().unwrap().insert("w0".into(), json!("zz"));
        let verdict = verify(&r, 0, 0).unwrap();
        assert_eq!(verdict.checks.len(), 1);
        assert!(!verdict.passed());
    }

    #[test]
    fn approximation_result() {
        let f = fixtures::patch_homeomorphism();
        let k = fixtures::big_triangle();
        let l = f.codomain().unwrap().clone();
        let order = VertexOrder::lexicographic(&l);
        let a = simplicial_approximation(&f, &k, &l, &order, 0, 4, 10_000).unwrap();
        let canon = io::map_to_value(&f);
        let r = approx_result(&ResultInputs { map: &canon, domain: &k, codomain: &l, order: &[] }, &a, 0, None);
        let verdict = verify(&r, 2, 3).unwrap();
        assert!(verdict.passed(), "{verdict:?}");
        assert_eq!(verdict.checks[2].name, "sampled star membership");
    }

    #[test]
    fn samples_are_seeded() {
        let k = fixtures::square_l();
        assert_eq!(sample_points(&k, 1, 5), sample_points(&k, 1, 5));
        assert_ne!(sample_points(&k, 1, 5), sample_points(&k, 1, 6));
        assert_eq!(sample_points(&k, 1, 5).len(), 4 + 2 * 7 + 64);
    }
}
