use plsurj::approx::Budgets;
use plsurj::complex::Complex;
use plsurj::error::{Error, ErrorKind};
use plsurj::exact::{int, point, point_int, rat, Point};
use plsurj::fixtures;
use plsurj::io;
use plsurj::maps::PLMap;
use plsurj::pipeline::{pipeline, PipelineOptions};
use plsurj::squeeze::RestoreOptions;
use plsurj::verify::{inputs_digest, pipeline_result, verify, ResultInputs};
use serde_json::json;
use std::sync::Arc;

fn options(eps2: plsurj::exact::Rational) -> PipelineOptions {
    PipelineOptions { eps2, budgets: Budgets::default(), restore: RestoreOptions { density_depth: 2, ..RestoreOptions::default() }, order: vec![] }
}

/// Zero everywhere except at the centre of the first subdivision.
fn centre_bump(k: &Complex, d: Point) -> PLMap {
    let sd = Arc::new(k.barycentric_subdivision(1000).unwrap());
    let c = sd.vertex("b(v0.v1.v2)").unwrap();
    let images = (0..sd.num_vertices() as u32).map(|v| if v == c { d.clone() } else { point_int(&[0, 0]) }).collect();
    PLMap::into_space(sd, 2, images).unwrap()
}

fn run(bump: Option<PLMap>) -> (serde_json::Value, plsurj::pipeline::PipelineOutput) {
    let k = Arc::new(fixtures::standard_simplex());
    let f = PLMap::identity(k.clone());
    let opts = options(int(2));
    let out = pipeline(&f, &k, &k, bump.clone(), &opts).unwrap();
    let canon = io::map_to_value(&f);
    let inputs = ResultInputs { map: &canon, domain: &k, codomain: &k, order: &[] };
    let bump_v = bump.as_ref().map(io::map_to_value);
    let digest = inputs_digest(&inputs, bump_v.as_ref(), &opts.eps2, &json!({}));
    (pipeline_result(&inputs, &out, bump_v.as_ref(), &digest), out)
}

#[test]
fn identity_on_the_simplex() {
    let (result, out) = run(None);
    let r = &out.report;
    assert!(r.final_hi2 < int(2));
    assert!(r.stage3_lo2 <= r.final_hi2);
    let s = &r.roots[0] + &r.roots[1] + &r.roots[2];
    assert_eq!(&s * &s, r.final_hi2);
    assert!(r.checks.iter().all(|c| c.passed));
    let verdict = verify(&result, 2, 11).unwrap();
    assert!(verdict.passed(), "{verdict:?}");
    assert!(verdict.checks.iter().any(|c| c.name == "final bound recomputation"));
    let (again, out2) = run(None);
    assert_eq!(io::to_json_string(&result), io::to_json_string(&again));
    let k = fixtures::standard_simplex();
    let svg = out.svg(&k).unwrap();
    assert_eq!(svg, out2.svg(&k).unwrap());
    assert!(svg.contains("<polygon"));
}

/// `x ↦ t(c − x)` for the centroid c: pulls every point slightly inwards.
fn contraction(k: &Complex, t: plsurj::exact::Rational) -> PLMap {
    let c = point(&[(1, 3), (1, 3)]);
    let images = k.points().iter().map(|v| plsurj::exact::scale(&plsurj::exact::sub(&c, v), &t)).collect();
    PLMap::into_space(Arc::new(k.clone()), 2, images).unwrap()
}

#[test]
fn small_bump_passes() {
    let k = fixtures::standard_simplex();
    let (result, out) = run(Some(contraction(&k, rat(1, 10000))));
    assert!(out.report.stage2.hi2 > int(0));
    let verdict = verify(&result, 1, 3).unwrap();
    assert!(verdict.passed(), "{verdict:?}");
}

#[test]
fn large_bump_is_rejected_in_stage_three() {
    let k = Arc::new(fixtures::standard_simplex());
    let f = PLMap::identity(k.clone());
    let bump = centre_bump(&k, point(&[(1, 20), (0, 1)]));
    let e = pipeline(&f, &k, &k, Some(bump), &options(int(2))).err().unwrap();
    assert!(e.stage.starts_with("stage 3"), "{e}");
    assert!(matches!(e.error, Error::HypothesisNotCertified { .. }), "{e}");
    assert_eq!(e.error.kind(), ErrorKind::Hypothesis);
}

#[test]
fn tight_budget_is_a_budget_error() {
    let k = Arc::new(fixtures::standard_simplex());
    let f = PLMap::identity(k.clone());
    let mut opts = options(rat(1, 100));
    opts.budgets.ell_max = 1;
    let e = pipeline(&f, &k, &k, None, &opts).err().unwrap();
    assert_eq!(e.error.kind(), ErrorKind::Budget, "{e}");
}
