//! JSON file formats: complexes, maps, point lists, results.
//!
//! A complex is a [`RawComplex`] object, a path to one (relative to the file
//! that mentions it), or `{"fixture": name}`. A map is an object with a
//! `kind`: `pl` (the default), `identity`, `chain`, `perturbed` or `fixture`.

use crate::complex::{Complex, RawComplex};
use crate::error::{Error, Result};
use crate::exact::{self, point_to_value, rational_to_value, value_to_point, value_to_rational, Point, Rational};
use crate::fixtures;
use crate::maps::{Chain, MapOracle, PLMap, Perturbed, SupInterval};
use serde_json::{json, Map, Value};
use std::path::{Path, PathBuf};
use std::sync::Arc;

pub fn read_json(path: &Path) -> Result<Value> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

/// Pretty JSON with a trailing newline; keys come out sorted.
pub fn to_json_string(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("values always serialize");
    s.push('\n');
    s
}

pub fn write_json(path: &Path, v: &Value) -> Result<()> {
    std::fs::write(path, to_json_string(v)).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn base_dir(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}

pub fn fixture_complex(name: &str) -> Result<Complex> {
    match name {
        "standard_simplex" => Ok(fixtures::standard_simplex()),
        "square_l" => Ok(fixtures::square_l()),
        "big_triangle" => Ok(fixtures::big_triangle()),
        "fold_domain" => Ok(fixtures::fold_domain()),
        other => Err(Error::Parse(format!("unknown complex fixture {other:?}"))),
    }
}

pub fn raw_complex_from_value(v: &Value, base: &Path) -> Result<RawComplex> {
    match v {
        Value::String(p) => {
            let path = base.join(p);
            raw_complex_from_value(&read_json(&path)?, &base_dir(&path))
        }
        Value::Object(o) if o.contains_key("fixture") => {
            let name = o["fixture"].as_str().ok_or_else(|| Error::Parse("fixture name must be a string".into()))?;
            Ok(fixture_complex(name)?.to_raw())
        }
        other => serde_json::from_value(other.clone()).map_err(|e| Error::Parse(format!("complex: {e}"))),
    }
}

pub fn complex_from_value(v: &Value, base: &Path) -> Result<Complex> {
    Complex::validate(&raw_complex_from_value(v, base)?)
}

pub fn load_raw_complex(path: &Path) -> Result<RawComplex> {
    raw_complex_from_value(&read_json(path)?, &base_dir(path))
}

pub fn load_complex(path: &Path) -> Result<Complex> {
    Complex::validate(&load_raw_complex(path)?)
}

pub fn complex_to_value(k: &Complex) -> Value {
    serde_json::to_value(k.to_raw()).expect("raw complexes serialize")
}

/// A map read from disk, with a self-contained copy of its description.
#[derive(Clone)]
pub struct LoadedMap {
    pub oracle: Arc<dyn MapOracle>,
    pub domain: Arc<Complex>,
    pub codomain: Option<Arc<Complex>>,
    /// Set for single-piece PL maps (needed as bumps).
    pub pl: Option<PLMap>,
    /// Every path reference replaced by the object it names.
    pub canonical: Value,
}

pub fn load_map(path: &Path) -> Result<LoadedMap> {
    map_from_value(&read_json(path)?, &base_dir(path))
}

fn field<'a>(o: &'a Map<String, Value>, name: &str, what: &str) -> Result<&'a Value> {
    o.get(name).ok_or_else(|| Error::Parse(format!("{what}: missing field {name:?}")))
}

fn pl_loaded(m: PLMap, canonical: Value) -> LoadedMap {
    LoadedMap {
        oracle: Arc::new(m.clone()),
        domain: m.domain_arc().clone(),
        codomain: m.codomain().cloned(),
        pl: Some(m),
        canonical,
    }
}

fn pl_canonical(m: &PLMap) -> Value {
    let d = m.domain_arc();
    let images: Map<String, Value> = (0..d.num_vertices() as u32).map(|v| (d.id(v).to_string(), point_to_value(m.image(v)))).collect();
    let mut o = Map::new();
    o.insert("kind".into(), json!("pl"));
    o.insert("domain".into(), complex_to_value(d));
    if let Some(c) = m.codomain() {
        o.insert("codomain".into(), complex_to_value(c));
    } else {
        o.insert("target_dim".into(), json!(m.target_dim()));
    }
    o.insert("images".into(), Value::Object(images));
    Value::Object(o)
}

pub fn map_to_value(m: &PLMap) -> Value {
    pl_canonical(m)
}

pub fn map_from_value(v: &Value, base: &Path) -> Result<LoadedMap> {
    if let Value::String(p) = v {
        let path = base.join(p);
        return map_from_value(&read_json(&path)?, &base_dir(&path));
    }
    let o = v.as_object().ok_or_else(|| Error::Parse("a map must be an object or a path".into()))?;
    let kind = o.get("kind").and_then(Value::as_str).unwrap_or("pl");
    match kind {
        "pl" => {
            let domain = Arc::new(complex_from_value(field(o, "domain", "pl map")?, base)?);
            let imgs = field(o, "images", "pl map")?.as_object().ok_or_else(|| Error::Parse("images must map vertex ids to points".into()))?;
            let mut images: Vec<Option<Point>> = vec![None; domain.num_vertices()];
            for (id, p) in imgs {
                images[domain.vertex(id)? as usize] = Some(value_to_point(p)?);
            }
            let images: Vec<Point> = images
                .into_iter()
                .enumerate()
                .map(|(v, p)| p.ok_or_else(|| Error::Parse(format!("no image for vertex {}", domain.id(v as u32)))))
                .collect::<Result<_>>()?;
            let m = match o.get("codomain") {
                Some(c) => PLMap::new(domain, Arc::new(complex_from_value(c, base)?), images)?,
                None => {
                    let dim = match o.get("target_dim") {
                        Some(d) => d.as_u64().ok_or_else(|| Error::Parse("target_dim must be an integer".into()))? as usize,
                        None => images.first().map_or(domain.ambient_dim(), Vec::len),
                    };
                    PLMap::into_space(domain, dim, images)?
                }
            };
            let c = pl_canonical(&m);
            Ok(pl_loaded(m, c))
        }
        "identity" => {
            let k = Arc::new(complex_from_value(field(o, "complex", "identity map")?, base)?);
            let m = PLMap::identity(k.clone());
            Ok(pl_loaded(m, json!({"kind": "identity", "complex": complex_to_value(&k)})))
        }
        "fixture" => {
            let name = field(o, "name", "fixture map")?.as_str().unwrap_or_default();
            let m = match name {
                "patch_homeomorphism" => fixtures::patch_homeomorphism(),
                "pl_fold" => fixtures::pl_fold(),
                "identity_square" => PLMap::identity(Arc::new(fixtures::square_l())),
                other => return Err(Error::Parse(format!("unknown map fixture {other:?}"))),
            };
            let c = pl_canonical(&m);
            Ok(pl_loaded(m, c))
        }
        "chain" => {
            let stages = field(o, "stages", "chain")?.as_array().ok_or_else(|| Error::Parse("stages must be a list".into()))?;
            let mut pls = Vec::new();
            let mut canon = Vec::new();
            for s in stages {
                let m = map_from_value(s, base)?;
                pls.push(m.pl.ok_or_else(|| Error::Parse("chain stages must be PL maps".into()))?);
                canon.push(m.canonical);
            }
            let mut chain = Chain::new(pls)?;
            let mut c = json!({"kind": "chain", "stages": canon});
            if let Some(l2) = o.get("squared_lipschitz") {
                let l2 = value_to_rational(l2)?;
                c["squared_lipschitz"] = rational_to_value(&l2);
                chain = chain.with_squared_lipschitz(l2);
            }
            let domain = chain.stages()[0].domain_arc().clone();
            let codomain = chain.codomain().cloned();
            Ok(LoadedMap { oracle: Arc::new(chain), domain, codomain, pl: None, canonical: c })
        }
        "perturbed" => {
            let base_map = map_from_value(field(o, "base", "perturbed map")?, base)?;
            let bump = map_from_value(field(o, "bump", "perturbed map")?, base)?;
            let bump_pl = bump.pl.ok_or_else(|| Error::Parse("a bump must be a PL map".into()))?;
            let p = Perturbed::new(base_map.oracle.clone(), bump_pl)?;
            Ok(LoadedMap {
                oracle: Arc::new(p),
                domain: base_map.domain,
                codomain: base_map.codomain,
                pl: None,
                canonical: json!({"kind": "perturbed", "base": base_map.canonical, "bump": bump.canonical}),
            })
        }
        other => Err(Error::Parse(format!("unknown map kind {other:?}"))),
    }
}

/// `{"points": [...]}` or a bare list.
pub fn points_from_value(v: &Value) -> Result<Vec<Point>> {
    let list = match v {
        Value::Array(a) => a,
        Value::Object(o) => o.get("points").and_then(Value::as_array).ok_or_else(|| Error::Parse("expected a \"points\" list".into()))?,
        _ => return Err(Error::Parse("expected a list of points".into())),
    };
    list.iter().map(value_to_point).collect()
}

pub fn load_points(path: &Path) -> Result<Vec<Point>> {
    points_from_value(&read_json(path)?)
}

pub fn points_to_value(pts: &[Point]) -> Value {
    Value::Array(pts.iter().map(|p| point_to_value(p)).collect())
}

/// An exact rational together with a decimal rendering for reading.
pub fn exact_value(r: &Rational) -> Value {
    json!({"exact": exact::format_rational(r), "decimal": exact::decimal(r)})
}

pub fn exact_from_value(v: &Value) -> Result<Rational> {
    match v {
        Value::Object(o) => value_to_rational(field(o, "exact", "number")?),
        other => value_to_rational(other),
    }
}

pub fn sup_to_value(s: &SupInterval) -> Value {
    json!({
        "lo2": exact_value(&s.lo2),
        "hi2": exact_value(&s.hi2),
        "exact": s.exact,
        "converged": s.converged,
        "depth": s.depth,
        "cells": s.cells,
    })
}
