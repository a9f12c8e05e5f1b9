use clap::{Args, Parser, Subcommand};
use plsurj::approx::{simplicial_approximation, surjective_simplicial_approximation, surjectivize, Budgets};
use plsurj::complex::{Complex, DEFAULT_SIMPLEX_CAP};
use plsurj::error::{Error, ErrorKind};
use plsurj::exact::{self, parse_rational, point_to_value, Rational};
use plsurj::io::{self, exact_value, sup_to_value, LoadedMap};
use plsurj::maps::{certified_sup_distance, SupOptions, VertexOrder};
use plsurj::pipeline::{pipeline, PipelineOptions};
use plsurj::render::{render_svg, RenderSpec};
use plsurj::squeeze::{epsilon_budget, RestoreOptions, SqueezeSpec};
use plsurj::verify::{self, ResultInputs};
use serde_json::{json, Value};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

/// Exact surjective simplicial approximation and ε-squeezing of PL maps.
///
/// Exit codes: 0 success, 1 I/O or internal error, 2 budget exhausted,
/// 3 hypothesis or validation failure.
#[derive(Parser)]
#[command(name = "plsurj", version)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Largest complex (in simplices) any subdivision may produce.
    #[arg(long, global = true, default_value_t = DEFAULT_SIMPLEX_CAP)]
    budget_simplices: usize,
    /// Sampling / search depth (witness search, sup refinement, verification samples).
    #[arg(long, global = true)]
    depth: Option<usize>,
    /// Seed for sampling patterns.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output file; standard output when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct Accuracy {
    /// Target accuracy ε (a rational such as 1/2); squared internally.
    #[arg(long)]
    eps: Option<String>,
    /// Target accuracy given as ε².
    #[arg(long, conflicts_with = "eps")]
    eps2: Option<String>,
}

impl Accuracy {
    fn squared(&self) -> Result<Option<Rational>, Error> {
        match (&self.eps, &self.eps2) {
            (Some(e), _) => {
                let e = parse_rational(e)?;
                Ok(Some(&e * &e))
            }
            (_, Some(e2)) => Ok(Some(parse_rational(e2)?)),
            _ => Ok(None),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Check a complex file and report every violated invariant.
    Validate {
        #[arg(long)]
        complex: PathBuf,
        /// Require every face to be listed, not just maximal simplices.
        #[arg(long)]
        strict: bool,
    },
    /// Iterated barycentric subdivision.
    Sd {
        #[arg(long)]
        complex: PathBuf,
        #[arg(short, default_value_t = 1)]
        k: usize,
    },
    /// Open star (or second star) of a vertex.
    Stars {
        #[arg(long)]
        complex: PathBuf,
        #[arg(long)]
        vertex: String,
        #[arg(long)]
        second: bool,
    },
    /// Classical simplicial approximation of a map.
    Approx {
        #[arg(long)]
        map: PathBuf,
        /// Domain complex, replacing the one named in the map file.
        #[arg(long)]
        domain: Option<PathBuf>,
        /// Codomain complex, when the map file does not name one.
        #[arg(long)]
        codomain: Option<PathBuf>,
        /// Codomain vertex order, least first, comma separated.
        #[arg(long)]
        order: Option<String>,
        #[arg(long, default_value_t = 6)]
        kappa_max: usize,
        /// With an accuracy, the codomain is subdivided until ‖f − h‖ < ε.
        #[command(flatten)]
        accuracy: Accuracy,
    },
    /// Surjective simplicial approximation.
    Surjectivize {
        #[arg(long)]
        map: PathBuf,
        #[arg(long)]
        domain: Option<PathBuf>,
        #[arg(long)]
        codomain: Option<PathBuf>,
        #[arg(long)]
        order: Option<String>,
        /// With an accuracy, the codomain is subdivided until ‖f − h‖ < ε.
        #[command(flatten)]
        accuracy: Accuracy,
    },
    /// The squeezing map of a complex, applied to points.
    Squeeze {
        #[arg(long)]
        complex: PathBuf,
        #[command(flatten)]
        accuracy: Accuracy,
        /// One homothety ratio for every simplex instead of ε/δ.
        #[arg(long)]
        ratio: Option<String>,
        /// Points file: {"points": [...]} or a bare list.
        #[arg(long)]
        points: Option<PathBuf>,
    },
    /// The ε budget of a complex.
    Budget {
        #[arg(long)]
        complex: PathBuf,
    },
    /// Certified interval for the squared sup distance of two maps.
    Supnorm {
        /// The two maps, `--map a.json --map b.json`.
        #[arg(long = "map", required = true, num_args = 1, number_of_values = 1)]
        maps: Vec<PathBuf>,
        /// Complex to take the supremum over; the first map's domain by default.
        #[arg(long)]
        domain: Option<PathBuf>,
    },
    /// Surjective approximation, perturbation and squeeze, with a report.
    Pipeline {
        #[arg(long)]
        map: PathBuf,
        #[arg(long)]
        domain: Option<PathBuf>,
        #[arg(long)]
        codomain: Option<PathBuf>,
        #[arg(long)]
        order: Option<String>,
        #[command(flatten)]
        accuracy: Accuracy,
        /// PL displacement added to h before squeezing.
        #[arg(long)]
        bump: Option<PathBuf>,
        /// Also write a drawing of the result here.
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Recheck a result file by brute force.
    Verify {
        #[arg(long)]
        result: PathBuf,
    },
    /// Draw a planar complex.
    RenderSvg {
        #[arg(long)]
        complex: PathBuf,
        /// Draw arrows from the map's domain vertices to their images.
        #[arg(long)]
        map: Option<PathBuf>,
        /// Coordinates to draw for complexes in dimension above 2, e.g. 0,2.
        #[arg(long)]
        axes: Option<String>,
        #[arg(long)]
        no_labels: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(Failure { stage, error }) => {
            match stage {
                Some(s) => eprintln!("error: {s}: {error}"),
                None => eprintln!("error: {error}"),
            }
            ExitCode::from(match error.kind() {
                ErrorKind::Budget => 2,
                ErrorKind::Hypothesis => 3,
                ErrorKind::Other => 1,
            })
        }
    }
}

struct Failure {
    stage: Option<&'static str>,
    error: Error,
}

impl From<Error> for Failure {
    fn from(error: Error) -> Self {
        Failure { stage: None, error }
    }
}

type Res<T> = Result<T, Failure>;

fn emit(g: &Global, text: &str) -> Res<()> {
    match &g.out {
        Some(p) => std::fs::write(p, text).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?,
        None => print!("{text}"),
    }
    Ok(())
}

fn emit_json(g: &Global, v: &Value) -> Res<()> {
    emit(g, &io::to_json_string(v))
}

fn budgets(g: &Global) -> Budgets {
    let mut b = Budgets { cap: g.budget_simplices, ..Budgets::default() };
    if let Some(d) = g.depth {
        b.depth = d;
        b.sup.max_depth = d.max(1);
    }
    b
}

fn order_ids(s: &Option<String>) -> Vec<String> {
    s.as_deref().map(|s| s.split(',').map(|x| x.trim().to_string()).filter(|x| !x.is_empty()).collect()).unwrap_or_default()
}

fn load_map(map: &Path, domain: &Option<PathBuf>) -> Res<LoadedMap> {
    let Some(d) = domain else { return Ok(io::load_map(map)?) };
    let mut v = io::read_json(map)?;
    let d = std::fs::canonicalize(d).map_err(|e| Error::Io(format!("{}: {e}", d.display())))?;
    v.as_object_mut().ok_or_else(|| Error::Parse("a map file holds a JSON object".into()))?.insert("domain".into(), json!(d.to_string_lossy()));
    let base = map.parent().unwrap_or(Path::new("."));
    Ok(io::map_from_value(&v, base)?)
}

fn map_and_codomain(map: &Path, domain: &Option<PathBuf>, codomain: &Option<PathBuf>) -> Res<(LoadedMap, Arc<Complex>)> {
    let m = load_map(map, domain)?;
    let l = match codomain {
        Some(p) => Arc::new(io::load_complex(p)?),
        None => m.codomain.clone().ok_or_else(|| Error::Parse("the map has no codomain; pass --codomain".into()))?,
    };
    Ok((m, l))
}

fn run(cli: Cli) -> Res<ExitCode> {
    let g = &cli.global;
    match &cli.command {
        Command::Validate { complex, strict } => {
            let raw = io::load_raw_complex(complex)?;
            let (c, errs) = Complex::validation_report(&raw, *strict);
            let mut v = json!({
                "valid": errs.is_empty(),
                "errors": errs.iter().map(|e| e.to_string()).collect::<Vec<_>>(),
            });
            if let Some(c) = &c {
                v["dim"] = json!(c.dim());
                v["vertices"] = json!(c.num_vertices());
                v["simplices"] = json!(c.count());
                v["maximal"] = json!(c.maximal().len());
            }
            emit_json(g, &v)?;
            Ok(ExitCode::from(if errs.is_empty() { 0 } else { 3 }))
        }
        Command::Sd { complex, k } => {
            let c = io::load_complex(complex)?;
            let s = c.sd_k(*k, g.budget_simplices)?;
            emit_json(g, &io::complex_to_value(&s))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Stars { complex, vertex, second } => {
            let c = io::load_complex(complex)?;
            let v = c.vertex(vertex)?;
            let star = if *second { c.second_star(v) } else { c.open_star(v) };
            let out = json!({
                "center": star.center,
                "cells": star.cells.iter().map(|k| c.simplex_name(k)).collect::<Vec<_>>(),
                "closed_star_vertices": c.closed_star_vertices(v).iter().map(|&u| c.id(u)).collect::<Vec<_>>(),
            });
            emit_json(g, &out)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Approx { map, domain, codomain, order, kappa_max, accuracy } => {
            let (m, l0) = map_and_codomain(map, domain, codomain)?;
            let ids = order_ids(order);
            let b = budgets(g);
            let eps2 = accuracy.squared()?;
            let mut l = l0.clone();
            let mut ell = 0;
            loop {
                let ord = VertexOrder::from_ids(&l, &ids).or_else(|e| if ell > 0 { Ok(VertexOrder::lexicographic(&l)) } else { Err(e) })?;
                let a = simplicial_approximation(m.oracle.as_ref(), &m.domain, &l, &ord, 0, *kappa_max, g.budget_simplices)?;
                let opts = SupOptions { stop_below: eps2.clone(), ..b.sup.clone() };
                let sup = certified_sup_distance(m.oracle.as_ref(), &a.h, a.h.domain(), &opts)?;
                let done = match &eps2 {
                    None => true,
                    Some(e2) => sup.hi2 < *e2,
                };
                if done {
                    let inputs = ResultInputs { map: &m.canonical, domain: &m.domain, codomain: &l0, order: &ids };
                    emit_json(g, &verify::approx_result(&inputs, &a, ell, Some(&sup)))?;
                    return Ok(ExitCode::SUCCESS);
                }
                if ell == b.ell_max {
                    return Err(Error::BudgetExceeded(format!("certified sup bound {} not below ε² at codomain level {ell}", exact::decimal(&sup.hi2))).into());
                }
                ell += 1;
                l = Arc::new(l.barycentric_subdivision(b.cap)?);
            }
        }
        Command::Surjectivize { map, domain, codomain, order, accuracy } => {
            let (m, l) = map_and_codomain(map, domain, codomain)?;
            let ids = order_ids(order);
            let b = budgets(g);
            let r = match accuracy.squared()? {
                Some(eps2) => surjective_simplicial_approximation(m.oracle.as_ref(), &m.domain, &l, &eps2, &ids, 0, &b)?,
                None => {
                    let ord = VertexOrder::from_ids(&l, &ids)?;
                    let mut r = surjectivize(m.oracle.as_ref(), &m.domain, &l, &ord, &b)?;
                    r.sup = Some(certified_sup_distance(m.oracle.as_ref(), &r.h, r.h.domain(), &b.sup)?);
                    r
                }
            };
            let inputs = ResultInputs { map: &m.canonical, domain: &m.domain, codomain: &l, order: &ids };
            emit_json(g, &verify::surjectivize_result(&inputs, &r))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Squeeze { complex, accuracy, ratio, points } => {
            let l = Arc::new(io::load_complex(complex)?);
            let spec = match (ratio, accuracy.squared()?) {
                (Some(r), _) => SqueezeSpec::with_ratio(l.clone(), &parse_rational(r)?)?,
                (None, Some(e2)) => SqueezeSpec::for_epsilon(l.clone(), &e2)?,
                (None, None) => SqueezeSpec::for_epsilon(l.clone(), &epsilon_budget(&l)?.recommended)?,
            };
            let taus: Vec<Value> = spec
                .taus()
                .map(|t| json!({"tau": l.simplex_name(&t.tau), "ratio": exact_value(&t.ratio), "barycentre": point_to_value(&t.barycentre)}))
                .collect();
            let mut out = json!({"taus": taus});
            if let Some(p) = points {
                let pts = io::load_points(p)?;
                let imgs = pts.iter().map(|x| spec.evaluate(x)).collect::<Result<Vec<_>, _>>()?;
                out["images"] = io::points_to_value(&imgs);
            }
            emit_json(g, &out)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Budget { complex } => {
            let l = io::load_complex(complex)?;
            let b = epsilon_budget(&l)?;
            let out = json!({
                "per_tau": b.per_tau.iter().map(|t| json!({
                    "tau": t.tau,
                    "squared_delta": exact_value(&t.squared_delta),
                    "squared_diam": exact_value(&t.squared_diam),
                    "squared_eps_star": exact_value(&t.squared_eps_star),
                })).collect::<Vec<_>>(),
                "squared_eps1": b.squared_eps1.as_ref().map(exact_value),
                "squared_eps3": exact_value(&b.squared_eps3),
                "squared_mesh": exact_value(&b.squared_mesh_cap),
                "recommended": exact_value(&b.recommended),
                "binding": b.binding,
            });
            emit_json(g, &out)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Supnorm { maps, domain } => {
            let [a, b] = maps.as_slice() else {
                return Err(Error::Parse("supnorm takes exactly two --map arguments".into()).into());
            };
            let ma = io::load_map(a)?;
            let mb = io::load_map(b)?;
            let d = match domain {
                Some(p) => Arc::new(io::load_complex(p)?),
                None => ma.domain.clone(),
            };
            let mut opts = SupOptions::default();
            if let Some(depth) = g.depth {
                opts.max_depth = depth;
            }
            let s = certified_sup_distance(ma.oracle.as_ref(), mb.oracle.as_ref(), &d, &opts)?;
            emit_json(g, &sup_to_value(&s))?;
            Ok(ExitCode::from(if s.converged { 0 } else { 2 }))
        }
        Command::Pipeline { map, domain, codomain, order, accuracy, bump, svg } => {
            let (m, l) = map_and_codomain(map, domain, codomain)?;
            let eps2 = accuracy.squared()?.ok_or_else(|| Error::Parse("pipeline needs --eps or --eps2".into()))?;
            let ids = order_ids(order);
            let bump = match bump {
                Some(p) => Some(io::load_map(p)?),
                None => None,
            };
            let bump_pl = match &bump {
                Some(b) => Some(b.pl.clone().ok_or_else(|| Error::Parse("the bump must be a PL map".into()))?),
                None => None,
            };
            let b = budgets(g);
            let mut restore = RestoreOptions::default();
            if let Some(d) = g.depth {
                restore.density_depth = d;
            }
            let budget_v = json!({
                "cap": b.cap, "kappa_max": b.kappa_max, "depth": b.depth, "ell_max": b.ell_max,
                "density_depth": restore.density_depth, "density_resolution": restore.density_resolution,
            });
            let opts = PipelineOptions { eps2: eps2.clone(), budgets: b, restore, order: ids.clone() };
            let t = Instant::now();
            let out = pipeline(m.oracle.as_ref(), &m.domain, &l, bump_pl, &opts).map_err(|e| Failure { stage: Some(e.stage), error: e.error })?;
            eprintln!("pipeline: ℓ={} κ={} in {:.2}s", out.report.ell, out.report.kappa, t.elapsed().as_secs_f64());
            let inputs = ResultInputs { map: &m.canonical, domain: &m.domain, codomain: &l, order: &ids };
            let bump_v = bump.as_ref().map(|b| b.canonical.clone());
            let digest = verify::inputs_digest(&inputs, bump_v.as_ref(), &eps2, &budget_v);
            emit_json(g, &verify::pipeline_result(&inputs, &out, bump_v.as_ref(), &digest))?;
            if let Some(p) = svg {
                let text = out.svg(&m.domain)?;
                std::fs::write(p, text).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?;
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify { result } => {
            let v = io::read_json(result)?;
            let verdict = verify::verify(&v, g.depth.unwrap_or(3), g.seed)?;
            emit_json(g, &verdict.to_value())?;
            Ok(ExitCode::from(if verdict.passed() { 0 } else { 3 }))
        }
        Command::RenderSvg { complex, map, axes, no_labels } => {
            let c = io::load_complex(complex)?;
            let mut spec = RenderSpec::new(&c);
            spec.labels = !no_labels;
            if let Some(a) = axes {
                let parts: Vec<usize> = a.split(',').map(|s| s.trim().parse::<usize>()).collect::<Result<_, _>>().map_err(|e| Error::Parse(format!("--axes: {e}")))?;
                if parts.len() != 2 {
                    return Err(Error::Parse("--axes takes two coordinates".into()).into());
                }
                spec.axes = Some((parts[0], parts[1]));
            }
            if let Some(p) = map {
                let m = io::load_map(p)?;
                for v in 0..m.domain.num_vertices() as u32 {
                    let x = m.domain.point(v).clone();
                    let y = m.oracle.eval(&x)?;
                    if y != x {
                        spec.arrows.push((x, y));
                    }
                }
            }
            emit(g, &render_svg(&spec)?)?;
            Ok(ExitCode::SUCCESS)
        }
    }
}
