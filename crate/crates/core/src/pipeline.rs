//! End-to-end: surjective simplicial approximation, perturbation, squeeze.

use crate::approx::{surjective_simplicial_approximation, Budgets, SurjectiveApprox};
use crate::complex::Complex;
use crate::error::Error;
use crate::exact::{dist2, format_rational, sqrt_upper, Rational};
use crate::maps::{MapOracle, PLMap, Perturbed, SupInterval, SQRT_BITS};
use crate::render::{render_svg, RenderSpec, PALETTE};
use crate::squeeze::{restore_surjectivity, Check, Density, RestoreOptions, Squeezed};
use std::sync::Arc;

#[derive(Clone, Debug)]
pub struct PipelineOptions {
    /// Squared target accuracy ε².
    pub eps2: Rational,
    pub budgets: Budgets,
    pub restore: RestoreOptions,
    /// Codomain vertex order, least first; unlisted vertices follow lexicographically.
    pub order: Vec<String>,
}

/// Error with the stage that raised it.
#[derive(Debug)]
pub struct StageError {
    pub stage: &'static str,
    pub error: Error,
}

impl std::fmt::Display for StageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.stage, self.error)
    }
}

impl std::error::Error for StageError {}

#[derive(Clone, Debug)]
pub struct PipelineReport {
    pub eps2: Rational,
    pub kappa: usize,
    pub ell: usize,
    /// ‖f − h‖².
    pub stage1: SupInterval,
    /// ‖h − g‖².
    pub stage2: SupInterval,
    /// Largest sampled ‖f − π∘g‖² over the vertices of h's domain.
    pub stage3_lo2: Rational,
    /// Upper roots (rounded up) of the three terms: ‖f − h‖, ‖h − g‖, mesh of the codomain.
    pub roots: [Rational; 3],
    /// `(Σ roots)²`, the certified bound on ‖f − π∘g‖².
    pub final_hi2: Rational,
    pub witnesses: Vec<(String, String)>,
    pub h_star_surjective: bool,
    pub checks: Vec<Check>,
    pub density: Density,
    /// The squared ε the squeezing map was built for.
    pub squeeze_eps2: Rational,
}

pub struct PipelineOutput {
    pub report: PipelineReport,
    pub approx: SurjectiveApprox,
    pub squeezed: Squeezed,
}

/// `f ≈ π ∘ g` with `g = h + bump` (or `g = h`), `‖f − π∘g‖² < ε²`, and π∘g surjective.
///
/// ℓ is raised until the combined bound closes.
pub fn pipeline(
    f: &dyn MapOracle,
    k: &Complex,
    l0: &Complex,
    bump: Option<PLMap>,
    opts: &PipelineOptions,
) -> std::result::Result<PipelineOutput, StageError> {
    let stage = |s: &'static str| move |error: Error| StageError { stage: s, error };
    let mut start = 0;
    loop {
        let approx = surjective_simplicial_approximation(f, k, l0, &(&opts.eps2 / Rational::from_integer(9.into())), &opts.order, start, &opts.budgets)
            .map_err(stage("stage 1 (surjective approximation)"))?;
        let stage1 = approx.sup.clone().expect("set by the approximation");
        let mesh2 = approx.h.codomain().squared_mesh();
        // ‖h − g‖ ≥ 0, so a level whose other two terms already miss ε is skipped without squeezing.
        let r1 = sqrt_upper(&stage1.hi2, SQRT_BITS);
        let r3 = sqrt_upper(&mesh2, SQRT_BITS);
        let partial = &r1 + &r3;
        if &partial * &partial >= opts.eps2 && approx.ell < opts.budgets.ell_max {
            start = approx.ell + 1;
            continue;
        }
        let h = Arc::new(approx.h.clone());
        let g: Arc<dyn MapOracle> = match &bump {
            Some(b) => Arc::new(Perturbed::new(h.clone(), b.clone()).map_err(stage("stage 2 (perturbation)"))?),
            None => h.clone(),
        };
        let mut ropts = opts.restore.clone();
        ropts.sample_base.get_or_insert_with(|| Arc::new(k.clone()));
        let (squeezed, cert) = restore_surjectivity(&h, g, &ropts).map_err(stage("stage 3 (squeeze)"))?;
        let roots = [r1, sqrt_upper(&cert.sup_hg.hi2, SQRT_BITS), r3];
        let s = &roots[0] + &roots[1] + &roots[2];
        let final_hi2 = &s * &s;
        if final_hi2 >= opts.eps2 {
            if approx.ell >= opts.budgets.ell_max {
                return Err(StageError {
                    stage: "stage 3 (squeeze)",
                    error: Error::SupBoundNotMet(format!(
                        "combined bound {} is not below ε² = {} at ℓ = {}",
                        format_rational(&final_hi2),
                        format_rational(&opts.eps2),
                        approx.ell
                    )),
                });
            }
            start = approx.ell + 1;
            continue;
        }
        let w = approx.h.domain();
        let mut lo3 = Rational::from_integer(0.into());
        for v in 0..w.num_vertices() as u32 {
            let x = w.point(v);
            let a = f.eval(x).map_err(stage("stage 3 (squeeze)"))?;
            let b = squeezed.evaluate(x).map_err(stage("stage 3 (squeeze)"))?;
            let d = dist2(&a, &b);
            if d > lo3 {
                lo3 = d;
            }
        }
        if lo3 > final_hi2 {
            return Err(StageError {
                stage: "stage 3 (squeeze)",
                error: Error::InternalCheckFailed("sampled distance exceeds the certified bound".into()),
            });
        }
        let l = approx.h.codomain();
        let witnesses = approx
            .witnesses
            .iter()
            .zip(&approx.reassigned)
            .map(|(wi, s)| (l.simplex_name(&wi.tau), w.simplex_name(s)))
            .collect();
        let report = PipelineReport {
            eps2: opts.eps2.clone(),
            kappa: approx.kappa,
            ell: approx.ell,
            stage1,
            stage2: cert.sup_hg.clone(),
            stage3_lo2: lo3,
            roots,
            final_hi2,
            witnesses,
            h_star_surjective: approx.h_star_surjective,
            checks: cert.checks.clone(),
            density: cert.density.clone(),
            squeeze_eps2: cert.eps2.clone(),
        };
        return Ok(PipelineOutput { report, approx, squeezed });
    }
}

impl PipelineOutput {
    /// The codomain with the witness simplices filled, and arrows from the
    /// barycentres of the domain's simplices to their images under π∘g.
    pub fn svg(&self, k: &Complex) -> crate::error::Result<String> {
        let l = self.approx.h.codomain();
        let mut spec = RenderSpec::new(l);
        spec.labels = l.num_vertices() <= 40;
        spec.fills = vec![None; l.maximal().len()];
        for (i, w) in self.approx.witnesses.iter().enumerate() {
            if let Some(j) = l.maximal().iter().position(|m| *m == w.tau) {
                spec.fills[j] = Some(PALETTE[i % PALETTE.len()].to_string());
            }
        }
        for s in k.all_simplices() {
            let x = k.simplex_barycentre(s);
            let y = self.squeezed.evaluate(&x)?;
            if y != x {
                spec.arrows.push((x, y));
            }
        }
        render_svg(&spec)
    }
}
