//! Residual estimator, Dörfler marking, refinement with level-balance closure
//! and the solve–estimate–mark–refine loop.

use std::collections::BTreeSet;
use std::time::Instant;

use rayon::prelude::*;

use crate::assembly::{apply_dirichlet, assemble_global, compute_errors, for_each_quad_point, Coefficient, ErrorNorms};
use crate::basis::{nullspace_basis, verify_basis, BasisReport, GlobalBasis};
use crate::coupling::build_constraints;
use crate::error::{Error, Result};
use crate::field::eval_field;
use crate::geometry::{validate_assumptions, AssumptionReport, Edge, MultiPatch};
use crate::problems::Problem;
use crate::quadrature::QuadRule;
use crate::solver::{solve_spd, SolveReport};
use crate::splines::DyadicRational as D;

#[derive(Clone, Debug, PartialEq)]
pub struct EstimateResult {
    pub eta_sq: Vec<f64>,
    pub interior: Vec<f64>,
    pub jump: Vec<f64>,
    pub total: f64,
}

fn diffusion_on(nu: &Coefficient, mp: &MultiPatch, patch: usize) -> Result<f64> {
    nu.root_constant(mp.patches[patch].root)
        .ok_or_else(|| Error::Precondition("the estimator needs a diffusion constant on every root".into()))
}

/// `∫_e (n·(ν_a ∇u_a − ν_b ∇u_b))² ds` over the merged knot partition of both sides.
fn jump_integral(mp: &MultiPatch, u_pw: &[f64], nu: &Coefficient, e: &Edge) -> Result<f64> {
    let (na, nb) = (diffusion_on(nu, mp, e.a.patch)?, diffusion_on(nu, mp, e.b.patch)?);
    let mut cuts: Vec<D> = vec![D::ZERO, D::ONE];
    for (side, to_tau) in [(&e.a, 0), (&e.b, 1)] {
        let space = &mp.patches[side.patch].spaces[side.side.tangent_axis()];
        for k in space.knot_vector().breakpoints() {
            if k > side.interval[0] && k < side.interval[1] {
                let tau = if to_tau == 0 { e.tau_from_a(k) } else { e.tau_from_b(k) };
                cuts.push(tau.ok_or_else(|| Error::Structural(format!("edge {} has a non-dyadic side", e.id)))?);
            }
        }
    }
    cuts.sort();
    cuts.dedup();
    let deg = mp.patches[e.a.patch].spaces[0].degree().max(mp.patches[e.b.patch].spaces[0].degree());
    let quad = QuadRule::gauss_legendre(deg + 2);
    let axis = e.a.side.tangent_axis();
    let scale = e.a.length().to_f64();
    let mut total = 0.0;
    for w in cuts.windows(2) {
        for (tau, wq) in quad.on(w[0].to_f64(), w[1].to_f64()) {
            let ta = e.a.side.point(e.param_a(tau));
            let tb = e.b.side.point(e.param_b(tau));
            let map = mp.eval_map(e.a.patch, ta);
            let tangent = [map.jacobian[0][axis] * scale, map.jacobian[1][axis] * scale];
            let len = tangent[0].hypot(tangent[1]);
            let n = [tangent[1] / len, -tangent[0] / len];
            let fa = eval_field(mp, u_pw, e.a.patch, ta, false)?;
            let fb = eval_field(mp, u_pw, e.b.patch, tb, false)?;
            let j = n[0] * (na * fa.grad[0] - nb * fb.grad[0]) + n[1] * (na * fa.grad[1] - nb * fb.grad[1]);
            total += wq * len * j * j;
        }
    }
    Ok(total)
}

/// `η_k² = h_k² ‖f + ν Δu_h‖²_{Ω_k} + Σ_e h_k/2 ‖[ν ∂_n u_h]‖²_e`.
pub fn estimate(mp: &MultiPatch, u_pw: &[f64], nu: &Coefficient, f: &Coefficient) -> Result<EstimateResult> {
    let off = mp.dof_offsets();
    let h: Vec<f64> = (0..mp.num_patches()).map(|k| mp.physical_grid_size(k)).collect();
    let interior: Vec<f64> = (0..mp.num_patches())
        .into_par_iter()
        .map(|k| {
            let p = &mp.patches[k];
            let nu_k = diffusion_on(nu, mp, k)?;
            let quad = QuadRule::gauss_legendre(p.spaces[0].degree().max(p.spaces[1].degree()) + 2);
            let local = &u_pw[off[k]..off[k + 1]];
            let mut s = 0.0;
            for_each_quad_point(mp, k, &quad, true, |pb, w| {
                let fv = pb.combine(local);
                let r = f.value(p.root, pb.x) + nu_k * fv.laplacian;
                s += w * r * r;
                Ok(())
            })?;
            Ok(h[k] * h[k] * s)
        })
        .collect::<Result<_>>()?;
    let jumps: Vec<f64> =
        mp.topology.edges.par_iter().map(|e| jump_integral(mp, u_pw, nu, e)).collect::<Result<_>>()?;
    let mut jump = vec![0.0; mp.num_patches()];
    for (e, j) in mp.topology.edges.iter().zip(&jumps) {
        jump[e.a.patch] += 0.5 * h[e.a.patch] * j;
        jump[e.b.patch] += 0.5 * h[e.b.patch] * j;
    }
    let eta_sq: Vec<f64> = interior.iter().zip(&jump).map(|(a, b)| a + b).collect();
    let total = eta_sq.iter().sum::<f64>().sqrt();
    Ok(EstimateResult { eta_sq, interior, jump, total })
}

/// Minimal set, by descending `η²` and ascending id, covering `θ` of the total.
pub fn mark(eta_sq: &[f64], theta: f64) -> Result<BTreeSet<usize>> {
    if !(theta > 0.0 && theta <= 1.0) {
        return Err(Error::Precondition(format!("marking fraction {theta} outside (0, 1]")));
    }
    let mut order: Vec<usize> = (0..eta_sq.len()).filter(|&k| eta_sq[k] > 0.0).collect();
    order.sort_by(|&a, &b| eta_sq[b].total_cmp(&eta_sq[a]).then(a.cmp(&b)));
    let total: f64 = order.iter().map(|&k| eta_sq[k]).sum();
    let mut marked = BTreeSet::new();
    let mut acc = 0.0;
    for k in order {
        if acc >= theta * total {
            break;
        }
        acc += eta_sq[k];
        marked.insert(k);
    }
    Ok(marked)
}

/// Adds to `marked` every edge neighbour that would otherwise end up two
/// levels coarser than a split patch.
pub fn level_closure(mp: &MultiPatch, marked: &BTreeSet<usize>) -> BTreeSet<usize> {
    let mut m = marked.clone();
    let level = |k: usize| mp.patches[k].level;
    let limit = 10 * mp.num_patches().max(1);
    for _ in 0..limit {
        let mut added = false;
        for e in &mp.topology.edges {
            for (p, q) in [(e.a.patch, e.b.patch), (e.b.patch, e.a.patch)] {
                if m.contains(&p) && !m.contains(&q) && level(q) < level(p) {
                    m.insert(q);
                    added = true;
                }
            }
        }
        if !added {
            return m;
        }
    }
    unreachable!("closure adds at least one patch per sweep and there are finitely many");
}

/// Splits the marked patches plus their closure.
pub fn refine(mp: &MultiPatch, marked: &BTreeSet<usize>) -> Result<MultiPatch> {
    mp.split_patches(&level_closure(mp, marked))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RefinementMode {
    Adaptive,
    /// Dyadic refinement of every patch's spaces, no splitting.
    Uniform,
}

impl RefinementMode {
    pub fn name(self) -> &'static str {
        match self {
            RefinementMode::Adaptive => "adaptive",
            RefinementMode::Uniform => "uniform",
        }
    }
}

/// Deliberate corruption used to exercise failure reporting.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Fault {
    /// Flip the sign of the first stored entry of `B`.
    NegateBasisEntry,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LoopSettings {
    pub degree: usize,
    pub initial_spans: u32,
    pub theta: f64,
    pub mode: RefinementMode,
    pub max_dof: usize,
    pub max_levels: usize,
    pub solver_tol: f64,
    pub quad_bump: usize,
    /// Run the basis property checks on every level; a failure stops the loop.
    pub verify_basis: bool,
    pub fault: Option<Fault>,
}

impl LoopSettings {
    pub fn new(degree: usize) -> Self {
        Self {
            degree,
            initial_spans: initial_spans(degree, degree + 1),
            theta: 0.5,
            mode: RefinementMode::Adaptive,
            max_dof: 5000,
            max_levels: 10,
            solver_tol: crate::solver::DEFAULT_TOLERANCE,
            quad_bump: 3,
            verify_basis: true,
            fault: None,
        }
    }
}

/// Spans per direction for `interior_knots` requested interior knots: the
/// next power of two that is at least `interior_knots + 1` and `2p`, so that
/// every half side of a split patch still spans `p` knot intervals.
pub fn initial_spans(degree: usize, interior_knots: usize) -> u32 {
    ((interior_knots + 1).max(2 * degree).max(1)).next_power_of_two() as u32
}

#[derive(Clone, Debug)]
pub struct AdaptiveState {
    pub level: usize,
    pub mp: MultiPatch,
    pub basis: GlobalBasis,
    /// Global coefficients (Dirichlet values included).
    pub u: Vec<f64>,
    pub u_pw: Vec<f64>,
    /// Free (non-Dirichlet) global DOFs.
    pub n_dof: usize,
    pub n_global: usize,
    pub eta: EstimateResult,
    pub errors: Option<ErrorNorms>,
    pub solve: SolveReport,
    pub basis_report: Option<BasisReport>,
    pub assumptions: AssumptionReport,
    pub seconds: f64,
}

#[derive(Debug)]
pub struct LoopRun {
    pub history: Vec<AdaptiveState>,
    /// Set when a stage failed; the history holds every completed level.
    pub failure: Option<Error>,
}

/// Builds, solves and estimates one discretization.
pub fn solve_level(problem: &Problem, mp: MultiPatch, level: usize, settings: &LoopSettings) -> Result<AdaptiveState> {
    let start = Instant::now();
    let assumptions = validate_assumptions(&mp, settings.degree);
    let cm = build_constraints(&mp)?;
    let mut basis = nullspace_basis(&cm)?;
    if settings.fault == Some(Fault::NegateBasisEntry) {
        if let Some(v) = basis.b.values_mut().first_mut() {
            *v = -*v;
        }
    }
    let basis_report = if settings.verify_basis {
        let report = verify_basis(&cm.c, &basis.b)?;
        if !report.passes() {
            return Err(Error::BasisCheck { level, detail: report.to_string() });
        }
        Some(report)
    } else {
        None
    };
    let system = assemble_global(&mp, &basis, &problem.nu, &problem.f)?;
    let system = apply_dirichlet(system, &mp, &basis, &problem.g)?;
    let (a, b) = system.reduced()?;
    let (x, solve) = solve_spd(&a, &b, settings.solver_tol, None)?;
    let u = system.expand(&x);
    let u_pw = basis.to_patchwise(&u)?;
    let eta = estimate(&mp, &u_pw, &problem.nu, &problem.f)?;
    let errors = match &problem.exact {
        Some(ex) => Some(compute_errors(&mp, &u_pw, ex, settings.quad_bump)?),
        None => None,
    };
    Ok(AdaptiveState {
        level,
        n_dof: system.free_dofs.len(),
        n_global: basis.n_global(),
        mp,
        basis,
        u,
        u_pw,
        eta,
        errors,
        solve,
        basis_report,
        assumptions,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// Runs the loop until `max_dof` free DOFs, `max_levels` refinements or an
/// estimator that marks nothing.
pub fn adaptive_loop(problem: &Problem, settings: &LoopSettings) -> LoopRun {
    adaptive_loop_with(problem, settings, |_| Ok(()))
}

/// As [`adaptive_loop`], calling `on_level` after each completed level; an
/// error from `on_level` ends the loop as a stage failure.
pub fn adaptive_loop_with(
    problem: &Problem,
    settings: &LoopSettings,
    mut on_level: impl FnMut(&AdaptiveState) -> Result<()>,
) -> LoopRun {
    let mut history = Vec::new();
    let mut mp = match problem.geometry.multipatch(settings.degree, settings.initial_spans) {
        Ok(mp) => mp,
        Err(e) => return LoopRun { history, failure: Some(e) },
    };
    for level in 0.. {
        let state = match solve_level(problem, mp, level, settings) {
            Ok(s) => s,
            Err(e) => return LoopRun { history, failure: Some(e) },
        };
        if let Err(e) = on_level(&state) {
            history.push(state);
            return LoopRun { history, failure: Some(e) };
        }
        let done = state.n_dof >= settings.max_dof || level >= settings.max_levels;
        let next = if done {
            None
        } else {
            match settings.mode {
                RefinementMode::Uniform => Some(state.mp.refine_spaces_uniformly()),
                RefinementMode::Adaptive => match mark(&state.eta.eta_sq, settings.theta) {
                    // a vanishing estimator leaves nothing to refine
                    Ok(m) if m.is_empty() => None,
                    m => Some(m.and_then(|m| refine(&state.mp, &m))),
                },
            }
        };
        history.push(state);
        match next {
            None => break,
            Some(Ok(next_mp)) => mp = next_mp,
            Some(Err(e)) => return LoopRun { history, failure: Some(e) },
        }
    }
    LoopRun { history, failure: None }
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}
