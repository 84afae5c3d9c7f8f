//! Galerkin assembly of `a(u, v) = ∫ ν ∇u·∇v` and `l(v) = ∫ f v`, reduction to
//! the global basis, Dirichlet elimination and error norms.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::basis::GlobalBasis;
use crate::error::{Error, Result};
use crate::field::{physical_basis_from, PhysicalBasis};
use crate::geometry::{BoundaryKind, MultiPatch, Side};
use crate::quadrature::QuadRule;
use crate::sparse::{block_diagonal, SparseMatrix};
use crate::splines::{BasisValues, SplineSpace};

pub type ScalarFn = Arc<dyn Fn([f64; 2]) -> f64 + Send + Sync>;
pub type VectorFn = Arc<dyn Fn([f64; 2]) -> [f64; 2] + Send + Sync>;

/// A coefficient field; the diffusion must be constant on each root for the
/// residual estimator.
#[derive(Clone)]
pub enum Coefficient {
    Constant(f64),
    PerRoot(Vec<f64>),
    Function(ScalarFn),
}

impl Coefficient {
    pub fn value(&self, root: usize, x: [f64; 2]) -> f64 {
        match self {
            Coefficient::Constant(c) => *c,
            Coefficient::PerRoot(v) => v[root],
            Coefficient::Function(f) => f(x),
        }
    }

    /// The constant value on a root, when there is one.
    pub fn root_constant(&self, root: usize) -> Option<f64> {
        match self {
            Coefficient::Constant(c) => Some(*c),
            Coefficient::PerRoot(v) => v.get(root).copied(),
            Coefficient::Function(_) => None,
        }
    }

    pub fn function(f: impl Fn([f64; 2]) -> f64 + Send + Sync + 'static) -> Self {
        Coefficient::Function(Arc::new(f))
    }
}

impl fmt::Debug for Coefficient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Coefficient::Constant(c) => write!(f, "Constant({c})"),
            Coefficient::PerRoot(v) => write!(f, "PerRoot({v:?})"),
            Coefficient::Function(_) => write!(f, "Function(..)"),
        }
    }
}

/// Knot spans of a space as `(a, b)` pairs of non-empty intervals.
pub fn spans(space: &SplineSpace) -> Vec<(f64, f64)> {
    let bp: Vec<f64> = space.knot_vector().breakpoints().iter().map(|k| k.to_f64()).collect();
    bp.windows(2).map(|w| (w[0], w[1])).collect()
}

/// Univariate basis values at every quadrature point of every span.
pub(crate) struct SpanTable {
    pub points: Vec<(f64, f64)>,
    pub values: Vec<BasisValues>,
}

pub(crate) fn span_table(space: &SplineSpace, quad: &QuadRule, max_deriv: usize) -> Vec<SpanTable> {
    spans(space)
        .into_iter()
        .map(|(a, b)| {
            let points: Vec<(f64, f64)> = quad.on(a, b).collect();
            let values = points.iter().map(|&(t, _)| space.eval_basis_unchecked(t, max_deriv)).collect();
            SpanTable { points, values }
        })
        .collect()
}

/// Visits every quadrature point of a patch with its active physical basis.
pub(crate) fn for_each_quad_point(
    mp: &MultiPatch,
    patch: usize,
    quad: &QuadRule,
    second: bool,
    mut visit: impl FnMut(&PhysicalBasis, f64) -> Result<()>,
) -> Result<()> {
    let p = &mp.patches[patch];
    let d = if second { 2 } else { 1 };
    let tu = span_table(&p.spaces[0], quad, d);
    let tv = span_table(&p.spaces[1], quad, d);
    for sv in &tv {
        for su in &tu {
            for (qv, &(t2, w2)) in sv.points.iter().enumerate() {
                for (qu, &(t1, w1)) in su.points.iter().enumerate() {
                    let pb = physical_basis_from(mp, patch, [t1, t2], &su.values[qu], &sv.values[qv], second)?;
                    let w = w1 * w2 * pb.det.abs();
                    visit(&pb, w)?;
                }
            }
        }
    }
    Ok(())
}

/// Local stiffness matrix and load vector of one patch.
pub fn assemble_patch(
    mp: &MultiPatch,
    patch: usize,
    nu: &Coefficient,
    f: &Coefficient,
    quad_points: usize,
) -> Result<(SparseMatrix, Vec<f64>)> {
    let p = &mp.patches[patch];
    let deg = p.spaces[0].degree().max(p.spaces[1].degree());
    if quad_points < deg + 1 {
        return Err(Error::Precondition(format!("{quad_points} quadrature points for degree {deg}")));
    }
    let n = p.num_dofs();
    let quad = QuadRule::gauss_legendre(quad_points);
    let root = p.root;
    let mut load = vec![0.0; n];
    // accumulate per element so each element contributes one dense block
    let mut triplets = Vec::new();
    let mut block: Vec<f64> = Vec::new();
    let mut block_dofs: Vec<usize> = Vec::new();
    let flush = |block: &mut Vec<f64>, dofs: &mut Vec<usize>, triplets: &mut Vec<(usize, usize, f64)>| {
        let nb = dofs.len();
        for i in 0..nb {
            for j in 0..nb {
                triplets.push((dofs[i], dofs[j], block[i * nb + j]));
            }
        }
        block.clear();
        dofs.clear();
    };
    let tu = span_table(&p.spaces[0], &quad, 1);
    let tv = span_table(&p.spaces[1], &quad, 1);
    for sv in &tv {
        for su in &tu {
            for (qv, &(t2, w2)) in sv.points.iter().enumerate() {
                for (qu, &(t1, w1)) in su.points.iter().enumerate() {
                    let pb = physical_basis_from(mp, patch, [t1, t2], &su.values[qu], &sv.values[qv], false)?;
                    let w = w1 * w2 * pb.det.abs();
                    let nb = pb.dofs.len();
                    if block_dofs.is_empty() {
                        block_dofs.extend_from_slice(&pb.dofs);
                        block.resize(nb * nb, 0.0);
                    }
                    let kappa = nu.value(root, pb.x) * w;
                    let fx = f.value(root, pb.x) * w;
                    for i in 0..nb {
                        let gi = pb.grads[i];
                        load[pb.dofs[i]] += fx * pb.values[i];
                        for j in 0..nb {
                            let gj = pb.grads[j];
                            block[i * nb + j] += kappa * (gi[0] * gj[0] + gi[1] * gj[1]);
                        }
                    }
                }
            }
            flush(&mut block, &mut block_dofs, &mut triplets);
        }
    }
    let a = SparseMatrix::from_triplets_with_threshold(n, n, triplets, 0.0)?;
    Ok((a, load))
}

/// A global system `A x = b` with Dirichlet DOFs fixed to given values.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearSystem {
    pub a: SparseMatrix,
    pub b: Vec<f64>,
    /// `(global DOF, value)`, sorted by DOF.
    pub dirichlet: Vec<(usize, f64)>,
    pub free_dofs: Vec<usize>,
}

impl LinearSystem {
    pub fn n(&self) -> usize {
        self.b.len()
    }

    /// `A_ff` and `b_f - A_fd g_d`.
    pub fn reduced(&self) -> Result<(SparseMatrix, Vec<f64>)> {
        let n = self.n();
        let mut g = vec![0.0; n];
        for &(k, v) in &self.dirichlet {
            g[k] = v;
        }
        let ag = self.a.mul_vec(&g)?;
        let rhs = self.free_dofs.iter().map(|&k| self.b[k] - ag[k]).collect();
        let a = self.a.submatrix(&self.free_dofs, &self.free_dofs)?;
        Ok((a, rhs))
    }

    /// Full global coefficient vector from the free unknowns.
    pub fn expand(&self, x_free: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; self.n()];
        for &(k, v) in &self.dirichlet {
            x[k] = v;
        }
        for (&k, &v) in self.free_dofs.iter().zip(x_free) {
            x[k] = v;
        }
        x
    }
}

/// Patch-wise block-diagonal stiffness and load.
pub fn assemble_patchwise(
    mp: &MultiPatch,
    nu: &Coefficient,
    f: &Coefficient,
    quad_points: Option<usize>,
) -> Result<(SparseMatrix, Vec<f64>)> {
    let parts: Vec<(SparseMatrix, Vec<f64>)> = (0..mp.num_patches())
        .into_par_iter()
        .map(|k| {
            let p = &mp.patches[k];
            let q = quad_points.unwrap_or(p.spaces[0].degree().max(p.spaces[1].degree()) + 1);
            assemble_patch(mp, k, nu, f, q)
        })
        .collect::<Result<_>>()?;
    let blocks: Vec<SparseMatrix> = parts.iter().map(|(a, _)| a.clone()).collect();
    let load = parts.into_iter().flat_map(|(_, b)| b).collect();
    Ok((block_diagonal(&blocks)?, load))
}

/// `A = Bᵀ blockdiag(A_k) B`, `b = Bᵀ b_pw`; no Dirichlet DOFs yet.
pub fn assemble_global(
    mp: &MultiPatch,
    basis: &GlobalBasis,
    nu: &Coefficient,
    f: &Coefficient,
) -> Result<LinearSystem> {
    if basis.n_patchwise() != mp.num_patchwise_dofs() {
        return Err(Error::DimensionMismatch(format!(
            "basis has {} patch-wise rows, multi-patch has {} DOFs",
            basis.n_patchwise(),
            mp.num_patchwise_dofs()
        )));
    }
    let (a_pw, b_pw) = assemble_patchwise(mp, nu, f, None)?;
    let bt = basis.b.transpose();
    let a = bt.multiply(&a_pw.multiply(&basis.b)?)?;
    let b = basis.b.transpose_mul_vec(&b_pw)?;
    let free_dofs = (0..a.n_rows()).collect();
    Ok(LinearSystem { a, b, dirichlet: Vec::new(), free_dofs })
}

/// L² projection of `g` onto the trace space of one patch side, weighted by
/// arc length, with both end coefficients interpolating `g`.
pub fn project_side(mp: &MultiPatch, patch: usize, side: Side, g: &ScalarFn) -> Result<Vec<f64>> {
    let space = &mp.patches[patch].spaces[side.tangent_axis()];
    let n = space.dim();
    let curve = |s: f64| mp.eval_map(patch, side.point(s));
    let mut c = vec![0.0; n];
    c[0] = g(curve(0.0).point);
    c[n - 1] = g(curve(1.0).point);
    if n <= 2 {
        return Ok(c);
    }
    let quad = QuadRule::gauss_legendre(space.degree() + 3);
    let m = n - 2;
    let mut mass = DMatrix::<f64>::zeros(m, m);
    let mut rhs = DVector::<f64>::zeros(m);
    let axis = side.tangent_axis();
    for (a, b) in spans(space) {
        for (s, w) in quad.on(a, b) {
            let e = curve(s);
            let speed = e.jacobian[0][axis].hypot(e.jacobian[1][axis]);
            let bv = space.eval_basis_unchecked(s, 0);
            let gv = g(e.point);
            for i in 0..=bv.degree {
                let gi = bv.first_index + i;
                let vi = bv.get(0, i) * w * speed;
                if gi == 0 || gi == n - 1 {
                    continue;
                }
                rhs[gi - 1] += gv * vi;
                for j in 0..=bv.degree {
                    let gj = bv.first_index + j;
                    let vj = bv.get(0, j);
                    if gj == 0 || gj == n - 1 {
                        rhs[gi - 1] -= vi * vj * c[gj];
                    } else {
                        mass[(gi - 1, gj - 1)] += vi * vj;
                    }
                }
            }
        }
    }
    let chol = mass.cholesky().ok_or(Error::DegenerateGeometry { patch, det: 0.0 })?;
    let x = chol.solve(&rhs);
    c[1..n - 1].copy_from_slice(x.as_slice());
    Ok(c)
}

/// Fixes every global DOF with non-zero trace on a Dirichlet side to the
/// projection of `g`; Neumann sides stay natural.
pub fn apply_dirichlet(
    mut system: LinearSystem,
    mp: &MultiPatch,
    basis: &GlobalBasis,
    g: &ScalarFn,
) -> Result<LinearSystem> {
    let off = mp.dof_offsets();
    let mut fixed: BTreeMap<usize, f64> = BTreeMap::new();
    for bs in &mp.topology.boundary_sides {
        let kind = bs.kind.ok_or_else(|| {
            Error::Config(format!(
                "root side {} of patch {} (root {}) has no boundary label",
                bs.root_side.name(),
                bs.patch,
                mp.patches[bs.patch].root
            ))
        })?;
        if kind != BoundaryKind::Dirichlet {
            continue;
        }
        let coeffs = project_side(mp, bs.patch, bs.side, g)?;
        for (d, &v) in mp.patches[bs.patch].side_dofs(bs.side).iter().zip(&coeffs) {
            let row = off[bs.patch] + d;
            let entries: Vec<(usize, f64)> = basis.b.row(row).collect();
            match entries.as_slice() {
                [(col, w)] if (w - 1.0).abs() <= 1e-12 => {
                    fixed.entry(*col).or_insert(v);
                }
                _ => {
                    return Err(Error::Structural(format!(
                        "boundary DOF {d} of patch {} is not a single global function",
                        bs.patch
                    )))
                }
            }
        }
    }
    system.dirichlet = fixed.into_iter().collect();
    let mut is_fixed = vec![false; system.n()];
    for &(k, _) in &system.dirichlet {
        is_fixed[k] = true;
    }
    system.free_dofs = (0..system.n()).filter(|&k| !is_fixed[k]).collect();
    Ok(system)
}

/// Exact solution with gradient.
#[derive(Clone)]
pub struct ExactSolution {
    pub u: ScalarFn,
    pub grad: VectorFn,
    /// Point where the solution is singular; patches with a corner there get
    /// extra quadrature points.
    pub singular_point: Option<[f64; 2]>,
}

impl fmt::Debug for ExactSolution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ExactSolution").field("singular_point", &self.singular_point).finish_non_exhaustive()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErrorNorms {
    pub l2: f64,
    pub h1_semi: f64,
}

/// `‖u_h - u‖_{L²}` and `|u_h - u|_{H¹}` from patch-wise coefficients, with
/// `p + 3` points per direction and `quad_bump` more on patches touching the
/// singular point.
pub fn compute_errors(mp: &MultiPatch, u_pw: &[f64], exact: &ExactSolution, quad_bump: usize) -> Result<ErrorNorms> {
    let off = mp.dof_offsets();
    let parts: Vec<(f64, f64)> = (0..mp.num_patches())
        .into_par_iter()
        .map(|k| {
            let p = &mp.patches[k];
            let deg = p.spaces[0].degree().max(p.spaces[1].degree());
            let bump = match exact.singular_point {
                Some(x) if mp.patch_has_corner_at(k, x) => quad_bump,
                _ => 0,
            };
            let quad = QuadRule::gauss_legendre(deg + 3 + bump);
            let local = &u_pw[off[k]..off[k + 1]];
            let (mut l2, mut h1) = (0.0, 0.0);
            for_each_quad_point(mp, k, &quad, false, |pb, w| {
                let f = pb.combine(local);
                let e = f.value - (exact.u)(pb.x);
                let ge = (exact.grad)(pb.x);
                l2 += w * e * e;
                h1 += w * ((f.grad[0] - ge[0]).powi(2) + (f.grad[1] - ge[1]).powi(2));
                Ok(())
            })?;
            Ok((l2, h1))
        })
        .collect::<Result<_>>()?;
    let (l2, h1) = parts.iter().fold((0.0, 0.0), |acc, x| (acc.0 + x.0, acc.1 + x.1));
    Ok(ErrorNorms { l2: l2.sqrt(), h1_semi: h1.sqrt() })
}
