//! Physical derivatives of patch basis functions and of patch-wise fields.

use crate::error::{Error, Result};
use crate::geometry::{MapEval, MultiPatch};
use crate::splines::BasisValues;

/// Jacobian determinants at or below this magnitude are degenerate.
pub const DEGENERATE_DET: f64 = 1e-14;

/// The `(p1 + 1)(p2 + 1)` tensor basis functions active at one point.
#[derive(Clone, Debug)]
pub struct PhysicalBasis {
    pub x: [f64; 2],
    pub det: f64,
    /// Patch-local flat DOF index of each active function.
    pub dofs: Vec<usize>,
    pub values: Vec<f64>,
    pub grads: Vec<[f64; 2]>,
    /// Empty unless second derivatives were requested.
    pub laplacians: Vec<f64>,
}

/// Physical Hessian of a scalar with parameter gradient `g` and Hessian
/// `h = [xx, xy, yy]`, given `grad_x` already computed.
fn physical_laplacian(map: &MapEval, jinv: &[[f64; 2]; 2], h: [f64; 3], grad_x: [f64; 2]) -> f64 {
    // H_xi u - sum_k (grad_x u)_k H_xi G_k
    let mut m = [h[0], h[1], h[2]];
    for (k, &gk) in grad_x.iter().enumerate() {
        for (e, hk) in m.iter_mut().zip(map.hessian[k]) {
            *e -= gk * hk;
        }
    }
    // trace(J^{-T} M J^{-1}) = sum_{a,b} M_ab (J^{-1} J^{-T})_{ab}
    let mut lap = 0.0;
    let mm = [[m[0], m[1]], [m[1], m[2]]];
    for (a, row) in mm.iter().enumerate() {
        for (b, &mab) in row.iter().enumerate() {
            let g = jinv[a][0] * jinv[b][0] + jinv[a][1] * jinv[b][1];
            lap += mab * g;
        }
    }
    lap
}

/// Evaluates the active basis of `patch` at parameter `t` from precomputed
/// univariate values.
pub fn physical_basis_from(
    mp: &MultiPatch,
    patch: usize,
    t: [f64; 2],
    bu: &BasisValues,
    bv: &BasisValues,
    second: bool,
) -> Result<PhysicalBasis> {
    let map = mp.eval_map(patch, t);
    let det = map.det();
    if det.abs() <= DEGENERATE_DET {
        return Err(Error::DegenerateGeometry { patch, det });
    }
    let jinv = map.inverse_jacobian();
    let n1 = mp.patches[patch].spaces[0].dim();
    let nb = (bu.degree + 1) * (bv.degree + 1);
    let mut out = PhysicalBasis {
        x: map.point,
        det,
        dofs: Vec::with_capacity(nb),
        values: Vec::with_capacity(nb),
        grads: Vec::with_capacity(nb),
        laplacians: Vec::with_capacity(if second { nb } else { 0 }),
    };
    let d2u = |a: usize| if bu.max_deriv >= 2 && bu.degree >= 2 { bu.get(2, a) } else { 0.0 };
    let d2v = |b: usize| if bv.max_deriv >= 2 && bv.degree >= 2 { bv.get(2, b) } else { 0.0 };
    for b in 0..=bv.degree {
        for a in 0..=bu.degree {
            out.dofs.push(bu.first_index + a + (bv.first_index + b) * n1);
            let (nu, nv) = (bu.get(0, a), bv.get(0, b));
            let (du, dv) = (bu.get(1, a), bv.get(1, b));
            out.values.push(nu * nv);
            let g = [du * nv, nu * dv];
            // grad_x = J^{-T} grad_xi
            let gx = [jinv[0][0] * g[0] + jinv[1][0] * g[1], jinv[0][1] * g[0] + jinv[1][1] * g[1]];
            out.grads.push(gx);
            if second {
                let h = [d2u(a) * nv, du * dv, nu * d2v(b)];
                out.laplacians.push(physical_laplacian(&map, &jinv, h, gx));
            }
        }
    }
    Ok(out)
}

pub fn physical_basis(mp: &MultiPatch, patch: usize, t: [f64; 2], second: bool) -> Result<PhysicalBasis> {
    let p = &mp.patches[patch];
    let d = if second { 2 } else { 1 };
    let bu = p.spaces[0].eval_basis_unchecked(t[0], d);
    let bv = p.spaces[1].eval_basis_unchecked(t[1], d);
    physical_basis_from(mp, patch, t, &bu, &bv, second)
}

/// Value, gradient and Laplacian of a patch-wise field at one point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FieldValue {
    pub x: [f64; 2],
    pub value: f64,
    pub grad: [f64; 2],
    pub laplacian: f64,
}

impl PhysicalBasis {
    /// Combines the active functions with patch-local coefficients.
    pub fn combine(&self, local: &[f64]) -> FieldValue {
        let mut f = FieldValue { x: self.x, value: 0.0, grad: [0.0; 2], laplacian: 0.0 };
        for (k, &d) in self.dofs.iter().enumerate() {
            let c = local[d];
            f.value += c * self.values[k];
            f.grad[0] += c * self.grads[k][0];
            f.grad[1] += c * self.grads[k][1];
            if let Some(l) = self.laplacians.get(k) {
                f.laplacian += c * l;
            }
        }
        f
    }
}

/// Evaluates patch `patch` of a patch-wise coefficient vector.
pub fn eval_field(mp: &MultiPatch, u_pw: &[f64], patch: usize, t: [f64; 2], second: bool) -> Result<FieldValue> {
    let off = mp.dof_offsets();
    let pb = physical_basis(mp, patch, t, second)?;
    Ok(pb.combine(&u_pw[off[patch]..off[patch + 1]]))
}
