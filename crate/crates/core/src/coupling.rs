//! Continuity constraints across interface edges.
//!
//! For each edge the side whose trace space contains the other's is "fine";
//! every fine trace DOF equals the combination of coarse trace DOFs that
//! represents the same function. Traces are expressed in the orientation of
//! the edge's lower patch id.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{Edge, MultiPatch, Side};
use crate::sparse::SparseMatrix;
use crate::splines::{restricted_embedding, DyadicRational as D, SplineSpace};

/// Entries of `C` below this magnitude are treated as zero.
pub const CONSTRAINT_ZERO: f64 = 1e-13;

/// A patch's trace on one edge.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceSpace {
    pub patch: usize,
    pub side: Side,
    /// Univariate space on the overlap rescaled to `[0, 1]`, in edge orientation.
    pub space: SplineSpace,
    /// Patch-local flat DOF index of each trace basis function.
    pub dof_map: Vec<usize>,
}

/// One side of an edge, oriented along the edge.
struct OrientedSide {
    patch: usize,
    side: Side,
    space: SplineSpace,
    interval: [D; 2],
    dofs: Vec<usize>,
}

fn oriented_side(mp: &MultiPatch, edge: &Edge, patch: usize) -> Result<OrientedSide> {
    let es = edge
        .side_of(patch)
        .ok_or_else(|| Error::Precondition(format!("edge {} is not incident to patch {patch}", edge.id)))?;
    let p = &mp.patches[patch];
    let space = p.spaces[es.side.tangent_axis()].clone();
    let mut dofs = p.side_dofs(es.side);
    let flip = edge.reversed && patch == edge.b.patch && edge.a.patch != edge.b.patch;
    if flip {
        dofs.reverse();
        let [lo, hi] = es.interval;
        Ok(OrientedSide { patch, side: es.side, space: space.reversed(), interval: [D::ONE - hi, D::ONE - lo], dofs })
    } else {
        Ok(OrientedSide { patch, side: es.side, space, interval: es.interval, dofs })
    }
}

fn restricted_trace(side: &OrientedSide, edge: usize) -> Result<TraceSpace> {
    let [a, b] = side.interval;
    let space = side.space.restrict_to_subinterval(a, b).map_err(|e| Error::NotNested {
        edge,
        detail: format!("patch {} trace cannot be restricted to [{a}, {b}]: {e}", side.patch),
    })?;
    let dof_map = side.dofs[side.space.active_range(a, b)].to_vec();
    Ok(TraceSpace { patch: side.patch, side: side.side, space, dof_map })
}

pub fn trace_space(mp: &MultiPatch, patch: usize, edge: &Edge) -> Result<TraceSpace> {
    restricted_trace(&oriented_side(mp, edge, patch)?, edge.id)
}

/// Fine/coarse assignment and the trace embedding of one edge.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeCoupling {
    pub edge: usize,
    pub fine_patch: usize,
    pub coarse_patch: usize,
    pub fine_dofs: Vec<usize>,
    pub coarse_dofs: Vec<usize>,
    /// `coarse_dofs.len() x fine_dofs.len()`: coarse trace function `i`
    /// equals `sum_j embedding[i][j] * fine trace function j`.
    pub embedding: Vec<Vec<f64>>,
}

pub fn couple_edge(mp: &MultiPatch, edge: &Edge) -> Result<EdgeCoupling> {
    let a = oriented_side(mp, edge, edge.a.patch)?;
    let b = oriented_side(mp, edge, edge.b.patch)?;
    let ta = restricted_trace(&a, edge.id)?;
    let tb = restricted_trace(&b, edge.id)?;
    let (fine, coarse) = if tb.space.knot_vector().is_subset_of(ta.space.knot_vector()) {
        (a, b)
    } else if ta.space.knot_vector().is_subset_of(tb.space.knot_vector()) {
        (b, a)
    } else {
        return Err(Error::NotNested {
            edge: edge.id,
            detail: format!("traces of patches {} and {} are not nested", edge.a.patch, edge.b.patch),
        });
    };
    if fine.interval != [D::ZERO, D::ONE] {
        return Err(Error::NotNested {
            edge: edge.id,
            detail: format!("finer patch {} does not cover the edge with a full side", fine.patch),
        });
    }
    let emb = restricted_embedding(&coarse.space, coarse.interval[0], coarse.interval[1], &fine.space)
        .map_err(|e| Error::NotNested { edge: edge.id, detail: e.to_string() })?;
    Ok(EdgeCoupling {
        edge: edge.id,
        fine_patch: fine.patch,
        coarse_patch: coarse.patch,
        fine_dofs: fine.dofs,
        coarse_dofs: coarse.dofs[emb.coarse_indices.clone()].to_vec(),
        embedding: emb.matrix,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RowMeta {
    pub edge: usize,
    pub fine_patch: usize,
    /// Patch-local flat index of the constrained DOF.
    pub fine_dof: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConstraintMatrix {
    pub c: SparseMatrix,
    pub row_meta: Vec<RowMeta>,
    pub dof_offsets: Vec<usize>,
}

impl ConstraintMatrix {
    pub fn n_patchwise(&self) -> usize {
        self.c.n_cols()
    }
}

/// One row per fine trace DOF and edge: `+1` on the fine DOF, `-E` on the
/// coarse DOFs. Redundant rows at shared corners are kept.
pub fn build_constraints(mp: &MultiPatch) -> Result<ConstraintMatrix> {
    let offsets = mp.dof_offsets();
    let couplings: Vec<EdgeCoupling> =
        mp.topology.edges.par_iter().map(|e| couple_edge(mp, e)).collect::<Result<_>>()?;
    let mut triplets = Vec::new();
    let mut row_meta = Vec::new();
    for cp in &couplings {
        let (fo, co) = (offsets[cp.fine_patch], offsets[cp.coarse_patch]);
        for (j, &fd) in cp.fine_dofs.iter().enumerate() {
            let r = row_meta.len();
            triplets.push((r, fo + fd, 1.0));
            for (i, &cd) in cp.coarse_dofs.iter().enumerate() {
                let v = cp.embedding[i][j];
                if v.abs() > CONSTRAINT_ZERO {
                    triplets.push((r, co + cd, -v));
                }
            }
            row_meta.push(RowMeta { edge: cp.edge, fine_patch: cp.fine_patch, fine_dof: fd });
        }
    }
    let n_pw = *offsets.last().unwrap();
    let c = SparseMatrix::from_triplets_with_threshold(row_meta.len(), n_pw, triplets, CONSTRAINT_ZERO)?;
    Ok(ConstraintMatrix { c, row_meta, dof_offsets: offsets })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::fixtures::*;
    use crate::geometry::{BoundaryLabel, RootInterface, RootMap};
    use nalgebra::DMatrix;

    fn dense_rank(m: &SparseMatrix) -> usize {
        if m.n_rows() == 0 {
            return 0;
        }
        let d = DMatrix::from_fn(m.n_rows(), m.n_cols(), |i, j| m.get(i, j));
        d.svd(false, false).rank(1e-9)
    }

    /// Evaluates a patch-wise coefficient vector at a physical point on an edge
    /// from both sides.
    fn eval_both(mp: &MultiPatch, coeffs: &[f64], e: &Edge, tau: f64) -> (f64, f64) {
        let off = mp.dof_offsets();
        let eval = |patch: usize, t: [f64; 2]| {
            let p = &mp.patches[patch];
            let n1 = p.spaces[0].dim();
            let bu = p.spaces[0].eval_basis_unchecked(t[0], 0);
            let bv = p.spaces[1].eval_basis_unchecked(t[1], 0);
            let mut s = 0.0;
            for b in 0..=bv.degree {
                for a in 0..=bu.degree {
                    s += bu.get(0, a)
                        * bv.get(0, b)
                        * coeffs[off[patch] + bu.first_index + a + (bv.first_index + b) * n1];
                }
            }
            s
        };
        (eval(e.a.patch, e.a.side.point(e.param_a(tau))), eval(e.b.patch, e.b.side.point(e.param_b(tau))))
    }

    #[test]
    fn matching_linear_pair() {
        let mp = strip(1, 1);
        let cm = build_constraints(&mp).unwrap();
        assert_eq!(cm.c.shape(), (2, 8));
        for r in 0..2 {
            let mut vals: Vec<f64> = cm.c.row(r).map(|(_, v)| v).collect();
            vals.sort_by(f64::total_cmp);
            assert_eq!(vals, vec![-1.0, 1.0]);
        }
        // lower patch id is fine on matching edges
        assert!(cm.row_meta.iter().all(|m| m.fine_patch == 0));
    }

    #[test]
    fn matching_trace_is_a_full_grid_line() {
        let mp = strip(2, 2);
        let e = &mp.topology.edges[0];
        let t = trace_space(&mp, 0, e).unwrap();
        assert_eq!(t.space.dim(), 4);
        assert_eq!(t.dof_map, vec![3, 7, 11, 15]);
        let t1 = trace_space(&mp, 1, e).unwrap();
        assert_eq!(t1.dof_map, vec![0, 4, 8, 12]);
        assert!(trace_space(&mp, 2, e).is_err());
    }

    #[test]
    fn coarse_side_trace_is_restricted() {
        let mp = strip(2, 4).split_patch(1).unwrap();
        let e = mp.topology.edges_of(0).find(|e| e.a.interval == [D::ZERO, D::HALF]).unwrap();
        let t = trace_space(&mp, 0, e).unwrap();
        let expected = mp.patches[0].spaces[1].restrict_to_subinterval(D::ZERO, D::HALF).unwrap();
        assert_eq!(t.space, expected);
        assert_eq!(t.dof_map.len(), expected.dim());
    }

    #[test]
    fn t_junction_rows_have_one_unit_entry_and_sum_to_zero() {
        for p in 1..=3 {
            let mp = strip(p, if p <= 2 { 4 } else { 8 }).split_patch(1).unwrap();
            let cm = build_constraints(&mp).unwrap();
            for r in 0..cm.c.n_rows() {
                let pos: Vec<f64> = cm.c.row(r).map(|(_, v)| v).filter(|&v| v > 0.0).collect();
                assert_eq!(pos, vec![1.0]);
                let s: f64 = cm.c.row(r).map(|(_, v)| v).sum();
                assert!(s.abs() <= 1e-14);
            }
            // the coarse patch is never fine on T-junction edges
            for m in &cm.row_meta {
                let e = &mp.topology.edges[m.edge];
                if e.a.patch == 0 {
                    assert_ne!(m.fine_patch, 0);
                }
            }
        }
    }

    #[test]
    fn rank_matches_dimension_of_continuous_space_on_small_instance() {
        // p = 1, two spans: the continuous space on the split strip is the
        // space of continuous piecewise bilinears; count by vertices of the
        // induced grid. Oracle: dense SVD rank.
        let mp = strip(1, 2).split_patch(1).unwrap();
        let cm = build_constraints(&mp).unwrap();
        assert!(mp.num_patchwise_dofs() <= 60);
        let rank = dense_rank(&cm.c);
        // grid points: coarse 3x3 on [0,1]^2, fine 5x5 on [1,2]x[0,1]; the
        // shared line x = 1 carries 5 fine points of which the 2 midpoints are hanging
        let dim = 9 + 25 - 3 - 2;
        assert_eq!(mp.num_patchwise_dofs() - rank, dim);
    }

    #[test]
    fn continuous_functions_satisfy_constraints_and_vice_versa() {
        let mp = lshape(2, 4).split_patch(1).unwrap().split_patch(0).unwrap();
        let cm = build_constraints(&mp).unwrap();
        // coefficients of the bilinear function x*y (exactly representable; the maps are affine)
        let off = mp.dof_offsets();
        let mut u = vec![0.0; mp.num_patchwise_dofs()];
        for p in &mp.patches {
            let g = |axis: usize| -> Vec<f64> {
                // Greville abscissae reproduce linear functions
                let kv = p.spaces[axis].knot_values();
                let deg = p.spaces[axis].degree();
                (0..p.spaces[axis].dim()).map(|i| kv[i + 1..=i + deg].iter().sum::<f64>() / deg as f64).collect()
            };
            let (gu, gv) = (g(0), g(1));
            for (j, &v) in gv.iter().enumerate() {
                for (i, &s) in gu.iter().enumerate() {
                    let x = mp.eval_map(p.id, [s, v]).point;
                    u[off[p.id] + i + j * gu.len()] = x[0] * x[1];
                }
            }
        }
        let r = cm.c.mul_vec(&u).unwrap();
        assert!(r.iter().all(|v| v.abs() <= 1e-12));
        for e in &mp.topology.edges {
            for k in 0..=10 {
                let (va, vb) = eval_both(&mp, &u, e, k as f64 / 10.0);
                assert!((va - vb).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn reversed_edges_agree_at_physical_points() {
        let roots = vec![
            RootMap::rectangle(0, [0.0, 1.0], [0.0, 1.0]),
            RootMap::bilinear(1, [[2.0, 1.0], [1.0, 1.0], [2.0, 0.0], [1.0, 0.0]]),
        ];
        let interfaces =
            vec![RootInterface { root_a: 0, side_a: Side::East, root_b: 1, side_b: Side::East, reversed: true }];
        let mp = MultiPatch::new(roots, interfaces, Vec::<BoundaryLabel>::new(), 2, 4).unwrap();
        let e = &mp.topology.edges[0];
        let ta = trace_space(&mp, 0, e).unwrap();
        let tb = trace_space(&mp, 1, e).unwrap();
        let mut natural = mp.patches[1].side_dofs(Side::East);
        natural.reverse();
        assert_eq!(tb.dof_map, natural);
        // same trace coefficients must give the same function at 20 points
        let coeffs: Vec<f64> = (0..ta.space.dim()).map(|i| (i as f64 * 0.7).sin()).collect();
        for k in 0..20 {
            let tau = k as f64 / 19.0;
            let xa = mp.eval_map(0, Side::East.point(e.param_a(tau))).point;
            let xb = mp.eval_map(1, Side::East.point(e.param_b(tau))).point;
            assert!((xa[0] - xb[0]).abs() <= 1e-12 && (xa[1] - xb[1]).abs() <= 1e-12);
            let va = ta.space.eval_spline(&coeffs, tau, 0)[0];
            let vb = tb.space.eval_spline(&coeffs, tau, 0)[0];
            assert!((va - vb).abs() <= 1e-12);
        }
    }

    #[test]
    fn non_nested_traces_are_rejected() {
        let mut mp = strip(2, 4);
        // interior knots {1/2} against {1/4, 3/4}: neither contains the other
        let kv = |inner: &[D]| {
            let mut k = vec![D::ZERO; 3];
            k.extend_from_slice(inner);
            k.extend([D::ONE; 3]);
            crate::splines::KnotVector::new(2, k).unwrap()
        };
        let kv_a = kv(&[D::HALF]);
        let kv_b = kv(&[D::new(1, 2), D::new(3, 2)]);
        mp.patches[0].spaces[1] = kv_a.into();
        mp.patches[1].spaces[1] = kv_b.into();
        let err = build_constraints(&mp).unwrap_err();
        assert!(matches!(err, Error::NotNested { edge: 0, .. }));
    }
}
