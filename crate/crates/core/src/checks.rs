//! Invariant checks shared by the CLI `verify` command and the test suites.

use std::sync::Arc;

use rand::{Rng, SeedableRng};

use crate::assembly::{apply_dirichlet, assemble_global, compute_errors, Coefficient, ErrorNorms, ExactSolution};
use crate::basis::{nullspace_basis, GlobalBasis};
use crate::coupling::build_constraints;
use crate::error::Result;
use crate::field::physical_basis;
use crate::geometry::MultiPatch;
use crate::solver::solve_spd;

/// Largest disagreement between the two one-sided evaluations of random
/// conforming functions at random points of every edge.
pub fn interface_mismatch(
    mp: &MultiPatch,
    basis: &GlobalBasis,
    points_per_edge: usize,
    vectors: usize,
    seed: u64,
) -> Result<f64> {
    let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
    let fields: Vec<Vec<f64>> = (0..vectors)
        .map(|_| {
            let u: Vec<f64> = (0..basis.n_global()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            basis.to_patchwise(&u)
        })
        .collect::<Result<_>>()?;
    let off = mp.dof_offsets();
    let mut worst = 0.0f64;
    for e in &mp.topology.edges {
        for _ in 0..points_per_edge {
            let tau: f64 = rng.gen();
            let pa = physical_basis(mp, e.a.patch, e.a.side.point(e.param_a(tau)), false)?;
            let pb = physical_basis(mp, e.b.patch, e.b.side.point(e.param_b(tau)), false)?;
            for u in &fields {
                let va = pa.combine(&u[off[e.a.patch]..off[e.a.patch + 1]]).value;
                let vb = pb.combine(&u[off[e.b.patch]..off[e.b.patch + 1]]).value;
                worst = worst.max((va - vb).abs());
            }
        }
    }
    Ok(worst)
}

/// `1 + 2x - 3y`, reproduced exactly by every conforming space.
pub fn patch_test_solution() -> ExactSolution {
    ExactSolution {
        u: Arc::new(|x: [f64; 2]| 1.0 + 2.0 * x[0] - 3.0 * x[1]),
        grad: Arc::new(|_| [2.0, -3.0]),
        singular_point: None,
    }
}

/// Solves `-Δu = 0` with the linear patch-test data and returns the errors.
pub fn patch_test(mp: &MultiPatch) -> Result<ErrorNorms> {
    let cm = build_constraints(mp)?;
    let basis = nullspace_basis(&cm)?;
    let exact = patch_test_solution();
    let system = assemble_global(mp, &basis, &Coefficient::Constant(1.0), &Coefficient::Constant(0.0))?;
    let system = apply_dirichlet(system, mp, &basis, &exact.u)?;
    let (a, b) = system.reduced()?;
    let (x, _) = solve_spd(&a, &b, 1e-14, None)?;
    let u_pw = basis.to_patchwise(&system.expand(&x))?;
    compute_errors(mp, &u_pw, &exact, 0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::fixtures::*;

    #[test]
    fn continuity_holds_on_a_t_junction_layout() {
        let mp = strip(2, 4).split_patch(1).unwrap();
        let basis = nullspace_basis(&build_constraints(&mp).unwrap()).unwrap();
        assert!(interface_mismatch(&mp, &basis, 50, 20, 1).unwrap() <= 1e-10);
    }

    #[test]
    fn broken_basis_is_discontinuous() {
        let mp = strip(2, 4).split_patch(1).unwrap();
        let n = mp.num_patchwise_dofs();
        let identity = GlobalBasis {
            b: crate::sparse::SparseMatrix::identity(n),
            eliminated_dofs: vec![],
            kept_dofs: (0..n).collect(),
            dof_offsets: mp.dof_offsets(),
        };
        assert!(interface_mismatch(&mp, &identity, 10, 3, 1).unwrap() > 1e-3);
    }

    #[test]
    fn patch_test_on_lshape_with_splits() {
        let mp = lshape(2, 4).split_patch(0).unwrap();
        let e = patch_test(&mp).unwrap();
        assert!(e.h1_semi <= 1e-10 && e.l2 <= 1e-10, "{e:?}");
    }
}
