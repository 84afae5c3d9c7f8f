//! Built-in model problems.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::assembly::{Coefficient, ExactSolution, ScalarFn};
use crate::error::{Error, Result};
use crate::geometry::{BoundaryKind, BoundaryLabel, MultiPatch, RootInterface, RootMap, Side};

/// Root maps with their interfaces and boundary labels.
#[derive(Clone, Debug)]
pub struct GeometrySpec {
    pub roots: Vec<RootMap>,
    pub interfaces: Vec<RootInterface>,
    pub labels: Vec<BoundaryLabel>,
}

impl GeometrySpec {
    /// Initial multi-patch: one patch per root with `spans` uniform spans.
    pub fn multipatch(&self, degree: usize, spans: u32) -> Result<MultiPatch> {
        MultiPatch::new(self.roots.clone(), self.interfaces.clone(), self.labels.clone(), degree, spans)
    }

    /// Labels every side that is not on an interface as Dirichlet.
    fn with_dirichlet_boundary(roots: Vec<RootMap>, interfaces: Vec<RootInterface>) -> Self {
        let mut labels = Vec::new();
        for r in 0..roots.len() {
            for side in Side::ALL {
                let coupled = interfaces
                    .iter()
                    .any(|i| (i.root_a == r && i.side_a == side) || (i.root_b == r && i.side_b == side));
                if !coupled {
                    labels.push(BoundaryLabel { root: r, side, kind: BoundaryKind::Dirichlet });
                }
            }
        }
        Self { roots, interfaces, labels }
    }
}

/// `-∇·(ν∇u) = f` in Ω, `u = g` on the Dirichlet boundary.
#[derive(Clone)]
pub struct Problem {
    pub name: String,
    pub geometry: GeometrySpec,
    pub nu: Coefficient,
    pub f: Coefficient,
    pub g: ScalarFn,
    pub exact: Option<ExactSolution>,
}

impl fmt::Debug for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Problem")
            .field("name", &self.name)
            .field("roots", &self.geometry.roots.len())
            .field("nu", &self.nu)
            .field("f", &self.f)
            .field("exact", &self.exact.is_some())
            .finish()
    }
}

pub const BUILTIN_PROBLEMS: [&str; 4] = ["lshape_singular", "lshape_f1", "checkerboard", "square_sine"];

/// Diffusion ratio between the two materials of the checkerboard.
pub const CHECKERBOARD_CONTRAST: f64 = 1e4;

fn lshape_geometry() -> GeometrySpec {
    let roots = vec![
        RootMap::rectangle(0, [-1.0, 0.0], [-1.0, 0.0]),
        RootMap::rectangle(1, [-1.0, 0.0], [0.0, 1.0]),
        RootMap::rectangle(2, [0.0, 1.0], [0.0, 1.0]),
    ];
    let interfaces = vec![
        RootInterface { root_a: 0, side_a: Side::North, root_b: 1, side_b: Side::South, reversed: false },
        RootInterface { root_a: 1, side_a: Side::East, root_b: 2, side_b: Side::West, reversed: false },
    ];
    GeometrySpec::with_dirichlet_boundary(roots, interfaces)
}

/// Polar angle in `[0, 2π)`; the L-shape occupies `[0, 3π/2]`.
fn lshape_angle(x: [f64; 2]) -> f64 {
    let phi = x[1].atan2(x[0]);
    if phi < 0.0 {
        phi + 2.0 * PI
    } else {
        phi
    }
}

/// `r^{2/3} sin(2φ/3)`.
pub fn lshape_singular_solution(x: [f64; 2]) -> f64 {
    let r = x[0].hypot(x[1]);
    r.powf(2.0 / 3.0) * (2.0 * lshape_angle(x) / 3.0).sin()
}

fn lshape_singular_gradient(x: [f64; 2]) -> [f64; 2] {
    let r = x[0].hypot(x[1]);
    if r == 0.0 {
        return [0.0, 0.0];
    }
    let phi = lshape_angle(x);
    let c = 2.0 / 3.0 * r.powf(-1.0 / 3.0);
    let (ur, ut) = (c * (2.0 * phi / 3.0).sin(), c * (2.0 * phi / 3.0).cos());
    let (s, co) = phi.sin_cos();
    [ur * co - ut * s, ur * s + ut * co]
}

pub fn builtin_problem(name: &str) -> Result<Problem> {
    let zero: ScalarFn = Arc::new(|_| 0.0);
    let problem = match name {
        "lshape_singular" => Problem {
            name: name.into(),
            geometry: lshape_geometry(),
            nu: Coefficient::Constant(1.0),
            f: Coefficient::Constant(0.0),
            g: Arc::new(lshape_singular_solution),
            exact: Some(ExactSolution {
                u: Arc::new(lshape_singular_solution),
                grad: Arc::new(lshape_singular_gradient),
                singular_point: Some([0.0, 0.0]),
            }),
        },
        "lshape_f1" => Problem {
            name: name.into(),
            geometry: lshape_geometry(),
            nu: Coefficient::Constant(1.0),
            f: Coefficient::Constant(1.0),
            g: zero,
            exact: None,
        },
        "checkerboard" => {
            let mut roots = Vec::new();
            for j in 0..2 {
                for i in 0..2 {
                    let (x, y) = (0.5 * i as f64, 0.5 * j as f64);
                    roots.push(RootMap::rectangle(roots.len(), [x, x + 0.5], [y, y + 0.5]));
                }
            }
            let iface = |a, sa, b, sb| RootInterface { root_a: a, side_a: sa, root_b: b, side_b: sb, reversed: false };
            let interfaces = vec![
                iface(0, Side::East, 1, Side::West),
                iface(2, Side::East, 3, Side::West),
                iface(0, Side::North, 2, Side::South),
                iface(1, Side::North, 3, Side::South),
            ];
            Problem {
                name: name.into(),
                geometry: GeometrySpec::with_dirichlet_boundary(roots, interfaces),
                nu: Coefficient::PerRoot(vec![1.0, CHECKERBOARD_CONTRAST, CHECKERBOARD_CONTRAST, 1.0]),
                f: Coefficient::Constant(1.0),
                g: zero,
                exact: None,
            }
        }
        "square_sine" => {
            let u = |x: [f64; 2]| (PI * x[0]).sin() * (PI * x[1]).sin();
            Problem {
                name: name.into(),
                geometry: GeometrySpec::with_dirichlet_boundary(
                    vec![RootMap::rectangle(0, [0.0, 1.0], [0.0, 1.0])],
                    vec![],
                ),
                nu: Coefficient::Constant(1.0),
                f: Coefficient::function(move |x| 2.0 * PI * PI * u(x)),
                g: Arc::new(u),
                exact: Some(ExactSolution {
                    u: Arc::new(u),
                    grad: Arc::new(|x: [f64; 2]| {
                        [PI * (PI * x[0]).cos() * (PI * x[1]).sin(), PI * (PI * x[0]).sin() * (PI * x[1]).cos()]
                    }),
                    singular_point: None,
                }),
            }
        }
        _ => {
            return Err(Error::Config(format!(
                "unknown problem '{name}', expected one of {}",
                BUILTIN_PROBLEMS.join(", ")
            )))
        }
    };
    Ok(problem)
}
