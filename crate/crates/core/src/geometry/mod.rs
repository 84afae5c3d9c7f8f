//! Patch parameterizations, 4-way splitting and the combinatorial multi-patch
//! topology.
//!
//! Every patch is a dyadic sub-box of one root map. Adjacency is derived from
//! exact box arithmetic and the root interfaces only; physical coordinates are
//! never compared.

mod topology;
mod validate;

pub use topology::{
    rebuild_topology, BoundarySide, Edge, EdgeSide, Incidence, PointKey, Topology, Vertex, VertexKind, VertexLocation,
};
pub use validate::{validate_assumptions, AssumptionReport, Violation};

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::splines::{DyadicRational, KnotVector, SplineSpace};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Side {
    South,
    East,
    North,
    West,
}

impl Side {
    pub const ALL: [Side; 4] = [Side::South, Side::East, Side::North, Side::West];

    /// Parameter direction running along the side (0 = x, 1 = y).
    pub fn tangent_axis(self) -> usize {
        match self {
            Side::South | Side::North => 0,
            Side::East | Side::West => 1,
        }
    }

    pub fn normal_axis(self) -> usize {
        1 - self.tangent_axis()
    }

    /// Whether the side sits at coordinate 1 of its normal axis.
    pub fn is_upper(self) -> bool {
        matches!(self, Side::East | Side::North)
    }

    /// Point of the unit square at side parameter `s`.
    pub fn point(self, s: f64) -> [f64; 2] {
        match self {
            Side::South => [s, 0.0],
            Side::North => [s, 1.0],
            Side::West => [0.0, s],
            Side::East => [1.0, s],
        }
    }

    /// Corner index (`x + 2y` bit layout) at side parameter 0 or 1.
    pub fn corner(self, upper_end: bool) -> usize {
        let e = usize::from(upper_end);
        match self {
            Side::South => e,
            Side::North => 2 + e,
            Side::West => 2 * e,
            Side::East => 1 + 2 * e,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Side::South => "south",
            Side::East => "east",
            Side::North => "north",
            Side::West => "west",
        }
    }

    pub fn parse(s: &str) -> Result<Side> {
        match s.to_ascii_lowercase().as_str() {
            "south" | "s" => Ok(Side::South),
            "east" | "e" => Ok(Side::East),
            "north" | "n" => Ok(Side::North),
            "west" | "w" => Ok(Side::West),
            other => Err(Error::Parse { location: format!("'{other}'"), message: "unknown side".into() }),
        }
    }
}

/// The two sides adjacent to a corner (`x + 2y` layout).
pub fn corner_sides(corner: usize) -> [Side; 2] {
    [if corner & 2 == 0 { Side::South } else { Side::North }, if corner & 1 == 0 { Side::West } else { Side::East }]
}

/// Value, Jacobian and second derivatives of a geometry map at one point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MapEval {
    pub point: [f64; 2],
    /// `jacobian[r][c] = d G_r / d xi_c`.
    pub jacobian: [[f64; 2]; 2],
    /// `hessian[r] = [G_r,xx, G_r,xy, G_r,yy]`.
    pub hessian: [[f64; 3]; 2],
}

impl MapEval {
    pub fn det(&self) -> f64 {
        let j = &self.jacobian;
        j[0][0] * j[1][1] - j[0][1] * j[1][0]
    }

    /// `J^{-1}`.
    pub fn inverse_jacobian(&self) -> [[f64; 2]; 2] {
        let j = &self.jacobian;
        let d = self.det();
        [[j[1][1] / d, -j[0][1] / d], [-j[1][0] / d, j[0][0] / d]]
    }
}

/// A root geometry map: a tensor-product B-spline map from the unit square.
#[derive(Clone, Debug, PartialEq)]
pub struct RootMap {
    pub id: usize,
    spaces: [SplineSpace; 2],
    control_points: Vec<[f64; 2]>,
}

impl RootMap {
    /// Control points are ordered `i + j * n1`.
    pub fn new(id: usize, knot_vectors: [KnotVector; 2], control_points: Vec<[f64; 2]>) -> Result<Self> {
        let [k1, k2] = knot_vectors;
        let (n1, n2) = (k1.num_basis(), k2.num_basis());
        if control_points.len() != n1 * n2 {
            return Err(Error::Precondition(format!(
                "root {id}: {} control points for a {n1}x{n2} net",
                control_points.len()
            )));
        }
        Ok(Self { id, spaces: [k1.into(), k2.into()], control_points })
    }

    /// Bilinear map through corners `[p00, p10, p01, p11]`.
    pub fn bilinear(id: usize, corners: [[f64; 2]; 4]) -> Self {
        let kv = KnotVector::uniform(1, 1).expect("valid");
        Self::new(id, [kv.clone(), kv], corners.to_vec()).expect("valid")
    }

    /// Axis-parallel rectangle `[x0, x1] x [y0, y1]`.
    pub fn rectangle(id: usize, x: [f64; 2], y: [f64; 2]) -> Self {
        Self::bilinear(id, [[x[0], y[0]], [x[1], y[0]], [x[0], y[1]], [x[1], y[1]]])
    }

    pub fn spaces(&self) -> &[SplineSpace; 2] {
        &self.spaces
    }

    pub fn control_points(&self) -> &[[f64; 2]] {
        &self.control_points
    }

    pub fn eval(&self, u: f64, v: f64) -> MapEval {
        let bu = self.spaces[0].eval_basis_unchecked(u.clamp(0.0, 1.0), 2);
        let bv = self.spaces[1].eval_basis_unchecked(v.clamp(0.0, 1.0), 2);
        let n1 = self.spaces[0].dim();
        let du = bu.max_deriv.min(bu.degree);
        let dv = bv.max_deriv.min(bv.degree);
        let mut out = MapEval { point: [0.0; 2], jacobian: [[0.0; 2]; 2], hessian: [[0.0; 3]; 2] };
        for b in 0..=bv.degree {
            for a in 0..=bu.degree {
                let cp = self.control_points[bu.first_index + a + (bv.first_index + b) * n1];
                let n00 = bu.get(0, a) * bv.get(0, b);
                let n10 = bu.get(1, a) * bv.get(0, b);
                let n01 = bu.get(0, a) * bv.get(1, b);
                let n11 = bu.get(1, a) * bv.get(1, b);
                let n20 = if du >= 2 { bu.get(2, a) * bv.get(0, b) } else { 0.0 };
                let n02 = if dv >= 2 { bu.get(0, a) * bv.get(2, b) } else { 0.0 };
                for r in 0..2 {
                    out.point[r] += n00 * cp[r];
                    out.jacobian[r][0] += n10 * cp[r];
                    out.jacobian[r][1] += n01 * cp[r];
                    out.hessian[r][0] += n20 * cp[r];
                    out.hessian[r][1] += n11 * cp[r];
                    out.hessian[r][2] += n02 * cp[r];
                }
            }
        }
        out
    }
}

/// Axis-aligned dyadic sub-box of the unit square.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ParamBox {
    pub x: [DyadicRational; 2],
    pub y: [DyadicRational; 2],
}

impl ParamBox {
    pub const UNIT: ParamBox =
        ParamBox { x: [DyadicRational::ZERO, DyadicRational::ONE], y: [DyadicRational::ZERO, DyadicRational::ONE] };

    pub fn new(x: [DyadicRational; 2], y: [DyadicRational; 2]) -> Result<Self> {
        let ok = |r: [DyadicRational; 2]| r[0] < r[1] && r[0].in_unit_interval() && r[1].in_unit_interval();
        if !ok(x) || !ok(y) {
            return Err(Error::Precondition(format!("invalid box [{}, {}] x [{}, {}]", x[0], x[1], y[0], y[1])));
        }
        Ok(Self { x, y })
    }

    pub fn range(&self, axis: usize) -> [DyadicRational; 2] {
        if axis == 0 {
            self.x
        } else {
            self.y
        }
    }

    pub fn width(&self, axis: usize) -> DyadicRational {
        let r = self.range(axis);
        r[1] - r[0]
    }

    pub fn affine(&self, t: [f64; 2]) -> [f64; 2] {
        [self.x[0].to_f64() + self.width(0).to_f64() * t[0], self.y[0].to_f64() + self.width(1).to_f64() * t[1]]
    }

    /// Exact image of a dyadic local point.
    pub fn affine_exact(&self, t: [DyadicRational; 2]) -> [DyadicRational; 2] {
        [self.x[0] + self.width(0) * t[0], self.y[0] + self.width(1) * t[1]]
    }

    /// Exact corner `c` (`x + 2y` layout).
    pub fn corner(&self, c: usize) -> [DyadicRational; 2] {
        [self.x[c & 1], self.y[c >> 1]]
    }

    /// The four quarter boxes in the order (lo, lo), (hi, lo), (lo, hi), (hi, hi).
    pub fn quarters(&self) -> [ParamBox; 4] {
        let mx = self.x[0].midpoint(self.x[1]);
        let my = self.y[0].midpoint(self.y[1]);
        let xs = [[self.x[0], mx], [mx, self.x[1]]];
        let ys = [[self.y[0], my], [my, self.y[1]]];
        [
            ParamBox { x: xs[0], y: ys[0] },
            ParamBox { x: xs[1], y: ys[0] },
            ParamBox { x: xs[0], y: ys[1] },
            ParamBox { x: xs[1], y: ys[1] },
        ]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Patch {
    pub id: usize,
    pub root: usize,
    pub bbox: ParamBox,
    pub spaces: [SplineSpace; 2],
    /// Number of splits separating this patch from its root.
    pub level: u32,
}

impl Patch {
    pub fn dims(&self) -> (usize, usize) {
        (self.spaces[0].dim(), self.spaces[1].dim())
    }

    pub fn num_dofs(&self) -> usize {
        self.spaces[0].dim() * self.spaces[1].dim()
    }

    /// Local DOFs on a side, ordered along the side's parameter direction.
    pub fn side_dofs(&self, side: Side) -> Vec<usize> {
        let (n1, n2) = self.dims();
        match side {
            Side::South => (0..n1).collect(),
            Side::North => (0..n1).map(|i| i + (n2 - 1) * n1).collect(),
            Side::West => (0..n2).map(|j| j * n1).collect(),
            Side::East => (0..n2).map(|j| n1 - 1 + j * n1).collect(),
        }
    }

    /// `ĥ`: the largest knot span over both parameter directions.
    pub fn param_grid_size(&self) -> f64 {
        self.spaces[0].grid_sizes().h_max.max(self.spaces[1].grid_sizes().h_max)
    }

    pub fn param_grid_size_exact(&self) -> DyadicRational {
        self.spaces[0].grid_sizes().h_max_exact.max(self.spaces[1].grid_sizes().h_max_exact)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct RootInterface {
    pub root_a: usize,
    pub side_a: Side,
    pub root_b: usize,
    pub side_b: Side,
    /// Side parameters run in opposite directions.
    pub reversed: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BoundaryKind {
    Dirichlet,
    /// Homogeneous natural condition.
    Neumann,
}

impl BoundaryKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dirichlet" => Ok(BoundaryKind::Dirichlet),
            "neumann" => Ok(BoundaryKind::Neumann),
            other => Err(Error::Parse { location: format!("'{other}'"), message: "unknown boundary label".into() }),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            BoundaryKind::Dirichlet => "dirichlet",
            BoundaryKind::Neumann => "neumann",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct BoundaryLabel {
    pub root: usize,
    pub side: Side,
    pub kind: BoundaryKind,
}

#[derive(Clone, Debug)]
pub struct MultiPatch {
    pub roots: Vec<RootMap>,
    pub patches: Vec<Patch>,
    pub topology: Topology,
    pub root_interfaces: Vec<RootInterface>,
    pub boundary_labels: Vec<BoundaryLabel>,
}

impl MultiPatch {
    /// One patch per root, each carrying uniform spaces of degree `degree`
    /// with `spans` spans per direction.
    pub fn new(
        roots: Vec<RootMap>,
        root_interfaces: Vec<RootInterface>,
        boundary_labels: Vec<BoundaryLabel>,
        degree: usize,
        spans: u32,
    ) -> Result<Self> {
        let space = SplineSpace::uniform(degree, spans)?;
        let patches = roots
            .iter()
            .enumerate()
            .map(|(k, r)| Patch {
                id: k,
                root: r.id,
                bbox: ParamBox::UNIT,
                spaces: [space.clone(), space.clone()],
                level: 0,
            })
            .collect();
        Self::from_parts(roots, patches, root_interfaces, boundary_labels)
    }

    /// Assembles a multi-patch from explicit patches; patch ids are reset to
    /// their positions and the topology is rebuilt.
    pub fn from_parts(
        roots: Vec<RootMap>,
        mut patches: Vec<Patch>,
        root_interfaces: Vec<RootInterface>,
        boundary_labels: Vec<BoundaryLabel>,
    ) -> Result<Self> {
        for (k, r) in roots.iter().enumerate() {
            if r.id != k {
                return Err(Error::Structural(format!("root at position {k} has id {}", r.id)));
            }
        }
        for (k, p) in patches.iter_mut().enumerate() {
            p.id = k;
            if p.root >= roots.len() {
                return Err(Error::Structural(format!("patch {k} refers to missing root {}", p.root)));
            }
        }
        let mut mp = Self { roots, patches, topology: Topology::default(), root_interfaces, boundary_labels };
        mp.topology = rebuild_topology(&mp)?;
        Ok(mp)
    }

    pub fn num_patches(&self) -> usize {
        self.patches.len()
    }

    pub fn patch(&self, id: usize) -> &Patch {
        &self.patches[id]
    }

    pub fn root_of(&self, patch: usize) -> &RootMap {
        &self.roots[self.patches[patch].root]
    }

    /// Offsets of each patch's block in the flat patch-wise DOF vector; the
    /// last entry is the total.
    pub fn dof_offsets(&self) -> Vec<usize> {
        let mut off = Vec::with_capacity(self.patches.len() + 1);
        off.push(0);
        for p in &self.patches {
            off.push(off.last().unwrap() + p.num_dofs());
        }
        off
    }

    pub fn num_patchwise_dofs(&self) -> usize {
        self.patches.iter().map(Patch::num_dofs).sum()
    }

    /// `G_patch(t) = G_root(box(t))` with chain-rule derivatives.
    pub fn eval_map(&self, patch: usize, t: [f64; 2]) -> MapEval {
        let p = &self.patches[patch];
        let w = [p.bbox.width(0).to_f64(), p.bbox.width(1).to_f64()];
        let s = p.bbox.affine(t);
        let mut e = self.roots[p.root].eval(s[0], s[1]);
        for r in 0..2 {
            e.jacobian[r][0] *= w[0];
            e.jacobian[r][1] *= w[1];
            e.hessian[r][0] *= w[0] * w[0];
            e.hessian[r][1] *= w[0] * w[1];
            e.hessian[r][2] *= w[1] * w[1];
        }
        e
    }

    /// Diameter estimate `H_k`: largest distance between images of a 5x5
    /// parameter grid.
    pub fn patch_extent(&self, patch: usize) -> f64 {
        let pts: Vec<[f64; 2]> = (0..5)
            .flat_map(|j| (0..5).map(move |i| [i as f64 / 4.0, j as f64 / 4.0]))
            .map(|t| self.eval_map(patch, t).point)
            .collect();
        let mut d2: f64 = 0.0;
        for (k, a) in pts.iter().enumerate() {
            for b in &pts[k + 1..] {
                d2 = d2.max((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2));
            }
        }
        d2.sqrt()
    }

    /// Physical grid size `h_k = H_k ĥ_k`.
    pub fn physical_grid_size(&self, patch: usize) -> f64 {
        self.patch_extent(patch) * self.patches[patch].param_grid_size()
    }

    /// Replaces every patch in `marked` by its four quarters, each carrying
    /// the restriction of the dyadically refined parent spaces.
    pub fn split_patches(&self, marked: &BTreeSet<usize>) -> Result<MultiPatch> {
        if let Some(&bad) = marked.iter().find(|&&k| k >= self.patches.len()) {
            return Err(Error::Precondition(format!("patch {bad} does not exist")));
        }
        let (zero, half, one) = (DyadicRational::ZERO, DyadicRational::HALF, DyadicRational::ONE);
        let mut patches = Vec::with_capacity(self.patches.len() + 3 * marked.len());
        for p in &self.patches {
            if !marked.contains(&p.id) {
                patches.push(p.clone());
                continue;
            }
            let refined = [p.spaces[0].dyadic_refine(), p.spaces[1].dyadic_refine()];
            let halves = [[zero, half], [half, one]];
            for (q, bbox) in p.bbox.quarters().into_iter().enumerate() {
                let hx = halves[q & 1];
                let hy = halves[q >> 1];
                patches.push(Patch {
                    id: 0,
                    root: p.root,
                    bbox,
                    spaces: [
                        refined[0].restrict_to_subinterval(hx[0], hx[1])?,
                        refined[1].restrict_to_subinterval(hy[0], hy[1])?,
                    ],
                    level: p.level + 1,
                });
            }
        }
        Self::from_parts(self.roots.clone(), patches, self.root_interfaces.clone(), self.boundary_labels.clone())
    }

    pub fn split_patch(&self, patch: usize) -> Result<MultiPatch> {
        self.split_patches(&BTreeSet::from([patch]))
    }

    /// Dyadic refinement of every patch's spaces without splitting.
    pub fn refine_spaces_uniformly(&self) -> Result<MultiPatch> {
        let patches = self
            .patches
            .iter()
            .map(|p| Patch { spaces: [p.spaces[0].dyadic_refine(), p.spaces[1].dyadic_refine()], ..p.clone() })
            .collect();
        Self::from_parts(self.roots.clone(), patches, self.root_interfaces.clone(), self.boundary_labels.clone())
    }

    /// Patch-level balance: largest level difference across any edge.
    pub fn max_level_jump(&self) -> u32 {
        self.topology
            .edges
            .iter()
            .map(|e| self.patches[e.a.patch].level.abs_diff(self.patches[e.b.patch].level))
            .max()
            .unwrap_or(0)
    }

    /// Whether the physical point coincides with a corner of `patch` (tolerance 1e-12).
    pub fn patch_has_corner_at(&self, patch: usize, x: [f64; 2]) -> bool {
        (0..4).any(|c| {
            let g = self.eval_map(patch, [(c & 1) as f64, (c >> 1) as f64]).point;
            (g[0] - x[0]).hypot(g[1] - x[1]) <= 1e-12
        })
    }
}


#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;

    fn close(a: [f64; 2], b: [f64; 2]) -> bool {
        (a[0] - b[0]).abs() <= 1e-14 && (a[1] - b[1]).abs() <= 1e-14
    }

    #[test]
    fn identity_map_and_half_box() {
        let mp = unit_square(1, 1);
        let e = mp.eval_map(0, [0.3, 0.7]);
        assert!(close(e.point, [0.3, 0.7]));
        assert_eq!(e.jacobian, [[1.0, 0.0], [0.0, 1.0]]);

        let mp2 = mp.split_patch(0).unwrap();
        assert_eq!(mp2.patches[0].bbox.x, [DyadicRational::ZERO, DyadicRational::HALF]);
        let e = mp2.eval_map(0, [0.3, 0.7]);
        assert!(close(e.point, [0.15, 0.35]));
        assert_eq!(e.jacobian, [[0.5, 0.0], [0.0, 0.5]]);
        assert!((mp2.patch_extent(0) - std::f64::consts::SQRT_2 / 2.0).abs() < 1e-15);
        assert!((mp.patch_extent(0) - std::f64::consts::SQRT_2).abs() < 1e-15);
    }

    #[test]
    fn anisotropic_bilinear_jacobian_matches_finite_differences() {
        let root = RootMap::bilinear(0, [[0.0, 0.0], [2.0, 0.0], [0.0, 1.0], [2.0, 1.0]]);
        let h = 1e-6;
        for &(u, v) in &[(0.2, 0.3), (0.5, 0.5), (0.9, 0.1)] {
            let e = root.eval(u, v);
            let fx = [
                (root.eval(u + h, v).point[0] - root.eval(u - h, v).point[0]) / (2.0 * h),
                (root.eval(u + h, v).point[1] - root.eval(u - h, v).point[1]) / (2.0 * h),
            ];
            let fy = [
                (root.eval(u, v + h).point[0] - root.eval(u, v - h).point[0]) / (2.0 * h),
                (root.eval(u, v + h).point[1] - root.eval(u, v - h).point[1]) / (2.0 * h),
            ];
            assert!((e.jacobian[0][0] - 2.0).abs() < 1e-14 && e.jacobian[1][1] == 1.0);
            assert!((fx[0] - e.jacobian[0][0]).abs() <= 1e-7 * 2.0 && (fx[1] - e.jacobian[1][0]).abs() <= 1e-7);
            assert!((fy[0] - e.jacobian[0][1]).abs() <= 1e-7 && (fy[1] - e.jacobian[1][1]).abs() <= 1e-7);
        }
        let mp = MultiPatch::new(vec![root], vec![], vec![], 1, 1).unwrap();
        assert!((mp.patch_extent(0) - 5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn curved_map_second_derivatives_match_finite_differences() {
        // quadratic root with a bent control net
        let kv = KnotVector::uniform(2, 1).unwrap();
        let mut cps = Vec::new();
        for j in 0..3 {
            for i in 0..3 {
                let (x, y) = (i as f64 * 0.5, j as f64 * 0.5);
                cps.push([x + 0.1 * y * y, y + 0.2 * x * x]);
            }
        }
        let root = RootMap::new(0, [kv.clone(), kv], cps).unwrap();
        let h = 1e-5;
        let (u, v) = (0.3, 0.6);
        let e = root.eval(u, v);
        for r in 0..2 {
            let gxx = (root.eval(u + h, v).jacobian[r][0] - root.eval(u - h, v).jacobian[r][0]) / (2.0 * h);
            let gxy = (root.eval(u, v + h).jacobian[r][0] - root.eval(u, v - h).jacobian[r][0]) / (2.0 * h);
            let gyy = (root.eval(u, v + h).jacobian[r][1] - root.eval(u, v - h).jacobian[r][1]) / (2.0 * h);
            assert!((gxx - e.hessian[r][0]).abs() < 1e-7);
            assert!((gxy - e.hessian[r][1]).abs() < 1e-7);
            assert!((gyy - e.hessian[r][2]).abs() < 1e-7);
        }
    }

    #[test]
    fn split_keeps_grid_size_and_corners() {
        let mp = unit_square(1, 2);
        let split = mp.split_patch(0).unwrap();
        assert_eq!(split.num_patches(), 4);
        for p in &split.patches {
            assert_eq!(p.level, 1);
            let ks: Vec<f64> = p.spaces[0].knot_values().to_vec();
            assert_eq!(ks, vec![0.0, 0.0, 0.5, 1.0, 1.0]);
            assert_eq!(p.param_grid_size(), mp.patches[0].param_grid_size());
        }
        // child corners coincide with parent's map at matching parameters
        for (q, child) in split.patches.iter().enumerate() {
            for c in 0..4 {
                let t = [(c & 1) as f64, (c >> 1) as f64];
                let parent_t = [0.5 * (t[0] + (q & 1) as f64), 0.5 * (t[1] + (q >> 1) as f64)];
                assert_eq!(split.eval_map(child.id, t).point, mp.eval_map(0, parent_t).point);
            }
        }
    }

    #[test]
    fn split_conserves_the_parent_image() {
        let mp = lshape(2, 4);
        let split = mp.split_patch(1).unwrap();
        let children: Vec<usize> = split.patches.iter().filter(|p| p.level == 1).map(|p| p.id).collect();
        assert_eq!(children.len(), 4);
        let mut state = 12345u64;
        let mut rnd = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..200 {
            let t = [rnd(), rnd()];
            let x = mp.eval_map(1, t).point;
            let mut hits = 0;
            for &c in &children {
                let b = split.patches[c].bbox;
                let lo = [b.x[0].to_f64(), b.y[0].to_f64()];
                let w = [b.width(0).to_f64(), b.width(1).to_f64()];
                let local = [(t[0] - lo[0]) / w[0], (t[1] - lo[1]) / w[1]];
                if local.iter().all(|&s| (0.0..1.0).contains(&s)) {
                    hits += 1;
                    let y = split.eval_map(c, local).point;
                    assert!((x[0] - y[0]).abs() <= 1e-12 && (x[1] - y[1]).abs() <= 1e-12);
                }
            }
            assert_eq!(hits, 1);
        }
    }

    #[test]
    fn side_dofs_layout() {
        let mp = unit_square(2, 2);
        let p = &mp.patches[0];
        assert_eq!(p.dims(), (4, 4));
        assert_eq!(p.side_dofs(Side::South), vec![0, 1, 2, 3]);
        assert_eq!(p.side_dofs(Side::North), vec![12, 13, 14, 15]);
        assert_eq!(p.side_dofs(Side::West), vec![0, 4, 8, 12]);
        assert_eq!(p.side_dofs(Side::East), vec![3, 7, 11, 15]);
    }

    #[test]
    fn corners_and_sides_agree() {
        for s in Side::ALL {
            for end in [false, true] {
                let c = s.corner(end);
                assert!(corner_sides(c).contains(&s));
                let pt = s.point(if end { 1.0 } else { 0.0 });
                assert_eq!(pt, [(c & 1) as f64, (c >> 1) as f64]);
            }
        }
    }
}
