use std::collections::{BTreeMap, BTreeSet, HashMap};

use super::{corner_sides, BoundaryKind, MultiPatch, Patch, Side};
use crate::error::{Error, Result};
use crate::splines::DyadicRational as D;

/// One patch's share of an edge: the sub-interval of its side, in the side's
/// own parameter.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EdgeSide {
    pub patch: usize,
    pub side: Side,
    pub interval: [D; 2],
}

impl EdgeSide {
    pub fn length(&self) -> D {
        self.interval[1] - self.interval[0]
    }

    pub fn is_full_side(&self) -> bool {
        self.interval == [D::ZERO, D::ONE]
    }
}

/// Positive-length intersection of two patch sides. The edge coordinate
/// `tau in [0, 1]` runs along `a`'s parameter direction.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Edge {
    pub id: usize,
    pub a: EdgeSide,
    pub b: EdgeSide,
    pub reversed: bool,
}

impl Edge {
    pub fn side_of(&self, patch: usize) -> Option<&EdgeSide> {
        if self.a.patch == patch {
            Some(&self.a)
        } else if self.b.patch == patch {
            Some(&self.b)
        } else {
            None
        }
    }

    /// Side parameter of `a` at edge coordinate `tau`.
    pub fn param_a(&self, tau: f64) -> f64 {
        let [lo, hi] = self.a.interval;
        lo.to_f64() + tau * (hi - lo).to_f64()
    }

    /// Side parameter of `b` at edge coordinate `tau`.
    pub fn param_b(&self, tau: f64) -> f64 {
        let [lo, hi] = self.b.interval;
        if self.reversed {
            hi.to_f64() - tau * (hi - lo).to_f64()
        } else {
            lo.to_f64() + tau * (hi - lo).to_f64()
        }
    }

    /// Edge coordinate of an exact parameter on `a`'s side.
    pub fn tau_from_a(&self, s: D) -> Option<D> {
        (s - self.a.interval[0]).checked_div(self.a.length())
    }

    /// Edge coordinate of an exact parameter on `b`'s side.
    pub fn tau_from_b(&self, s: D) -> Option<D> {
        let t = (s - self.b.interval[0]).checked_div(self.b.length())?;
        Some(if self.reversed { D::ONE - t } else { t })
    }
}

/// Identity of a point of the multi-patch, independent of which patch it is
/// seen from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PointKey {
    /// Strictly inside a root.
    Interior { root: usize, x: D, y: D },
    /// Strictly inside a root side, expressed on the canonical side of an interface.
    OnRootSide { root: usize, side: Side, t: D },
    /// Root corner class after gluing across interfaces.
    RootCorner { class: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum VertexLocation {
    /// Corner in `x + 2y` layout.
    Corner(usize),
    /// Strictly inside the given side.
    OnSide(Side),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Incidence {
    pub patch: usize,
    pub location: VertexLocation,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VertexKind {
    /// Every incident patch has a corner here.
    Corner,
    /// The point lies strictly inside some patch side.
    TJunction,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Vertex {
    pub id: usize,
    pub key: PointKey,
    pub point: [f64; 2],
    pub incident: Vec<Incidence>,
    pub kind: VertexKind,
    pub on_boundary: bool,
}

impl Vertex {
    /// Number of distinct incident patches.
    pub fn valence(&self) -> usize {
        self.incident.iter().map(|i| i.patch).collect::<BTreeSet<_>>().len()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BoundarySide {
    pub patch: usize,
    pub side: Side,
    pub root_side: Side,
    pub kind: Option<BoundaryKind>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Topology {
    pub edges: Vec<Edge>,
    pub vertices: Vec<Vertex>,
    pub boundary_sides: Vec<BoundarySide>,
}

impl Topology {
    pub fn interior_vertices(&self) -> impl Iterator<Item = &Vertex> {
        self.vertices.iter().filter(|v| !v.on_boundary)
    }

    pub fn t_junctions(&self) -> impl Iterator<Item = &Vertex> {
        self.vertices.iter().filter(|v| v.kind == VertexKind::TJunction)
    }

    pub fn edges_of(&self, patch: usize) -> impl Iterator<Item = &Edge> + '_ {
        self.edges.iter().filter(move |e| e.a.patch == patch || e.b.patch == patch)
    }

    pub fn is_boundary_side(&self, patch: usize, side: Side) -> bool {
        self.boundary_sides.iter().any(|b| b.patch == patch && b.side == side)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
enum LineKey {
    /// Line `coord` of the given normal axis strictly inside a root.
    Interior {
        root: usize,
        normal_axis: usize,
        coord: D,
    },
    RootSide {
        root: usize,
        side: Side,
    },
}

#[derive(Clone, Copy, Debug)]
struct Segment {
    patch: usize,
    side: Side,
    /// Interval on the line's canonical parameter.
    canonical: [D; 2],
    flipped: bool,
    /// Interval of the patch side in its root's parameter.
    own: [D; 2],
}

/// Interface lookup: maps a root side to its canonical representative.
struct Gluing {
    partner: HashMap<(usize, Side), (usize, Side, bool)>,
}

impl Gluing {
    fn new(mp: &MultiPatch) -> Result<Self> {
        let n = mp.roots.len();
        let mut partner = HashMap::new();
        let mut used = BTreeSet::new();
        for (k, it) in mp.root_interfaces.iter().enumerate() {
            if it.root_a >= n || it.root_b >= n {
                return Err(Error::Structural(format!("interface {k} refers to a missing root")));
            }
            if (it.root_a, it.side_a) == (it.root_b, it.side_b) {
                return Err(Error::Structural(format!("interface {k} glues a side to itself")));
            }
            for key in [(it.root_a, it.side_a), (it.root_b, it.side_b)] {
                if !used.insert(key) {
                    return Err(Error::Structural(format!(
                        "root {} side {} appears in more than one interface",
                        key.0,
                        key.1.name()
                    )));
                }
            }
            partner.insert((it.root_b, it.side_b), (it.root_a, it.side_a, it.reversed));
            partner.insert((it.root_a, it.side_a), (it.root_a, it.side_a, false));
        }
        for l in &mp.boundary_labels {
            if l.root >= n {
                return Err(Error::Structural(format!("boundary label refers to missing root {}", l.root)));
            }
            if used.contains(&(l.root, l.side)) {
                return Err(Error::Structural(format!(
                    "root {} side {} is both an interface and a labelled boundary",
                    l.root,
                    l.side.name()
                )));
            }
        }
        Ok(Self { partner })
    }

    fn is_glued(&self, root: usize, side: Side) -> bool {
        self.partner.contains_key(&(root, side))
    }

    fn canonical(&self, root: usize, side: Side) -> (usize, Side, bool) {
        self.partner.get(&(root, side)).copied().unwrap_or((root, side, false))
    }
}

fn flip(iv: [D; 2]) -> [D; 2] {
    [D::ONE - iv[1], D::ONE - iv[0]]
}

fn root_side_at(normal_axis: usize, upper: bool) -> Side {
    match (normal_axis, upper) {
        (0, false) => Side::West,
        (0, true) => Side::East,
        (_, false) => Side::South,
        (_, true) => Side::North,
    }
}

fn segment(gluing: &Gluing, p: &Patch, side: Side) -> (LineKey, Segment) {
    let n = side.normal_axis();
    let own = p.bbox.range(side.tangent_axis());
    let coord = p.bbox.range(n)[usize::from(side.is_upper())];
    if coord == D::ZERO || coord == D::ONE {
        let (root, rs, flipped) = gluing.canonical(p.root, root_side_at(n, coord == D::ONE));
        let canonical = if flipped { flip(own) } else { own };
        (LineKey::RootSide { root, side: rs }, Segment { patch: p.id, side, canonical, flipped, own })
    } else {
        (
            LineKey::Interior { root: p.root, normal_axis: n, coord },
            Segment { patch: p.id, side, canonical: own, flipped: false, own },
        )
    }
}

/// Converts an interval on the canonical line parameter to the patch side's
/// local parameter.
fn to_local(seg: &Segment, iv: [D; 2]) -> Result<[D; 2]> {
    let root_iv = if seg.flipped { flip(iv) } else { iv };
    let len = seg.own[1] - seg.own[0];
    let map = |t: D| {
        (t - seg.own[0])
            .checked_div(len)
            .ok_or_else(|| Error::Structural(format!("patch {} has a non-dyadic side length", seg.patch)))
    };
    Ok([map(root_iv[0])?, map(root_iv[1])?])
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, i: usize) -> usize {
        let mut r = i;
        while self.0[r] != r {
            r = self.0[r];
        }
        let mut j = i;
        while self.0[j] != r {
            let next = self.0[j];
            self.0[j] = r;
            j = next;
        }
        r
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Identifies points across roots.
struct PointKeys {
    gluing: Gluing,
    corner_class: Vec<usize>,
}

impl PointKeys {
    fn new(gluing: Gluing, n_roots: usize, mp: &MultiPatch) -> Self {
        let mut uf = UnionFind((0..4 * n_roots).collect());
        for it in &mp.root_interfaces {
            for end in [false, true] {
                let other = end != it.reversed;
                uf.union(4 * it.root_a + it.side_a.corner(end), 4 * it.root_b + it.side_b.corner(other));
            }
        }
        let corner_class = (0..4 * n_roots).map(|i| uf.find(i)).collect();
        Self { gluing, corner_class }
    }

    fn key(&self, root: usize, pt: [D; 2]) -> PointKey {
        let lo = [pt[0] == D::ZERO, pt[1] == D::ZERO];
        let hi = [pt[0] == D::ONE, pt[1] == D::ONE];
        let on = [lo[0] || hi[0], lo[1] || hi[1]];
        match (on[0], on[1]) {
            (true, true) => {
                let c = usize::from(hi[0]) + 2 * usize::from(hi[1]);
                PointKey::RootCorner { class: self.corner_class[4 * root + c] }
            }
            (false, false) => PointKey::Interior { root, x: pt[0], y: pt[1] },
            (true, false) | (false, true) => {
                let normal = if on[0] { 0 } else { 1 };
                let side = root_side_at(normal, hi[normal]);
                let t = pt[1 - normal];
                let (r, s, flipped) = self.gluing.canonical(root, side);
                PointKey::OnRootSide { root: r, side: s, t: if flipped { D::ONE - t } else { t } }
            }
        }
    }
}

/// Recomputes edges, vertices and boundary sides from the patch boxes and the
/// root interfaces.
pub fn rebuild_topology(mp: &MultiPatch) -> Result<Topology> {
    let gluing = Gluing::new(mp)?;
    for p in &mp.patches {
        for axis in 0..2 {
            if p.bbox.width(axis).power_of_two_exponent().is_none() {
                return Err(Error::Structural(format!("patch {} box width is not a power of two", p.id)));
            }
        }
    }

    let mut lines: BTreeMap<LineKey, Vec<Segment>> = BTreeMap::new();
    for p in &mp.patches {
        for side in Side::ALL {
            let (key, seg) = segment(&gluing, p, side);
            lines.entry(key).or_default().push(seg);
        }
    }

    let mut edges = Vec::new();
    let mut boundary_sides = Vec::new();
    for (key, segs) in &lines {
        if let LineKey::RootSide { root, side } = *key {
            if !gluing.is_glued(root, side) {
                let kind = mp.boundary_labels.iter().find(|l| l.root == root && l.side == side).map(|l| l.kind);
                for s in segs {
                    boundary_sides.push(BoundarySide { patch: s.patch, side: s.side, root_side: side, kind });
                }
                continue;
            }
        }
        for (i, s) in segs.iter().enumerate() {
            for t in &segs[i + 1..] {
                if s.patch == t.patch {
                    continue;
                }
                let lo = s.canonical[0].max(t.canonical[0]);
                let hi = s.canonical[1].min(t.canonical[1]);
                if lo >= hi {
                    continue;
                }
                let (a, b) = if s.patch < t.patch { (s, t) } else { (t, s) };
                let a_iv = to_local(a, [lo, hi])?;
                let b_iv = to_local(b, [lo, hi])?;
                edges.push(Edge {
                    id: 0,
                    a: EdgeSide { patch: a.patch, side: a.side, interval: a_iv },
                    b: EdgeSide { patch: b.patch, side: b.side, interval: b_iv },
                    reversed: a.flipped != b.flipped,
                });
            }
        }
    }
    edges.sort_by_key(|e| (e.a.patch, e.a.side, e.a.interval[0], e.b.patch));
    for (k, e) in edges.iter_mut().enumerate() {
        e.id = k;
    }
    boundary_sides.sort_by_key(|b| (b.patch, b.side));

    // each non-boundary side must be tiled exactly by its edges
    let mut covered: HashMap<(usize, Side), D> = HashMap::new();
    for e in &edges {
        for s in [&e.a, &e.b] {
            let c = covered.entry((s.patch, s.side)).or_insert(D::ZERO);
            *c = *c + s.length();
        }
    }
    let boundary: BTreeSet<(usize, Side)> = boundary_sides.iter().map(|b| (b.patch, b.side)).collect();
    for p in &mp.patches {
        for side in Side::ALL {
            if boundary.contains(&(p.id, side)) {
                continue;
            }
            let c = covered.get(&(p.id, side)).copied().unwrap_or(D::ZERO);
            if c != D::ONE {
                return Err(Error::Structural(format!(
                    "side {} of patch {} is covered to length {c} by interfaces",
                    side.name(),
                    p.id
                )));
            }
        }
    }

    let keys = PointKeys::new(gluing, mp.roots.len(), mp);
    let mut incidences: BTreeMap<PointKey, BTreeSet<Incidence>> = BTreeMap::new();
    let mut root_coords: BTreeMap<PointKey, (usize, [D; 2])> = BTreeMap::new();
    let mut add = |root: usize, pt: [D; 2], inc: Incidence| {
        let k = keys.key(root, pt);
        root_coords.entry(k).or_insert((root, pt));
        incidences.entry(k).or_default().insert(inc);
    };
    for p in &mp.patches {
        for c in 0..4 {
            add(p.root, p.bbox.corner(c), Incidence { patch: p.id, location: VertexLocation::Corner(c) });
        }
    }
    for e in &edges {
        for s in [&e.a, &e.b] {
            let p = &mp.patches[s.patch];
            for t in s.interval {
                if t == D::ZERO || t == D::ONE {
                    continue;
                }
                let mut local = [D::ZERO; 2];
                local[s.side.tangent_axis()] = t;
                local[s.side.normal_axis()] = if s.side.is_upper() { D::ONE } else { D::ZERO };
                add(
                    p.root,
                    p.bbox.affine_exact(local),
                    Incidence { patch: p.id, location: VertexLocation::OnSide(s.side) },
                );
            }
        }
    }

    let vertices = incidences
        .into_iter()
        .enumerate()
        .map(|(id, (key, inc))| {
            let incident: Vec<Incidence> = inc.into_iter().collect();
            let kind = if incident.iter().any(|i| matches!(i.location, VertexLocation::OnSide(_))) {
                VertexKind::TJunction
            } else {
                VertexKind::Corner
            };
            let on_boundary = incident.iter().any(|i| match i.location {
                VertexLocation::Corner(c) => corner_sides(c).iter().any(|&s| boundary.contains(&(i.patch, s))),
                VertexLocation::OnSide(s) => boundary.contains(&(i.patch, s)),
            });
            let (root, pt) = root_coords[&key];
            let point = mp.roots[root].eval(pt[0].to_f64(), pt[1].to_f64()).point;
            Vertex { id, key, point, incident, kind, on_boundary }
        })
        .collect();

    Ok(Topology { edges, vertices, boundary_sides })
}

#[cfg(test)]
mod tests {
    use super::super::fixtures::*;
    use super::super::{BoundaryLabel, MultiPatch, RootInterface, RootMap};
    use super::*;

    #[test]
    fn single_square_has_no_interfaces() {
        let mp = unit_square(2, 4);
        assert!(mp.topology.edges.is_empty());
        assert_eq!(mp.topology.boundary_sides.len(), 4);
        assert_eq!(mp.topology.vertices.len(), 4);
        assert!(mp.topology.vertices.iter().all(|v| v.on_boundary));
    }

    #[test]
    fn split_square_has_four_edges_and_one_interior_vertex() {
        let mp = unit_square(1, 2).split_patch(0).unwrap();
        let t = &mp.topology;
        assert_eq!(t.edges.len(), 4);
        assert!(t.edges.iter().all(|e| e.a.is_full_side() && e.b.is_full_side() && !e.reversed));
        let interior: Vec<_> = t.interior_vertices().collect();
        assert_eq!(interior.len(), 1);
        assert_eq!(interior[0].valence(), 4);
        assert_eq!(interior[0].kind, VertexKind::Corner);
        assert_eq!(interior[0].point, [0.5, 0.5]);
        assert_eq!(t.boundary_sides.len(), 8);
    }

    #[test]
    fn lshape_initial_topology() {
        let mp = lshape(2, 4);
        let t = &mp.topology;
        assert_eq!(t.edges.len(), 2);
        assert_eq!(t.interior_vertices().count(), 0);
        assert_eq!(t.t_junctions().count(), 0);
        let reentrant = t.vertices.iter().find(|v| v.point == [0.0, 0.0]).unwrap();
        assert_eq!(reentrant.valence(), 3);
        assert!(reentrant.on_boundary);
        assert_eq!(t.boundary_sides.len(), 8);
    }

    #[test]
    fn strip_with_one_split_has_a_t_junction() {
        let mp = strip(2, 4).split_patch(1).unwrap();
        let t = &mp.topology;
        // R0 east meets two children; four edges among the children
        assert_eq!(t.edges.len(), 6);
        let tj: Vec<_> = t.t_junctions().collect();
        assert_eq!(tj.len(), 1);
        assert_eq!(tj[0].point, [1.0, 0.5]);
        assert_eq!(tj[0].valence(), 3);
        assert!(!tj[0].on_boundary);
        let interior: Vec<_> = t.interior_vertices().collect();
        assert_eq!(interior.len(), 2);
        let coarse_edges: Vec<_> = t.edges_of(0).collect();
        assert_eq!(coarse_edges.len(), 2);
        let halves: BTreeSet<_> = coarse_edges.iter().map(|e| e.a.interval).collect();
        assert_eq!(halves, BTreeSet::from([[D::ZERO, D::HALF], [D::HALF, D::ONE]]));
        assert!(coarse_edges.iter().all(|e| e.b.is_full_side()));
    }

    #[test]
    fn reversed_interface_is_detected_and_parameters_match() {
        // root 1 is root 0 shifted right and rotated by 180 degrees
        let roots = vec![
            RootMap::rectangle(0, [0.0, 1.0], [0.0, 1.0]),
            RootMap::bilinear(1, [[2.0, 1.0], [1.0, 1.0], [2.0, 0.0], [1.0, 0.0]]),
        ];
        let interfaces =
            vec![RootInterface { root_a: 0, side_a: Side::East, root_b: 1, side_b: Side::East, reversed: true }];
        let mp = MultiPatch::new(roots, interfaces, Vec::<BoundaryLabel>::new(), 2, 4).unwrap();
        let mp = mp.split_patch(1).unwrap();
        for e in &mp.topology.edges {
            for k in 0..=8 {
                let tau = k as f64 / 8.0;
                let xa = mp.eval_map(e.a.patch, e.a.side.point(e.param_a(tau))).point;
                let xb = mp.eval_map(e.b.patch, e.b.side.point(e.param_b(tau))).point;
                assert!((xa[0] - xb[0]).abs() < 1e-14 && (xa[1] - xb[1]).abs() < 1e-14, "edge {e:?}");
            }
        }
        assert!(mp.topology.edges.iter().any(|e| e.reversed));
    }

    #[test]
    fn edges_match_physically_for_random_splits() {
        let mut mp = lshape(1, 2);
        let mut state = 7u64;
        for _ in 0..6 {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1);
            let k = (state >> 33) as usize % mp.num_patches();
            mp = mp.split_patch(k).unwrap();
        }
        for e in &mp.topology.edges {
            for k in 0..=4 {
                let tau = k as f64 / 4.0;
                let xa = mp.eval_map(e.a.patch, e.a.side.point(e.param_a(tau))).point;
                let xb = mp.eval_map(e.b.patch, e.b.side.point(e.param_b(tau))).point;
                assert!((xa[0] - xb[0]).abs() < 1e-14 && (xa[1] - xb[1]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn duplicate_interface_is_structural_error() {
        let mp = strip(1, 1);
        let mut its = mp.root_interfaces.clone();
        its.push(its[0]);
        let err = MultiPatch::from_parts(mp.roots.clone(), mp.patches.clone(), its, mp.boundary_labels.clone());
        assert!(matches!(err, Err(Error::Structural(_))));
    }
}
