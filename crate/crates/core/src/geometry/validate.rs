use std::collections::BTreeSet;
use std::fmt;

use super::{MultiPatch, VertexKind};
use crate::coupling::couple_edge;
use crate::error::Error;
use crate::splines::DyadicRational;

#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    /// The Jacobian determinant changes sign or vanishes on the sample grid.
    FoldedMap { patch: usize, min_det: f64, max_det: f64 },
    /// An edge is not a full side of either patch.
    EdgeNotFullSide { edge: usize },
    /// A T-junction lies on the domain boundary.
    BoundaryTJunction { vertex: usize, point: [f64; 2] },
    /// Two patches meeting at a T-junction do not share an edge.
    TJunctionWithoutSharedEdge { vertex: usize, patches: [usize; 2] },
    /// A T-junction with other than three incident patches.
    UnsupportedTJunction { vertex: usize, valence: usize },
    /// Trace spaces across an edge are not nested.
    NotNested { edge: usize, detail: String },
    /// The shared edge is shorter than `p` times the patch grid size.
    EdgeTooShort { edge: usize, patch: usize, length: DyadicRational, required: DyadicRational },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::FoldedMap { patch, min_det, max_det } => {
                write!(f, "patch {patch}: Jacobian determinant ranges over [{min_det:e}, {max_det:e}]")
            }
            Violation::EdgeNotFullSide { edge } => write!(f, "edge {edge} is not a full side of either patch"),
            Violation::BoundaryTJunction { vertex, point } => {
                write!(f, "vertex {vertex} at ({}, {}) is a T-junction on the boundary", point[0], point[1])
            }
            Violation::TJunctionWithoutSharedEdge { vertex, patches } => write!(
                f,
                "patches {} and {} meet at T-junction {vertex} without sharing an edge",
                patches[0], patches[1]
            ),
            Violation::UnsupportedTJunction { vertex, valence } => {
                write!(f, "T-junction {vertex} has {valence} incident patches (3 supported)")
            }
            Violation::NotNested { edge, detail } => write!(f, "edge {edge}: {detail}"),
            Violation::EdgeTooShort { edge, patch, length, required } => {
                write!(f, "edge {edge}: length {length} on patch {patch} is below {required}")
            }
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct AssumptionReport {
    pub violations: Vec<Violation>,
}

impl AssumptionReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for AssumptionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "all assumptions hold");
        }
        for v in &self.violations {
            writeln!(f, "{v}")?;
        }
        Ok(())
    }
}

const JACOBIAN_SAMPLES: usize = 10;

/// Checks the structural assumptions of the coupling construction for
/// degree `p`; violations are collected, not raised.
pub fn validate_assumptions(mp: &MultiPatch, p: usize) -> AssumptionReport {
    let mut violations = Vec::new();
    let topo = &mp.topology;

    for patch in &mp.patches {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for j in 0..JACOBIAN_SAMPLES {
            for i in 0..JACOBIAN_SAMPLES {
                let t = [i as f64 / (JACOBIAN_SAMPLES - 1) as f64, j as f64 / (JACOBIAN_SAMPLES - 1) as f64];
                let d = mp.eval_map(patch.id, t).det();
                lo = lo.min(d);
                hi = hi.max(d);
            }
        }
        if !(lo > 0.0 || hi < 0.0) {
            violations.push(Violation::FoldedMap { patch: patch.id, min_det: lo, max_det: hi });
        }
    }

    for e in &topo.edges {
        if !e.a.is_full_side() && !e.b.is_full_side() {
            violations.push(Violation::EdgeNotFullSide { edge: e.id });
        }
    }

    let shared: BTreeSet<(usize, usize)> = topo.edges.iter().map(|e| (e.a.patch, e.b.patch)).collect();
    for v in topo.t_junctions() {
        if v.on_boundary {
            violations.push(Violation::BoundaryTJunction { vertex: v.id, point: v.point });
        }
        let patches: Vec<usize> = v.incident.iter().map(|i| i.patch).collect::<BTreeSet<_>>().into_iter().collect();
        if patches.len() != 3 && !v.on_boundary {
            violations.push(Violation::UnsupportedTJunction { vertex: v.id, valence: patches.len() });
        }
        for (k, &a) in patches.iter().enumerate() {
            for &b in &patches[k + 1..] {
                if !shared.contains(&(a, b)) {
                    violations.push(Violation::TJunctionWithoutSharedEdge { vertex: v.id, patches: [a, b] });
                }
            }
        }
    }
    debug_assert!(topo.vertices.iter().all(|v| (v.kind == VertexKind::TJunction)
        == v.incident.iter().any(|i| matches!(i.location, super::VertexLocation::OnSide(_)))));

    for e in &topo.edges {
        if let Err(err) = couple_edge(mp, e) {
            let detail = match err {
                Error::NotNested { detail, .. } => detail,
                other => other.to_string(),
            };
            violations.push(Violation::NotNested { edge: e.id, detail });
        }
        for s in [&e.a, &e.b] {
            let required = DyadicRational::from_int(p as i64) * mp.patches[s.patch].param_grid_size_exact();
            if s.length() < required {
                violations.push(Violation::EdgeTooShort { edge: e.id, patch: s.patch, length: s.length(), required });
            }
        }
    }

    AssumptionReport { violations }
}
