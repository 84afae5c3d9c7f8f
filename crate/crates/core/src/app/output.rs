//! Convergence table and mesh files.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::adapt::AdaptiveState;
use crate::error::{Error, Result};
use crate::geometry::MultiPatch;

pub const CONVERGENCE_HEADER: &str = "level,n_dof,n_patches,h1_error,l2_error,estimator,solver_iters";

/// Samples per knot span along each mesh line.
pub const SAMPLES_PER_SPAN: usize = 16;

/// 17 significant digits.
fn real(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn convergence_row(s: &AdaptiveState) -> String {
    let (h1, l2) = match &s.errors {
        Some(e) => (real(e.h1_semi), real(e.l2)),
        None => (String::new(), String::new()),
    };
    format!("{},{},{},{},{},{},{}", s.level, s.n_dof, s.mp.num_patches(), h1, l2, real(s.eta.total), s.solve.iterations)
}

/// A physical knot line or patch boundary line.
#[derive(Clone, Debug, PartialEq)]
pub struct Polyline {
    pub patch: usize,
    pub level: u32,
    pub points: Vec<[f64; 2]>,
}

/// Every knot line of every patch, boundaries included, sampled
/// [`SAMPLES_PER_SPAN`] times per span.
pub fn mesh_polylines(mp: &MultiPatch) -> Vec<Polyline> {
    let mut lines = Vec::new();
    for (k, patch) in mp.patches.iter().enumerate() {
        for axis in 0..2 {
            let along = 1 - axis;
            let breaks: Vec<f64> = patch.spaces[along].knot_vector().breakpoints().iter().map(|b| b.to_f64()).collect();
            let mut ts = Vec::new();
            for w in breaks.windows(2) {
                for i in 0..SAMPLES_PER_SPAN {
                    ts.push(w[0] + (w[1] - w[0]) * i as f64 / SAMPLES_PER_SPAN as f64);
                }
            }
            ts.push(*breaks.last().expect("a knot vector has breakpoints"));
            for c in patch.spaces[axis].knot_vector().breakpoints() {
                let c = c.to_f64();
                let points = ts
                    .iter()
                    .map(|&t| {
                        let mut u = [0.0; 2];
                        u[axis] = c;
                        u[along] = t;
                        mp.eval_map(k, u).point
                    })
                    .collect();
                lines.push(Polyline { patch: k, level: patch.level, points });
            }
        }
    }
    lines
}

pub fn write_segments<W: Write>(lines: &[Polyline], mut w: W) -> std::io::Result<()> {
    writeln!(w, "x0,y0,x1,y1")?;
    for l in lines {
        for s in l.points.windows(2) {
            writeln!(w, "{},{},{},{}", real(s[0][0]), real(s[0][1]), real(s[1][0]), real(s[1][1]))?;
        }
    }
    w.flush()
}

/// Legacy ASCII unstructured grid of poly-lines with patch id and level as
/// cell data.
pub fn write_vtk<W: Write>(lines: &[Polyline], title: &str, mut w: W) -> std::io::Result<()> {
    let n_points: usize = lines.iter().map(|l| l.points.len()).sum();
    writeln!(w, "# vtk DataFile Version 3.0")?;
    writeln!(w, "{}", title.replace('\n', " "))?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(w, "POINTS {n_points} double")?;
    for l in lines {
        for p in &l.points {
            writeln!(w, "{} {} 0", real(p[0]), real(p[1]))?;
        }
    }
    writeln!(w, "CELLS {} {}", lines.len(), lines.len() + n_points)?;
    let mut next = 0;
    for l in lines {
        write!(w, "{}", l.points.len())?;
        for i in 0..l.points.len() {
            write!(w, " {}", next + i)?;
        }
        writeln!(w)?;
        next += l.points.len();
    }
    writeln!(w, "CELL_TYPES {}", lines.len())?;
    for _ in lines {
        writeln!(w, "4")?;
    }
    writeln!(w, "CELL_DATA {}", lines.len())?;
    writeln!(w, "SCALARS patch int 1")?;
    writeln!(w, "LOOKUP_TABLE default")?;
    for l in lines {
        writeln!(w, "{}", l.patch)?;
    }
    writeln!(w, "SCALARS level int 1")?;
    writeln!(w, "LOOKUP_TABLE default")?;
    for l in lines {
        writeln!(w, "{}", l.level)?;
    }
    w.flush()
}

pub(crate) fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

/// Writes `<stem>.csv` (segments) and `<stem>.vtk` into `dir`.
pub fn export_mesh(mp: &MultiPatch, dir: &Path, stem: &str) -> Result<[PathBuf; 2]> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let lines = mesh_polylines(mp);
    let csv = dir.join(format!("{stem}.csv"));
    let vtk = dir.join(format!("{stem}.vtk"));
    write_segments(&lines, create(&csv)?).map_err(|e| Error::io(&csv, e))?;
    write_vtk(&lines, &format!("mpiga mesh {stem}"), create(&vtk)?).map_err(|e| Error::io(&vtk, e))?;
    Ok([csv, vtk])
}

pub fn mesh_stem(level: usize) -> String {
    format!("mesh_level_{level:03}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::fixtures::*;

    fn has_segment_on(lines: &[Polyline], pred: impl Fn([f64; 2]) -> bool) -> bool {
        lines.iter().any(|l| l.points.iter().all(|&p| pred(p)))
    }

    #[test]
    fn single_patch_lines_include_midlines() {
        let mp = unit_square(1, 2);
        let lines = mesh_polylines(&mp);
        assert_eq!(lines.len(), 6);
        assert!(has_segment_on(&lines, |p| (p[0] - 0.5).abs() < 1e-15));
        assert!(has_segment_on(&lines, |p| (p[1] - 0.5).abs() < 1e-15));
        assert!(lines.iter().all(|l| l.points.len() == 2 * SAMPLES_PER_SPAN + 1));
        let mut buf = Vec::new();
        write_segments(&lines, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + 6 * 2 * SAMPLES_PER_SPAN);
        assert!(text.contains("5.0000000000000000e-1,0.0000000000000000e0,5.0000000000000000e-1,3.1250000000000000e-2"));
    }

    #[test]
    fn t_junction_layout_has_every_patch_boundary() {
        let mp = strip(2, 4).split_patch(1).unwrap();
        let lines = mesh_polylines(&mp);
        for k in 0..mp.num_patches() {
            for t in [[0.5, 0.0], [1.0, 0.5], [0.5, 1.0], [0.0, 0.5]] {
                let x = mp.eval_map(k, t).point;
                let found = lines.iter().filter(|l| l.patch == k).any(|l| {
                    l.points.windows(2).any(|s| {
                        let d = |a: [f64; 2], b: [f64; 2]| (a[0] - b[0]).hypot(a[1] - b[1]);
                        (d(s[0], x) + d(x, s[1]) - d(s[0], s[1])).abs() < 1e-12
                    })
                });
                assert!(found, "patch {k} side point {x:?}");
            }
        }
    }

    #[test]
    fn vtk_counts_are_consistent() {
        let mp = strip(1, 2);
        let lines = mesh_polylines(&mp);
        let mut buf = Vec::new();
        write_vtk(&lines, "t", &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let n_points: usize = lines.iter().map(|l| l.points.len()).sum();
        assert!(text.contains(&format!("POINTS {n_points} double")));
        assert!(text.contains(&format!("CELLS {} {}", lines.len(), lines.len() + n_points)));
        assert_eq!(text.lines().filter(|l| *l == "4").count(), lines.len());
    }

    #[test]
    fn seventeen_significant_digits() {
        assert_eq!(real(0.1), "1.0000000000000001e-1");
        assert_eq!(real(1.0 / 3.0).parse::<f64>().unwrap(), 1.0 / 3.0);
    }
}
