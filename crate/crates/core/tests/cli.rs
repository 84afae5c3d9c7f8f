use std::path::Path;
use std::process::{Command, Output};

fn mpiga(args: &[&str], out_dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mpiga")).args(args).env("MPIGA_OUTPUT_DIR", out_dir).output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn run_honours_the_output_override() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("override");
    let cfg = write_config(
        tmp.path(),
        "a.cfg",
        "problem = lshape_singular\ndegree = 1\nmax_levels = 1\noutput_dir = elsewhere\n",
    );
    let o = mpiga(&["run", &cfg], &out);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out.join("convergence.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    assert!(out.join("run_report.txt").exists());
    assert!(out.join("mesh_level_001.vtk").exists());
}

#[test]
fn invalid_config_exits_with_two_and_names_the_field() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "bad.cfg", "problem = lshape_singular\ntheta = 1.5\n");
    let o = mpiga(&["run", &cfg], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("theta"));
    let missing = tmp.path().join("nope.cfg");
    let o = mpiga(&["verify", missing.to_str().unwrap()], tmp.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn verify_and_fault_injection() {
    let tmp = tempfile::tempdir().unwrap();
    let good = write_config(tmp.path(), "v.cfg", "problem = lshape_singular\ndegree = 1\n");
    let o = mpiga(&["verify", &good], tmp.path());
    assert_eq!(o.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert_eq!(stdout.lines().filter(|l| l.starts_with("PASS")).count(), 12);

    let bad = write_config(tmp.path(), "f.cfg", "problem = lshape_singular\nfault = negate_basis_entry\n");
    let o = mpiga(&["verify", &bad], tmp.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL level 0 basis"));
}

#[test]
fn export_mesh_writes_segments_and_vtk() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "m.cfg", "problem = checkerboard\ndegree = 2\nmax_dof = 1\n");
    let o = mpiga(&["export-mesh", &cfg, "2"], tmp.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let seg = std::fs::read_to_string(tmp.path().join("mesh_level_002.csv")).unwrap();
    assert_eq!(seg.lines().next(), Some("x0,y0,x1,y1"));
    assert!(seg.lines().count() > 100);
    let vtk = std::fs::read_to_string(tmp.path().join("mesh_level_002.vtk")).unwrap();
    assert!(vtk.starts_with("# vtk DataFile Version 3.0"));
}
