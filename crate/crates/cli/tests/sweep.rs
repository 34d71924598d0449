use std::fs;

use metaporous::geometry::ShapeRole;
use metaporous::geometry::UnitCellGeometry;
use metaporous_cli::config::{RunConfig, SweepMode, SweepSpec};
use metaporous_cli::sweep::{cell_shapes, read_manifest, run_sweep};

fn spec(text: &str, dir: &std::path::Path) -> SweepSpec {
    let mut s = RunConfig::parse(text).unwrap().resolve().unwrap();
    s.out = dir.to_path_buf();
    s
}

#[test]
fn single_point_gives_single_row() {
    let dir = tempfile::tempdir().unwrap();
    let report = run_sweep(&spec("[sweep]\nfrequencies = [2000]\nangles = [15]\n", dir.path())).unwrap();
    let csv = fs::read_to_string(&report.table).unwrap();
    let lines: Vec<_> = csv.lines().collect();
    assert_eq!(lines[0], "f_hz,theta_deg,re_R,im_R,alpha");
    assert_eq!(lines.len(), 2);
    assert!(lines[1].starts_with("2000,15,"));
    let manifest = read_manifest(&report.manifest).unwrap();
    assert_eq!(manifest["grid"]["points"], 1);
    assert_eq!(manifest["solver_version"], env!("CARGO_PKG_VERSION"));
    assert!(manifest["failures"].as_array().unwrap().is_empty());
}

#[test]
fn tables_do_not_depend_on_worker_count() {
    let text = "[sweep]\nfrequencies = [1000, 3000]\nangles = [0, 45]\np_mm = [0, 2]\n";
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let mut one = spec(text, a.path());
    one.workers = 1;
    let mut three = spec(text, b.path());
    three.workers = 3;
    let ra = run_sweep(&one).unwrap();
    let rb = run_sweep(&three).unwrap();
    let (ta, tb) = (fs::read(&ra.table).unwrap(), fs::read(&rb.table).unwrap());
    assert_eq!(ta, tb);
    let text = String::from_utf8(ta).unwrap();
    assert!(text.starts_with("p_over_w,f_hz,"));
    assert_eq!(text.lines().count(), 9);
}

#[test]
fn failed_points_are_isolated_and_recorded() {
    let dir = tempfile::tempdir().unwrap();
    let report = run_sweep(&spec("[sweep]\nfrequencies = [50, 1000]\nangles = [0]\n", dir.path())).unwrap();
    assert_eq!(report.failures().count(), 1);
    let csv = fs::read_to_string(&report.table).unwrap();
    assert_eq!(csv.lines().count(), 2);
    assert!(csv.lines().nth(1).unwrap().starts_with("1000,0,"));
    let manifest = read_manifest(&report.manifest).unwrap();
    let failures = manifest["failures"].as_array().unwrap();
    assert_eq!(failures.len(), 1);
    assert_eq!(failures[0]["f_hz"], 50.0);
    assert_eq!(failures[0]["theta_deg"], 0.0);
}

#[test]
fn bare_wedge_keeps_only_foam_and_floor() {
    let shapes = cell_shapes(SweepMode::BareWedge, &UnitCellGeometry::default()).unwrap();
    assert!(shapes.count(ShapeRole::Wedge) == 1);
    assert_eq!(shapes.count(ShapeRole::Wall) + shapes.count(ShapeRole::Protrusion), 0);
}

#[test]
fn tunnel_sweep_writes_index_table() {
    let dir = tempfile::tempdir().unwrap();
    let text = "[sweep]\nmode = \"TUNNEL_INDEX\"\nfrequencies = [2000]\np_over_w = [0, 0.3]\n";
    let report = run_sweep(&spec(text, dir.path())).unwrap();
    let csv = fs::read_to_string(&report.table).unwrap();
    assert!(csv.starts_with("p_over_w,f_hz,lambda_m,n_r\n"));
    let n: Vec<f64> = report.indices().iter().map(|r| r.n_r).collect();
    assert!((n[0] - 1.0).abs() < 5e-3 && n[1] > 1.1, "{n:?}");
}

#[test]
fn beam_sweep_dumps_fields() {
    let dir = tempfile::tempdir().unwrap();
    let text = "[sweep]\nmode = \"finite-array\"\nfrequencies = [1000]\nangles = [30]\ndump_fields = true\n";
    let report = run_sweep(&spec(text, dir.path())).unwrap();
    assert_eq!(report.failures().count(), 0);
    let frac = report.beams()[0].1.reflected_fraction;
    assert!(frac < 0.1, "{frac}");
    let names: Vec<String> = fs::read_dir(dir.path().join("fields"))
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    assert_eq!(names.len(), 2);
    let ppm = names.iter().find(|n| n.ends_with("_re.ppm")).unwrap();
    assert!(fs::read(dir.path().join("fields").join(ppm)).unwrap().starts_with(b"P6\n"));
}
