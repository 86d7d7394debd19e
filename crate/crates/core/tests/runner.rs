use std::path::Path;

use gammaflow::runner::{
    compare_runs, read_trajectory, rerun_manifest, run_scenario, sweep, Manifest, RunOutcome, EXIT_INVARIANT,
    EXIT_OK, EXIT_USAGE, MANIFEST_FILE,
};
use gammaflow::FlowError;

const SPHERE: &str = "speed = mean
initial = sphere:1
solver.n = 2
solver.grid = 64
solver.stop_radius = 0.3
solver.stride = 50
diagnostics = type1, extinction, envelope:factor=2, umbilicity, sphere-error, certify:property=concave:samples=200
seed = 7
";

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn run_in(dir: &Path, name: &str, text: &str) -> RunOutcome {
    let p = write(dir, name, text);
    run_scenario(&p, Some(&dir.join(format!("{name}.out")))).unwrap()
}

#[test]
fn sphere_scenario_reports_the_type1_constant() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(dir.path(), "a", SPHERE);
    assert_eq!(o.exit_code, EXIT_OK);
    let v = o.manifest.diagnostics["type1"]["value"].as_f64().unwrap();
    assert!((v - 0.5f64.sqrt()).abs() < 1e-3, "{v}");
    let traj = read_trajectory(&o.dir).unwrap();
    assert!(traj.len() > 2);
}

#[test]
fn identical_scenarios_give_identical_manifests() {
    let dir = tempfile::tempdir().unwrap();
    let a = run_in(dir.path(), "a", SPHERE);
    let b = run_in(dir.path(), "b", SPHERE);
    let ma = std::fs::read(a.dir.join(MANIFEST_FILE)).unwrap();
    let mb = std::fs::read(b.dir.join(MANIFEST_FILE)).unwrap();
    assert_eq!(ma, mb);
    let report = compare_runs(&a.dir.join(MANIFEST_FILE), &b.dir.join(MANIFEST_FILE)).unwrap();
    assert!(report.deltas.values().all(|&d| d == 0.0));
    assert!(!report.deltas.is_empty());
}

#[test]
fn rerunning_a_manifest_reproduces_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let a = run_in(dir.path(), "a", SPHERE);
    let b = rerun_manifest(&a.dir.join(MANIFEST_FILE), &dir.path().join("rerun")).unwrap();
    let report = compare_runs(&a.dir.join(MANIFEST_FILE), &b.dir.join(MANIFEST_FILE)).unwrap();
    for (k, d) in &report.deltas {
        assert!(d.abs() <= 1e-12, "{k}: {d}");
    }
    assert_eq!(a.manifest.scenario_hash, b.manifest.scenario_hash);
}

#[test]
fn compare_refuses_different_speeds_and_accepts_grid_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let a = run_in(dir.path(), "a", SPHERE);
    let other = SPHERE.replace("speed = mean", "speed = two-harmonic");
    let b = run_in(dir.path(), "b", &other);
    let err = compare_runs(&a.dir.join(MANIFEST_FILE), &b.dir.join(MANIFEST_FILE)).unwrap_err();
    assert_eq!(err.code, EXIT_USAGE);
    let finer = SPHERE.replace("solver.grid = 64", "solver.grid = 128");
    let c = run_in(dir.path(), "c", &finer);
    let report = compare_runs(&a.dir.join(MANIFEST_FILE), &c.dir.join(MANIFEST_FILE)).unwrap();
    assert_eq!((report.grid_a, report.grid_b), (64, 128));
    assert!(report.overrides.contains_key("solver.grid"));
    assert!(report.error_ratio.is_some());
}

#[test]
fn parse_errors_carry_line_and_column() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "bad", "speed = mean\nsolver.n = 2\ninitial = sphere:1\nsolver.gird = 64\n");
    let err = run_scenario(&p, None).unwrap_err();
    assert_eq!(err.code, EXIT_USAGE);
    assert!(matches!(err.error, FlowError::Parse { line: 4, column: 1, .. }), "{}", err.error);
    let p = write(dir.path(), "bad2", "speed = nonsense\nsolver.n = 2\ninitial = sphere:1\n");
    assert_eq!(run_scenario(&p, None).unwrap_err().code, EXIT_USAGE);
}

#[test]
fn unstable_runs_exit_with_an_invariant_failure() {
    let dir = tempfile::tempdir().unwrap();
    let text = "speed = two-harmonic\ninitial = ellipsoid:2,1\nsolver.n = 2\nsolver.grid = 64\nsolver.cfl = 2\nsolver.stride = 10\n";
    let o = run_in(dir.path(), "u", text);
    assert_eq!(o.exit_code, EXIT_INVARIANT);
    assert_eq!(o.manifest.status, "truncated");
    assert!(o.manifest.failure.as_deref().unwrap().contains("convexity"));
    assert!(!read_trajectory(&o.dir).unwrap().is_empty());
}

#[test]
fn sweep_runs_every_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let paths: Vec<_> = (0..3)
        .map(|i| {
            let text = SPHERE.replace("sphere:1", &format!("sphere:{}", 1.0 + i as f64 * 0.5))
                + &format!("output.dir = run{i}\n");
            write(dir.path(), &format!("s{i}"), &text)
        })
        .collect();
    let results = sweep(&paths);
    assert_eq!(results.len(), 3);
    for (p, r) in &results {
        let o = r.as_ref().unwrap();
        assert_eq!(o.exit_code, EXIT_OK, "{}", p.display());
        let m: Manifest = gammaflow::runner::read_json(&o.dir.join(MANIFEST_FILE)).unwrap();
        assert_eq!(m.status, "ok");
    }
}
