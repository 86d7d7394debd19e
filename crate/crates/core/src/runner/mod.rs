//! Scenario files, reproducible runs, manifests, run comparison and sweeps.

mod diagnostics;
mod io;
mod scenario;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

pub use diagnostics::{evaluate as evaluate_diagnostics, sphere_error, Context};
pub use io::{
    parse_trajectory_csv, read_json, read_trajectory, trajectory_csv, write_json, write_trajectory, CSV_HEADER,
    META_FILE, TRAJECTORY_FILE,
};
pub use scenario::{DiagnosticSpec, Scenario, DIAGNOSTICS};

use crate::error::FlowError;
use crate::flow_solver::run_to_extinction;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const REPORT_FILE: &str = "report.json";
pub const TIMING_FILE: &str = "timing.json";

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_INVARIANT: i32 = 3;

/// Env var capping sweep workers.
pub const THREADS_ENV: &str = "GAMMAFLOW_THREADS";

/// An error paired with the process exit code it maps to.
#[derive(Debug)]
pub struct RunError {
    pub code: i32,
    pub error: FlowError,
}

impl RunError {
    pub fn usage(error: FlowError) -> Self {
        Self { code: EXIT_USAGE, error }
    }

    pub fn invariant(error: FlowError) -> Self {
        Self {
            code: EXIT_INVARIANT,
            error,
        }
    }
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.error.fmt(f)
    }
}

impl std::error::Error for RunError {}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub scenario_hash: String,
    pub scenario: BTreeMap<String, String>,
    pub status: String,
    pub failure: Option<String>,
    /// SHA-256 of each artifact.
    pub artifacts: BTreeMap<String, String>,
    pub diagnostics: serde_json::Map<String, Value>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub manifest: Manifest,
    pub exit_code: i32,
}

fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

/// Runs a parsed scenario into its output directory.
///
/// Writes trajectory.csv, meta.json, report.json and manifest.json; wall
/// time goes to timing.json so the manifest stays byte-reproducible.
pub fn run(scenario: &Scenario) -> Result<RunOutcome, RunError> {
    let start = Instant::now();
    let speed = scenario.speed_fn().map_err(RunError::usage)?;
    let initial = scenario
        .initial
        .build::<f64>(scenario.n, scenario.grid, None)
        .map_err(RunError::usage)?;
    let mut traj = run_to_extinction(&initial, &speed, &scenario.options).map_err(RunError::invariant)?;
    traj.meta.seed = Some(scenario.seed);

    let dir = &scenario.output_dir;
    let csv = write_trajectory(dir, &traj).map_err(RunError::usage)?;
    let ctx = Context {
        speed: &speed,
        initial: Some(&scenario.initial),
        seed: scenario.seed,
    };
    let diagnostics = evaluate_diagnostics(&scenario.diagnostics, &traj, &ctx);
    let failure = traj.meta.truncation_reason.clone();
    let report = serde_json::json!({
        "meta": traj.meta,
        "failure": failure,
        "diagnostics": diagnostics,
    });
    let report_text = serde_json::to_string_pretty(&report).expect("serializable") + "\n";
    let report_path = dir.join(REPORT_FILE);
    std::fs::write(&report_path, &report_text)
        .map_err(|e| RunError::usage(FlowError::Io(format!("{}: {e}", report_path.display()))))?;

    let mut artifacts = BTreeMap::new();
    artifacts.insert(TRAJECTORY_FILE.to_string(), sha256_hex(csv.as_bytes()));
    artifacts.insert(REPORT_FILE.to_string(), sha256_hex(report_text.as_bytes()));
    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        scenario_hash: scenario.hash(),
        scenario: scenario.canonical_map(),
        status: if traj.meta.truncated { "truncated" } else { "ok" }.to_string(),
        failure,
        artifacts,
        diagnostics,
    };
    write_json(&dir.join(MANIFEST_FILE), &manifest).map_err(RunError::usage)?;
    write_json(
        &dir.join(TIMING_FILE),
        &serde_json::json!({ "wall_seconds": start.elapsed().as_secs_f64() }),
    )
    .map_err(RunError::usage)?;
    Ok(RunOutcome {
        dir: dir.clone(),
        exit_code: if traj.meta.truncated { EXIT_INVARIANT } else { EXIT_OK },
        manifest,
    })
}

/// Loads and runs a scenario file, optionally redirecting its output.
pub fn run_scenario(path: &Path, output: Option<&Path>) -> Result<RunOutcome, RunError> {
    let mut scenario = Scenario::load(path).map_err(RunError::usage)?;
    if let Some(o) = output {
        scenario.output_dir = o.to_path_buf();
    }
    run(&scenario)
}

/// Re-runs the scenario recorded in a manifest into `output`.
pub fn rerun_manifest(path: &Path, output: &Path) -> Result<RunOutcome, RunError> {
    let manifest: Manifest = read_json(path).map_err(RunError::usage)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut scenario = Scenario::from_map(&manifest.scenario, base).map_err(RunError::usage)?;
    scenario.output_dir = output.to_path_buf();
    run(&scenario)
}

/// Scenario keys that may differ between compared runs.
pub const COMPARE_OVERRIDES: &[&str] = &[
    "solver.grid",
    "solver.cfl",
    "solver.stop_radius",
    "solver.stride",
    "solver.max_steps",
    "seed",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub grid_a: usize,
    pub grid_b: usize,
    /// Keys whose values differ, all within the allowed overrides.
    pub overrides: BTreeMap<String, (String, String)>,
    /// b − a for every numeric diagnostic leaf present in both runs.
    pub deltas: BTreeMap<String, f64>,
    /// Sphere error of the coarser run over the finer one.
    pub error_ratio: Option<f64>,
}

fn flatten(prefix: &str, v: &Value, out: &mut BTreeMap<String, f64>) {
    match v {
        Value::Number(x) => {
            if let Some(x) = x.as_f64() {
                out.insert(prefix.to_string(), x);
            }
        }
        Value::Object(m) => {
            for (k, v) in m {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, v, out);
            }
        }
        _ => {}
    }
}

fn sphere_err_of(m: &Manifest) -> Option<f64> {
    m.diagnostics
        .iter()
        .find(|(k, _)| k.starts_with("sphere-error"))
        .and_then(|(_, v)| v.get("value"))
        .and_then(Value::as_f64)
}

pub fn compare_manifests(a: &Manifest, b: &Manifest) -> Result<CompareReport, RunError> {
    let mut overrides = BTreeMap::new();
    let keys: std::collections::BTreeSet<&String> = a.scenario.keys().chain(b.scenario.keys()).collect();
    for k in keys {
        let (va, vb) = (a.scenario.get(k), b.scenario.get(k));
        if va == vb || k == "diagnostics" {
            continue;
        }
        if !COMPARE_OVERRIDES.contains(&k.as_str()) {
            return Err(RunError::usage(FlowError::Domain(format!(
                "runs differ in `{k}`: {} vs {}",
                va.map_or("<unset>", String::as_str),
                vb.map_or("<unset>", String::as_str)
            ))));
        }
        overrides.insert(k.clone(), (va.cloned().unwrap_or_default(), vb.cloned().unwrap_or_default()));
    }
    let grid = |m: &Manifest| m.scenario.get("solver.grid").and_then(|g| g.parse().ok()).unwrap_or(0usize);
    let (mut fa, mut fb) = (BTreeMap::new(), BTreeMap::new());
    flatten("", &Value::Object(a.diagnostics.clone()), &mut fa);
    flatten("", &Value::Object(b.diagnostics.clone()), &mut fb);
    let deltas = fa
        .iter()
        .filter_map(|(k, x)| fb.get(k).map(|y| (k.clone(), y - x)))
        .collect();
    let (ga, gb) = (grid(a), grid(b));
    let error_ratio = match (sphere_err_of(a), sphere_err_of(b)) {
        (Some(ea), Some(eb)) if ga != gb => Some(if ga < gb { ea / eb } else { eb / ea }),
        _ => None,
    };
    Ok(CompareReport {
        grid_a: ga,
        grid_b: gb,
        overrides,
        deltas,
        error_ratio,
    })
}

/// Compares two manifest files.
pub fn compare_runs(a: &Path, b: &Path) -> Result<CompareReport, RunError> {
    let ma: Manifest = read_json(a).map_err(RunError::usage)?;
    let mb: Manifest = read_json(b).map_err(RunError::usage)?;
    compare_manifests(&ma, &mb)
}

/// Worker count from GAMMAFLOW_THREADS, if set to a positive integer.
pub fn thread_cap() -> Option<usize> {
    std::env::var(THREADS_ENV).ok()?.trim().parse().ok().filter(|&n| n > 0)
}

/// Runs independent scenario files in parallel.
pub fn sweep(paths: &[PathBuf]) -> Vec<(PathBuf, Result<RunOutcome, RunError>)> {
    let job = || {
        paths
            .par_iter()
            .map(|p| (p.clone(), run_scenario(p, None)))
            .collect()
    };
    match thread_cap().and_then(|n| rayon::ThreadPoolBuilder::new().num_threads(n).build().ok()) {
        Some(pool) => pool.install(job),
        None => job(),
    }
}
