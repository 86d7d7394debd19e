use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use gammaflow::ancient_analysis::{barrier_comparison, parabolic_rescale, BarrierPlacement, RescalingSpec};
use gammaflow::certification::{certify_with_tolerance, Property, DEFAULT_TOLERANCE};
use gammaflow::flow_solver::InitialData;
use gammaflow::model_solutions::{ShrinkingCylinder, TranslatingParaboloid, RESIDUAL_GRID_POINTS};
use gammaflow::runner::{self, Context, DiagnosticSpec, RunError, EXIT_OK, EXIT_USAGE};
use gammaflow::{FlowError, SpeedFunction};

#[derive(Parser)]
#[command(name = "gammaflow", version, about = "Simulate and analyse γ-flows of convex hypersurfaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file.
    Simulate {
        scenario: PathBuf,
        /// Override the scenario's output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-run the scenario recorded in a manifest.
    Run {
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate diagnostics on a stored run.
    Analyze {
        run_dir: PathBuf,
        /// Comma-separated diagnostics, e.g. `type1,envelope:factor=2`.
        #[arg(long)]
        diagnostics: String,
        /// Initial data, needed only by `sphere-error`.
        #[arg(long)]
        initial: Option<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Parabolically rescale a stored run into a new run directory.
    #[command(allow_negative_numbers = true)]
    Rescale {
        run_dir: PathBuf,
        #[arg(long, default_value_t = 0.0)]
        center: f64,
        #[arg(long)]
        factor: f64,
        /// Reference time; defaults to the extinction estimate.
        #[arg(long)]
        time: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sample a speed property.
    Certify {
        #[arg(long)]
        speed: String,
        #[arg(long)]
        dim: usize,
        /// admissible, convex, concave, inverse-concave or
        /// strictly-inverse-concave-on-boundary(m).
        #[arg(long)]
        property: String,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
        tolerance: f64,
    },
    /// Check a stored run against a placed translating paraboloid.
    #[command(allow_negative_numbers = true)]
    BarrierCheck {
        run_dir: PathBuf,
        #[arg(long, default_value_t = 1)]
        m: usize,
        #[arg(long, default_value_t = 1.0)]
        a: f64,
        #[arg(long, default_value_t = 0.0)]
        z_shift: f64,
        #[arg(long, default_value_t = 0.0)]
        time_offset: f64,
        #[arg(long, default_value_t = 0.0)]
        eps: f64,
    },
    /// Structural constants of the model solutions for a speed.
    Models {
        #[arg(long)]
        speed: String,
        #[arg(long)]
        dim: usize,
    },
    /// Run several scenario files in parallel (GAMMAFLOW_THREADS caps workers).
    Sweep { scenarios: Vec<PathBuf> },
    /// Compare two manifests.
    Compare { a: PathBuf, b: PathBuf },
}

fn print(v: &Value) {
    use std::io::Write;
    // A closed pipe (e.g. `| head`) is not an error worth a panic.
    let _ = writeln!(std::io::stdout().lock(), "{}", serde_json::to_string_pretty(v).expect("serializable"));
}

fn to_json<V: serde::Serialize>(v: &V) -> Value {
    serde_json::to_value(v).expect("serializable")
}

fn outcome_json(o: &runner::RunOutcome) -> Value {
    json!({
        "dir": o.dir,
        "status": o.manifest.status,
        "failure": o.manifest.failure,
        "scenario_hash": o.manifest.scenario_hash,
    })
}

fn models(speed: &SpeedFunction) -> Result<Value, FlowError> {
    let mut rows = Vec::new();
    for m in 0..=speed.mbar() {
        let cyl = ShrinkingCylinder::new(speed.clone(), m)?;
        let mut row = json!({
            "m": m,
            "c_m": cyl.c_m(),
            "type1_constant": cyl.type1_constant(),
        });
        if m >= 1 {
            let bowl = TranslatingParaboloid::new(speed.clone(), m)?;
            let sweep = bowl.residual_sweep(RESIDUAL_GRID_POINTS)?;
            let min = sweep.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
            row["paraboloid_min_residual"] = json!(min);
        }
        rows.push(row);
    }
    Ok(json!({ "speed": speed.id(), "dim": speed.dim(), "mbar": speed.mbar(), "models": rows }))
}

fn execute(cmd: Command) -> Result<i32, RunError> {
    let usage = RunError::usage;
    match cmd {
        Command::Simulate { scenario, out } => {
            let o = runner::run_scenario(&scenario, out.as_deref())?;
            print(&outcome_json(&o));
            Ok(o.exit_code)
        }
        Command::Run { manifest, out } => {
            let o = runner::rerun_manifest(&manifest, &out)?;
            print(&outcome_json(&o));
            Ok(o.exit_code)
        }
        Command::Analyze {
            run_dir,
            diagnostics,
            initial,
            seed,
        } => {
            let traj = runner::read_trajectory(&run_dir).map_err(usage)?;
            let speed = SpeedFunction::from_id(&traj.meta.speed, traj.meta.n).map_err(usage)?;
            let specs = diagnostics
                .split(',')
                .filter(|s| !s.trim().is_empty())
                .map(|s| DiagnosticSpec::parse(s).map_err(|m| usage(FlowError::Domain(m))))
                .collect::<Result<Vec<_>, _>>()?;
            let initial: Option<InitialData> = initial.map(|s| s.parse()).transpose().map_err(usage)?;
            let ctx = Context {
                speed: &speed,
                initial: initial.as_ref(),
                seed,
            };
            print(&Value::Object(runner::evaluate_diagnostics(&specs, &traj, &ctx)));
            Ok(EXIT_OK)
        }
        Command::Rescale {
            run_dir,
            center,
            factor,
            time,
            out,
        } => {
            let traj = runner::read_trajectory(&run_dir).map_err(usage)?;
            let reference_time = time.or(traj.meta.extinction_estimate).ok_or_else(|| {
                usage(FlowError::Domain("no --time given and the run has no extinction estimate".into()))
            })?;
            let spec = RescalingSpec {
                center,
                factor,
                reference_time,
            };
            let rescaled = parabolic_rescale(&traj, &spec).map_err(usage)?;
            runner::write_trajectory(&out, &rescaled).map_err(usage)?;
            print(&json!({ "dir": out, "snapshots": rescaled.len(), "spec": to_json(&spec) }));
            Ok(EXIT_OK)
        }
        Command::Certify {
            speed,
            dim,
            property,
            samples,
            seed,
            tolerance,
        } => {
            let speed = SpeedFunction::from_id(&speed, dim).map_err(usage)?;
            let property: Property = property.parse().map_err(usage)?;
            let report = certify_with_tolerance(&speed, property, samples, seed, tolerance).map_err(usage)?;
            print(&to_json(&report));
            Ok(EXIT_OK)
        }
        Command::BarrierCheck {
            run_dir,
            m,
            a,
            z_shift,
            time_offset,
            eps,
        } => {
            let traj = runner::read_trajectory(&run_dir).map_err(usage)?;
            let speed = SpeedFunction::from_id(&traj.meta.speed, traj.meta.n).map_err(usage)?;
            let bowl = TranslatingParaboloid::new(speed, m).map_err(usage)?;
            let placement = BarrierPlacement { a, z_shift, time_offset };
            let report = barrier_comparison(&traj, &bowl, &placement, eps).map_err(usage)?;
            let pass = report.pass;
            print(&to_json(&report));
            Ok(if pass { EXIT_OK } else { runner::EXIT_INVARIANT })
        }
        Command::Models { speed, dim } => {
            let speed = SpeedFunction::from_id(&speed, dim).map_err(usage)?;
            print(&models(&speed).map_err(usage)?);
            Ok(EXIT_OK)
        }
        Command::Sweep { scenarios } => {
            let results = runner::sweep(&scenarios);
            let mut code = EXIT_OK;
            let rows: Vec<Value> = results
                .iter()
                .map(|(p, r)| match r {
                    Ok(o) => {
                        code = code.max(o.exit_code);
                        json!({ "scenario": p, "exit": o.exit_code, "run": outcome_json(o) })
                    }
                    Err(e) => {
                        code = code.max(e.code);
                        json!({ "scenario": p, "exit": e.code, "error": e.to_string() })
                    }
                })
                .collect();
            print(&Value::Array(rows));
            Ok(code)
        }
        Command::Compare { a, b } => {
            let report = runner::compare_runs(&a, &b)?;
            print(&to_json(&report));
            Ok(EXIT_OK)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match execute(cli.command) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code as u8)
        }
    }
}
