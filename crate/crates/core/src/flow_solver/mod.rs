//! Explicit solvers for γ-flows of convex hypersurfaces: an axisymmetric
//! support-function solver for closed bodies and a graph-patch solver for
//! boundary pieces.

mod graph;
mod support;
mod trajectory;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub use graph::{step_graph, GraphNode, GraphPatch};
pub use support::{cfl_dt, step_support, StepFailure, SupportProfile, DEFAULT_CFL};

use support::Workspace;
pub use trajectory::{Geometry, Snapshot, Trajectory, TrajectoryMeta};

use crate::error::{FlowError, Result};
use crate::scalar::{from_usize, lit, to_f64, Scalar};
use crate::speed_calculus::Speed;

/// Snapshots used for the extinction-time fit.
pub const EXTINCTION_WINDOW: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    pub cfl: f64,
    /// Stop once min ρ₁ falls below this radius.
    pub stop_radius: f64,
    /// Record every `stride`-th step.
    pub stride: usize,
    pub max_steps: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            cfl: DEFAULT_CFL,
            stop_radius: 0.05,
            stride: 100,
            max_steps: 50_000_000,
        }
    }
}

fn truncate<T: Scalar>(traj: &mut Trajectory<T>, reason: String) {
    traj.meta.truncated = true;
    traj.meta.truncation_reason = Some(reason);
}

fn push_support<T: Scalar>(traj: &mut Trajectory<T>, p: &SupportProfile<T>, speed: &Speed<T>) -> Result<()> {
    if traj.last().is_some_and(|s| !(p.time() > s.time)) {
        return Ok(());
    }
    traj.push(Snapshot::from_support(p, speed)?)
}

/// Evolves until min ρ₁ < stop_radius. Convexity loss or a cone exit ends
/// the run early with `meta.truncated` set; the last valid profile is kept.
pub fn run_to_extinction<T: Scalar>(
    initial: &SupportProfile<T>,
    speed: &Speed<T>,
    opts: &RunOptions,
) -> Result<Trajectory<T>> {
    let mut all = run_lockstep(std::slice::from_ref(initial), speed, opts)?;
    Ok(all.remove(0))
}

/// Evolves several bodies with a shared time step (the smallest CFL bound
/// among them), stopping when any reaches the stop radius.
pub fn run_lockstep<T: Scalar>(
    initial: &[SupportProfile<T>],
    speed: &Speed<T>,
    opts: &RunOptions,
) -> Result<Vec<Trajectory<T>>> {
    if initial.is_empty() {
        return Err(FlowError::Domain("no initial profiles".into()));
    }
    let stride = opts.stride.max(1);
    let safety = lit::<T>(opts.cfl);
    let stop = lit::<T>(opts.stop_radius);
    let mut current: Vec<SupportProfile<T>> = initial.to_vec();
    let mut trajs: Vec<Trajectory<T>> = initial
        .iter()
        .map(|p| Trajectory::new(TrajectoryMeta::new(&speed.id(), p.n(), p.grid(), opts.cfl)))
        .collect();
    for (t, p) in trajs.iter_mut().zip(&current) {
        t.push(Snapshot::from_support(p, speed)?)?;
    }
    let mut steps = 0usize;
    let mut failure: Option<String> = None;
    let mut workspaces: Vec<Workspace<T>> = current.iter().map(Workspace::new).collect();
    let mut evals = Vec::with_capacity(current.len());
    for (p, ws) in current.iter().zip(workspaces.iter_mut()) {
        evals.push(p.evaluate(speed, ws, true)?);
    }
    loop {
        let min_rho = evals.iter().map(|e| e.min_rho1).fold(T::infinity(), T::min);
        if min_rho < stop || steps >= opts.max_steps {
            break;
        }
        let dt = current
            .iter()
            .zip(&evals)
            .map(|(p, e)| e.dt(p.spacing(), safety))
            .fold(T::infinity(), T::min);
        if !dt.is_finite() {
            failure = Some("time step is not finite".into());
            break;
        }
        let mut next = Vec::with_capacity(current.len());
        for ((p, e), ws) in current.iter().zip(&evals).zip(workspaces.iter_mut()) {
            match p.advance(speed, dt, &e.velocity, ws) {
                Ok(pair) => next.push(pair),
                Err(err) => {
                    failure = Some(err.to_string());
                    break;
                }
            }
        }
        if failure.is_some() {
            break;
        }
        (current, evals) = next.into_iter().unzip();
        steps += 1;
        if steps.is_multiple_of(stride) {
            for (t, p) in trajs.iter_mut().zip(&current) {
                push_support(t, p, speed)?;
            }
        }
    }
    for (t, p) in trajs.iter_mut().zip(&current) {
        push_support(t, p, speed)?;
        t.meta.steps = steps;
        if let Some(reason) = &failure {
            truncate(t, reason.clone());
        }
        t.meta.extinction_estimate = t.estimate_extinction(EXTINCTION_WINDOW);
    }
    Ok(trajs)
}

/// Evolves a graph patch for `steps` CFL-limited steps up to `t_end`.
pub fn run_graph<T: Scalar>(
    initial: &GraphPatch<T>,
    speed: &Speed<T>,
    t_end: T,
    cfl: f64,
    stride: usize,
) -> Result<Trajectory<T>> {
    let (nx, ny) = initial.shape();
    let mut traj = Trajectory::new(TrajectoryMeta::new(&speed.id(), initial.n(), nx.max(ny), cfl));
    traj.push(Snapshot::from_graph(initial, speed)?)?;
    let mut p = initial.clone();
    let mut steps = 0usize;
    while p.time() < t_end {
        let dt = p.cfl_dt(speed, lit(cfl))?.min(t_end - p.time());
        match p.step(speed, dt) {
            Ok(q) => p = q,
            Err(e) => {
                truncate(&mut traj, e.to_string());
                break;
            }
        }
        steps += 1;
        if steps.is_multiple_of(stride.max(1)) {
            traj.push(Snapshot::from_graph(&p, speed)?)?;
        }
    }
    if traj.last().is_some_and(|s| p.time() > s.time) {
        traj.push(Snapshot::from_graph(&p, speed)?)?;
    }
    traj.meta.steps = steps;
    Ok(traj)
}

/// Initial data spec: `sphere:r`, `ellipsoid:a,b`, `support-file:<path>`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialData {
    Sphere(f64),
    /// Semi-axis along the symmetry axis, then across it.
    Ellipsoid(f64, f64),
    SupportFile(PathBuf),
}

impl std::str::FromStr for InitialData {
    type Err = FlowError;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = |m: &str| FlowError::Domain(format!("invalid initial data `{s}`: {m}"));
        let number = |x: &str| x.trim().parse::<f64>().map_err(|_| bad("expected a number"));
        if let Some(r) = s.strip_prefix("sphere:") {
            let r = number(r)?;
            if !(r > 0.0) {
                return Err(bad("radius must be positive"));
            }
            return Ok(Self::Sphere(r));
        }
        if let Some(rest) = s.strip_prefix("ellipsoid:") {
            let (a, b) = rest.split_once(',').ok_or_else(|| bad("expected `a,b`"))?;
            let (a, b) = (number(a)?, number(b)?);
            if !(a > 0.0 && b > 0.0) {
                return Err(bad("semi-axes must be positive"));
            }
            return Ok(Self::Ellipsoid(a, b));
        }
        if let Some(p) = s.strip_prefix("support-file:") {
            return Ok(Self::SupportFile(PathBuf::from(p.trim())));
        }
        Err(bad("unknown kind"))
    }
}

impl std::fmt::Display for InitialData {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Sphere(r) => write!(f, "sphere:{r}"),
            Self::Ellipsoid(a, b) => write!(f, "ellipsoid:{a},{b}"),
            Self::SupportFile(p) => write!(f, "support-file:{}", p.display()),
        }
    }
}

impl InitialData {
    /// Builds the profile; relative support files resolve against `base`.
    pub fn build<T: Scalar>(&self, n: usize, grid: usize, base: Option<&Path>) -> Result<SupportProfile<T>> {
        match self {
            Self::Sphere(r) => SupportProfile::sphere(n, grid, lit(*r)),
            Self::Ellipsoid(a, b) => SupportProfile::ellipsoid(n, grid, lit(*a), lit(*b)),
            Self::SupportFile(p) => {
                let path = match base {
                    Some(b) if p.is_relative() => b.join(p),
                    _ => p.clone(),
                };
                let text = std::fs::read_to_string(&path)
                    .map_err(|e| FlowError::Io(format!("{}: {e}", path.display())))?;
                let profile = read_support_csv::<T>(&text, n)?;
                if profile.grid() != grid {
                    return Err(FlowError::Domain(format!(
                        "support file has {} intervals but the grid asks for {grid}",
                        profile.grid()
                    )));
                }
                Ok(profile)
            }
        }
    }
}

/// Parses `θ,h` rows on a uniform grid over [0, π]; a header line is allowed.
pub fn read_support_csv<T: Scalar>(text: &str, n: usize) -> Result<SupportProfile<T>> {
    let mut thetas = Vec::new();
    let mut values = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut cols = line.split(',');
        let (Some(a), Some(b)) = (cols.next(), cols.next()) else {
            return Err(FlowError::Parse {
                line: lineno + 1,
                column: 1,
                message: "expected `theta,h`".into(),
            });
        };
        match (a.trim().parse::<f64>(), b.trim().parse::<f64>()) {
            (Ok(t), Ok(h)) => {
                thetas.push(t);
                values.push(lit::<T>(h));
            }
            _ if thetas.is_empty() && lineno == 0 => continue,
            _ => {
                return Err(FlowError::Parse {
                    line: lineno + 1,
                    column: 1,
                    message: "non-numeric entry".into(),
                })
            }
        }
    }
    let grid = thetas.len().saturating_sub(1);
    if grid < 4 {
        return Err(FlowError::Domain("support file needs at least 5 rows".into()));
    }
    let d = std::f64::consts::PI / grid as f64;
    for (j, &t) in thetas.iter().enumerate() {
        if (t - d * j as f64).abs() > 1e-9 * (1.0 + t.abs()) {
            return Err(FlowError::Domain(format!(
                "support file row {j}: θ = {t} is not on the uniform grid jπ/{grid}"
            )));
        }
    }
    SupportProfile::new(n, values, T::zero())
}

/// `θ,h` rows for [`read_support_csv`].
pub fn write_support_csv<T: Scalar>(p: &SupportProfile<T>) -> String {
    let mut out = String::from("theta,h\n");
    for j in 0..=p.grid() {
        out.push_str(&format!("{:.17e},{:.17e}\n", to_f64(p.theta(j)), to_f64(p.values()[j])));
    }
    out
}

/// Largest pointwise excess h_inner − h_outer over all common snapshots.
pub fn ordering_violation<T: Scalar>(inner: &Trajectory<T>, outer: &Trajectory<T>) -> T {
    inner
        .snapshots()
        .iter()
        .zip(outer.snapshots())
        .filter_map(|(a, b)| Some((a.support()?, b.support()?)))
        .map(|(a, b)| {
            a.values()
                .iter()
                .zip(b.values())
                .map(|(&x, &y)| x - y)
                .fold(T::neg_infinity(), T::max)
        })
        .fold(T::neg_infinity(), T::max)
        .max(T::zero())
}

/// Uniform θ grid values jπ/N.
pub fn theta_grid<T: Scalar>(grid: usize) -> Vec<T> {
    (0..=grid).map(|j| T::PI() * from_usize(j) / from_usize(grid)).collect()
}
