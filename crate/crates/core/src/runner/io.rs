use std::path::Path;

use crate::error::{FlowError, Result};
use crate::flow_solver::{Snapshot, SupportProfile, Trajectory, TrajectoryMeta};
use crate::speed_calculus::Speed;

pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const META_FILE: &str = "meta.json";

pub const CSV_HEADER: &str = "time,node,theta,h,rho1,rho2,G,normA";

fn io_err(path: &Path, e: impl std::fmt::Display) -> FlowError {
    FlowError::Io(format!("{}: {e}", path.display()))
}

/// One row per node per support snapshot; other geometries are skipped.
pub fn trajectory_csv(traj: &Trajectory<f64>) -> Result<String> {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for s in traj.snapshots() {
        let Some(p) = s.support() else { continue };
        for j in 0..=p.grid() {
            let (r1, r2) = p.principal_radii(j)?;
            out.push_str(&format!(
                "{:.17e},{j},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}\n",
                s.time,
                p.theta(j),
                p.values()[j],
                r1,
                r2,
                s.speed[j],
                s.norm_a[j]
            ));
        }
    }
    Ok(out)
}

pub fn write_json<V: serde::Serialize>(path: &Path, value: &V) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| io_err(path, e))?;
    std::fs::write(path, text + "\n").map_err(|e| io_err(path, e))
}

pub fn read_json<V: serde::de::DeserializeOwned>(path: &Path) -> Result<V> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    serde_json::from_str(&text).map_err(|e| io_err(path, e))
}

pub fn write_trajectory(dir: &Path, traj: &Trajectory<f64>) -> Result<String> {
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let csv = trajectory_csv(traj)?;
    let path = dir.join(TRAJECTORY_FILE);
    std::fs::write(&path, &csv).map_err(|e| io_err(&path, e))?;
    write_json(&dir.join(META_FILE), &traj.meta)?;
    Ok(csv)
}

/// Parses trajectory CSV text; fields are recomputed from h.
pub fn parse_trajectory_csv(text: &str, meta: TrajectoryMeta) -> Result<Trajectory<f64>> {
    let speed = Speed::<f64>::from_id(&meta.speed, meta.n)?;
    let n = meta.n;
    let mut traj = Trajectory::new(meta);
    let mut current: Option<(f64, Vec<f64>)> = None;
    let flush = |cur: Option<(f64, Vec<f64>)>, traj: &mut Trajectory<f64>| -> Result<()> {
        if let Some((t, h)) = cur {
            let p = SupportProfile::new(n, h, t)?;
            traj.push(Snapshot::from_support(&p, &speed)?)?;
        }
        Ok(())
    };
    for (idx, line) in text.lines().enumerate() {
        if idx == 0 && line.starts_with("time") {
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        let bad = |column: usize, message: &str| FlowError::Parse {
            line: idx + 1,
            column,
            message: message.into(),
        };
        if cols.len() < 4 {
            return Err(bad(1, "expected at least time,node,theta,h"));
        }
        let t: f64 = cols[0].parse().map_err(|_| bad(1, "bad time"))?;
        let node: usize = cols[1].parse().map_err(|_| bad(2, "bad node index"))?;
        let h: f64 = cols[3].parse().map_err(|_| bad(4, "bad support value"))?;
        match &mut current {
            Some((ct, values)) if *ct == t => {
                if node != values.len() {
                    return Err(bad(2, "node indices must be consecutive"));
                }
                values.push(h);
            }
            _ => {
                if node != 0 {
                    return Err(bad(2, "a snapshot must start at node 0"));
                }
                flush(current.take(), &mut traj)?;
                current = Some((t, vec![h]));
            }
        }
    }
    flush(current, &mut traj)?;
    Ok(traj)
}

/// Loads `trajectory.csv` and `meta.json` from a run directory.
pub fn read_trajectory(dir: &Path) -> Result<Trajectory<f64>> {
    let meta: TrajectoryMeta = read_json(&dir.join(META_FILE))?;
    let path = dir.join(TRAJECTORY_FILE);
    let text = std::fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
    parse_trajectory_csv(&text, meta)
}
