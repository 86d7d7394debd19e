use serde::{Deserialize, Serialize};

use super::graph::GraphPatch;
use super::support::SupportProfile;
use crate::error::{FlowError, Result};
use crate::scalar::{norm, to_f64, Scalar};
use crate::speed_calculus::Speed;

/// What a snapshot was sampled from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "", tag = "kind", rename_all = "kebab-case")]
pub enum Geometry<T: Scalar> {
    Support(SupportProfile<T>),
    Graph(GraphPatch<T>),
    /// Curvature samples of a closed-form model with no stored geometry.
    Model,
}

/// One time slice with derived per-node fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Snapshot<T: Scalar> {
    pub time: T,
    pub geometry: Geometry<T>,
    pub lambda: Vec<Vec<T>>,
    pub speed: Vec<T>,
    pub norm_a: Vec<T>,
}

impl<T: Scalar> Snapshot<T> {
    pub fn from_curvatures(time: T, lambda: Vec<Vec<T>>, speed: &Speed<T>, geometry: Geometry<T>) -> Result<Self> {
        let g = lambda.iter().map(|l| speed.eval(l)).collect::<Result<Vec<_>>>()?;
        let norm_a = lambda.iter().map(|l| norm(l)).collect();
        Ok(Self {
            time,
            geometry,
            lambda,
            speed: g,
            norm_a,
        })
    }

    pub fn from_support(profile: &SupportProfile<T>, speed: &Speed<T>) -> Result<Self> {
        let lambda = (0..=profile.grid())
            .map(|j| profile.curvatures(j))
            .collect::<Result<Vec<_>>>()?;
        Self::from_curvatures(profile.time(), lambda, speed, Geometry::Support(profile.clone()))
    }

    pub fn from_graph(patch: &GraphPatch<T>, speed: &Speed<T>) -> Result<Self> {
        let lambda = patch
            .interior()
            .into_iter()
            .map(|(i, j)| patch.curvatures(i, j))
            .collect::<Result<Vec<_>>>()?;
        Self::from_curvatures(patch.time(), lambda, speed, Geometry::Graph(patch.clone()))
    }

    pub fn support(&self) -> Option<&SupportProfile<T>> {
        match &self.geometry {
            Geometry::Support(p) => Some(p),
            _ => None,
        }
    }

    pub fn max_speed(&self) -> T {
        self.speed.iter().copied().fold(T::zero(), T::max)
    }

    pub fn max_norm_a(&self) -> T {
        self.norm_a.iter().copied().fold(T::zero(), T::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryMeta {
    pub speed: String,
    pub n: usize,
    pub grid: usize,
    pub cfl: f64,
    pub seed: Option<u64>,
    pub steps: usize,
    pub truncated: bool,
    pub truncation_reason: Option<String>,
    pub extinction_estimate: Option<f64>,
}

impl TrajectoryMeta {
    pub fn new(speed: &str, n: usize, grid: usize, cfl: f64) -> Self {
        Self {
            speed: speed.to_string(),
            n,
            grid,
            cfl,
            seed: None,
            steps: 0,
            truncated: false,
            truncation_reason: None,
            extinction_estimate: None,
        }
    }
}

/// Time-ordered snapshots of a flow.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Trajectory<T: Scalar> {
    pub meta: TrajectoryMeta,
    snapshots: Vec<Snapshot<T>>,
}

impl<T: Scalar> Trajectory<T> {
    pub fn new(meta: TrajectoryMeta) -> Self {
        Self {
            meta,
            snapshots: Vec::new(),
        }
    }

    /// Appends a snapshot; times must increase strictly.
    pub fn push(&mut self, snap: Snapshot<T>) -> Result<()> {
        if let Some(last) = self.snapshots.last() {
            if !(snap.time > last.time) {
                return Err(FlowError::Domain(format!(
                    "snapshot time {} does not follow {}",
                    snap.time, last.time
                )));
            }
        }
        self.snapshots.push(snap);
        Ok(())
    }

    pub fn snapshots(&self) -> &[Snapshot<T>] {
        &self.snapshots
    }

    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    pub fn first(&self) -> Option<&Snapshot<T>> {
        self.snapshots.first()
    }

    pub fn last(&self) -> Option<&Snapshot<T>> {
        self.snapshots.last()
    }

    /// Exact shrinking sphere or cylinder sampled at `times` (all < 0).
    pub fn from_model(cyl: &crate::model_solutions::ShrinkingCylinder<T>, times: &[T]) -> Result<Self> {
        let speed = cyl.speed();
        let mut meta = TrajectoryMeta::new(&speed.id(), cyl.n(), 1, 0.0);
        meta.extinction_estimate = Some(0.0);
        let mut traj = Self::new(meta);
        for &t in times {
            let snap = Snapshot::from_curvatures(t, vec![cyl.curvatures(t)?], speed, Geometry::Model)?;
            traj.push(snap)?;
        }
        Ok(traj)
    }

    /// Exact shrinking sphere (m = 0) sampled as support profiles.
    pub fn from_sphere(cyl: &crate::model_solutions::ShrinkingCylinder<T>, grid: usize, times: &[T]) -> Result<Self> {
        if cyl.m() != 0 {
            return Err(FlowError::Domain("support sampling needs the round sphere (m = 0)".into()));
        }
        let speed = cyl.speed();
        let mut meta = TrajectoryMeta::new(&speed.id(), cyl.n(), grid, 0.0);
        meta.extinction_estimate = Some(0.0);
        let mut traj = Self::new(meta);
        for &t in times {
            let p = SupportProfile::sphere(cyl.n(), grid, cyl.radius(t)?)?.with_time(t);
            traj.push(Snapshot::from_support(&p, speed)?)?;
        }
        Ok(traj)
    }

    /// Least-squares extrapolation of inradius² to zero over the last
    /// `window` support snapshots.
    pub fn estimate_extinction(&self, window: usize) -> Option<f64> {
        let supports: Vec<&Snapshot<T>> = self.snapshots.iter().filter(|s| s.support().is_some()).collect();
        let pts: Vec<(f64, f64)> = supports[supports.len().saturating_sub(window)..]
            .iter()
            .filter_map(|s| {
                let p = s.support()?;
                let r = to_f64(p.inradius().0);
                Some((to_f64(s.time), r * r))
            })
            .collect();
        let tail = &pts[..];
        if tail.len() < 2 {
            return None;
        }
        let k = tail.len() as f64;
        let mt = tail.iter().map(|p| p.0).sum::<f64>() / k;
        let my = tail.iter().map(|p| p.1).sum::<f64>() / k;
        let sxy: f64 = tail.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
        let sxx: f64 = tail.iter().map(|p| (p.0 - mt) * (p.0 - mt)).sum();
        if sxx <= 0.0 || sxy >= 0.0 {
            return None;
        }
        let slope = sxy / sxx;
        Some(mt - my / slope)
    }
}
