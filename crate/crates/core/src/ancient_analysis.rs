//! Diagnostics on trajectories: Type-I supremum, parabolic rescaling,
//! displacement envelopes, inner balls, lower speed bounds, the umbilicity
//! gap, interior-estimate statistics, barrier comparison and a recession
//! dimension estimator.
//!
//! Points are heights on the symmetry axis. The final snapshot plays the
//! role of t = 0 unless a reference time is given.

use serde::{Deserialize, Serialize};

use crate::error::{FlowError, Result};
use crate::flow_solver::{Geometry, Snapshot, SupportProfile, Trajectory};
use crate::model_solutions::TranslatingParaboloid;
use crate::scalar::{from_usize, lit, to_f64, Scalar};

/// Default width ratio for [`recession_dimension`].
pub const RECESSION_THRESHOLD: f64 = 50.0;

/// Default minimal lag t₀ − t for [`inner_ball_check`].
pub const INNER_BALL_MIN_LAG: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct RescalingSpec<T: Scalar> {
    /// Axis height moved to the origin.
    pub center: T,
    pub factor: T,
    pub reference_time: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct EnvelopeReport<T: Scalar> {
    pub constant_k: T,
    /// Largest violation over snapshots; ≤ 0 means the check passed.
    pub max_violation: T,
    /// (time, violation) per checked snapshot.
    pub margins: Vec<(T, T)>,
    pub pass: bool,
    /// Best constant supported by the data, where meaningful.
    pub empirical_constant: Option<T>,
}

impl<T: Scalar> EnvelopeReport<T> {
    fn from_margins(constant_k: T, margins: Vec<(T, T)>, slack: T) -> Self {
        let max_violation = margins.iter().map(|m| m.1).fold(T::neg_infinity(), T::max);
        let max_violation = if margins.is_empty() { T::zero() } else { max_violation };
        Self {
            constant_k,
            max_violation,
            pass: max_violation <= slack,
            margins,
            empirical_constant: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct LowerSpeedReport<T: Scalar> {
    pub c_l: T,
    /// Snapshots with no node inside the ball.
    pub skipped: Vec<usize>,
}

fn supports<T: Scalar>(traj: &Trajectory<T>) -> Result<Vec<(T, &SupportProfile<T>)>> {
    traj.snapshots()
        .iter()
        .map(|s| {
            s.support()
                .map(|p| (s.time, p))
                .ok_or_else(|| FlowError::Domain(format!("snapshot at t = {} has no support profile", s.time)))
        })
        .collect()
}

fn final_time<T: Scalar>(traj: &Trajectory<T>) -> Result<T> {
    traj.last()
        .map(|s| s.time)
        .ok_or_else(|| FlowError::Domain("empty trajectory".into()))
}

/// max over snapshots and nodes of √(T − t)·|A|. With `reference` unset, T
/// is the trajectory's extinction estimate.
pub fn type1_sup<T: Scalar>(traj: &Trajectory<T>, reference: Option<T>) -> Result<T> {
    let t_ext = match reference {
        Some(t) => t,
        None => traj
            .meta
            .extinction_estimate
            .map(lit)
            .ok_or_else(|| FlowError::Domain("no reference time and no extinction estimate".into()))?,
    };
    let mut best = T::zero();
    for s in traj.snapshots() {
        if !(s.time < t_ext) {
            return Err(FlowError::Domain(format!(
                "snapshot at t = {} is not before the reference time {t_ext}",
                s.time
            )));
        }
        best = best.max((t_ext - s.time).sqrt() * s.max_norm_a());
    }
    Ok(best)
}

/// (t, h) ↦ (a²(t − T), a(h − z_c cos θ)); curvature fields scale by 1/a.
pub fn parabolic_rescale<T: Scalar>(traj: &Trajectory<T>, spec: &RescalingSpec<T>) -> Result<Trajectory<T>> {
    let a = spec.factor;
    if !(a > T::zero()) {
        return Err(FlowError::Domain(format!("rescaling factor must be positive, got {a}")));
    }
    let mut meta = traj.meta.clone();
    meta.extinction_estimate = meta
        .extinction_estimate
        .map(|t| to_f64(a * a * (lit::<T>(t) - spec.reference_time)));
    let mut out = Trajectory::new(meta);
    for s in traj.snapshots() {
        let time = a * a * (s.time - spec.reference_time);
        let geometry = match &s.geometry {
            Geometry::Support(p) => {
                let h = p.recentered(spec.center).into_iter().map(|x| a * x).collect();
                Geometry::Support(SupportProfile::new(p.n(), h, time)?)
            }
            Geometry::Graph(g) => Geometry::Graph(g.rescaled(a, spec.center, time)),
            Geometry::Model => Geometry::Model,
        };
        let inv = T::one() / a;
        out.push(Snapshot {
            time,
            geometry,
            lambda: s.lambda.iter().map(|l| l.iter().map(|&x| x * inv).collect()).collect(),
            speed: s.speed.iter().map(|&g| g * inv).collect(),
            norm_a: s.norm_a.iter().map(|&x| x * inv).collect(),
        })?;
    }
    Ok(out)
}

/// sup over the run of √(t₀ − t)·max G.
pub fn envelope_constant<T: Scalar>(traj: &Trajectory<T>) -> Result<T> {
    let t0 = final_time(traj)?;
    Ok(traj
        .snapshots()
        .iter()
        .map(|s| (t0 - s.time).sqrt() * s.max_speed())
        .fold(T::zero(), T::max))
}

/// For each snapshot: max_θ (h(θ,t) − h(θ,t₀)) − K√(t₀ − t).
pub fn displacement_envelope_check<T: Scalar>(traj: &Trajectory<T>, k: T) -> Result<EnvelopeReport<T>> {
    let profiles = supports(traj)?;
    let (t0, last) = *profiles
        .last()
        .ok_or_else(|| FlowError::Domain("empty trajectory".into()))?;
    let mut margins = Vec::with_capacity(profiles.len());
    for &(t, p) in &profiles {
        if p.grid() != last.grid() {
            return Err(FlowError::Domain("snapshots use different grids".into()));
        }
        let excess = p
            .values()
            .iter()
            .zip(last.values())
            .map(|(&a, &b)| a - b)
            .fold(T::neg_infinity(), T::max);
        margins.push((t, excess - k * (t0 - t).sqrt()));
    }
    Ok(EnvelopeReport::from_margins(k, margins, T::zero()))
}

/// min_θ (h(θ,t) − z cos θ) ≥ c√(t₀ − t) for snapshots with t₀ − t ≥ min_lag.
pub fn inner_ball_check<T: Scalar>(traj: &Trajectory<T>, c: T, origin: T, min_lag: T) -> Result<EnvelopeReport<T>> {
    let profiles = supports(traj)?;
    let t0 = final_time(traj)?;
    let mut margins = Vec::new();
    let mut best = T::infinity();
    for &(t, p) in &profiles {
        let inner = p.recentered(origin).into_iter().fold(T::infinity(), T::min);
        if !(inner > T::zero()) {
            return Err(FlowError::Domain(format!(
                "origin z = {origin} is not inside the body at t = {t}"
            )));
        }
        let lag = t0 - t;
        if lag >= min_lag && lag > T::zero() {
            let root = lag.sqrt();
            margins.push((t, c * root - inner));
            best = best.min(inner / root);
        }
    }
    let mut report = EnvelopeReport::from_margins(c, margins, T::zero());
    report.empirical_constant = best.is_finite().then_some(best);
    Ok(report)
}

/// Empirical c_L: min of √(1 + t₀ − t)·G over nodes within L√(t₀ − t) of
/// the final snapshot's north pole.
pub fn lower_speed_check<T: Scalar>(traj: &Trajectory<T>, l: T) -> Result<LowerSpeedReport<T>> {
    let t0 = final_time(traj)?;
    let last = traj.last().and_then(|s| s.support()).ok_or_else(|| {
        FlowError::Domain("lower speed check needs support snapshots".into())
    })?;
    let origin = last.boundary_point(0);
    let mut c_l = T::infinity();
    let mut skipped = Vec::new();
    for (idx, s) in traj.snapshots().iter().enumerate() {
        let p = s
            .support()
            .ok_or_else(|| FlowError::Domain("lower speed check needs support snapshots".into()))?;
        let lag = t0 - s.time;
        let radius = l * lag.sqrt();
        let dist = |j: usize| {
            let (x, z) = p.boundary_point(j);
            let (dx, dz) = (x - origin.0, z - origin.1);
            (dx * dx + dz * dz).sqrt()
        };
        let weight = (T::one() + lag).sqrt();
        let mut found = false;
        if radius > T::zero() {
            for j in 0..=p.grid() {
                if dist(j) <= radius {
                    found = true;
                    c_l = c_l.min(weight * s.speed[j]);
                }
            }
        } else {
            let j = (0..=p.grid())
                .min_by(|&a, &b| dist(a).partial_cmp(&dist(b)).unwrap_or(std::cmp::Ordering::Equal))
                .unwrap_or(0);
            found = true;
            c_l = c_l.min(weight * s.speed[j]);
        }
        if !found {
            skipped.push(idx);
        }
    }
    Ok(LowerSpeedReport { c_l, skipped })
}

/// Per snapshot, min over nodes of λ_min/H − 1/n.
pub fn umbilicity_gap<T: Scalar>(traj: &Trajectory<T>) -> Result<Vec<(T, T)>> {
    traj.snapshots()
        .iter()
        .map(|s| {
            let mut worst = T::infinity();
            for (j, l) in s.lambda.iter().enumerate() {
                let h: T = l.iter().copied().sum();
                if !(h > T::zero()) {
                    return Err(FlowError::Domain(format!(
                        "mean curvature {h} ≤ 0 at node {j}, t = {}",
                        s.time
                    )));
                }
                let min = l.iter().copied().fold(T::infinity(), T::min);
                worst = worst.min(min / h - T::one() / from_usize(l.len()));
            }
            Ok((s.time, worst))
        })
        .collect()
}

/// sup over t ∈ [t₀ − K²r², t₀] and nodes with |x − p| < Lr of
/// (L²r² − |x − p|²)(t − t₀ + K²r²)^{1/2} G, divided by (1 + K)L⁵r².
pub fn interior_estimate_statistic<T: Scalar>(traj: &Trajectory<T>, p: T, r: T, l: T, k: T) -> Result<T> {
    if !(r > T::zero() && l > T::zero() && k > T::zero()) {
        return Err(FlowError::Domain("interior estimate needs r, L, K > 0".into()));
    }
    let t0 = final_time(traj)?;
    let window = k * k * r * r;
    let start = t0 - window;
    let first = traj.first().map(|s| s.time).unwrap_or(t0);
    if first > start {
        return Err(FlowError::Domain(format!(
            "trajectory starts at {first}, after the window start {start}"
        )));
    }
    let lr2 = l * l * r * r;
    let mut sup = T::zero();
    for (idx, s) in traj.snapshots().iter().enumerate() {
        if s.time < start {
            continue;
        }
        let prof = s
            .support()
            .ok_or_else(|| FlowError::Domain("interior estimate needs support snapshots".into()))?;
        let inner = prof.recentered(p).into_iter().fold(T::infinity(), T::min);
        if inner < r {
            return Err(FlowError::Domain(format!(
                "ball B({p}, {r}) is not contained in snapshot {idx} (t = {}, inradius about p {inner})",
                s.time
            )));
        }
        let tw = (s.time - start).max(T::zero()).sqrt();
        for j in 0..=prof.grid() {
            let (x, z) = prof.boundary_point(j);
            let d2 = x * x + (z - p) * (z - p);
            if d2 < lr2 {
                sup = sup.max((lr2 - d2) * tw * s.speed[j]);
            }
        }
    }
    Ok(sup / ((T::one() + k) * l.powi(5) * r * r))
}

/// Placement of a·ℬᵐ: the barrier at solver time t is
/// z ≥ c ρ²/(2a) + (t + time_offset)/a + z_shift, with ρ the axis distance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct BarrierPlacement<T: Scalar> {
    pub a: T,
    pub z_shift: T,
    pub time_offset: T,
}

/// Distance above the barrier of the lowest boundary point at every
/// snapshot, reported as violations (negative margins are inside).
pub fn barrier_comparison<T: Scalar>(
    traj: &Trajectory<T>,
    bowl: &TranslatingParaboloid<T>,
    placement: &BarrierPlacement<T>,
    eps_grid: T,
) -> Result<EnvelopeReport<T>> {
    let a = placement.a;
    if !(a > T::zero()) {
        return Err(FlowError::Domain("barrier scale must be positive".into()));
    }
    let c = bowl.c_m();
    let two = lit::<T>(2.0);
    let profiles = supports(traj)?;
    let mut margins = Vec::with_capacity(profiles.len());
    for (idx, &(t, p)) in profiles.iter().enumerate() {
        let mut gap = T::infinity();
        for j in 0..=p.grid() {
            let (rho, z) = p.boundary_point(j);
            let floor = c * rho * rho / (two * a) + (t + placement.time_offset) / a + placement.z_shift;
            gap = gap.min(z - floor);
        }
        if idx == 0 && gap < T::zero() {
            return Err(FlowError::Domain(format!(
                "initial snapshot is not inside the placed barrier (margin {gap})"
            )));
        }
        margins.push((t, -gap));
    }
    Ok(EnvelopeReport::from_margins(a, margins, eps_grid))
}

/// A convex body known through its widths along the coordinate axes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub enum ConvexBody<T: Scalar> {
    Profile(SupportProfile<T>),
    /// h(e_i) + h(−e_i) for each axis of ℝ^{n+1}.
    AxisWidths(Vec<T>),
}

impl<T: Scalar> ConvexBody<T> {
    /// ℝᵐ × S^{n−m} of radius r, truncated to a window of the given length
    /// in the flat directions.
    pub fn truncated_cylinder(n: usize, m: usize, r: T, window: T) -> Self {
        let two = lit::<T>(2.0);
        Self::AxisWidths((0..=n).map(|i| if i < m { window } else { two * r }).collect())
    }

    /// {|x_{n+1}| ≤ thickness/2}, truncated to a window in the other n
    /// directions.
    pub fn slab(n: usize, thickness: T, window: T) -> Self {
        Self::AxisWidths((0..=n).map(|i| if i < n { window } else { thickness }).collect())
    }
}

/// Heuristic dimension of the tangent cone at infinity: 0 for closed
/// profiles, otherwise the number of axes whose width exceeds threshold
/// times the smallest width.
pub fn recession_dimension<T: Scalar>(body: &ConvexBody<T>, threshold: T) -> usize {
    match body {
        ConvexBody::Profile(_) => 0,
        ConvexBody::AxisWidths(w) => {
            let min = w.iter().copied().fold(T::infinity(), T::min);
            w.iter().filter(|&&x| x > threshold * min).count()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model_solutions::ShrinkingCylinder;
    use crate::speed_calculus::Speed;

    #[test]
    fn type1_on_exact_cylinder() {
        let cyl = ShrinkingCylinder::new(Speed::<f64>::mean(2), 1).unwrap();
        let times: Vec<f64> = (1..=20).map(|k| -(k as f64) * 0.5).collect();
        let mut times = times;
        times.reverse();
        let traj = Trajectory::from_model(&cyl, &times).unwrap();
        let v = type1_sup(&traj, Some(0.0)).unwrap();
        assert!((v - 0.5f64.sqrt()).abs() < 1e-12);
        assert!(type1_sup(&traj, Some(-1.0)).is_err());
    }

    #[test]
    fn recession_calibration() {
        let t = RECESSION_THRESHOLD;
        assert_eq!(recession_dimension(&ConvexBody::truncated_cylinder(2, 1, 1.0, 1e3), t), 1);
        assert_eq!(recession_dimension(&ConvexBody::slab(3, 1.0, 1e3), t), 3);
        let p = SupportProfile::<f64>::sphere(2, 16, 1.0).unwrap();
        assert_eq!(recession_dimension(&ConvexBody::Profile(p), t), 0);
    }

    #[test]
    fn cylinder_spectrum_gap() {
        let cyl = ShrinkingCylinder::new(Speed::<f64>::mean(3), 1).unwrap();
        let traj = Trajectory::from_model(&cyl, &[-2.0, -1.0]).unwrap();
        for (_, g) in umbilicity_gap(&traj).unwrap() {
            assert!((g + 1.0 / 3.0).abs() < 1e-15);
        }
    }
}
