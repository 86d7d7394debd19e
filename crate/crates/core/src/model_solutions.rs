//! Closed-form model solutions: shrinking spheres and cylinders, and the
//! translating paraboloid barriers. Nothing here is discretized except when a
//! caller asks for samples.

use crate::error::{FlowError, Result};
use crate::linalg::SymMatrix;
use crate::scalar::{from_usize, lit, Scalar};
use crate::speed_calculus::{cylinder_ray, Speed};

/// Number of log-spaced points in the default residual sweep (plus s = 0).
pub const RESIDUAL_GRID_POINTS: usize = 512;

/// Points per curve when sampling profiles for the rescaled gap.
pub const GAP_SAMPLES: usize = 1024;

/// 𝒞ᵐ_t = {x₁² + … + x²_{n−m+1} ≤ −2t/c_m}: ℝᵐ × S^{n−m} shrinking to the
/// origin at t = 0.
#[derive(Debug, Clone)]
pub struct ShrinkingCylinder<T: Scalar> {
    speed: Speed<T>,
    m: usize,
    c_m: T,
}

impl<T: Scalar> ShrinkingCylinder<T> {
    pub fn new(speed: Speed<T>, m: usize) -> Result<Self> {
        let c_m = speed.cylinder_constant(m)?;
        Ok(Self { speed, m, c_m })
    }

    pub fn speed(&self) -> &Speed<T> {
        &self.speed
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.speed.dim()
    }

    pub fn c_m(&self) -> T {
        self.c_m
    }

    /// r(t) = √(−2t/c_m).
    pub fn radius(&self, t: T) -> Result<T> {
        if !(t < T::zero()) {
            return Err(FlowError::Domain(format!(
                "cylinder radius needs t < 0 (extinction at t = 0), got {t}"
            )));
        }
        Ok((-lit::<T>(2.0) * t / self.c_m).sqrt())
    }

    /// Principal curvatures (0,…,0,1/r,…,1/r) at time t.
    pub fn curvatures(&self, t: T) -> Result<Vec<T>> {
        let r = self.radius(t)?;
        Ok(cylinder_ray::<T>(self.n(), self.m).into_iter().map(|x| x / r).collect())
    }

    /// Weingarten map in a principal frame.
    pub fn weingarten(&self, t: T) -> Result<SymMatrix<T>> {
        Ok(SymMatrix::diagonal(&self.curvatures(t)?))
    }

    /// √(−t)|A|, constant along the solution.
    pub fn type1_constant(&self) -> T {
        (from_usize::<T>(self.n() - self.m) * self.c_m / lit(2.0)).sqrt()
    }

    /// (t, r(t)) at `count` times evenly spaced in [t0, t1], t1 < 0.
    pub fn sample(&self, t0: T, t1: T, count: usize) -> Result<Vec<(T, T)>> {
        let count = count.max(2);
        (0..count)
            .map(|k| {
                let t = t0 + (t1 - t0) * from_usize::<T>(k) / from_usize::<T>(count - 1);
                Ok((t, self.radius(t)?))
            })
            .collect()
    }
}

/// ℬᵐ_t = {x_{n+1} ≥ (c_m/2)(x₁² + … + x²_{n−m+1}) + t}: a paraboloid
/// translating with unit speed, times ℝ^{m−1}.
#[derive(Debug, Clone)]
pub struct TranslatingParaboloid<T: Scalar> {
    speed: Speed<T>,
    m: usize,
    c_m: T,
}

impl<T: Scalar> TranslatingParaboloid<T> {
    pub fn new(speed: Speed<T>, m: usize) -> Result<Self> {
        if m == 0 {
            return Err(FlowError::Domain("translating paraboloid needs m ≥ 1".into()));
        }
        let c_m = speed.cylinder_constant(m)?;
        Ok(Self { speed, m, c_m })
    }

    pub fn speed(&self) -> &Speed<T> {
        &self.speed
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.speed.dim()
    }

    pub fn c_m(&self) -> T {
        self.c_m
    }

    /// Height of the boundary above the point at distance ρ from the axis.
    pub fn height(&self, rho: T, t: T) -> T {
        self.c_m * rho * rho / lit(2.0) + t
    }

    /// c/√(1+c²s²)·(0,…,0, 1/(1+c²s²), 1,…,1) with m−1 zeros, s = |x′|.
    pub fn curvatures(&self, s: T) -> Result<Vec<T>> {
        if s < T::zero() || !s.is_finite() {
            return Err(FlowError::Domain(format!("paraboloid radius must be ≥ 0, got {s}")));
        }
        let c = self.c_m;
        let w = T::one() + c * c * s * s;
        let pre = c / w.sqrt();
        let n = self.n();
        Ok((0..n)
            .map(|i| {
                if i + 1 < self.m {
                    T::zero()
                } else if i + 1 == self.m {
                    pre / w
                } else {
                    pre
                }
            })
            .collect())
    }

    /// G(λ(s)) minus the normal speed 1/√(1+c²s²) of unit translation.
    pub fn subsolution_residual(&self, s: T) -> Result<T> {
        let c = self.c_m;
        let lambda = self.curvatures(s)?;
        let g = self.speed.eval(&lambda)?;
        Ok(g - T::one() / (T::one() + c * c * s * s).sqrt())
    }

    /// Residuals on `s = 0` plus `points` log-spaced values in [1e-3, 1e3].
    pub fn residual_sweep(&self, points: usize) -> Result<Vec<(T, T)>> {
        residual_grid::<T>(points)
            .into_iter()
            .map(|s| Ok((s, self.subsolution_residual(s)?)))
            .collect()
    }

    /// Distance between ∂(a·ℬᵐ_{t/a²}) and ∂𝒞ᵐ_t in the (ρ, z) profile
    /// plane, restricted to the slab |z| ≤ region_radius.
    pub fn rescaled_gap(&self, a: T, t: T, region_radius: T) -> Result<T> {
        if !(a > T::zero()) || !(t < T::zero()) || region_radius < T::zero() {
            return Err(FlowError::Domain(format!(
                "rescaled gap needs a > 0, t < 0, radius ≥ 0 (got a={a}, t={t}, R={region_radius})"
            )));
        }
        let c = self.c_m;
        let two = lit::<T>(2.0);
        let rc = (-two * t / c).sqrt();
        let big_r = region_radius;
        // Rescaled boundary: z = (cρ² + 2t)/(2a), i.e. ρ(z) = √((2az − 2t)/c).
        let rho_of = |z: T| ((two * a * z - two * t) / c).max(T::zero()).sqrt();
        let z_vertex = t / a;
        let z_lo = z_vertex.max(-big_r);
        if z_lo > big_r {
            return Ok(T::infinity());
        }
        let k = GAP_SAMPLES;
        let par: Vec<(T, T)> = (0..k)
            .map(|i| {
                let z = if k == 1 {
                    z_lo
                } else {
                    z_lo + (big_r - z_lo) * from_usize::<T>(i) / from_usize::<T>(k - 1)
                };
                (rho_of(z), z)
            })
            .collect();
        let par = refine_near_vertex(par, &rho_of, z_lo, big_r);
        let cyl: Vec<(T, T)> = (0..k)
            .map(|i| {
                let z = -big_r + two * big_r * from_usize::<T>(i) / from_usize::<T>(k - 1);
                (rc, z)
            })
            .collect();
        Ok(hausdorff(&par, &cyl))
    }
}

/// Adds points where the paraboloid profile turns sharply near its vertex.
fn refine_near_vertex<T: Scalar>(
    mut par: Vec<(T, T)>,
    rho_of: &impl Fn(T) -> T,
    z_lo: T,
    z_hi: T,
) -> Vec<(T, T)> {
    let span = z_hi - z_lo;
    if span <= T::zero() {
        return par;
    }
    for i in 1..=GAP_SAMPLES {
        let u = from_usize::<T>(i) / from_usize::<T>(GAP_SAMPLES);
        let z = z_lo + span * u * u * u * u;
        par.push((rho_of(z), z));
    }
    par.sort_by(|x, y| x.1.partial_cmp(&y.1).unwrap_or(std::cmp::Ordering::Equal));
    par
}

fn point_segment<T: Scalar>(p: (T, T), a: (T, T), b: (T, T)) -> T {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let u = if len2 > T::zero() {
        (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).max(T::zero()).min(T::one())
    } else {
        T::zero()
    };
    let (qx, qy) = (a.0 + u * dx, a.1 + u * dy);
    ((p.0 - qx) * (p.0 - qx) + (p.1 - qy) * (p.1 - qy)).sqrt()
}

fn point_polyline<T: Scalar>(p: (T, T), line: &[(T, T)]) -> T {
    match line.len() {
        0 => T::infinity(),
        1 => point_segment(p, line[0], line[0]),
        _ => line
            .windows(2)
            .map(|w| point_segment(p, w[0], w[1]))
            .fold(T::infinity(), T::min),
    }
}

/// Symmetric Hausdorff distance between two sampled polylines.
pub fn hausdorff<T: Scalar>(a: &[(T, T)], b: &[(T, T)]) -> T {
    let one_way = |x: &[(T, T)], y: &[(T, T)]| {
        x.iter()
            .map(|&p| point_polyline(p, y))
            .fold(T::zero(), T::max)
    };
    one_way(a, b).max(one_way(b, a))
}

/// s = 0 followed by `points` log-spaced values in [1e-3, 1e3].
pub fn residual_grid<T: Scalar>(points: usize) -> Vec<T> {
    let mut out = vec![T::zero()];
    let denom = points.saturating_sub(1).max(1) as f64;
    out.extend((0..points).map(|i| lit::<T>(10f64.powf(-3.0 + 6.0 * i as f64 / denom))));
    out
}
