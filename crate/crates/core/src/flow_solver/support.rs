use serde::{Deserialize, Serialize};

use crate::error::{FlowError, Result};
use crate::scalar::{from_usize, lit, to_f64, Scalar};
use crate::speed_calculus::Speed;

/// Default CFL safety factor.
pub const DEFAULT_CFL: f64 = 0.2;

/// Support function h(θ) of a convex hypersurface of revolution, sampled at
/// θ_j = jπ/N, j = 0..=N. The symmetry axis is θ = 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct SupportProfile<T: Scalar> {
    n: usize,
    h: Vec<T>,
    time: T,
}

/// Failed step: the reason, and the last profile that satisfied the
/// invariants.
#[derive(Debug, Clone)]
pub struct StepFailure<T: Scalar> {
    pub error: FlowError,
    pub last_valid: SupportProfile<T>,
}

impl<T: Scalar> std::fmt::Display for StepFailure<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} (last valid time {})", self.error, self.last_valid.time)
    }
}

impl<T: Scalar> std::error::Error for StepFailure<T> {}

impl<T: Scalar> SupportProfile<T> {
    /// Wraps samples of h; at least 4 intervals are needed for the stencils.
    pub fn new(n: usize, h: Vec<T>, time: T) -> Result<Self> {
        if n == 0 {
            return Err(FlowError::Domain("hypersurface dimension must be ≥ 1".into()));
        }
        if h.len() < 5 {
            return Err(FlowError::Domain(format!(
                "support profile needs at least 5 nodes, got {}",
                h.len()
            )));
        }
        if let Some(bad) = h.iter().find(|x| !x.is_finite()) {
            return Err(FlowError::Domain(format!("non-finite support value {bad}")));
        }
        Ok(Self { n, h, time })
    }

    pub fn from_fn(n: usize, grid: usize, f: impl Fn(T) -> T) -> Result<Self> {
        let d = T::PI() / from_usize(grid);
        Self::new(n, (0..=grid).map(|j| f(d * from_usize(j))).collect(), T::zero())
    }

    /// Round sphere of radius r centered at the origin.
    pub fn sphere(n: usize, grid: usize, r: T) -> Result<Self> {
        Self::from_fn(n, grid, |_| r)
    }

    /// Round sphere of radius r centered at height `offset` on the axis.
    pub fn offset_sphere(n: usize, grid: usize, r: T, offset: T) -> Result<Self> {
        Self::from_fn(n, grid, |t| r + offset * t.cos())
    }

    /// Ellipsoid of revolution with semi-axis `a` along the axis and `b`
    /// across it.
    pub fn ellipsoid(n: usize, grid: usize, a: T, b: T) -> Result<Self> {
        if !(a > T::zero() && b > T::zero()) {
            return Err(FlowError::Domain(format!("ellipsoid semi-axes must be positive, got {a}, {b}")));
        }
        Self::from_fn(n, grid, |t| {
            let (c, s) = (t.cos(), t.sin());
            (a * a * c * c + b * b * s * s).sqrt()
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn grid(&self) -> usize {
        self.h.len() - 1
    }

    pub fn values(&self) -> &[T] {
        &self.h
    }

    pub fn time(&self) -> T {
        self.time
    }

    pub fn with_time(mut self, time: T) -> Self {
        self.time = time;
        self
    }

    pub fn spacing(&self) -> T {
        T::PI() / from_usize(self.grid())
    }

    pub fn theta(&self, j: usize) -> T {
        self.spacing() * from_usize(j)
    }

    /// h at index j, extended evenly across both poles.
    fn at(&self, j: isize) -> T {
        let n = self.grid() as isize;
        let k = if j < 0 {
            -j
        } else if j > n {
            2 * n - j
        } else {
            j
        };
        self.h[k as usize]
    }

    pub fn derivative(&self, j: usize) -> T {
        let d = self.spacing();
        self.d1_raw(j) / (lit::<T>(12.0) * d)
    }

    pub fn second_derivative(&self, j: usize) -> T {
        let d = self.spacing();
        self.d2_raw(j) / (lit::<T>(12.0) * d * d)
    }

    /// 12Δθ·h′ from the five-point stencil.
    fn d1_raw(&self, j: usize) -> T {
        let j = j as isize;
        self.at(j - 2) - lit::<T>(8.0) * (self.at(j - 1) - self.at(j + 1)) - self.at(j + 2)
    }

    /// 12Δθ²·h″ from the five-point stencil.
    fn d2_raw(&self, j: usize) -> T {
        let j = j as isize;
        lit::<T>(16.0) * (self.at(j - 1) + self.at(j + 1)) - lit::<T>(30.0) * self.at(j) - self.at(j - 2) - self.at(j + 2)
    }

    /// (ρ₁, ρ₂) = (h″+h, h′cot θ + h); at the poles ρ₂ = ρ₁.
    pub fn principal_radii(&self, j: usize) -> Result<(T, T)> {
        let t = self.theta(j);
        self.radii_with(j, t.cos() / t.sin())
    }

    /// Principal curvatures (1/ρ₁, 1/ρ₂, …, 1/ρ₂) at node j.
    pub fn curvatures(&self, j: usize) -> Result<Vec<T>> {
        let (r1, r2) = self.principal_radii(j)?;
        let mut out = vec![T::one() / r2; self.n];
        out[0] = T::one() / r1;
        Ok(out)
    }

    /// Boundary point (ρ, z) with outward normal at angle θ from the axis.
    pub fn boundary_point(&self, j: usize) -> (T, T) {
        let t = self.theta(j);
        let (c, s) = (t.cos(), t.sin());
        let (h, dh) = (self.h[j], self.derivative(j));
        (h * s + dh * c, h * c - dh * s)
    }

    pub fn min_value(&self) -> T {
        self.h.iter().copied().fold(T::infinity(), T::min)
    }

    pub fn max_value(&self) -> T {
        self.h.iter().copied().fold(T::neg_infinity(), T::max)
    }

    /// Smallest ρ₁ over the grid; fails on convexity loss.
    pub fn min_rho1(&self) -> Result<T> {
        (0..=self.grid()).try_fold(T::infinity(), |m, j| Ok(m.min(self.principal_radii(j)?.0)))
    }

    /// h recentered at the axis point z_c: h(θ) − z_c cos θ.
    pub fn recentered(&self, z_c: T) -> Vec<T> {
        (0..=self.grid()).map(|j| self.h[j] - z_c * self.theta(j).cos()).collect()
    }

    /// Radius and axis height of the largest ball centered on the axis.
    pub fn inradius(&self) -> (T, T) {
        let f = |z: T| self.recentered(z).into_iter().fold(T::infinity(), T::min);
        let (mut lo, mut hi) = (-self.h[self.grid()], self.h[0]);
        let g = lit::<T>(0.5 * (5f64.sqrt() - 1.0));
        for _ in 0..200 {
            let x1 = hi - g * (hi - lo);
            let x2 = lo + g * (hi - lo);
            if f(x1) < f(x2) {
                lo = x1;
            } else {
                hi = x2;
            }
            if hi - lo <= T::epsilon() * (T::one() + hi.abs()) {
                break;
            }
        }
        let z = (lo + hi) / lit(2.0);
        (f(z), z)
    }

    /// ∂_t h = −γ(λ) at every node.
    pub fn velocity(&self, speed: &Speed<T>) -> Result<Vec<T>> {
        let mut ws = Workspace::new(self);
        Ok(self.evaluate(speed, &mut ws, false)?.velocity)
    }

    /// Stable explicit step: safety·Δθ² / max_j Σ_i γ_i λ_i².
    pub fn cfl_dt(&self, speed: &Speed<T>, safety: T) -> Result<T> {
        let mut ws = Workspace::new(self);
        let ev = self.evaluate(speed, &mut ws, true)?;
        Ok(ev.dt(self.spacing(), safety))
    }

    /// One Heun step of length dt.
    pub fn step(&self, speed: &Speed<T>, dt: T) -> std::result::Result<Self, StepFailure<T>> {
        let fail = |error| StepFailure {
            error,
            last_valid: self.clone(),
        };
        if dt == T::zero() {
            return Ok(self.clone());
        }
        let mut ws = Workspace::new(self);
        let ev = self.evaluate(speed, &mut ws, false).map_err(fail)?;
        self.advance(speed, dt, &ev.velocity, &mut ws)
            .map(|(p, _)| p)
            .map_err(fail)
    }

    /// Velocity, CFL coefficient and min ρ₁ in a single pass over the nodes.
    pub(crate) fn evaluate(&self, speed: &Speed<T>, ws: &mut Workspace<T>, with_gradient: bool) -> Result<Evaluation<T>> {
        check_dim(self, speed)?;
        ws.fit(self);
        let mut velocity = Vec::with_capacity(self.h.len());
        let mut coeff = T::zero();
        let mut min_rho1 = T::infinity();
        let d = self.spacing();
        let (f1, f2) = (T::one() / (lit::<T>(12.0) * d), T::one() / (lit::<T>(12.0) * d * d));
        let last = self.grid();
        ws.padded.clear();
        ws.padded.extend([self.h[2], self.h[1]]);
        ws.padded.extend_from_slice(&self.h);
        ws.padded.extend([self.h[last - 1], self.h[last - 2]]);
        let (c8, c16, c30) = (lit::<T>(8.0), lit::<T>(16.0), lit::<T>(30.0));
        for (j, w) in ws.padded.windows(5).enumerate() {
            let rho1 = (c16 * (w[1] + w[3]) - c30 * w[2] - w[0] - w[4]) * f2 + w[2];
            let rho2 = if j == 0 || j == last {
                rho1
            } else {
                (w[0] - c8 * (w[1] - w[3]) - w[4]) * f1 * ws.cot[j] + w[2]
            };
            if !(rho1 > T::zero()) || (self.n > 1 && !(rho2 > T::zero())) {
                return Err(FlowError::ConvexityLoss {
                    node: j,
                    theta: to_f64(self.theta(j)),
                    rho1: to_f64(rho1),
                    rho2: to_f64(rho2),
                });
            }
            let (r1, r2) = (rho1, rho2);
            min_rho1 = min_rho1.min(r1);
            ws.lambda.iter_mut().for_each(|x| *x = T::one() / r2);
            ws.lambda[0] = T::one() / r1;
            let g = if with_gradient {
                let g = speed.value_gradient_into(&ws.lambda, &mut ws.grad)?;
                let c: T = ws.grad.iter().zip(&ws.lambda).map(|(&d, &l)| d * l * l).sum();
                coeff = coeff.max(c);
                g
            } else {
                speed.eval(&ws.lambda)?
            };
            velocity.push(-g);
        }
        Ok(Evaluation {
            velocity,
            coeff,
            min_rho1,
        })
    }

    /// Heun update from a precomputed first-stage velocity; also evaluates
    /// the new profile (which checks its convexity).
    pub(crate) fn advance(
        &self,
        speed: &Speed<T>,
        dt: T,
        k1: &[T],
        ws: &mut Workspace<T>,
    ) -> Result<(Self, Evaluation<T>)> {
        let mid = Self {
            n: self.n,
            h: self.h.iter().zip(k1).map(|(&h, &k)| h + dt * k).collect(),
            time: self.time + dt,
        };
        let k2 = mid.evaluate(speed, ws, false)?.velocity;
        let half = lit::<T>(0.5);
        let out = Self {
            n: self.n,
            h: self
                .h
                .iter()
                .zip(k1.iter().zip(&k2))
                .map(|(&h, (&a, &b))| h + half * dt * (a + b))
                .collect(),
            time: self.time + dt,
        };
        let ev = out.evaluate(speed, ws, true)?;
        Ok((out, ev))
    }

    fn radii_with(&self, j: usize, cot: T) -> Result<(T, T)> {
        let d = self.spacing();
        let k = lit::<T>(12.0) * d;
        self.radii_scaled(j, cot, T::one() / k, T::one() / (k * d))
    }

    /// Radii with precomputed stencil factors 1/(12Δθ) and 1/(12Δθ²).
    fn radii_scaled(&self, j: usize, cot: T, f1: T, f2: T) -> Result<(T, T)> {
        let rho1 = self.d2_raw(j) * f2 + self.h[j];
        let rho2 = if j == 0 || j == self.grid() {
            rho1
        } else {
            self.d1_raw(j) * f1 * cot + self.h[j]
        };
        if !(rho1 > T::zero()) || (self.n > 1 && !(rho2 > T::zero())) {
            return Err(FlowError::ConvexityLoss {
                node: j,
                theta: to_f64(self.theta(j)),
                rho1: to_f64(rho1),
                rho2: to_f64(rho2),
            });
        }
        Ok((rho1, rho2))
    }
}

/// Scratch buffers and the cot θ table for repeated evaluations.
#[derive(Debug, Clone)]
pub(crate) struct Workspace<T: Scalar> {
    cot: Vec<T>,
    padded: Vec<T>,
    lambda: Vec<T>,
    grad: Vec<T>,
}

impl<T: Scalar> Workspace<T> {
    pub(crate) fn new(p: &SupportProfile<T>) -> Self {
        let mut ws = Self {
            cot: Vec::new(),
            padded: Vec::new(),
            lambda: Vec::new(),
            grad: Vec::new(),
        };
        ws.fit(p);
        ws
    }

    fn fit(&mut self, p: &SupportProfile<T>) {
        if self.cot.len() != p.h.len() {
            self.cot = (0..=p.grid())
                .map(|j| {
                    let t = p.theta(j);
                    t.cos() / t.sin()
                })
                .collect();
        }
        self.lambda.resize(p.n, T::zero());
        self.grad.resize(p.n, T::zero());
    }
}

pub(crate) struct Evaluation<T: Scalar> {
    pub velocity: Vec<T>,
    pub coeff: T,
    pub min_rho1: T,
}

impl<T: Scalar> Evaluation<T> {
    pub fn dt(&self, spacing: T, safety: T) -> T {
        if self.coeff > T::zero() {
            safety * spacing * spacing / self.coeff
        } else {
            T::infinity()
        }
    }
}

fn check_dim<T: Scalar>(p: &SupportProfile<T>, speed: &Speed<T>) -> Result<()> {
    if speed.dim() != p.n {
        return Err(FlowError::Dimension {
            expected: p.n,
            got: speed.dim(),
        });
    }
    Ok(())
}

/// Step with the CFL bound; see [`SupportProfile::step`].
pub fn step_support<T: Scalar>(
    profile: &SupportProfile<T>,
    speed: &Speed<T>,
    dt: T,
) -> std::result::Result<SupportProfile<T>, StepFailure<T>> {
    profile.step(speed, dt)
}

pub fn cfl_dt<T: Scalar>(profile: &SupportProfile<T>, speed: &Speed<T>) -> Result<T> {
    profile.cfl_dt(speed, lit(DEFAULT_CFL))
}
