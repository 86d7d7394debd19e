use serde::{Deserialize, Serialize};

use crate::error::{FlowError, Result};
use crate::linalg::SymMatrix;
use crate::scalar::{from_usize, lit, Scalar};
use crate::speed_calculus::Speed;

/// Lower boundary of a convex region written as a graph z = u(x) over a
/// uniform box grid in one or two variables. Boundary nodes are held fixed
/// (Dirichlet data from the initial patch).
///
/// The region lies above the graph, so convex patches have nonnegative
/// Weingarten eigenvalues and the boundary moves up: u_t = √(1+|Du|²)·γ(Ŵ).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct GraphPatch<T: Scalar> {
    n: usize,
    shape: (usize, usize),
    origin: (T, T),
    spacing: T,
    u: Vec<T>,
    time: T,
    gradient_bound: T,
}

/// Geometry of the graph at one node.
#[derive(Debug, Clone)]
pub struct GraphNode<T: Scalar> {
    pub gradient: Vec<T>,
    pub w: SymMatrix<T>,
    pub vertical_factor: T,
}

impl<T: Scalar> GraphPatch<T> {
    /// Samples u on `points` nodes per axis over [lo, hi]ⁿ.
    pub fn from_fn(n: usize, lo: T, hi: T, points: usize, f: impl Fn(&[T]) -> T) -> Result<Self> {
        if !(n == 1 || n == 2) {
            return Err(FlowError::Domain(format!("graph patches support n ∈ {{1, 2}}, got {n}")));
        }
        if points < 5 || !(hi > lo) {
            return Err(FlowError::Domain("graph patch needs ≥ 5 nodes per axis and hi > lo".into()));
        }
        let spacing = (hi - lo) / from_usize(points - 1);
        let shape = (points, if n == 2 { points } else { 1 });
        let mut u = Vec::with_capacity(shape.0 * shape.1);
        for i in 0..shape.0 {
            for j in 0..shape.1 {
                let x = lo + spacing * from_usize(i);
                let y = lo + spacing * from_usize(j);
                let p = if n == 2 { vec![x, y] } else { vec![x] };
                u.push(f(&p));
            }
        }
        let mut patch = Self {
            n,
            shape,
            origin: (lo, lo),
            spacing,
            u,
            time: T::zero(),
            gradient_bound: T::zero(),
        };
        patch.gradient_bound = patch.max_gradient();
        Ok(patch)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn shape(&self) -> (usize, usize) {
        self.shape
    }

    pub fn spacing(&self) -> T {
        self.spacing
    }

    pub fn time(&self) -> T {
        self.time
    }

    pub fn values(&self) -> &[T] {
        &self.u
    }

    /// Largest |Du| seen at an interior node over the patch's history.
    pub fn gradient_bound(&self) -> T {
        self.gradient_bound
    }

    pub fn value(&self, i: usize, j: usize) -> T {
        self.u[i * self.shape.1 + j]
    }

    pub fn position(&self, i: usize, j: usize) -> Vec<T> {
        let x = self.origin.0 + self.spacing * from_usize(i);
        if self.n == 2 {
            vec![x, self.origin.1 + self.spacing * from_usize(j)]
        } else {
            vec![x]
        }
    }

    /// (x, z) ↦ (a x, a(z − z_c)) with the time replaced.
    pub fn rescaled(&self, a: T, z_c: T, time: T) -> Self {
        Self {
            origin: (a * self.origin.0, a * self.origin.1),
            spacing: a * self.spacing,
            u: self.u.iter().map(|&z| a * (z - z_c)).collect(),
            time,
            ..self.clone()
        }
    }

    /// Interior node indices (all nodes off the boundary).
    pub fn interior(&self) -> Vec<(usize, usize)> {
        let (nx, ny) = self.shape;
        let ys: Vec<usize> = if self.n == 2 { (1..ny - 1).collect() } else { vec![0] };
        (1..nx - 1)
            .flat_map(|i| ys.iter().map(move |&j| (i, j)))
            .collect()
    }

    fn max_gradient(&self) -> T {
        self.interior()
            .into_iter()
            .map(|(i, j)| crate::scalar::norm(&self.derivatives(i, j).0))
            .fold(T::zero(), T::max)
    }

    /// Fourth-order first derivative along an axis at position i of len,
    /// off-centered next to the boundary.
    fn d1(&self, f: impl Fn(isize) -> T, i: usize, len: usize) -> T {
        let h = lit::<T>(12.0) * self.spacing;
        let c = |x: f64| lit::<T>(x);
        if i >= 2 && i + 2 < len {
            (f(-2) - c(8.0) * f(-1) + c(8.0) * f(1) - f(2)) / h
        } else if i == 1 {
            (-c(3.0) * f(-1) - c(10.0) * f(0) + c(18.0) * f(1) - c(6.0) * f(2) + f(3)) / h
        } else {
            (c(3.0) * f(1) + c(10.0) * f(0) - c(18.0) * f(-1) + c(6.0) * f(-2) - f(-3)) / h
        }
    }

    fn d2(&self, f: impl Fn(isize) -> T, i: usize, len: usize) -> T {
        let h = lit::<T>(12.0) * self.spacing * self.spacing;
        let c = |x: f64| lit::<T>(x);
        let shifted = |s: isize| {
            c(10.0) * f(-s) - c(15.0) * f(0) - c(4.0) * f(s) + c(14.0) * f(2 * s) - c(6.0) * f(3 * s) + f(4 * s)
        };
        if i >= 2 && i + 2 < len {
            (-f(-2) + c(16.0) * f(-1) - c(30.0) * f(0) + c(16.0) * f(1) - f(2)) / h
        } else if i == 1 {
            shifted(1) / h
        } else {
            shifted(-1) / h
        }
    }

    /// (Du, D²u) at an interior node, fourth order throughout.
    pub fn derivatives(&self, i: usize, j: usize) -> (Vec<T>, SymMatrix<T>) {
        let at = |di: isize, dj: isize| {
            self.value((i as isize + di) as usize, (j as isize + dj) as usize)
        };
        let (nx, ny) = self.shape;
        let ux = self.d1(|k| at(k, 0), i, nx);
        let uxx = self.d2(|k| at(k, 0), i, nx);
        if self.n == 1 {
            return (vec![ux], SymMatrix::diagonal(&[uxx]));
        }
        let uy = self.d1(|k| at(0, k), j, ny);
        let uyy = self.d2(|k| at(0, k), j, ny);
        let uxy = self.d1(|a| self.d1(|b| at(a, b), j, ny), i, nx);
        let mut hess = SymMatrix::zeros(2);
        hess.set(0, 0, uxx);
        hess.set(1, 1, uyy);
        hess.set(0, 1, uxy);
        (vec![ux, uy], hess)
    }

    /// Ŵ = P D²u P / √(1+|Du|²), P = I − Du Duᵀ/(v(1+v)), v = √(1+|Du|²).
    pub fn node(&self, i: usize, j: usize) -> GraphNode<T> {
        let (du, d2u) = self.derivatives(i, j);
        let v = (T::one() + crate::scalar::dot(&du, &du)).sqrt();
        let k = T::one() / (v * (T::one() + v));
        let p = SymMatrix::from_fn(self.n, |a, b| {
            let delta = if a == b { T::one() } else { T::zero() };
            delta - k * du[a] * du[b]
        });
        let w = d2u.conjugate(&p.to_dense()).scale(T::one() / v);
        GraphNode {
            gradient: du,
            w,
            vertical_factor: v,
        }
    }

    /// Weingarten eigenvalues at an interior node.
    pub fn curvatures(&self, i: usize, j: usize) -> Result<Vec<T>> {
        self.node(i, j).w.eigenvalues()
    }

    /// u_t at every interior node, in `interior()` order.
    pub fn velocity(&self, speed: &Speed<T>) -> Result<Vec<T>> {
        if speed.dim() != self.n {
            return Err(FlowError::Dimension {
                expected: self.n,
                got: speed.dim(),
            });
        }
        self.interior()
            .into_iter()
            .map(|(i, j)| {
                let node = self.node(i, j);
                let lambda = node.w.eigenvalues()?;
                let g = speed.eval(&lambda).map_err(|e| match e {
                    FlowError::ConeViolation { lambda, facet, normal, value } => FlowError::Domain(format!(
                        "graph node ({i}, {j}) left the cone: λ = {lambda:?}, facet {facet} {normal:?}, value {value:e}"
                    )),
                    other => other,
                })?;
                Ok(node.vertical_factor * g)
            })
            .collect()
    }

    /// safety·Δx² / (n·max Σ_i γ_i).
    pub fn cfl_dt(&self, speed: &Speed<T>, safety: T) -> Result<T> {
        let mut worst = T::zero();
        for (i, j) in self.interior() {
            let lambda = self.curvatures(i, j)?;
            let (_, grad) = speed.value_gradient(&lambda)?;
            worst = worst.max(grad.iter().copied().sum());
        }
        let h = self.spacing;
        Ok(if worst > T::zero() {
            safety * h * h / (from_usize::<T>(self.n) * worst)
        } else {
            T::infinity()
        })
    }

    fn with_update(&self, rates: &[T], dt: T) -> Self {
        let mut out = self.clone();
        for (&(i, j), &r) in self.interior().iter().zip(rates) {
            out.u[i * self.shape.1 + j] = self.value(i, j) + dt * r;
        }
        out.time = self.time + dt;
        out
    }

    /// One Heun step of length dt.
    pub fn step(&self, speed: &Speed<T>, dt: T) -> Result<Self> {
        let k1 = self.velocity(speed)?;
        let mid = self.with_update(&k1, dt);
        let k2 = mid.velocity(speed)?;
        let avg: Vec<T> = k1.iter().zip(&k2).map(|(&a, &b)| (a + b) / lit(2.0)).collect();
        let mut out = self.with_update(&avg, dt);
        out.gradient_bound = self.gradient_bound.max(out.max_gradient());
        Ok(out)
    }
}

pub fn step_graph<T: Scalar>(patch: &GraphPatch<T>, speed: &Speed<T>, dt: T) -> Result<GraphPatch<T>> {
    patch.step(speed, dt)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sphere_cap_curvatures() {
        let r = 1.0;
        let h = 1e-2 * r;
        let patch = GraphPatch::<f64>::from_fn(2, -0.3, 0.3, 61, |x| -(r * r - x[0] * x[0] - x[1] * x[1]).sqrt())
            .unwrap();
        assert!((patch.spacing() - h).abs() < 1e-12);
        for (i, j) in patch.interior() {
            for l in patch.curvatures(i, j).unwrap() {
                assert!((l - 1.0 / r).abs() < 1e-6, "{l}");
            }
        }
    }

    #[test]
    fn plane_is_stationary_under_mean_curvature() {
        let patch = GraphPatch::<f64>::from_fn(2, 0.0, 1.0, 9, |x| 0.3 * x[0] - 0.2 * x[1] + 1.0).unwrap();
        let next = patch.step(&Speed::mean(2), 1e-3).unwrap();
        for (a, b) in patch.values().iter().zip(next.values()) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
