//! Admissible speeds γ on symmetric cones, their eigenvalue jets, derived
//! speeds (γ*, γ†, γ^(m)) and the cylinder constants c_m and m̄(Γ).
//!
//! A speed is positive, increasing in each argument, and 1-homogeneous on an
//! open symmetric convex cone. Every speed in the catalog has a polyhedral
//! cone, so distances to the cone boundary are exact.

mod cone;
mod matrix;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use cone::{ConeDistance, ConeKind, ConeSpec};
pub use matrix::{matrix_hessian_quadform, matrix_speed, EIGEN_GAP_REL};

use crate::error::{FlowError, Result};
use crate::linalg::DenseMatrix;
use crate::scalar::{from_usize, lit, Scalar};

/// Principal curvatures λ₁,…,λₙ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Curvatures<T: Scalar>(pub Vec<T>);

impl<T: Scalar> Curvatures<T> {
    pub fn new(entries: Vec<T>) -> Self {
        Self(entries)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.0
    }

    pub fn sum(&self) -> T {
        self.0.iter().copied().sum()
    }

    /// Frobenius norm |A| of a second fundamental form with these eigenvalues.
    pub fn norm(&self) -> T {
        crate::scalar::norm(&self.0)
    }

    pub fn scaled(&self, s: T) -> Self {
        Self(self.0.iter().map(|&x| x * s).collect())
    }

    pub fn sorted(&self) -> Vec<T> {
        let mut v = self.0.clone();
        v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
        v
    }
}

impl<T: Scalar> From<Vec<T>> for Curvatures<T> {
    fn from(v: Vec<T>) -> Self {
        Self(v)
    }
}

impl<T: Scalar> From<&[T]> for Curvatures<T> {
    fn from(v: &[T]) -> Self {
        Self(v.to_vec())
    }
}

/// Value, gradient and Hessian of γ in eigenvalue coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeedJet<T: Scalar> {
    pub value: T,
    pub gradient: Vec<T>,
    pub hessian: DenseMatrix<T>,
}

/// A user-supplied symmetric speed. Only the value is mandatory; the default
/// jet is a central finite-difference approximation, so its accuracy is
/// whatever the supplied function supports.
pub trait CustomSpeed<T: Scalar>: Send + Sync + fmt::Debug {
    fn id(&self) -> String;
    fn value(&self, lambda: &[T]) -> T;
    fn jet(&self, lambda: &[T]) -> SpeedJet<T> {
        finite_difference_jet(|x| self.value(x), lambda)
    }
}

/// Formula families of the speed catalog.
#[derive(Debug, Clone)]
pub enum Formula<T: Scalar> {
    /// H = Σλᵢ.
    Mean,
    /// (Σ over k-subsets I of (Σ_{i∈I} λᵢ)⁻¹)⁻¹; k = 1 is the harmonic mean.
    KHarmonic { k: usize, subsets: Arc<Vec<Vec<usize>>> },
    /// (Σ_{i<j} (λᵢ+λⱼ)⁻¹)⁻¹.
    TwoHarmonic { subsets: Arc<Vec<Vec<usize>>> },
    /// n·(Σλᵢᵖ/n)^{1/p}, normalized to agree with H on spheres.
    PowerMean { p: T },
    /// γ^(m)(λ̃) = γ(0,…,0,λ̃).
    Restrict { parent: Arc<Speed<T>>, m: usize },
    Custom(Arc<dyn CustomSpeed<T>>),
}

/// An admissible speed together with its cone.
#[derive(Debug, Clone)]
pub struct Speed<T: Scalar> {
    dim: usize,
    cone: ConeSpec<T>,
    formula: Formula<T>,
}

fn subsets(n: usize, k: usize) -> Arc<Vec<Vec<usize>>> {
    Arc::new(itertools::Itertools::combinations(0..n, k).collect())
}

impl<T: Scalar> Speed<T> {
    pub fn mean(n: usize) -> Self {
        Self {
            dim: n,
            cone: ConeSpec::full_space(n),
            formula: Formula::Mean,
        }
    }

    pub fn k_harmonic(n: usize, k: usize) -> Result<Self> {
        if k == 0 || k > n {
            return Err(FlowError::Domain(format!(
                "k-harmonic mean needs 1 ≤ k ≤ n, got k={k}, n={n}"
            )));
        }
        Ok(Self {
            dim: n,
            cone: ConeSpec::k_sum(n, k),
            formula: Formula::KHarmonic {
                k,
                subsets: subsets(n, k),
            },
        })
    }

    pub fn two_harmonic(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(FlowError::Domain("two-harmonic mean needs n ≥ 2".into()));
        }
        Ok(Self {
            dim: n,
            cone: ConeSpec::pairwise_sum(n),
            formula: Formula::TwoHarmonic {
                subsets: subsets(n, 2),
            },
        })
    }

    pub fn power_mean(n: usize, p: T) -> Result<Self> {
        if p == T::zero() || !p.is_finite() {
            return Err(FlowError::Domain(format!(
                "power mean exponent must be finite and nonzero, got {p}"
            )));
        }
        Ok(Self {
            dim: n,
            cone: ConeSpec::positive(n),
            formula: Formula::PowerMean { p },
        })
    }

    pub fn custom(cone: ConeSpec<T>, formula: Arc<dyn CustomSpeed<T>>) -> Self {
        Self {
            dim: cone.dim(),
            cone,
            formula: Formula::Custom(formula),
        }
    }

    /// γ^(m): freezes the first m arguments at zero. Requires 1 ≤ m ≤ m̄(Γ).
    pub fn restrict(&self, m: usize) -> Result<Self> {
        let mbar = self.mbar();
        if m == 0 || m > mbar {
            return Err(FlowError::Domain(format!(
                "facet not in cone: restriction order {m} outside 1..={mbar}"
            )));
        }
        Ok(Self {
            dim: self.dim - m,
            cone: self.cone.restrict(m)?,
            formula: Formula::Restrict {
                parent: Arc::new(self.clone()),
                m,
            },
        })
    }

    /// Resolves a catalog id (`mean`, `harmonic-k:<k>`, `two-harmonic`,
    /// `power-mean:<p>`, `restrict:<id>:<m>`) to a speed in `n` variables.
    pub fn from_id(id: &str, n: usize) -> Result<Self> {
        let id = id.trim();
        if n == 0 {
            return Err(FlowError::Domain("speed dimension must be ≥ 1".into()));
        }
        if id == "mean" {
            return Ok(Self::mean(n));
        }
        if id == "two-harmonic" {
            return Self::two_harmonic(n);
        }
        if let Some(k) = id.strip_prefix("harmonic-k:") {
            let k: usize = k.parse().map_err(|_| FlowError::UnknownSpeed(id.into()))?;
            return Self::k_harmonic(n, k);
        }
        if let Some(p) = id.strip_prefix("power-mean:") {
            let p: f64 = p.parse().map_err(|_| FlowError::UnknownSpeed(id.into()))?;
            return Self::power_mean(n, lit(p));
        }
        if let Some(rest) = id.strip_prefix("restrict:") {
            let (inner, m) = rest
                .rsplit_once(':')
                .ok_or_else(|| FlowError::UnknownSpeed(id.into()))?;
            let m: usize = m.parse().map_err(|_| FlowError::UnknownSpeed(id.into()))?;
            return Self::from_id(inner, n + m)?.restrict(m);
        }
        Err(FlowError::UnknownSpeed(id.into()))
    }

    pub fn id(&self) -> String {
        match &self.formula {
            Formula::Mean => "mean".into(),
            Formula::KHarmonic { k, .. } => format!("harmonic-k:{k}"),
            Formula::TwoHarmonic { .. } => "two-harmonic".into(),
            Formula::PowerMean { p } => format!("power-mean:{p}"),
            Formula::Restrict { parent, m } => format!("restrict:{}:{m}", parent.id()),
            Formula::Custom(c) => c.id(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn cone(&self) -> &ConeSpec<T> {
        &self.cone
    }

    pub fn formula(&self) -> &Formula<T> {
        &self.formula
    }

    /// Whether the speed is linear (the Hessian vanishes identically).
    pub fn is_linear(&self) -> bool {
        match &self.formula {
            Formula::Mean => true,
            Formula::KHarmonic { k, .. } => *k == self.dim,
            Formula::PowerMean { p } => *p == T::one(),
            Formula::Restrict { parent, .. } => parent.is_linear(),
            _ => false,
        }
    }

    /// γ(λ); fails outside the cone.
    pub fn eval(&self, lambda: &[T]) -> Result<T> {
        self.cone.check(lambda)?;
        Ok(self.kernel_value(lambda))
    }

    /// γ, ∇γ and ∇²γ at λ.
    pub fn jet(&self, lambda: &[T]) -> Result<SpeedJet<T>> {
        self.cone.check(lambda)?;
        Ok(self.kernel_jet(lambda))
    }

    /// γ and ∇γ without the Hessian.
    pub fn value_gradient(&self, lambda: &[T]) -> Result<(T, Vec<T>)> {
        let mut grad = vec![T::zero(); self.dim];
        let v = self.value_gradient_into(lambda, &mut grad)?;
        Ok((v, grad))
    }

    /// As [`Speed::value_gradient`], writing ∇γ into `grad`.
    pub fn value_gradient_into(&self, lambda: &[T], grad: &mut [T]) -> Result<T> {
        self.cone.check(lambda)?;
        if grad.len() != self.dim {
            return Err(FlowError::Dimension {
                expected: self.dim,
                got: grad.len(),
            });
        }
        Ok(self.kernel_gradient(lambda, grad))
    }

    fn kernel_gradient(&self, lambda: &[T], grad: &mut [T]) -> T {
        match &self.formula {
            Formula::Mean => {
                grad.iter_mut().for_each(|g| *g = T::one());
                lambda.iter().copied().sum()
            }
            Formula::TwoHarmonic { .. } => {
                grad.iter_mut().for_each(|g| *g = T::zero());
                let mut s = T::zero();
                for i in 0..lambda.len() {
                    for j in i + 1..lambda.len() {
                        let inv = T::one() / (lambda[i] + lambda[j]);
                        let inv2 = inv * inv;
                        s = s + inv;
                        grad[i] = grad[i] + inv2;
                        grad[j] = grad[j] + inv2;
                    }
                }
                let value = T::one() / s;
                grad.iter_mut().for_each(|g| *g = *g * value * value);
                value
            }
            Formula::KHarmonic { subsets, .. } => {
                grad.iter_mut().for_each(|g| *g = T::zero());
                let mut s = T::zero();
                for idx in subsets.iter() {
                    let inv = T::one() / idx.iter().map(|&i| lambda[i]).sum::<T>();
                    s = s + inv;
                    for &i in idx {
                        grad[i] = grad[i] + inv * inv;
                    }
                }
                let value = T::one() / s;
                grad.iter_mut().for_each(|g| *g = *g * value * value);
                value
            }
            Formula::PowerMean { p } => {
                let n = from_usize::<T>(self.dim);
                let q: T = lambda.iter().map(|&x| x.powf(*p)).sum();
                let value = n * (q / n).powf(T::one() / *p);
                for (g, &x) in grad.iter_mut().zip(lambda) {
                    *g = value * x.powf(*p - T::one()) / q;
                }
                value
            }
            Formula::Restrict { parent, m } => {
                let mut full = vec![T::zero(); parent.dim];
                let v = parent.kernel_gradient(&pad_zeros(lambda, *m), &mut full);
                grad.copy_from_slice(&full[*m..]);
                v
            }
            Formula::Custom(c) => {
                let jet = c.jet(lambda);
                grad.copy_from_slice(&jet.gradient);
                jet.value
            }
        }
    }

    fn kernel_value(&self, lambda: &[T]) -> T {
        match &self.formula {
            Formula::Mean => lambda.iter().copied().sum(),
            Formula::TwoHarmonic { .. } => {
                let mut s = T::zero();
                for (i, &a) in lambda.iter().enumerate() {
                    for &b in &lambda[i + 1..] {
                        s = s + T::one() / (a + b);
                    }
                }
                T::one() / s
            }
            Formula::KHarmonic { subsets, .. } => {
                let s: T = subsets
                    .iter()
                    .map(|idx| T::one() / idx.iter().map(|&i| lambda[i]).sum::<T>())
                    .sum();
                T::one() / s
            }
            Formula::PowerMean { p } => {
                let n = from_usize::<T>(self.dim);
                let q: T = lambda.iter().map(|&x| x.powf(*p)).sum();
                n * (q / n).powf(T::one() / *p)
            }
            Formula::Restrict { parent, m } => parent.kernel_value(&pad_zeros(lambda, *m)),
            Formula::Custom(c) => c.value(lambda),
        }
    }

    fn kernel_jet(&self, lambda: &[T]) -> SpeedJet<T> {
        let n = self.dim;
        match &self.formula {
            Formula::Mean => SpeedJet {
                value: lambda.iter().copied().sum(),
                gradient: vec![T::one(); n],
                hessian: DenseMatrix::zeros(n),
            },
            Formula::KHarmonic { subsets, .. } | Formula::TwoHarmonic { subsets } => {
                harmonic_sum_jet(lambda, subsets)
            }
            Formula::PowerMean { p } => power_mean_jet(lambda, *p),
            Formula::Restrict { parent, m } => {
                let full = parent.kernel_jet(&pad_zeros(lambda, *m));
                SpeedJet {
                    value: full.value,
                    gradient: full.gradient[*m..].to_vec(),
                    hessian: DenseMatrix::from_fn(n, |i, j| full.hessian[(i + m, j + m)]),
                }
            }
            Formula::Custom(c) => c.jet(lambda),
        }
    }

    /// m̄(Γ): the largest m ≤ n−1 whose cylinder ray (0,…,0,1,…,1) with m
    /// zeros lies in Γ.
    pub fn mbar(&self) -> usize {
        (0..self.dim)
            .rev()
            .find(|&m| self.cone.contains(&cylinder_ray(self.dim, m)))
            .unwrap_or(0)
    }

    /// c_m = γ(0,…,0,1,…,1)⁻¹ with m zeros.
    pub fn cylinder_constant(&self, m: usize) -> Result<T> {
        let mbar = self.mbar();
        if m > mbar {
            return Err(FlowError::Domain(format!(
                "cylinder with {m} Euclidean factors not in cone (m̄ = {mbar})"
            )));
        }
        Ok(T::one() / self.eval(&cylinder_ray(self.dim, m))?)
    }

    /// γ*(λ) = γ(λ₁⁻¹,…,λₙ⁻¹)⁻¹ on Γ₊.
    pub fn gamma_star(&self, lambda: &[T]) -> Result<T> {
        Ok(T::one() / self.eval(&reciprocals(lambda)?)?)
    }

    /// γ†(λ) = −γ(λ₁⁻¹,…,λₙ⁻¹) on Γ₊.
    pub fn gamma_dagger(&self, lambda: &[T]) -> Result<T> {
        Ok(-self.eval(&reciprocals(lambda)?)?)
    }

    /// Value, gradient and Hessian of γ* in eigenvalue coordinates, by the
    /// chain rule through λ ↦ λ⁻¹.
    pub fn gamma_star_jet(&self, lambda: &[T]) -> Result<SpeedJet<T>> {
        let inv = reciprocals(lambda)?;
        let g = self.jet(&inv)?;
        let n = self.dim;
        let two = lit::<T>(2.0);
        let gv = g.value;
        let gradient: Vec<T> = (0..n).map(|i| g.gradient[i] * inv[i] * inv[i] / (gv * gv)).collect();
        let hessian = DenseMatrix::from_fn(n, |i, j| {
            let (ni, nj) = (inv[i], inv[j]);
            let mut h = two * g.gradient[i] * g.gradient[j] * ni * ni * nj * nj / (gv * gv * gv)
                - g.hessian[(i, j)] * ni * ni * nj * nj / (gv * gv);
            if i == j {
                h = h - two * g.gradient[i] * ni * ni * ni / (gv * gv);
            }
            h
        });
        Ok(SpeedJet {
            value: T::one() / gv,
            gradient,
            hessian,
        })
    }

    /// Distance from λ/γ(λ) to ∂Γ (minimum facet distance on the normalized
    /// slice); `+∞` for Γ = ℝⁿ, and `0` flagged as boundary outside Γ.
    pub fn cone_distance(&self, lambda: &[T]) -> ConeDistance<T> {
        cone_distance(&self.cone, self, lambda)
    }
}

/// Distance from λ/γ(λ) to the boundary of `cone`.
pub fn cone_distance<T: Scalar>(cone: &ConeSpec<T>, speed: &Speed<T>, lambda: &[T]) -> ConeDistance<T> {
    let outside = ConeDistance {
        distance: T::zero(),
        on_boundary: true,
    };
    if !cone.contains(lambda) {
        return outside;
    }
    match speed.eval(lambda) {
        Ok(g) if g > T::zero() => {
            let normalized: Vec<T> = lambda.iter().map(|&x| x / g).collect();
            ConeDistance {
                distance: cone.facet_distance(&normalized),
                on_boundary: false,
            }
        }
        _ => outside,
    }
}

/// (0,…,0,1,…,1) with m leading zeros.
pub fn cylinder_ray<T: Scalar>(n: usize, m: usize) -> Vec<T> {
    (0..n).map(|i| if i < m { T::zero() } else { T::one() }).collect()
}

fn pad_zeros<T: Scalar>(lambda: &[T], m: usize) -> Vec<T> {
    let mut v = vec![T::zero(); m];
    v.extend_from_slice(lambda);
    v
}

fn reciprocals<T: Scalar>(lambda: &[T]) -> Result<Vec<T>> {
    if let Some((i, &x)) = lambda.iter().enumerate().find(|(_, &x)| x <= T::zero()) {
        return Err(FlowError::Domain(format!(
            "entry {i} = {x} is not positive; γ* and γ† are defined on the positive cone"
        )));
    }
    Ok(lambda.iter().map(|&x| T::one() / x).collect())
}

fn harmonic_sum_jet<T: Scalar>(lambda: &[T], subsets: &[Vec<usize>]) -> SpeedJet<T> {
    let n = lambda.len();
    let two = lit::<T>(2.0);
    let mut s = T::zero();
    let mut ds = vec![T::zero(); n];
    let mut dds: DenseMatrix<T> = DenseMatrix::zeros(n);
    for idx in subsets {
        let t: T = idx.iter().map(|&i| lambda[i]).sum();
        let inv = T::one() / t;
        let inv2 = inv * inv;
        s = s + inv;
        for &i in idx {
            ds[i] = ds[i] - inv2;
            for &j in idx {
                dds[(i, j)] = dds[(i, j)] + two * inv2 * inv;
            }
        }
    }
    let value = T::one() / s;
    let gradient: Vec<T> = ds.iter().map(|&d| -d * value * value).collect();
    let hessian = DenseMatrix::from_fn(n, |i, j| {
        -dds[(i, j)] * value * value + two * ds[i] * ds[j] * value * value * value
    });
    SpeedJet {
        value,
        gradient,
        hessian,
    }
}

fn power_mean_jet<T: Scalar>(lambda: &[T], p: T) -> SpeedJet<T> {
    let n = lambda.len();
    let nn = from_usize::<T>(n);
    let q: T = lambda.iter().map(|&x| x.powf(p)).sum();
    let value = nn * (q / nn).powf(T::one() / p);
    let a: Vec<T> = lambda.iter().map(|&x| x.powf(p - T::one()) / q).collect();
    let gradient = a.iter().map(|&ai| value * ai).collect();
    let hessian = DenseMatrix::from_fn(n, |i, j| {
        let mut h = (T::one() - p) * a[i] * a[j];
        if i == j {
            h = h + (p - T::one()) * lambda[i].powf(p - lit(2.0)) / q;
        }
        value * h
    });
    SpeedJet {
        value,
        gradient,
        hessian,
    }
}

/// Central finite-difference jet of an arbitrary function (used for custom
/// speeds without analytic derivatives).
pub fn finite_difference_jet<T: Scalar>(f: impl Fn(&[T]) -> T, lambda: &[T]) -> SpeedJet<T> {
    let n = lambda.len();
    let scale = lambda.iter().fold(T::zero(), |m, &x| m.max(x.abs())).max(T::one());
    let h = T::epsilon().powf(lit(0.25)) * scale;
    let two = lit::<T>(2.0);
    let four = lit::<T>(4.0);
    let at = |di: usize, si: T, dj: usize, sj: T| {
        let mut x = lambda.to_vec();
        x[di] = x[di] + si * h;
        x[dj] = x[dj] + sj * h;
        f(&x)
    };
    let value = f(lambda);
    let gradient = (0..n)
        .map(|i| {
            let mut xp = lambda.to_vec();
            let mut xm = lambda.to_vec();
            xp[i] = xp[i] + h;
            xm[i] = xm[i] - h;
            (f(&xp) - f(&xm)) / (two * h)
        })
        .collect();
    let one = T::one();
    let hessian = DenseMatrix::from_fn(n, |i, j| {
        if i == j {
            let mut xp = lambda.to_vec();
            let mut xm = lambda.to_vec();
            xp[i] = xp[i] + h;
            xm[i] = xm[i] - h;
            (f(&xp) - two * value + f(&xm)) / (h * h)
        } else {
            (at(i, one, j, one) - at(i, one, j, -one) - at(i, -one, j, one) + at(i, -one, j, -one))
                / (four * h * h)
        }
    });
    SpeedJet {
        value,
        gradient,
        hessian,
    }
}

/// Every catalog speed in `n` variables together with its id.
pub fn catalog<T: Scalar>(n: usize) -> Vec<Speed<T>> {
    let mut out = vec![Speed::mean(n)];
    if n >= 2 {
        if let Ok(s) = Speed::two_harmonic(n) {
            out.push(s);
        }
    }
    for k in 1..=n {
        if k != 2 {
            if let Ok(s) = Speed::k_harmonic(n, k) {
                out.push(s);
            }
        }
    }
    for p in [-2.0, 0.5, 2.0] {
        if let Ok(s) = Speed::power_mean(n, lit(p)) {
            out.push(s);
        }
    }
    if let Ok(s) = Speed::two_harmonic(n + 1).and_then(|s| s.restrict(1)) {
        out.push(s);
    }
    out
}

#[cfg(test)]
mod tests;
