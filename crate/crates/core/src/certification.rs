//! Empirical certificates for the structural hypotheses on a speed:
//! admissibility, convexity, concavity, inverse-concavity, and strict
//! inverse-concavity on the boundary of the positive cone.
//!
//! A passing certificate records its sample count and seed. It is evidence,
//! not a proof.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{FlowError, Result};
use crate::linalg::{orthonormalize, DenseMatrix, SymMatrix};
use crate::scalar::{lit, norm, to_f64, to_f64_vec, Scalar};
use crate::speed_calculus::{matrix_hessian_quadform, Speed};

/// Default tolerance, relative to the scale of the evaluated quadratic form.
pub const DEFAULT_TOLERANCE: f64 = 1e-8;

/// Fraction of rejected draws above which the verdict is inconclusive.
pub const MAX_REJECTION_RATE: f64 = 0.9;

const DRAWS_PER_SAMPLE: usize = 20;
const LOG_MIN: f64 = -2.0;
const LOG_MAX: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "m")]
pub enum Property {
    Admissible,
    Convex,
    Concave,
    InverseConcave,
    StrictlyInverseConcaveOnBoundary(usize),
}

impl fmt::Display for Property {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Property::Admissible => write!(f, "admissible"),
            Property::Convex => write!(f, "convex"),
            Property::Concave => write!(f, "concave"),
            Property::InverseConcave => write!(f, "inverse-concave"),
            Property::StrictlyInverseConcaveOnBoundary(m) => {
                write!(f, "strictly-inverse-concave-on-boundary({m})")
            }
        }
    }
}

impl std::str::FromStr for Property {
    type Err = FlowError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "admissible" => Ok(Property::Admissible),
            "convex" => Ok(Property::Convex),
            "concave" => Ok(Property::Concave),
            "inverse-concave" => Ok(Property::InverseConcave),
            other => {
                let m = other
                    .strip_prefix("strictly-inverse-concave-on-boundary(")
                    .and_then(|r| r.strip_suffix(')'))
                    .and_then(|m| m.parse().ok());
                m.map(Property::StrictlyInverseConcaveOnBoundary)
                    .ok_or_else(|| FlowError::Domain(format!("unknown property `{other}`")))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

/// The sample with the most negative margin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub lambda: Vec<f64>,
    pub a: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
    /// Signed margin normalized by the local scale. Negative values violate
    /// the defining inequality.
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    pub property: Property,
    pub speed: String,
    pub verdict: Verdict,
    pub samples: usize,
    pub rejected: usize,
    pub seed: u64,
    pub tolerance: f64,
    pub worst_witness: Option<Witness>,
    /// Smallest strictness constant δ observed; only for the boundary check.
    pub strict_margin: Option<f64>,
}

/// (γ̈^{ij,kl}(A) + 2γ̇^{ik}(A)A⁻¹_{jl}) B_ij B_kl.
pub fn inverse_concavity_quadform<T: Scalar>(
    speed: &Speed<T>,
    a: &SymMatrix<T>,
    b: &SymMatrix<T>,
) -> Result<T> {
    Ok(inverse_concavity_terms(speed, a, b)?.0)
}

/// Value together with the sum of absolute values of its terms.
fn inverse_concavity_terms<T: Scalar>(
    speed: &Speed<T>,
    a: &SymMatrix<T>,
    b: &SymMatrix<T>,
) -> Result<(T, T)> {
    let eig = a.eigen()?;
    if let Some(&min) = eig.values.first() {
        if min <= T::zero() {
            return Err(FlowError::NotPositiveDefinite {
                min_eigenvalue: to_f64(min),
            });
        }
    }
    let (hess, hess_scale) = hessian_terms(speed, a, b)?;
    let jet = speed.jet(&eig.values)?;
    let bt = b.conjugate(&eig.vectors);
    let n = a.dim();
    let two = lit::<T>(2.0);
    let mut extra = T::zero();
    for i in 0..n {
        for j in 0..n {
            extra = extra + two * jet.gradient[i] * bt.get(i, j) * bt.get(i, j) / eig.values[j];
        }
    }
    Ok((hess + extra, hess_scale + extra.abs()))
}

/// Matrix Hessian quadratic form with a magnitude scale for tolerances.
fn hessian_terms<T: Scalar>(speed: &Speed<T>, a: &SymMatrix<T>, b: &SymMatrix<T>) -> Result<(T, T)> {
    let q = matrix_hessian_quadform(speed, a, b)?;
    let eig = a.eigen()?;
    let jet = speed.jet(&eig.values)?;
    let bt = b.conjugate(&eig.vectors);
    let n = a.dim();
    let mut scale = T::zero();
    for p in 0..n {
        for r in 0..n {
            scale = scale + (jet.hessian[(p, r)] * bt.get(p, p) * bt.get(r, r)).abs();
            if p != r {
                let grad = jet.gradient[p].abs() + jet.gradient[r].abs();
                let lam = eig.values[p].abs() + eig.values[r].abs();
                scale = scale + grad * bt.get(p, r) * bt.get(p, r) / lam.max(T::min_positive_value());
            }
        }
    }
    let floor = jet.value.abs() / norm(&eig.values).max(T::min_positive_value());
    Ok((q, scale.max(floor * T::epsilon())))
}

/// Number of eigenvalues of `w` with |λ| ≤ tol·(1 + spectral radius).
pub fn kernel_dimension<T: Scalar>(w: &SymMatrix<T>, tol: T) -> Result<usize> {
    let ev = w.eigenvalues()?;
    let radius = ev.iter().fold(T::zero(), |m, &x| m.max(x.abs()));
    let cut = tol * (T::one() + radius);
    if let Some(&min) = ev.first() {
        if min < -lit::<T>(10.0) * cut {
            return Err(FlowError::NotPositiveSemidefinite {
                min_eigenvalue: to_f64(min),
            });
        }
    }
    Ok(ev.iter().filter(|x| x.abs() <= cut).count())
}

/// Λ_k: the sum of the k smallest entries.
pub fn partial_trace_lambda_k<T: Scalar>(lambda: &[T], k: usize) -> Result<T> {
    if k == 0 || k > lambda.len() {
        return Err(FlowError::Domain(format!(
            "partial trace index {k} outside 1..={}",
            lambda.len()
        )));
    }
    let mut v = lambda.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    Ok(v[..k].iter().copied().sum())
}

struct Sample {
    lambda: Vec<f64>,
    a: Vec<Vec<f64>>,
    b: Vec<Vec<f64>>,
    margin: f64,
    strict: Option<f64>,
}

struct Outcome {
    rejected: usize,
    sample: Option<Sample>,
}

fn rng_for(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

fn log_uniform(rng: &mut ChaCha8Rng) -> f64 {
    10f64.powf(rng.gen_range(LOG_MIN..=LOG_MAX))
}

fn draw_eigenvalues(rng: &mut ChaCha8Rng, n: usize, positive_only: bool) -> Vec<f64> {
    let signed = !positive_only && rng.gen_bool(0.5);
    (0..n)
        .map(|_| {
            let x = log_uniform(rng);
            if signed && rng.gen_bool(0.5) {
                -x
            } else {
                x
            }
        })
        .collect()
}

fn gaussian_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

fn random_orthogonal<T: Scalar>(rng: &mut ChaCha8Rng, n: usize) -> DenseMatrix<T> {
    let g = gaussian_vec(rng, n * n);
    orthonormalize(&DenseMatrix::from_fn(n, |i, j| lit(g[i * n + j])))
}

fn random_unit_sym<T: Scalar>(rng: &mut ChaCha8Rng, n: usize) -> SymMatrix<T> {
    let g = gaussian_vec(rng, n * n);
    let b = SymMatrix::from_fn(n, |i, j| lit::<T>(g[i * n + j]));
    let f = b.frobenius_norm();
    b.scale(T::one() / f)
}

fn rows_f64<T: Scalar>(m: &SymMatrix<T>) -> Vec<Vec<f64>> {
    m.rows().iter().map(|r| to_f64_vec(r)).collect()
}

/// Draws eigenvalues in the cone, returning the rejection count too.
fn draw_in_cone<T: Scalar>(
    rng: &mut ChaCha8Rng,
    speed: &Speed<T>,
    positive_only: bool,
) -> (usize, Option<Vec<T>>) {
    let mut rejected = 0;
    for _ in 0..DRAWS_PER_SAMPLE {
        let l: Vec<T> = draw_eigenvalues(rng, speed.dim(), positive_only)
            .into_iter()
            .map(lit)
            .collect();
        if speed.cone().contains(&l) {
            return (rejected, Some(l));
        }
        rejected += 1;
    }
    (rejected, None)
}

fn sample_once<T: Scalar>(speed: &Speed<T>, property: Property, seed: u64, index: usize) -> Result<Outcome> {
    let mut rng = rng_for(seed, index);
    let n = speed.dim();
    let positive_only = matches!(property, Property::InverseConcave);
    let (rejected, lambda) = draw_in_cone(&mut rng, speed, positive_only);
    let Some(lambda) = lambda else {
        return Ok(Outcome {
            rejected,
            sample: None,
        });
    };
    let q = random_orthogonal::<T>(&mut rng, n);
    let a = SymMatrix::diagonal(&lambda).conjugate_transpose(&q);
    let b = random_unit_sym::<T>(&mut rng, n);
    let margin = match property {
        Property::Admissible => {
            let jet = speed.jet(&lambda)?;
            let euler: T = lambda.iter().zip(&jet.gradient).map(|(&l, &g)| l * g).sum();
            let scale = jet.value.abs().max(T::min_positive_value());
            let min_grad = jet.gradient.iter().copied().fold(T::infinity(), T::min);
            let grad_scale = jet.gradient.iter().fold(T::zero(), |s, &g| s + g.abs());
            let euler_error = -(euler - jet.value).abs() / scale;
            let positivity = if jet.value > T::zero() { T::one() } else { -T::one() };
            let m = positivity.min(min_grad / grad_scale).min(euler_error);
            to_f64(m)
        }
        Property::Convex | Property::Concave => {
            let (v, s) = hessian_terms(speed, &a, &b)?;
            let v = if property == Property::Concave { -v } else { v };
            to_f64(v / s.max(T::min_positive_value()))
        }
        Property::InverseConcave => {
            let (v, s) = inverse_concavity_terms(speed, &a, &b)?;
            to_f64(v / s.max(T::min_positive_value()))
        }
        Property::StrictlyInverseConcaveOnBoundary(_) => unreachable!("handled separately"),
    };
    Ok(Outcome {
        rejected,
        sample: Some(Sample {
            lambda: to_f64_vec(&lambda),
            a: rows_f64(&a),
            b: rows_f64(&b),
            margin,
            strict: None,
        }),
    })
}

/// Hessian of γ_* along a unit direction orthogonal to μ, normalized to the
/// scale-invariant strictness constant δ = −q·|μ|²/γ_*(μ).
fn strict_sample<T: Scalar>(restricted: &Speed<T>, seed: u64, index: usize) -> Result<Outcome> {
    let mut rng = rng_for(seed, index);
    let d = restricted.dim();
    let mu: Vec<T> = (0..d).map(|_| lit(log_uniform(&mut rng))).collect();
    let jet = restricted.gamma_star_jet(&mu)?;
    let mu_norm = norm(&mu);
    let mut xi: Vec<T> = gaussian_vec(&mut rng, d).into_iter().map(lit).collect();
    let along = crate::scalar::dot(&xi, &mu) / (mu_norm * mu_norm);
    for (x, &m) in xi.iter_mut().zip(&mu) {
        *x = *x - along * m;
    }
    let xn = norm(&xi);
    if xn <= T::epsilon() {
        return Ok(Outcome {
            rejected: 1,
            sample: None,
        });
    }
    xi.iter_mut().for_each(|x| *x = *x / xn);
    let q = jet.hessian.quadratic_form(&xi);
    let delta = -q * mu_norm * mu_norm / jet.value;
    let xi_outer = SymMatrix::from_fn(d, |i, j| xi[i] * xi[j]);
    Ok(Outcome {
        rejected: 0,
        sample: Some(Sample {
            lambda: to_f64_vec(&mu),
            a: rows_f64(&SymMatrix::diagonal(&mu)),
            b: rows_f64(&xi_outer),
            margin: to_f64(delta),
            strict: Some(to_f64(delta)),
        }),
    })
}

fn aggregate(
    outcomes: Vec<Outcome>,
    property: Property,
    speed: String,
    seed: u64,
    tolerance: f64,
    strict_needs_positive: bool,
) -> CertificateReport {
    let requested = outcomes.len();
    let rejected: usize = outcomes.iter().map(|o| o.rejected).sum();
    let samples: Vec<Sample> = outcomes.into_iter().filter_map(|o| o.sample).collect();
    let attempts = rejected + samples.len();
    let rate = if attempts == 0 { 1.0 } else { rejected as f64 / attempts as f64 };
    let worst = samples
        .iter()
        .min_by(|x, y| x.margin.partial_cmp(&y.margin).unwrap_or(std::cmp::Ordering::Equal));
    let strict_margin = samples
        .iter()
        .filter_map(|s| s.strict)
        .fold(None, |m: Option<f64>, d| Some(m.map_or(d, |m| m.min(d))));
    let verdict = if rate > MAX_REJECTION_RATE || samples.len() * 10 < requested {
        Verdict::Inconclusive
    } else {
        let threshold = if strict_needs_positive { tolerance } else { -tolerance };
        let ok = samples.iter().all(|s| {
            if strict_needs_positive {
                s.margin > threshold
            } else {
                s.margin >= threshold
            }
        });
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    };
    CertificateReport {
        property,
        speed,
        verdict,
        samples: samples.len(),
        rejected,
        seed,
        tolerance,
        worst_witness: worst.map(|s| Witness {
            lambda: s.lambda.clone(),
            a: s.a.clone(),
            b: s.b.clone(),
            margin: s.margin,
        }),
        strict_margin,
    }
}

/// Samples the defining inequality of `property` at `samples` random points.
pub fn certify<T: Scalar>(speed: &Speed<T>, property: Property, samples: usize, seed: u64) -> Result<CertificateReport> {
    certify_with_tolerance(speed, property, samples, seed, DEFAULT_TOLERANCE)
}

pub fn certify_with_tolerance<T: Scalar>(
    speed: &Speed<T>,
    property: Property,
    samples: usize,
    seed: u64,
    tolerance: f64,
) -> Result<CertificateReport> {
    if samples == 0 {
        return Err(FlowError::Domain("certification needs at least one sample".into()));
    }
    if let Property::StrictlyInverseConcaveOnBoundary(m) = property {
        return certify_strict_on_boundary_with_tolerance(speed, m, samples, seed, tolerance);
    }
    if property == Property::InverseConcave && !speed.cone().contains_positive_cone() {
        return Err(FlowError::Domain(
            "inverse-concavity needs a cone containing the positive cone".into(),
        ));
    }
    let outcomes = (0..samples)
        .into_par_iter()
        .map(|i| sample_once(speed, property, seed, i))
        .collect::<Result<Vec<_>>>()?;
    Ok(aggregate(outcomes, property, speed.id(), seed, tolerance, false))
}

/// Strict concavity of γ^(m)_* off the radial direction, sampled on Γ₊.
pub fn certify_strict_on_boundary<T: Scalar>(
    speed: &Speed<T>,
    m: usize,
    samples: usize,
    seed: u64,
) -> Result<CertificateReport> {
    certify_strict_on_boundary_with_tolerance(speed, m, samples, seed, DEFAULT_TOLERANCE)
}

pub fn certify_strict_on_boundary_with_tolerance<T: Scalar>(
    speed: &Speed<T>,
    m: usize,
    samples: usize,
    seed: u64,
    tolerance: f64,
) -> Result<CertificateReport> {
    if samples == 0 {
        return Err(FlowError::Domain("certification needs at least one sample".into()));
    }
    let restricted = speed.restrict(m)?;
    let property = Property::StrictlyInverseConcaveOnBoundary(m);
    if restricted.dim() < 2 {
        // No direction is orthogonal to the radial one.
        return Ok(CertificateReport {
            property,
            speed: speed.id(),
            verdict: Verdict::Pass,
            samples: 0,
            rejected: 0,
            seed,
            tolerance,
            worst_witness: None,
            strict_margin: None,
        });
    }
    let outcomes = (0..samples)
        .into_par_iter()
        .map(|i| strict_sample(&restricted, seed, i))
        .collect::<Result<Vec<_>>>()?;
    Ok(aggregate(outcomes, property, speed.id(), seed, tolerance, true))
}
