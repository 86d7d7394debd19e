use super::Speed;
use crate::error::Result;
use crate::linalg::SymMatrix;
use crate::scalar::{lit, Scalar};

/// Relative eigenvalue gap below which divided differences of the gradient
/// are replaced by their analytic limit.
pub const EIGEN_GAP_REL: f64 = 1e-8;

/// γ(A) = γ(eigenvalues of A).
pub fn matrix_speed<T: Scalar>(speed: &Speed<T>, a: &SymMatrix<T>) -> Result<T> {
    speed.eval(&a.eigenvalues()?)
}

/// Second derivative of A ↦ γ(A) along B, evaluated in the eigenbasis of A.
pub fn matrix_hessian_quadform<T: Scalar>(
    speed: &Speed<T>,
    a: &SymMatrix<T>,
    b: &SymMatrix<T>,
) -> Result<T> {
    let eig = a.eigen()?;
    let jet = speed.jet(&eig.values)?;
    let bt = b.conjugate(&eig.vectors);
    let n = a.dim();
    let lam = &eig.values;
    let scale = lam.iter().fold(T::zero(), |m, &x| m.max(x.abs()));
    let gap = lit::<T>(EIGEN_GAP_REL) * (T::one() + scale);
    let mut total = T::zero();
    for p in 0..n {
        for q in 0..n {
            if p == q {
                total = total + jet.hessian[(p, p)] * bt.get(p, p) * bt.get(p, p);
                continue;
            }
            total = total + jet.hessian[(p, q)] * bt.get(p, p) * bt.get(q, q);
            let d = lam[p] - lam[q];
            let quotient = if d.abs() < gap {
                jet.hessian[(p, p)] - jet.hessian[(p, q)]
            } else {
                (jet.gradient[p] - jet.gradient[q]) / d
            };
            total = total + quotient * bt.get(p, q) * bt.get(p, q);
        }
    }
    Ok(total)
}
