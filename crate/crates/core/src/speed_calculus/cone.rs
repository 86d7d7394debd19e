use serde::{Deserialize, Serialize};

use crate::error::{FlowError, Result};
use crate::scalar::{dot, from_usize, norm, to_f64_vec, Scalar};

/// Shape of a symmetric polyhedral cone.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConeKind {
    FullSpace,
    Positive,
    PairwiseSum,
    HalfSpaces,
}

/// Open, symmetric, convex cone stored as a finite intersection of open
/// half-spaces `{ν·λ > 0}` with unit normals ν.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ConeSpec<T: Scalar> {
    dim: usize,
    kind: ConeKind,
    normals: Vec<Vec<T>>,
}

/// Result of [`ConeSpec::distance`]-style queries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ConeDistance<T: Scalar> {
    /// Euclidean distance to the boundary; `+∞` for the full space, `0` when
    /// the point is not strictly inside.
    pub distance: T,
    pub on_boundary: bool,
}

impl<T: Scalar> ConeSpec<T> {
    pub fn full_space(dim: usize) -> Self {
        Self {
            dim,
            kind: ConeKind::FullSpace,
            normals: Vec::new(),
        }
    }

    pub fn positive(dim: usize) -> Self {
        let normals = (0..dim)
            .map(|i| (0..dim).map(|j| if i == j { T::one() } else { T::zero() }).collect())
            .collect();
        Self {
            dim,
            kind: ConeKind::Positive,
            normals,
        }
    }

    /// `{λ_i + λ_j > 0 for all i < j}`.
    pub fn pairwise_sum(dim: usize) -> Self {
        let mut c = Self::k_sum(dim, 2);
        if dim >= 2 {
            c.kind = ConeKind::PairwiseSum;
        }
        c
    }

    /// `{λ_{i_1} + … + λ_{i_k} > 0 for every k-subset}`; k = 1 is Γ₊.
    pub fn k_sum(dim: usize, k: usize) -> Self {
        if k == 1 {
            return Self::positive(dim);
        }
        let scale = T::one() / from_usize::<T>(k).sqrt();
        let normals = itertools::Itertools::combinations(0..dim, k)
            .map(|subset| {
                (0..dim)
                    .map(|j| if subset.contains(&j) { scale } else { T::zero() })
                    .collect()
            })
            .collect();
        Self {
            dim,
            kind: ConeKind::HalfSpaces,
            normals,
        }
    }

    /// Custom cone from arbitrary normals (normalized here; zero normals are
    /// rejected). The caller is responsible for symmetry.
    pub fn half_spaces(dim: usize, normals: Vec<Vec<T>>) -> Result<Self> {
        let mut out: Vec<Vec<T>> = Vec::with_capacity(normals.len());
        for nu in normals {
            if nu.len() != dim {
                return Err(FlowError::Dimension {
                    expected: dim,
                    got: nu.len(),
                });
            }
            let len = norm(&nu);
            if len <= T::zero() {
                return Err(FlowError::Domain("zero facet normal".into()));
            }
            let unit: Vec<T> = nu.iter().map(|&x| x / len).collect();
            push_unique(&mut out, unit);
        }
        let kind = if out.is_empty() {
            ConeKind::FullSpace
        } else {
            ConeKind::HalfSpaces
        };
        Ok(Self {
            dim,
            kind,
            normals: out,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> ConeKind {
        self.kind
    }

    pub fn normals(&self) -> &[Vec<T>] {
        &self.normals
    }

    /// Strict membership check; the error names the first violated facet.
    pub fn check(&self, lambda: &[T]) -> Result<()> {
        if lambda.len() != self.dim {
            return Err(FlowError::Dimension {
                expected: self.dim,
                got: lambda.len(),
            });
        }
        if let Some(bad) = lambda.iter().find(|x| !x.is_finite()) {
            return Err(FlowError::Domain(format!("non-finite curvature {bad}")));
        }
        for (facet, nu) in self.normals.iter().enumerate() {
            let value = dot(nu, lambda);
            if !(value > T::zero()) {
                return Err(FlowError::ConeViolation {
                    lambda: to_f64_vec(lambda),
                    facet,
                    normal: to_f64_vec(nu),
                    value: crate::scalar::to_f64(value),
                });
            }
        }
        Ok(())
    }

    pub fn contains(&self, lambda: &[T]) -> bool {
        self.check(lambda).is_ok()
    }

    /// Minimum signed facet distance of `point`; `+∞` without facets.
    pub fn facet_distance(&self, point: &[T]) -> T {
        self.normals
            .iter()
            .map(|nu| dot(nu, point))
            .fold(T::infinity(), T::min)
    }

    /// Whether the closed positive cone lies in the closure of this cone,
    /// i.e. every facet normal is entrywise nonnegative.
    pub fn contains_positive_cone(&self) -> bool {
        self.normals.iter().all(|nu| nu.iter().all(|&x| x >= T::zero()))
    }

    /// Cone of the trailing `dim − m` coordinates obtained by freezing the
    /// first `m` coordinates at 0. Fails if some facet becomes unsatisfiable.
    pub fn restrict(&self, m: usize) -> Result<Self> {
        if m >= self.dim {
            return Err(FlowError::Domain(format!(
                "cannot restrict a {}-dimensional cone by {m} coordinates",
                self.dim
            )));
        }
        let d = self.dim - m;
        let mut normals = Vec::new();
        for nu in &self.normals {
            let tail = nu[m..].to_vec();
            let len = norm(&tail);
            if len <= T::epsilon() {
                return Err(FlowError::Domain(format!(
                    "facet not in cone: restriction by {m} zero entries meets facet {:?}",
                    to_f64_vec(nu)
                )));
            }
            push_unique(&mut normals, tail.iter().map(|&x| x / len).collect());
        }
        let kind = match self.kind {
            ConeKind::FullSpace => ConeKind::FullSpace,
            _ if normals.is_empty() => ConeKind::FullSpace,
            _ => ConeKind::HalfSpaces,
        };
        let mut out = Self {
            dim: d,
            kind,
            normals,
        };
        if out.kind == ConeKind::HalfSpaces && is_positive_cone(&out) {
            out = Self::positive(d);
        }
        Ok(out)
    }
}

fn push_unique<T: Scalar>(out: &mut Vec<Vec<T>>, v: Vec<T>) {
    let tol = T::epsilon() * crate::scalar::lit(64.0);
    let dup = out
        .iter()
        .any(|u| u.iter().zip(&v).all(|(&a, &b)| (a - b).abs() <= tol));
    if !dup {
        out.push(v);
    }
}

/// After restriction, redundant facets (nonnegative combinations of the
/// coordinate facets) are dropped when all coordinate facets are present.
fn is_positive_cone<T: Scalar>(c: &ConeSpec<T>) -> bool {
    let has_axes = (0..c.dim).all(|i| {
        c.normals.iter().any(|nu| {
            nu.iter()
                .enumerate()
                .all(|(j, &x)| if i == j { x == T::one() } else { x == T::zero() })
        })
    });
    has_axes && c.contains_positive_cone()
}
