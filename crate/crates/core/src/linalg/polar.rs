//! Orthogonal polar factor (matrix sign): exact via SVD, approximate via
//! Newton–Schulz.

use super::{svd_small, LinalgError, Matrix, Scalar};

/// Default Newton–Schulz iteration count.
pub const DEFAULT_NS_ITERS: usize = 5;

/// Odd polynomial `p(x) = a·x + b·x³ + c·x⁵` applied to the singular values on
/// each Newton–Schulz step: `X ← a·X + b·(XXᵀ)X + c·(XXᵀ)²X`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct NsCoefficients {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl NsCoefficients {
    /// Quintic tuned for fast growth of small singular values. It does not
    /// converge to 1; singular values settle in a band around it.
    pub const MUON_QUINTIC: Self = Self {
        a: 3.4445,
        b: -4.7750,
        c: 2.0315,
    };

    /// Classical cubic Newton–Schulz, `p(x) = (3x − x³)/2`. Converges
    /// quadratically to 1 for singular values in (0, √3).
    pub const CUBIC: Self = Self {
        a: 1.5,
        b: -0.5,
        c: 0.0,
    };

    /// Scalar map applied to a single singular value.
    pub fn apply_scalar(&self, x: f64) -> f64 {
        let x2 = x * x;
        x * (self.a + x2 * (self.b + self.c * x2))
    }
}

impl Default for NsCoefficients {
    fn default() -> Self {
        Self::MUON_QUINTIC
    }
}

/// Exact orthogonal polar factor `U·Vᵀ` from the thin SVD.
///
/// Fails with [`LinalgError::RankDeficient`] when the smallest singular value
/// is below `1e-12 ×` the largest, since the factor is not unique there.
pub fn polar_factor_exact<T: Scalar>(a: &Matrix<T>) -> Result<Matrix<T>, LinalgError> {
    let svd = svd_small(a)?;
    let max = svd.singular_values[0];
    let min = *svd.singular_values.last().unwrap();
    let thresh = T::from_f64(1e-12);
    if max == T::zero() || min < thresh * max {
        return Err(LinalgError::RankDeficient {
            ratio: if max == T::zero() {
                0.0
            } else {
                (min / max).to_f64()
            },
        });
    }
    svd.u.matmul(&svd.v.transpose())
}

/// `K` Newton–Schulz steps with the default quintic.
pub fn newton_schulz<T: Scalar>(a: &Matrix<T>, iters: usize) -> Result<Matrix<T>, LinalgError> {
    newton_schulz_with(a, iters, NsCoefficients::default())
}

/// Approximate `msign(a)` by `iters` Newton–Schulz steps.
///
/// The input is first divided by its Frobenius norm, which puts every singular
/// value in (0, 1] and makes the result invariant to positive rescaling of `a`.
/// Tall inputs are iterated on their transpose so the Gram matrix is formed at
/// the smaller dimension.
pub fn newton_schulz_with<T: Scalar>(
    a: &Matrix<T>,
    iters: usize,
    coeffs: NsCoefficients,
) -> Result<Matrix<T>, LinalgError> {
    if iters == 0 {
        return Err(LinalgError::ZeroIterations);
    }
    a.ensure_finite()?;
    let norm = a.frobenius_norm();
    if norm == T::zero() {
        return Err(LinalgError::ZeroInput);
    }
    let tall = a.rows() > a.cols();
    let mut x = if tall { a.transpose() } else { a.clone() };
    x.as_mut_slice().iter_mut().for_each(|v| *v = *v / norm);

    let (ca, cb, cc) = (
        T::from_f64(coeffs.a),
        T::from_f64(coeffs.b),
        T::from_f64(coeffs.c),
    );
    for _ in 0..iters {
        let gram = x.gram_rows();
        let poly = if cc == T::zero() {
            gram.scale(cb)
        } else {
            let mut p = gram.matmul(&gram)?.scale(cc);
            p.axpy(cb, &gram)?;
            p
        };
        let mut next = poly.matmul(&x)?;
        next.axpy(ca, &x)?;
        x = next;
    }
    Ok(if tall { x.transpose() } else { x })
}
