//! One-sided Jacobi SVD for small dense matrices.
//!
//! This is a verification oracle: accurate to near machine precision and
//! deterministic, but O(n³) per sweep with no blocking. Not for hot paths.

use super::{LinalgError, Matrix, Scalar};

/// Largest `min(rows, cols)` accepted by [`svd_small`].
pub const SVD_MAX_DIM: usize = 512;

const MAX_SWEEPS: usize = 80;

/// Thin SVD `A = U · diag(σ) · Vᵀ` with `r = min(m, n)` columns in `U` and `V`.
#[derive(Debug, Clone)]
pub struct SvdResult<T: Scalar = f64> {
    pub u: Matrix<T>,
    /// Nonnegative, sorted descending.
    pub singular_values: Vec<T>,
    pub v: Matrix<T>,
}

impl<T: Scalar> SvdResult<T> {
    pub fn reconstruct(&self) -> Matrix<T> {
        let r = self.singular_values.len();
        let mut us = self.u.clone();
        for i in 0..us.rows() {
            for j in 0..r {
                us[(i, j)] = us[(i, j)] * self.singular_values[j];
            }
        }
        us.matmul(&self.v.transpose())
            .expect("thin SVD factors have compatible shapes")
    }

    /// Ratio of largest to smallest singular value (infinite when rank-deficient).
    pub fn condition_number(&self) -> T {
        let max = self.singular_values[0];
        let min = *self.singular_values.last().unwrap();
        if min == T::zero() {
            T::infinity()
        } else {
            max / min
        }
    }
}

/// Computes the thin SVD of `a`.
pub fn svd_small<T: Scalar>(a: &Matrix<T>) -> Result<SvdResult<T>, LinalgError> {
    a.ensure_finite()?;
    let (m, n) = a.shape();
    if m.min(n) > SVD_MAX_DIM {
        return Err(LinalgError::DimensionLimit {
            dim: m.min(n),
            limit: SVD_MAX_DIM,
        });
    }
    if m >= n {
        jacobi_tall(a)
    } else {
        // A = U Σ Vᵀ  ⇔  Aᵀ = V Σ Uᵀ
        let t = jacobi_tall(&a.transpose())?;
        Ok(SvdResult {
            u: t.v,
            singular_values: t.singular_values,
            v: t.u,
        })
    }
}

/// Hestenes one-sided Jacobi on a matrix with `rows >= cols`.
fn jacobi_tall<T: Scalar>(a: &Matrix<T>) -> Result<SvdResult<T>, LinalgError> {
    let (m, n) = a.shape();
    // Column-major working copies make the column rotations contiguous.
    let mut cols: Vec<Vec<T>> = (0..n).map(|j| a.column(j)).collect();
    let mut v: Vec<Vec<T>> = (0..n)
        .map(|j| {
            let mut e = vec![T::zero(); n];
            e[j] = T::one();
            e
        })
        .collect();

    let tol = T::epsilon() * T::from_f64(m as f64).sqrt();
    let mut converged = n < 2;
    for _ in 0..MAX_SWEEPS {
        if converged {
            break;
        }
        let mut rotated = false;
        for p in 0..n - 1 {
            for q in p + 1..n {
                let (alpha, beta, gamma) = col_products(&cols[p], &cols[q]);
                if gamma == T::zero() || gamma.abs() <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (T::from_f64(2.0) * gamma);
                let t = zeta.signum() / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = c * t;
                rotate(&mut cols, p, q, c, s);
                rotate(&mut v, p, q, c, s);
            }
        }
        converged = !rotated;
    }
    if !converged {
        return Err(LinalgError::NoConvergence { sweeps: MAX_SWEEPS });
    }

    let mut order: Vec<(usize, T)> = cols.iter().enumerate().map(|(j, c)| (j, norm(c))).collect();
    // Stable sort keeps the result deterministic for ties.
    order.sort_by(|x, y| y.1.partial_cmp(&x.1).unwrap_or(std::cmp::Ordering::Equal));

    let sigma_max = order[0].1;
    let rank_tol = sigma_max * T::epsilon() * T::from_f64((m.max(n)) as f64);
    let mut u = Matrix::zeros(m, n);
    let mut vm = Matrix::zeros(n, n);
    let mut singular_values = Vec::with_capacity(n);
    let mut missing = Vec::new();
    for (k, &(j, s)) in order.iter().enumerate() {
        for i in 0..n {
            vm[(i, k)] = v[j][i];
        }
        if s > rank_tol && s > T::zero() {
            for i in 0..m {
                u[(i, k)] = cols[j][i] / s;
            }
            singular_values.push(s);
        } else {
            singular_values.push(T::zero());
            missing.push(k);
        }
    }
    if !missing.is_empty() {
        complete_orthonormal(&mut u, &missing);
    }
    Ok(SvdResult {
        u,
        singular_values,
        v: vm,
    })
}

fn col_products<T: Scalar>(x: &[T], y: &[T]) -> (T, T, T) {
    let mut a = T::zero();
    let mut b = T::zero();
    let mut g = T::zero();
    for (&xi, &yi) in x.iter().zip(y) {
        a = a + xi * xi;
        b = b + yi * yi;
        g = g + xi * yi;
    }
    (a, b, g)
}

fn rotate<T: Scalar>(cols: &mut [Vec<T>], p: usize, q: usize, c: T, s: T) {
    let (lo, hi) = cols.split_at_mut(q);
    let cp = &mut lo[p];
    let cq = &mut hi[0];
    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
        let xp = *x;
        let yq = *y;
        *x = c * xp - s * yq;
        *y = s * xp + c * yq;
    }
}

fn norm<T: Scalar>(x: &[T]) -> T {
    x.iter().fold(T::zero(), |acc, &v| acc + v * v).sqrt()
}

/// Fills the listed columns of `u` with unit vectors orthogonal to all other columns.
fn complete_orthonormal<T: Scalar>(u: &mut Matrix<T>, missing: &[usize]) {
    let (m, n) = u.shape();
    let mut filled: Vec<usize> = (0..n).filter(|k| !missing.contains(k)).collect();
    let mut basis = 0;
    for &k in missing {
        while basis < m {
            let mut cand = vec![T::zero(); m];
            cand[basis] = T::one();
            basis += 1;
            // two passes of Gram-Schmidt for numerical orthogonality
            for _ in 0..2 {
                for &f in &filled {
                    let dot = (0..m).fold(T::zero(), |acc, i| acc + cand[i] * u[(i, f)]);
                    for (i, c) in cand.iter_mut().enumerate() {
                        *c = *c - dot * u[(i, f)];
                    }
                }
            }
            let nrm = norm(&cand);
            if nrm > T::from_f64(1e-6) {
                for (i, c) in cand.iter().enumerate() {
                    u[(i, k)] = *c / nrm;
                }
                filled.push(k);
                break;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn orth_error(q: &Matrix) -> f64 {
        let g = q.gram_cols();
        g.sub(&Matrix::identity(g.rows())).unwrap().frobenius_norm()
    }

    #[test]
    fn identity() {
        let r = svd_small(&Matrix::<f64>::identity(3)).unwrap();
        assert_eq!(r.singular_values, vec![1.0, 1.0, 1.0]);
        assert!(r.u.sub(&Matrix::identity(3)).unwrap().max_abs() < 1e-15);
        assert!(r.v.sub(&Matrix::identity(3)).unwrap().max_abs() < 1e-15);
    }

    #[test]
    fn diagonal() {
        let r = svd_small(&Matrix::from_diag(&[3.0, 1.0])).unwrap();
        assert_eq!(r.singular_values, vec![3.0, 1.0]);
        let r = svd_small(&Matrix::from_diag(&[1.0, 3.0])).unwrap();
        assert_eq!(r.singular_values, vec![3.0, 1.0]);
    }

    #[test]
    fn wide_and_rank_deficient() {
        let a = Matrix::from_rows(&[&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]]);
        let r = svd_small(&a).unwrap();
        assert_eq!(r.u.shape(), (2, 2));
        assert_eq!(r.v.shape(), (3, 2));
        assert_eq!(r.singular_values[1], 0.0);
        assert!(orth_error(&r.u) < 1e-12);
        assert!(orth_error(&r.v) < 1e-12);
        let rec = r.reconstruct();
        assert!(rec.sub(&a).unwrap().frobenius_norm() / a.frobenius_norm() < 1e-12);
    }

    #[test]
    fn rejects_non_finite() {
        let a = Matrix::from_rows(&[&[1.0, f64::NAN]]);
        assert!(matches!(svd_small(&a), Err(LinalgError::NonFinite)));
    }

    #[test]
    fn rejects_oversized() {
        let a = Matrix::<f64>::zeros(513, 513);
        assert!(matches!(
            svd_small(&a),
            Err(LinalgError::DimensionLimit { dim: 513, .. })
        ));
    }

    #[test]
    fn zero_matrix() {
        let r = svd_small(&Matrix::<f64>::zeros(3, 2)).unwrap();
        assert_eq!(r.singular_values, vec![0.0, 0.0]);
        assert!(orth_error(&r.u) < 1e-12);
    }
}
