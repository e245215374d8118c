//! Small dense matrix helpers: Kronecker products, column-major
//! vectorization and a Jacobi eigenvalue solver for the symmetric matrices
//! that show up in excitation checks (at most a few dozen rows).

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Kronecker product `a ⊗ b`. Block `(i, j)` of the result is `a[(i, j)] * b`.
pub fn kron(a: &Matrix, b: &Matrix) -> Matrix {
    let (p, q) = b.shape();
    let mut out = Matrix::zeros(a.nrows() * p, a.ncols() * q);
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            let s = a[(i, j)];
            if s == 0.0 {
                continue;
            }
            out.view_mut((i * p, j * q), (p, q)).copy_from(&(b * s));
        }
    }
    out
}

/// Column-major stacking: column 0 first.
pub fn vec(m: &Matrix) -> Vector {
    // nalgebra storage is already column-major
    Vector::from_column_slice(m.as_slice())
}

/// Inverse of [`vec`]: reshapes a length `n*m` vector into an `n x m` matrix.
pub fn vec_inv(v: &Vector, n: usize, m: usize) -> Result<Matrix> {
    if v.len() != n * m {
        return Err(Error::dim("vec_inv", n * m, v.len()));
    }
    Ok(Matrix::from_column_slice(n, m, v.as_slice()))
}

/// `(uᵀ ⊗ Iₙ)` without materializing the identity. Shape `n x (n*m)`.
pub fn input_kron_identity(u: &Vector, n: usize) -> Matrix {
    let m = u.len();
    let mut out = Matrix::zeros(n, n * m);
    for (k, &uk) in u.iter().enumerate() {
        for i in 0..n {
            out[(i, k * n + i)] = uk;
        }
    }
    out
}

pub fn all_finite(values: &[f64]) -> bool {
    values.iter().all(|v| v.is_finite())
}

/// Eigenvalues of the symmetric part `(S + Sᵀ)/2`, ascending, by cyclic Jacobi rotation.
pub fn sym_eigenvalues(s: &Matrix) -> Result<Vec<f64>> {
    if !s.is_square() {
        return Err(Error::dim(
            "sym_eigenvalues",
            "square matrix",
            format!("{}x{}", s.nrows(), s.ncols()),
        ));
    }
    if !all_finite(s.as_slice()) {
        return Err(Error::NonFinite("sym_eigenvalues"));
    }
    let n = s.nrows();
    let mut a = (s + s.transpose()) * 0.5;
    let scale = a.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    if n == 0 {
        return Ok(Vec::new());
    }
    if scale == 0.0 {
        return Ok(vec![0.0; n]);
    }

    for _sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[(p, q)] * a[(p, q)];
            }
        }
        if off.sqrt() <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq.abs() <= f64::MIN_POSITIVE {
                    continue;
                }
                let app = a[(p, p)];
                let aqq = a[(q, q)];
                let tau = (aqq - app) / (2.0 * apq);
                let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let t = if tau == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let sn = t * c;

                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - sn * akq;
                    a[(k, q)] = sn * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - sn * aqk;
                    a[(q, k)] = sn * apk + c * aqk;
                }
            }
        }
    }

    let mut eig: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
    eig.sort_by(|x, y| x.total_cmp(y));
    Ok(eig)
}

/// Smallest eigenvalue of the symmetric part of `s`.
pub fn min_eigenvalue_sym(s: &Matrix) -> Result<f64> {
    let eig = sym_eigenvalues(s)?;
    eig.first()
        .copied()
        .ok_or_else(|| Error::dim("min_eigenvalue_sym", "non-empty matrix", "0x0"))
}

/// Largest eigenvalue of the symmetric part of `s`.
pub fn max_eigenvalue_sym(s: &Matrix) -> Result<f64> {
    let eig = sym_eigenvalues(s)?;
    eig.last()
        .copied()
        .ok_or_else(|| Error::dim("max_eigenvalue_sym", "non-empty matrix", "0x0"))
}

/// Gauss-Jordan inverse with partial pivoting. Intended for the fixed input
/// weight matrix, inverted once when gains are configured.
pub fn gauss_jordan_inverse(m: &Matrix) -> Result<Matrix> {
    if !m.is_square() {
        return Err(Error::dim(
            "gauss_jordan_inverse",
            "square matrix",
            format!("{}x{}", m.nrows(), m.ncols()),
        ));
    }
    let n = m.nrows();
    let mut a = m.clone();
    let mut inv = Matrix::identity(n, n);
    let scale = a.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[(i, col)].abs().total_cmp(&a[(j, col)].abs()))
            .unwrap_or(col);
        if a[(pivot, col)].abs() <= 1e-14 * scale.max(f64::MIN_POSITIVE) {
            return Err(Error::Singular("gauss_jordan_inverse"));
        }
        a.swap_rows(col, pivot);
        inv.swap_rows(col, pivot);
        let d = a[(col, col)];
        for k in 0..n {
            a[(col, k)] /= d;
            inv[(col, k)] /= d;
        }
        for row in 0..n {
            if row == col {
                continue;
            }
            let f = a[(row, col)];
            if f == 0.0 {
                continue;
            }
            for k in 0..n {
                a[(row, k)] -= f * a[(col, k)];
                inv[(row, k)] -= f * inv[(col, k)];
            }
        }
    }
    Ok(inv)
}

/// Symmetric positive definite test via Cholesky factorization.
pub fn is_positive_definite(m: &Matrix) -> bool {
    m.is_square() && all_finite(m.as_slice()) && m.clone().cholesky().is_some()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kron_identity_and_scalar() {
        assert_eq!(
            kron(&Matrix::identity(2, 2), &Matrix::identity(2, 2)),
            Matrix::identity(4, 4)
        );
        let k = kron(&Matrix::from_element(1, 1, 2.0), &Matrix::from_element(1, 1, 3.0));
        assert_eq!(k, Matrix::from_element(1, 1, 6.0));
    }

    #[test]
    fn kron_block_layout() {
        let a = Matrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let b = Matrix::from_row_slice(1, 2, &[1.0, -1.0]);
        let k = kron(&a, &b);
        assert_eq!(k.shape(), (2, 4));
        assert_eq!(k.row(0).iter().copied().collect::<Vec<_>>(), vec![1.0, -1.0, 2.0, -2.0]);
        assert_eq!(k.row(1).iter().copied().collect::<Vec<_>>(), vec![3.0, -3.0, 4.0, -4.0]);
    }

    #[test]
    fn vec_is_column_major() {
        let m = Matrix::from_row_slice(2, 2, &[1.0, 3.0, 2.0, 4.0]);
        assert_eq!(vec(&m).as_slice(), &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(vec(&Matrix::zeros(2, 3)), Vector::zeros(6));
    }

    #[test]
    fn vec_inv_examples() {
        let v = Vector::from_vec(vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(
            vec_inv(&v, 2, 2).unwrap(),
            Matrix::from_row_slice(2, 2, &[1.0, 3.0, 2.0, 4.0])
        );
        assert_eq!(vec_inv(&Vector::zeros(6), 3, 2).unwrap(), Matrix::zeros(3, 2));
        assert!(matches!(vec_inv(&v, 3, 2), Err(Error::Dimension { .. })));
    }

    #[test]
    fn input_kron_matches_explicit_kron() {
        let u = Vector::from_vec(vec![0.5, -2.0]);
        let explicit = kron(&Matrix::from_row_slice(1, 2, u.as_slice()), &Matrix::identity(3, 3));
        assert_eq!(input_kron_identity(&u, 3), explicit);
    }

    #[test]
    fn eigen_small_cases() {
        assert!((min_eigenvalue_sym(&Matrix::identity(3, 3)).unwrap() - 1.0).abs() < 1e-15);
        let d = Matrix::from_diagonal(&Vector::from_vec(vec![2.0, 5.0]));
        assert!((min_eigenvalue_sym(&d).unwrap() - 2.0).abs() < 1e-15);
        assert!((max_eigenvalue_sym(&d).unwrap() - 5.0).abs() < 1e-15);
        assert!(min_eigenvalue_sym(&Matrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn rank_one_gram_has_zero_eigenvalue() {
        // characteristic polynomial of vvᵀ in 2D: λ² - |v|²λ, roots 0 and |v|²
        let v = Vector::from_vec(vec![0.3, -1.7]);
        let s = &v * v.transpose();
        let eig = sym_eigenvalues(&s).unwrap();
        assert!(eig[0].abs() < 1e-14);
        assert!((eig[1] - v.norm_squared()).abs() < 1e-13);
    }

    #[test]
    fn inverse_of_spd() {
        let r = Matrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 3.0]);
        let inv = gauss_jordan_inverse(&r).unwrap();
        assert!((&r * &inv - Matrix::identity(2, 2)).norm() < 1e-14);
        assert!(gauss_jordan_inverse(&Matrix::zeros(2, 2)).is_err());
    }
}
