//! Thin wrappers around the BLAS/LAPACK routines the pipeline leans on.
//!
//! The heavy products (`Phi^H Phi`, Gram matrices) go through rank-k update
//! kernels instead of general matmul so the Hermitian/symmetric structure is
//! exploited; everything else defers to `ndarray-linalg`.

use ndarray::prelude::*;
use ndarray_linalg::{Cholesky, Eigh, FactorizeC, FactorizeCInto, SolveC, UPLO};
use num_complex::Complex64;

use crate::error::{Result, RffGamError};

// CBLAS constants (row-major convention throughout this crate).
const CBLAS_ROW_MAJOR: i32 = 101;
const CBLAS_LOWER: i32 = 122;
const CBLAS_CONJ_TRANS: i32 = 113;
const CBLAS_TRANS: i32 = 112;
const CBLAS_NO_TRANS: i32 = 111;

unsafe extern "C" {
    fn cblas_zherk(
        order: i32,
        uplo: i32,
        trans: i32,
        n: i32,
        k: i32,
        alpha: f64,
        a: *const Complex64,
        lda: i32,
        beta: f64,
        c: *mut Complex64,
        ldc: i32,
    );
    fn cblas_dsyrk(
        order: i32,
        uplo: i32,
        trans: i32,
        n: i32,
        k: i32,
        alpha: f64,
        a: *const f64,
        lda: i32,
        beta: f64,
        c: *mut f64,
        ldc: i32,
    );
}

/// `A^H A` for a row-major `N x K` complex matrix, returned as a full
/// (mirrored) Hermitian `K x K` matrix.
pub fn conj_gram(a: &Array2<Complex64>) -> Array2<Complex64> {
    let (n, k) = a.dim();
    let a_slice = a.as_slice().expect("contiguous row-major input");
    let mut c = Array2::<Complex64>::zeros((k, k));
    unsafe {
        cblas_zherk(
            CBLAS_ROW_MAJOR,
            CBLAS_LOWER,
            CBLAS_CONJ_TRANS,
            k as i32,
            n as i32,
            1.0,
            a_slice.as_ptr(),
            k as i32,
            0.0,
            c.as_slice_mut().unwrap().as_mut_ptr(),
            k as i32,
        );
    }
    // Mirror the computed lower triangle.
    for i in 0..k {
        for j in (i + 1)..k {
            c[[i, j]] = c[[j, i]].conj();
        }
    }
    c
}

/// `A^T A` for a row-major `N x K` real matrix, returned as a full symmetric
/// `K x K` matrix.
pub fn gram(a: &Array2<f64>) -> Array2<f64> {
    let (n, k) = a.dim();
    let a_slice = a.as_slice().expect("contiguous row-major input");
    let mut c = Array2::<f64>::zeros((k, k));
    unsafe {
        cblas_dsyrk(
            CBLAS_ROW_MAJOR,
            CBLAS_LOWER,
            CBLAS_TRANS,
            k as i32,
            n as i32,
            1.0,
            a_slice.as_ptr(),
            k as i32,
            0.0,
            c.as_slice_mut().unwrap().as_mut_ptr(),
            k as i32,
        );
    }
    for i in 0..k {
        for j in (i + 1)..k {
            c[[i, j]] = c[[j, i]];
        }
    }
    c
}

/// Lower triangle of `AᵀA` for a row-major `N x K` real matrix; entries
/// above the diagonal are left zero. Used where the consumer only reads the
/// lower triangle (a lower-UPLO Cholesky, say) and mirroring a large Gram
/// matrix would be wasted memory traffic.
pub fn gram_lower(a: &Array2<f64>) -> Array2<f64> {
    let (n, k) = a.dim();
    let a_slice = a.as_slice().expect("contiguous row-major input");
    let mut c = Array2::<f64>::zeros((k, k));
    unsafe {
        cblas_dsyrk(
            CBLAS_ROW_MAJOR,
            CBLAS_LOWER,
            CBLAS_TRANS,
            k as i32,
            n as i32,
            1.0,
            a_slice.as_ptr(),
            k as i32,
            0.0,
            c.as_slice_mut().unwrap().as_mut_ptr(),
            k as i32,
        );
    }
    c
}

/// Lower triangle of the row Gram matrix `AAᵀ` for a row-major `N x K` real
/// matrix; entries above the diagonal are left zero.
pub fn gram_rows_lower(a: &Array2<f64>) -> Array2<f64> {
    let (n, k) = a.dim();
    let a_slice = a.as_slice().expect("contiguous row-major input");
    let mut c = Array2::<f64>::zeros((n, n));
    unsafe {
        cblas_dsyrk(
            CBLAS_ROW_MAJOR,
            CBLAS_LOWER,
            CBLAS_NO_TRANS,
            n as i32,
            k as i32,
            1.0,
            a_slice.as_ptr(),
            k as i32,
            0.0,
            c.as_slice_mut().unwrap().as_mut_ptr(),
            n as i32,
        );
    }
    c
}

/// Solve the Hermitian positive-definite system `M x = b` in place of `M`.
pub fn solve_hermitian_pd(
    m: Array2<Complex64>,
    b: &Array1<Complex64>,
) -> Result<Array1<Complex64>> {
    let f = m
        .factorizec(UPLO::Lower)
        .map_err(|e| RffGamError::numerical(format!("Hermitian Cholesky failed: {e}")))?;
    f.solvec(b)
        .map_err(|e| RffGamError::numerical(format!("Hermitian solve failed: {e}")))
        .map(|x| x.to_owned())
}

/// Solve a small real symmetric positive-definite system `M x = b`.
pub fn solve_spd(m: &Array2<f64>, b: &Array1<f64>) -> Result<Array1<f64>> {
    let f = m
        .factorizec(UPLO::Lower)
        .map_err(|e| RffGamError::numerical(format!("SPD Cholesky failed: {e}")))?;
    f.solvec(b)
        .map_err(|e| RffGamError::numerical(format!("SPD solve failed: {e}")))
        .map(|x| x.to_owned())
}

/// Solve a real symmetric positive-definite system `M x = b`, consuming `M`
/// so the factorization happens in place — no copy of a large matrix. Only
/// the lower triangle of `M` is read.
pub fn solve_spd_into(m: Array2<f64>, b: &Array1<f64>) -> Result<Array1<f64>> {
    let f = m
        .factorizec_into(UPLO::Lower)
        .map_err(|e| RffGamError::numerical(format!("SPD Cholesky failed: {e}")))?;
    f.solvec(b)
        .map_err(|e| RffGamError::numerical(format!("SPD solve failed: {e}")))
        .map(|x| x.to_owned())
}

/// Lower-triangular Cholesky factor of a small SPD matrix.
pub fn cholesky_lower(m: &Array2<f64>) -> Result<Array2<f64>> {
    m.cholesky(UPLO::Lower)
        .map_err(|e| RffGamError::numerical(format!("Cholesky failed: {e}")))
}

/// Solve `L Lᵀ x = b` given the lower Cholesky factor `L` (forward, then
/// back substitution). Handy where the same factor is reused many times.
pub fn cholesky_solve(l: &Array2<f64>, b: &Array1<f64>) -> Array1<f64> {
    let n = l.nrows();
    let mut x = b.clone();
    for i in 0..n {
        let mut acc = x[i];
        for j in 0..i {
            acc -= l[[i, j]] * x[j];
        }
        x[i] = acc / l[[i, i]];
    }
    for i in (0..n).rev() {
        let mut acc = x[i];
        for j in (i + 1)..n {
            acc -= l[[j, i]] * x[j];
        }
        x[i] = acc / l[[i, i]];
    }
    x
}

/// Eigen-decomposition of a real symmetric matrix; returns (values, vectors)
/// sorted by descending eigenvalue, with eigenvectors as columns.
pub fn eigh_descending(m: &Array2<f64>) -> Result<(Array1<f64>, Array2<f64>)> {
    let (vals, vecs) = m
        .eigh(UPLO::Lower)
        .map_err(|e| RffGamError::numerical(format!("symmetric eigendecomposition failed: {e}")))?;
    // LAPACK returns ascending order; flip.
    let n = vals.len();
    let mut vals_d = Array1::zeros(n);
    let mut vecs_d = Array2::zeros(vecs.dim());
    for i in 0..n {
        vals_d[i] = vals[n - 1 - i];
        vecs_d.column_mut(i).assign(&vecs.column(n - 1 - i));
    }
    Ok((vals_d, vecs_d))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn conj_gram_matches_naive() {
        let a = array![
            [Complex64::new(1.0, 2.0), Complex64::new(0.5, -1.0)],
            [Complex64::new(-0.3, 0.7), Complex64::new(2.0, 0.1)],
            [Complex64::new(0.0, -0.4), Complex64::new(1.5, 1.5)],
        ];
        let g = conj_gram(&a);
        for i in 0..2 {
            for j in 0..2 {
                let mut want = Complex64::new(0.0, 0.0);
                for r in 0..3 {
                    want += a[[r, i]].conj() * a[[r, j]];
                }
                assert!((g[[i, j]] - want).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn gram_matches_naive() {
        let a = array![[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]];
        let g = gram(&a);
        let want = a.t().dot(&a);
        assert!((&g - &want).iter().all(|d| d.abs() < 1e-12));
    }

    #[test]
    fn gram_lower_matches_mirrored_gram() {
        let a = array![[1.0, 2.0, -0.5], [3.0, 4.0, 0.25], [5.0, 6.0, -1.5]];
        let full = gram(&a);
        let lower = gram_lower(&a);
        for i in 0..3 {
            for j in 0..3 {
                if j <= i {
                    assert_eq!(lower[[i, j]], full[[i, j]]);
                } else {
                    assert_eq!(lower[[i, j]], 0.0);
                }
            }
        }
    }

    #[test]
    fn gram_rows_lower_matches_naive() {
        let a = array![[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]];
        let want = a.dot(&a.t());
        let got = gram_rows_lower(&a);
        for i in 0..3 {
            for j in 0..=i {
                assert!((got[[i, j]] - want[[i, j]]).abs() < 1e-12);
            }
            for j in (i + 1)..3 {
                assert_eq!(got[[i, j]], 0.0);
            }
        }
    }

    #[test]
    fn solve_spd_into_reads_lower_triangle_only() {
        // Upper triangle holds garbage; the solve must still match the
        // symmetric reference.
        let sym = array![[6.0, 2.0, 1.0], [2.0, 5.0, 2.0], [1.0, 2.0, 4.0]];
        let mut lower_only = sym.clone();
        lower_only[[0, 1]] = 99.0;
        lower_only[[0, 2]] = -77.0;
        lower_only[[1, 2]] = 123.0;
        let b = array![1.0, -2.0, 3.0];
        let want = solve_spd(&sym, &b).unwrap();
        let got = solve_spd_into(lower_only, &b).unwrap();
        assert!((&got - &want).iter().all(|d| d.abs() < 1e-12));
    }

    #[test]
    fn spd_solve_recovers_solution() {
        let m = array![[4.0, 1.0], [1.0, 3.0]];
        let x_true = array![1.5, -2.0];
        let b = m.dot(&x_true);
        let x = solve_spd(&m, &b).unwrap();
        assert!((&x - &x_true).iter().all(|d| d.abs() < 1e-12));
    }

    #[test]
    fn cholesky_solve_matches_direct_solve() {
        let m = array![[6.0, 2.0, 1.0], [2.0, 5.0, 2.0], [1.0, 2.0, 4.0]];
        let b = array![1.0, -2.0, 3.0];
        let l = cholesky_lower(&m).unwrap();
        let x = cholesky_solve(&l, &b);
        let want = solve_spd(&m, &b).unwrap();
        assert!((&x - &want).iter().all(|d| d.abs() < 1e-12));
    }

    #[test]
    fn eigh_orders_descending() {
        let m = array![[2.0, 0.0], [0.0, 5.0]];
        let (vals, vecs) = eigh_descending(&m).unwrap();
        assert!(vals[0] >= vals[1]);
        assert!((vals[0] - 5.0).abs() < 1e-12);
        assert!((vecs[[1, 0]].abs() - 1.0).abs() < 1e-12);
    }
}
