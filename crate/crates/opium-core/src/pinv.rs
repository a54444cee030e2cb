//! Batch Moore-Penrose pseudoinverse and the least-squares weight oracle.
//!
//! The online solvers in this crate never call these routines; they exist as
//! the reference answer that streaming updates are checked against, and as the
//! one-shot training path for small problems.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Default relative singular-value cutoff for `pinv_auto`.
///
/// Singular values below `1e-12 * max(rows, cols)` times the largest singular
/// value are treated as zero.
pub fn default_pinv_tol(rows: usize, cols: usize) -> f64 {
    1e-12 * rows.max(cols) as f64
}

fn to_nalgebra(m: &Matrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.rows(), m.cols(), m.data())
}

fn from_nalgebra(m: &DMatrix<f64>) -> Result<Matrix> {
    Matrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)]).map_err(|_| Error::NumericDegeneracy {
        context: "pinv",
        message: "result contains non-finite entries".into(),
    })
}

const MAX_JACOBI_SWEEPS: usize = 100;

fn col_dot(data: &[f64], stride: usize, p: usize, q: usize) -> f64 {
    let a = &data[p * stride..(p + 1) * stride];
    let b = &data[q * stride..(q + 1) * stride];
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn rotate_pair(data: &mut [f64], stride: usize, p: usize, q: usize, c: f64, s: f64) {
    let (head, tail) = data.split_at_mut(q * stride);
    let col_p = &mut head[p * stride..(p + 1) * stride];
    let col_q = &mut tail[..stride];
    for (x, y) in col_p.iter_mut().zip(col_q.iter_mut()) {
        let gp = *x;
        let gq = *y;
        *x = c * gp - s * gq;
        *y = s * gp + c * gq;
    }
}

/// Pseudoinverse of the square or moderately tall core via one-sided Jacobi.
///
/// Rotates column pairs until they are mutually orthogonal; the surviving
/// column norms are the singular values. Keeps singular values strictly above
/// `rel_tol * sigma_max` and zeroes the rest, so an all-zero matrix maps to an
/// all-zero pseudoinverse.
fn pinv_svd(nb: DMatrix<f64>, rel_tol: f64) -> Result<DMatrix<f64>> {
    let (m, n) = (nb.nrows(), nb.ncols());
    let mut g = vec![0.0; m * n];
    for j in 0..n {
        for i in 0..m {
            g[j * m + i] = nb[(i, j)];
        }
    }
    let mut v = vec![0.0; n * n];
    for j in 0..n {
        v[j * n + j] = 1.0;
    }
    let conv_tol = (m.max(n) as f64).sqrt() * f64::EPSILON;
    let mut converged = n < 2;
    for _ in 0..MAX_JACOBI_SWEEPS {
        if converged {
            break;
        }
        let mut col_sq: Vec<f64> = (0..n).map(|j| col_dot(&g, m, j, j)).collect();
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let alpha = col_sq[p];
                let beta = col_sq[q];
                let gamma = col_dot(&g, m, p, q);
                if gamma * gamma <= conv_tol * conv_tol * alpha * beta {
                    continue;
                }
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate_pair(&mut g, m, p, q, c, s);
                rotate_pair(&mut v, n, p, q, c, s);
                col_sq[p] = (alpha - t * gamma).max(0.0);
                col_sq[q] = (beta + t * gamma).max(0.0);
                rotated = true;
            }
        }
        converged = !rotated;
    }
    if !converged {
        return Err(Error::NumericDegeneracy {
            context: "pinv",
            message: "jacobi column orthogonalization did not converge".into(),
        });
    }
    if g.iter().any(|x| !x.is_finite()) {
        return Err(Error::NumericDegeneracy {
            context: "pinv",
            message: "column orthogonalization produced non-finite values".into(),
        });
    }
    let sigma_sq: Vec<f64> = (0..n).map(|j| col_dot(&g, m, j, j)).collect();
    let sigma_max_sq = sigma_sq.iter().cloned().fold(0.0_f64, f64::max);
    let cutoff_sq = rel_tol * rel_tol * sigma_max_sq;
    let mut x = DMatrix::<f64>::zeros(n, m);
    for j in 0..n {
        if sigma_sq[j] <= cutoff_sq {
            continue;
        }
        let inv_sq = 1.0 / sigma_sq[j];
        let u_col = &g[j * m..(j + 1) * m];
        let v_col = &v[j * n..(j + 1) * n];
        for (r, &vr) in v_col.iter().enumerate() {
            let w = vr * inv_sq;
            for (c, &uc) in u_col.iter().enumerate() {
                x[(r, c)] += w * uc;
            }
        }
    }
    Ok(x)
}

fn pinv_inner(nb: DMatrix<f64>, rel_tol: f64) -> Result<DMatrix<f64>> {
    let (rows, cols) = (nb.nrows(), nb.ncols());
    if rows >= 2 * cols {
        // Tall matrix: reduce through a thin QR first. A = QR gives
        // pinv(A) = pinv(R) Q^T, and R shares A's singular values, so the
        // relative cutoff is unaffected.
        let qr = nb.qr();
        let q = qr.q();
        let r = qr.r();
        let r_pinv = pinv_svd(r, rel_tol)?;
        Ok(r_pinv * q.transpose())
    } else if cols > rows {
        let t_pinv = pinv_inner(nb.transpose(), rel_tol)?;
        Ok(t_pinv.transpose())
    } else {
        pinv_svd(nb, rel_tol)
    }
}

/// Moore-Penrose pseudoinverse with an explicit relative cutoff.
///
/// `rel_tol` is the singular-value threshold relative to the largest singular
/// value; it must be positive and finite.
pub fn pinv(a: &Matrix, rel_tol: f64) -> Result<Matrix> {
    if !(rel_tol > 0.0 && rel_tol.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "rel_tol".into(),
            message: format!("must be positive and finite, got {rel_tol}"),
        });
    }
    let result = pinv_inner(to_nalgebra(a), rel_tol)?;
    from_nalgebra(&result)
}

/// Pseudoinverse with the default cutoff for the matrix's shape.
pub fn pinv_auto(a: &Matrix) -> Result<Matrix> {
    pinv(a, default_pinv_tol(a.rows(), a.cols()))
}

/// Minimum-norm least-squares readout weights for a whole batch.
///
/// `activations` is M x k (one column per sample), `targets` is N x k with
/// matching columns. Returns the N x M weight matrix `targets * pinv(activations)`.
pub fn batch_solve(activations: &Matrix, targets: &Matrix) -> Result<Matrix> {
    if activations.cols() != targets.cols() {
        return Err(Error::dims(
            "batch_solve sample counts",
            (activations.rows(), activations.cols()),
            (targets.rows(), targets.cols()),
        ));
    }
    let a_pinv = pinv_auto(activations)?;
    targets.matmul(&a_pinv)
}

/// Relative Frobenius errors of the four pseudoinverse defining conditions.
///
/// Returns `[e1, e2, e3, e4]` for `A X A = A`, `X A X = X`, `(A X)^T = A X`,
/// and `(X A)^T = X A`, each normalised by the Frobenius norm of the quantity
/// on the right (absolute error when that norm is zero).
pub fn penrose_errors(a: &Matrix, x: &Matrix) -> Result<[f64; 4]> {
    if a.rows() != x.cols() || a.cols() != x.rows() {
        return Err(Error::dims(
            "penrose_errors",
            (a.rows(), a.cols()),
            (x.rows(), x.cols()),
        ));
    }
    let ax = a.matmul(x)?;
    let xa = x.matmul(a)?;
    let axa = ax.matmul(a)?;
    let xax = xa.matmul(x)?;
    Ok([
        axa.rel_frobenius_diff(a)?,
        xax.rel_frobenius_diff(x)?,
        ax.transpose().rel_frobenius_diff(&ax)?,
        xa.transpose().rel_frobenius_diff(&xa)?,
    ])
}
