//! Exact column-recursive pseudoinverse solver.
//!
//! Absorbing sample k appends a column to the activation history A and
//! updates W = Y A^+ without ever storing A. Two cases per column: an
//! activation outside the span of the history grows the rank (the residual
//! projector supplies the gain), one inside the span is a least-squares
//! refinement (the inverse Gram surrogate supplies it). The span test
//! compares ||phi a|| against c_tol * ||a||, since exact zeros never
//! survive floating point.

use crate::error::{Error, Result};
use crate::matrix::{dot, vec_norm, Matrix};

use super::{
    apply_readout_update, scale_gain, symmetrize, theta_times, validate_dims, validate_sample,
    vec_heap_bytes, OnlineSolver,
};

/// Online exact minimum-norm least-squares readout.
///
/// Carries W (N x M), theta = (A^+)^T A^+ (M x M, starts at zero) and the
/// orthogonal residual projector phi = I - A A^+ (M x M, starts at I).
#[derive(Clone, Debug)]
pub struct GrevilleState {
    w: Matrix,
    theta: Matrix,
    phi: Matrix,
    c_tol: f64,
    k: u64,
    v: Vec<f64>,
    beta: Vec<f64>,
    c: Vec<f64>,
    residual: Vec<f64>,
}

fn validate_c_tol(c_tol: f64) -> Result<()> {
    if !(c_tol > 0.0 && c_tol.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "c_tol".into(),
            message: format!("must be positive and finite, got {c_tol}"),
        });
    }
    Ok(())
}

impl GrevilleState {
    /// Fresh solver: W = 0, theta = 0, phi = I, no samples absorbed.
    pub fn new(hidden_dim: usize, output_dim: usize, c_tol: f64) -> Result<Self> {
        validate_dims(hidden_dim, output_dim)?;
        validate_c_tol(c_tol)?;
        Ok(GrevilleState {
            w: Matrix::zeros(output_dim, hidden_dim),
            theta: Matrix::zeros(hidden_dim, hidden_dim),
            phi: Matrix::identity(hidden_dim),
            c_tol,
            k: 0,
            v: Vec::with_capacity(hidden_dim),
            beta: Vec::with_capacity(hidden_dim),
            c: Vec::with_capacity(hidden_dim),
            residual: Vec::with_capacity(output_dim),
        })
    }

    /// Rebuilds a solver from stored state, e.g. a snapshot.
    pub fn from_parts(
        w: Matrix,
        theta: Matrix,
        phi: Matrix,
        c_tol: f64,
        updates: u64,
    ) -> Result<Self> {
        validate_c_tol(c_tol)?;
        let m = w.cols();
        let n = w.rows();
        if theta.shape() != (m, m) {
            return Err(Error::dims("exact state restore", (n, m), theta.shape()));
        }
        if phi.shape() != (m, m) {
            return Err(Error::dims("exact state restore", (n, m), phi.shape()));
        }
        for (name, mat) in [("theta", &theta), ("phi", &phi)] {
            if mat.max_asymmetry() > 1e-8 * mat.max_abs().max(1.0) {
                return Err(Error::InvalidParameter {
                    name: name.into(),
                    message: "stored matrix is not symmetric".into(),
                });
            }
        }
        let mut theta = theta;
        let mut phi = phi;
        symmetrize(&mut theta);
        symmetrize(&mut phi);
        Ok(GrevilleState {
            w,
            theta,
            phi,
            c_tol,
            k: updates,
            v: Vec::with_capacity(m),
            beta: Vec::with_capacity(m),
            c: Vec::with_capacity(m),
            residual: Vec::with_capacity(n),
        })
    }

    pub fn theta(&self) -> &Matrix {
        &self.theta
    }

    /// Residual projector I - A A^+ over the absorbed activations.
    pub fn phi(&self) -> &Matrix {
        &self.phi
    }

    pub fn c_tol(&self) -> f64 {
        self.c_tol
    }
}

impl OnlineSolver for GrevilleState {
    fn hidden_dim(&self) -> usize {
        self.w.cols()
    }

    fn output_dim(&self) -> usize {
        self.w.rows()
    }

    fn weights(&self) -> &Matrix {
        &self.w
    }

    fn updates(&self) -> u64 {
        self.k
    }

    fn update(&mut self, activation: &[f64], target: &[f64]) -> Result<()> {
        let m = self.hidden_dim();
        validate_sample(m, self.output_dim(), activation, target)?;

        // c = phi a decides the branch.
        self.c.clear();
        self.c.resize(m, 0.0);
        for i in 0..m {
            self.c[i] = dot(self.phi.row(i), activation);
        }
        let norm_c = vec_norm(&self.c);
        let norm_a = vec_norm(activation);

        if norm_c > self.c_tol * norm_a {
            // New direction: the projected residual supplies the gain.
            let d = norm_c * norm_c;
            if !(d > 1e-300) {
                return Err(Error::NumericDegeneracy {
                    context: "rank-growing gain".into(),
                    message: format!("||phi a||^2 = {d} is numerically zero"),
                });
            }
            scale_gain(&self.c, d, &mut self.beta)?;
            let q = theta_times(&self.theta, activation, &mut self.v);
            // theta' = theta - v beta^T - beta v^T + (1 + q) beta beta^T,
            // built symmetric entry by entry.
            let coeff = 1.0 + q;
            for i in 0..m {
                for j in i..m {
                    let updated = self.theta.get(i, j) - self.v[i] * self.beta[j]
                        - self.beta[i] * self.v[j]
                        + coeff * self.beta[i] * self.beta[j];
                    self.theta.set(i, j, updated);
                    self.theta.set(j, i, updated);
                }
            }
            // phi' = phi - c beta^T removes the new direction from the
            // residual space; symmetric in exact arithmetic.
            for i in 0..m {
                let ci = self.c[i];
                let row = self.phi.row_mut(i);
                for j in 0..m {
                    row[j] -= ci * self.beta[j];
                }
            }
            symmetrize(&mut self.phi);
        } else {
            // In-span refinement, identical in form to the regularised
            // solver's step.
            let q = theta_times(&self.theta, activation, &mut self.v);
            let denom = 1.0 + q;
            if !(denom > 0.0) {
                return Err(Error::InternalConsistency {
                    context: "in-span gain denominator".into(),
                    message: format!(
                        "1 + a^T theta a = {denom}; impossible while theta is positive semidefinite"
                    ),
                });
            }
            scale_gain(&self.v, denom, &mut self.beta)?;
            super::downdate_scale_symmetrize(&mut self.theta, &self.v, &self.beta, 1.0);
        }

        apply_readout_update(&mut self.w, activation, target, &self.beta, &mut self.residual);
        self.k += 1;
        Ok(())
    }

    fn state_heap_bytes(&self) -> usize {
        self.w.heap_bytes()
            + self.theta.heap_bytes()
            + self.phi.heap_bytes()
            + vec_heap_bytes(&self.v)
            + vec_heap_bytes(&self.beta)
            + vec_heap_bytes(&self.c)
            + vec_heap_bytes(&self.residual)
    }
}
