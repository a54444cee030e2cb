//! Streaming pseudoinverse solver with a regularising initial block.
//!
//! Starting the recursion from a virtual batch (epsilon I -> zero targets)
//! keeps every incoming activation inside the span of what came before, so
//! the update never needs the rank-growing branch of the exact recursion:
//! a single rank-one correction per sample, O(M^2 + N M) work and memory.
//! The price is a bias of order epsilon^2 toward small weights.

use crate::error::{Error, Result};
use crate::matrix::Matrix;

use super::{
    theta_gain_step, validate_dims, validate_sample, vec_heap_bytes, DenomPolicy, OnlineSolver,
};

/// Online regularised least-squares readout.
///
/// Maintains the weights W (N x M) and the inverse Gram surrogate
/// theta = (A_k A_k^T)^-1 (M x M) of the epsilon-augmented activation
/// history, starting from theta_0 = I / epsilon^2.
#[derive(Clone, Debug)]
pub struct OpiumState {
    w: Matrix,
    theta: Matrix,
    epsilon: f64,
    k: u64,
    v: Vec<f64>,
    beta: Vec<f64>,
    residual: Vec<f64>,
}

fn validate_epsilon(epsilon: f64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "epsilon".into(),
            message: format!("must be positive and finite, got {epsilon}"),
        });
    }
    Ok(())
}

impl OpiumState {
    /// Fresh solver: W = 0, theta = I / epsilon^2, no samples absorbed.
    pub fn new(hidden_dim: usize, output_dim: usize, epsilon: f64) -> Result<Self> {
        validate_dims(hidden_dim, output_dim)?;
        validate_epsilon(epsilon)?;
        Ok(OpiumState {
            w: Matrix::zeros(output_dim, hidden_dim),
            theta: Matrix::scaled_identity(hidden_dim, 1.0 / (epsilon * epsilon)),
            epsilon,
            k: 0,
            v: Vec::with_capacity(hidden_dim),
            beta: Vec::with_capacity(hidden_dim),
            residual: Vec::with_capacity(output_dim),
        })
    }

    /// Rebuilds a solver from stored state, e.g. a snapshot.
    ///
    /// Checks shapes, finiteness and parameter ranges, and resymmetrises
    /// theta so a round-tripped state keeps the symmetry invariant.
    pub fn from_parts(w: Matrix, theta: Matrix, epsilon: f64, updates: u64) -> Result<Self> {
        validate_epsilon(epsilon)?;
        let m = w.cols();
        let n = w.rows();
        if theta.shape() != (m, m) {
            return Err(Error::dims("opium state restore", (n, m), theta.shape()));
        }
        if theta.max_asymmetry() > 1e-8 * theta.max_abs().max(1.0) {
            return Err(Error::InvalidParameter {
                name: "theta".into(),
                message: "stored matrix is not symmetric".into(),
            });
        }
        let mut theta = theta;
        super::symmetrize(&mut theta);
        Ok(OpiumState {
            w,
            theta,
            epsilon,
            k: updates,
            v: Vec::with_capacity(m),
            beta: Vec::with_capacity(m),
            residual: Vec::with_capacity(n),
        })
    }

    pub fn theta(&self) -> &Matrix {
        &self.theta
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
}

impl OnlineSolver for OpiumState {
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
        validate_sample(self.hidden_dim(), self.output_dim(), activation, target)?;
        theta_gain_step(
            &mut self.w,
            &mut self.theta,
            activation,
            target,
            1.0,
            1.0,
            DenomPolicy::Stationary,
            &mut self.v,
            &mut self.beta,
            &mut self.residual,
        )?;
        self.k += 1;
        Ok(())
    }

    fn state_heap_bytes(&self) -> usize {
        self.w.heap_bytes()
            + self.theta.heap_bytes()
            + vec_heap_bytes(&self.v)
            + vec_heap_bytes(&self.beta)
            + vec_heap_bytes(&self.residual)
    }
}
