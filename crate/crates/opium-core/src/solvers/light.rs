//! Diagonal approximation of the streaming pseudoinverse solver.
//!
//! For zero-mean random hidden weights the inverse Gram surrogate stays
//! close to a multiple of the identity, so it can be frozen at g I. That
//! removes the M x M state and the O(M^2) work per sample entirely: the
//! gain is just a / (1/g + a^T a). Accuracy sits between a single
//! perceptron-style correction and the full solver.

use crate::error::{Error, Result};
use crate::matrix::{dot, Matrix};

use super::{apply_readout_update, scale_gain, validate_dims, validate_sample, vec_heap_bytes, OnlineSolver};

/// Online approximate least-squares readout with O(N M) state.
#[derive(Clone, Debug)]
pub struct LightState {
    w: Matrix,
    g: f64,
    k: u64,
    beta: Vec<f64>,
    residual: Vec<f64>,
}

fn validate_g(g: f64) -> Result<()> {
    if !(g > 0.0 && g.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "g".into(),
            message: format!("must be positive and finite, got {g}"),
        });
    }
    Ok(())
}

impl LightState {
    /// Fresh solver: W = 0, fixed gain scale g.
    pub fn new(hidden_dim: usize, output_dim: usize, g: f64) -> Result<Self> {
        validate_dims(hidden_dim, output_dim)?;
        validate_g(g)?;
        Ok(LightState {
            w: Matrix::zeros(output_dim, hidden_dim),
            g,
            k: 0,
            beta: Vec::with_capacity(hidden_dim),
            residual: Vec::with_capacity(output_dim),
        })
    }

    /// Rebuilds a solver from stored state, e.g. a snapshot.
    pub fn from_parts(w: Matrix, g: f64, updates: u64) -> Result<Self> {
        validate_g(g)?;
        let m = w.cols();
        let n = w.rows();
        Ok(LightState {
            w,
            g,
            k: updates,
            beta: Vec::with_capacity(m),
            residual: Vec::with_capacity(n),
        })
    }

    pub fn g(&self) -> f64 {
        self.g
    }
}

impl OnlineSolver for LightState {
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
        let denom = 1.0 / self.g + dot(activation, activation);
        scale_gain(activation, denom, &mut self.beta)?;
        apply_readout_update(&mut self.w, activation, target, &self.beta, &mut self.residual);
        self.k += 1;
        Ok(())
    }

    fn state_heap_bytes(&self) -> usize {
        self.w.heap_bytes() + vec_heap_bytes(&self.beta) + vec_heap_bytes(&self.residual)
    }
}
