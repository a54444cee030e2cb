//! Forgetting variant of the streaming pseudoinverse solver.
//!
//! A forgetting factor alpha in [1, 2) exponentially discounts old samples:
//! the gain denominator offset becomes (2 - alpha) / alpha instead of 1 and
//! theta is rescaled by 1 / (2 - alpha) after each downdate, which keeps the
//! effective sample window at roughly 1 / (alpha - 1) steps. At alpha = 1
//! both factors are exactly 1.0 and the update degenerates bit-for-bit to
//! the stationary solver.

use crate::error::{Error, Result};
use crate::matrix::Matrix;

use super::{
    theta_gain_step, validate_dims, validate_sample, vec_heap_bytes, DenomPolicy, OnlineSolver,
};

/// Online regularised least-squares readout with exponential forgetting.
#[derive(Clone, Debug)]
pub struct DynamicState {
    w: Matrix,
    theta: Matrix,
    epsilon: f64,
    alpha: f64,
    denom_offset: f64,
    inv_scale: f64,
    k: u64,
    v: Vec<f64>,
    beta: Vec<f64>,
    residual: Vec<f64>,
}

fn validate_params(epsilon: f64, alpha: f64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "epsilon".into(),
            message: format!("must be positive and finite, got {epsilon}"),
        });
    }
    if !(alpha >= 1.0 && alpha < 2.0) {
        return Err(Error::InvalidParameter {
            name: "alpha".into(),
            message: format!(
                "must lie in [1, 2), got {alpha}; values outside make the recursion an unstable filter"
            ),
        });
    }
    Ok(())
}

impl DynamicState {
    /// Fresh solver: W = 0, theta = I / epsilon^2, no samples absorbed.
    pub fn new(hidden_dim: usize, output_dim: usize, epsilon: f64, alpha: f64) -> Result<Self> {
        validate_dims(hidden_dim, output_dim)?;
        validate_params(epsilon, alpha)?;
        Ok(DynamicState {
            w: Matrix::zeros(output_dim, hidden_dim),
            theta: Matrix::scaled_identity(hidden_dim, 1.0 / (epsilon * epsilon)),
            epsilon,
            alpha,
            denom_offset: (2.0 - alpha) / alpha,
            inv_scale: 1.0 / (2.0 - alpha),
            k: 0,
            v: Vec::with_capacity(hidden_dim),
            beta: Vec::with_capacity(hidden_dim),
            residual: Vec::with_capacity(output_dim),
        })
    }

    /// Rebuilds a solver from stored state, e.g. a snapshot.
    pub fn from_parts(
        w: Matrix,
        theta: Matrix,
        epsilon: f64,
        alpha: f64,
        updates: u64,
    ) -> Result<Self> {
        validate_params(epsilon, alpha)?;
        let m = w.cols();
        let n = w.rows();
        if theta.shape() != (m, m) {
            return Err(Error::dims("forgetting state restore", (n, m), theta.shape()));
        }
        if theta.max_asymmetry() > 1e-8 * theta.max_abs().max(1.0) {
            return Err(Error::InvalidParameter {
                name: "theta".into(),
                message: "stored matrix is not symmetric".into(),
            });
        }
        let mut theta = theta;
        super::symmetrize(&mut theta);
        Ok(DynamicState {
            w,
            theta,
            epsilon,
            alpha,
            denom_offset: (2.0 - alpha) / alpha,
            inv_scale: 1.0 / (2.0 - alpha),
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

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
}

impl OnlineSolver for DynamicState {
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
            self.denom_offset,
            self.inv_scale,
            DenomPolicy::Forgetting,
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

#[cfg(test)]
mod tests {
    use super::*;
    use super::super::OpiumState;

    #[test]
    fn scalar_first_step_matches_hand_computation() {
        // M = N = 1, epsilon = 1, alpha = 1.5: offset = 0.5/1.5 = 1/3,
        // theta_0 = 1. For a = [1], y = [1]: q = 1, denom = 4/3,
        // beta = 0.75, W = 0.75, theta = (1 - 1 * 0.75) / 0.5 = 0.5.
        let mut s = DynamicState::new(1, 1, 1.0, 1.5).unwrap();
        s.update(&[1.0], &[1.0]).unwrap();
        assert!((s.weights().get(0, 0) - 0.75).abs() < 1e-15);
        assert!((s.theta().get(0, 0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn alpha_one_is_bitwise_identical_to_stationary_solver() {
        let mut fading = DynamicState::new(4, 2, 0.5, 1.0).unwrap();
        let mut plain = OpiumState::new(4, 2, 0.5).unwrap();
        let mut x = 0.123_f64;
        for _ in 0..200 {
            let a: Vec<f64> = (0..4)
                .map(|i| {
                    x = (x * 997.0 + i as f64).sin();
                    x
                })
                .collect();
            let y: Vec<f64> = (0..2)
                .map(|i| {
                    x = (x * 131.0 - i as f64).cos();
                    x
                })
                .collect();
            fading.update(&a, &y).unwrap();
            plain.update(&a, &y).unwrap();
            assert_eq!(fading.weights().data(), plain.weights().data());
            assert_eq!(fading.theta().data(), plain.theta().data());
        }
    }

    #[test]
    fn forgetting_tracks_a_target_flip_faster_than_stationary() {
        // Scalar stream: 200 steps of y = 1, then 200 steps of y = -1.
        // The forgetting solver must end much closer to -1.
        let mut fading = DynamicState::new(1, 1, 1.0, 1.05).unwrap();
        let mut plain = OpiumState::new(1, 1, 1.0).unwrap();
        for step in 0..400 {
            let y = if step < 200 { 1.0 } else { -1.0 };
            fading.update(&[1.0], &[y]).unwrap();
            plain.update(&[1.0], &[y]).unwrap();
        }
        let fading_err = (fading.weights().get(0, 0) + 1.0).abs();
        let plain_err = (plain.weights().get(0, 0) + 1.0).abs();
        assert!(fading_err < 0.1, "forgetting solver stuck at error {fading_err}");
        assert!(plain_err > 0.5, "stationary solver adapted unexpectedly fast: {plain_err}");
    }

    #[test]
    fn rejects_alpha_outside_stable_range() {
        assert!(DynamicState::new(2, 1, 1.0, 0.99).is_err());
        assert!(DynamicState::new(2, 1, 1.0, 2.0).is_err());
        assert!(DynamicState::new(2, 1, 1.0, 2.5).is_err());
        assert!(DynamicState::new(2, 1, 1.0, f64::NAN).is_err());
        assert!(DynamicState::new(2, 1, 1.0, 1.0).is_ok());
        assert!(DynamicState::new(2, 1, 1.0, 1.999).is_ok());
    }

    #[test]
    fn theta_rescaling_keeps_gain_bounded_on_repeated_input() {
        // With forgetting, repeatedly feeding the same sample must not
        // drive the gain to zero; the solver keeps adapting.
        let mut s = DynamicState::new(1, 1, 1.0, 1.2).unwrap();
        for _ in 0..500 {
            s.update(&[1.0], &[2.0]).unwrap();
        }
        let theta = s.theta().get(0, 0);
        assert!(theta > 1e-6, "theta collapsed to {theta}");
        assert!((s.weights().get(0, 0) - 2.0).abs() < 1e-9);
    }
}
