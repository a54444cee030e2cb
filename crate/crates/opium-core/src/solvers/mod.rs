//! Online least-squares readout solvers.
//!
//! All solvers share the same outer contract: feed (activation, target)
//! pairs one at a time, read the current weight matrix at any point. They
//! differ in what auxiliary state they carry and in which objective the
//! weights track (exact pseudoinverse, regularised pseudoinverse, or an
//! exponentially weighted one).

mod dynamic;
mod greville;
mod light;
mod opium;
mod psi;

pub use dynamic::DynamicState;
pub use greville::GrevilleState;
pub use light::LightState;
pub use opium::OpiumState;
pub use psi::{psi_crosscheck, PsiReport};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// One training sample: hidden activation vector plus desired output.
#[derive(Clone, Debug, PartialEq)]
pub struct SamplePair {
    pub activation: Vec<f64>,
    pub target: Vec<f64>,
}

impl SamplePair {
    pub fn new(activation: Vec<f64>, target: Vec<f64>) -> Self {
        SamplePair { activation, target }
    }
}

/// Common interface of the streaming solvers.
pub trait OnlineSolver {
    /// Length M of the activation vectors this solver accepts.
    fn hidden_dim(&self) -> usize;

    /// Length N of the target vectors.
    fn output_dim(&self) -> usize;

    /// Current readout weights, N x M.
    fn weights(&self) -> &Matrix;

    /// Number of samples absorbed so far.
    fn updates(&self) -> u64;

    /// Absorb one sample. On error the state is left untouched.
    fn update(&mut self, activation: &[f64], target: &[f64]) -> Result<()>;

    /// Output for one activation vector under the current weights.
    fn predict(&self, activation: &[f64]) -> Result<Vec<f64>> {
        self.weights().mul_vec(activation)
    }

    /// Bytes of heap the solver state occupies, scratch included.
    fn state_heap_bytes(&self) -> usize;
}

pub(crate) fn validate_dims(m: usize, n: usize) -> Result<()> {
    if m == 0 {
        return Err(Error::InvalidParameter {
            name: "hidden_dim".into(),
            message: "must be at least 1".into(),
        });
    }
    if n == 0 {
        return Err(Error::InvalidParameter {
            name: "output_dim".into(),
            message: "must be at least 1".into(),
        });
    }
    Ok(())
}

/// Length and finiteness checks, done before any state is touched.
pub(crate) fn validate_sample(m: usize, n: usize, a: &[f64], y: &[f64]) -> Result<()> {
    if a.len() != m || y.len() != n {
        return Err(Error::DimensionMismatch {
            op: "solver update".into(),
            left_rows: m,
            left_cols: n,
            right_rows: a.len(),
            right_cols: y.len(),
        });
    }
    if a.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite {
            context: "activation vector".into(),
        });
    }
    if y.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite {
            context: "target vector".into(),
        });
    }
    Ok(())
}

/// Computes v = theta a into `v` and returns q = a^T v.
pub(crate) fn theta_times(theta: &Matrix, a: &[f64], v: &mut Vec<f64>) -> f64 {
    let m = theta.rows();
    v.clear();
    v.resize(m, 0.0);
    for i in 0..m {
        v[i] = crate::matrix::dot(theta.row(i), a);
    }
    crate::matrix::dot(v, a)
}

/// Fills `beta = v / denom` and rejects non-finite gains.
pub(crate) fn scale_gain(v: &[f64], denom: f64, beta: &mut Vec<f64>) -> Result<()> {
    beta.clear();
    beta.extend(v.iter().map(|x| x / denom));
    if beta.iter().any(|x| !x.is_finite()) {
        return Err(Error::NumericDegeneracy {
            context: "gain vector".into(),
            message: "became non-finite".into(),
        });
    }
    Ok(())
}

/// theta <- (theta - v beta^T) * inv_scale, then exact resymmetrisation.
///
/// The rank-one downdate is symmetric in exact arithmetic; averaging the
/// mirrored entries removes the rounding skew instead of letting it
/// accumulate over many updates. `inv_scale` of exactly 1.0 leaves every
/// entry bit-identical to the unscaled result.
pub(crate) fn downdate_scale_symmetrize(theta: &mut Matrix, v: &[f64], beta: &[f64], inv_scale: f64) {
    let m = theta.rows();
    for i in 0..m {
        let vi = v[i];
        let row = theta.row_mut(i);
        for j in 0..m {
            row[j] = (row[j] - vi * beta[j]) * inv_scale;
        }
    }
    symmetrize(theta);
}

pub(crate) fn symmetrize(theta: &mut Matrix) {
    let m = theta.rows();
    for i in 0..m {
        for j in (i + 1)..m {
            let avg = 0.5 * (theta.get(i, j) + theta.get(j, i));
            theta.set(i, j, avg);
            theta.set(j, i, avg);
        }
    }
}

/// w <- w + (y - w a) beta^T.
pub(crate) fn apply_readout_update(
    w: &mut Matrix,
    a: &[f64],
    y: &[f64],
    beta: &[f64],
    residual: &mut Vec<f64>,
) {
    let n = w.rows();
    residual.clear();
    residual.resize(n, 0.0);
    for i in 0..n {
        residual[i] = y[i] - crate::matrix::dot(w.row(i), a);
    }
    for i in 0..n {
        let ri = residual[i];
        if ri == 0.0 {
            continue;
        }
        let row = w.row_mut(i);
        for j in 0..row.len() {
            row[j] += ri * beta[j];
        }
    }
}

/// Which error a collapsed gain denominator maps to.
#[derive(Clone, Copy)]
pub(crate) enum DenomPolicy {
    /// Offset 1 keeps the denominator >= 1 while theta is PSD, so anything
    /// non-positive means the state is corrupted.
    Stationary,
    /// The forgetting offset can be small, so underflow is a legitimate
    /// numeric failure rather than corruption.
    Forgetting,
}

/// The shared gain/downdate/readout step used by the stationary and the
/// forgetting solver. Both call this exact routine; with `denom_offset` and
/// `inv_scale` both 1.0 the arithmetic reduces bit-for-bit to the
/// stationary update.
#[allow(clippy::too_many_arguments)]
pub(crate) fn theta_gain_step(
    w: &mut Matrix,
    theta: &mut Matrix,
    a: &[f64],
    y: &[f64],
    denom_offset: f64,
    inv_scale: f64,
    policy: DenomPolicy,
    v: &mut Vec<f64>,
    beta: &mut Vec<f64>,
    residual: &mut Vec<f64>,
) -> Result<()> {
    let q = theta_times(theta, a, v);
    let denom = denom_offset + q;
    match policy {
        DenomPolicy::Stationary => {
            if !(denom > 0.0) {
                return Err(Error::InternalConsistency {
                    context: "stationary gain denominator".into(),
                    message: format!(
                        "1 + a^T theta a = {denom}; impossible while theta is positive semidefinite"
                    ),
                });
            }
        }
        DenomPolicy::Forgetting => {
            if !(denom > 1e-300) {
                return Err(Error::NumericDegeneracy {
                    context: "forgetting gain denominator".into(),
                    message: format!(
                        "(2-alpha)/alpha + a^T theta a = {denom} is not positive; \
                         theta has likely wound up in directions the stream never excites"
                    ),
                });
            }
        }
    }
    scale_gain(v, denom, beta)?;
    downdate_scale_symmetrize(theta, v, beta, inv_scale);
    apply_readout_update(w, a, y, beta, residual);
    Ok(())
}

pub(crate) fn vec_heap_bytes(v: &Vec<f64>) -> usize {
    v.capacity() * std::mem::size_of::<f64>()
}
