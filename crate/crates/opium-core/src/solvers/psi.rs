//! Factored-form cross-check for the regularised streaming solver.
//!
//! The weights admit the factorisation W_k = psi_k theta_k with
//! psi_k = sum_j y_j a_j^T, because the virtual initial block contributes
//! zero targets. Running both representations side by side and comparing
//! them is a cheap end-to-end probe of the recursion: a bug in either the
//! gain or the downdate breaks the identity immediately.

use crate::error::{Error, Result};
use crate::matrix::Matrix;

use super::{OnlineSolver, OpiumState, SamplePair};

/// Outcome of a factored-form consistency run.
#[derive(Clone, Copy, Debug)]
pub struct PsiReport {
    pub steps: u64,
    /// Largest relative Frobenius gap between W_k and psi_k theta_k over
    /// the run.
    pub max_rel_discrepancy: f64,
}

/// Runs the regularised solver over `stream` while accumulating psi, and
/// reports the worst disagreement between the recursive weights and the
/// product psi theta. Intended for verification, not production: each step
/// costs an extra O(N M^2) for the product.
pub fn psi_crosscheck(stream: &[SamplePair], epsilon: f64) -> Result<PsiReport> {
    let first = stream.first().ok_or_else(|| Error::InvalidParameter {
        name: "stream".into(),
        message: "must contain at least one sample".into(),
    })?;
    let m = first.activation.len();
    let n = first.target.len();
    let mut solver = OpiumState::new(m, n, epsilon)?;
    let mut psi = Matrix::zeros(n, m);
    let mut worst = 0.0_f64;
    for pair in stream {
        solver.update(&pair.activation, &pair.target)?;
        for i in 0..n {
            let yi = pair.target[i];
            let row = psi.row_mut(i);
            for j in 0..m {
                row[j] += yi * pair.activation[j];
            }
        }
        let product = psi.matmul(solver.theta())?;
        let gap = product.rel_frobenius_diff(solver.weights())?;
        worst = worst.max(gap);
    }
    Ok(PsiReport {
        steps: solver.updates(),
        max_rel_discrepancy: worst,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn random_stream(m: usize, n: usize, k: usize, seed: u64) -> Vec<SamplePair> {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        (0..k)
            .map(|_| {
                SamplePair::new(
                    (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                )
            })
            .collect()
    }

    #[test]
    fn factored_form_tracks_recursive_weights() {
        let stream = random_stream(10, 2, 100, 41);
        let report = psi_crosscheck(&stream, 1e-3).unwrap();
        assert_eq!(report.steps, 100);
        assert!(
            report.max_rel_discrepancy < 1e-8,
            "worst gap {}",
            report.max_rel_discrepancy
        );
    }

    #[test]
    fn holds_for_moderate_epsilon_too() {
        let stream = random_stream(6, 1, 50, 43);
        let report = psi_crosscheck(&stream, 0.3).unwrap();
        assert!(
            report.max_rel_discrepancy < 1e-10,
            "worst gap {}",
            report.max_rel_discrepancy
        );
    }

    #[test]
    fn empty_stream_is_rejected() {
        assert!(psi_crosscheck(&[], 1e-3).is_err());
    }
}
