//! Self-check battery: randomized verification of the solver identities.
//!
//! Each check draws small random instances from a named seed, measures the
//! worst deviation from the identity it guards, and compares it against a
//! fixed tolerance. The battery is deterministic for a given seed.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{vec_norm, Matrix};
use crate::pinv::{batch_solve, penrose_errors, pinv_auto};
use crate::solvers::{
    psi_crosscheck, DynamicState, GrevilleState, LightState, OnlineSolver, OpiumState, SamplePair,
};

/// Outcome of one named check.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CheckReport {
    pub name: &'static str,
    pub passed: bool,
    /// Largest deviation observed across the check's instances.
    pub worst: f64,
    pub tolerance: f64,
    pub details: String,
    pub millis: f64,
}

/// Results for the whole battery.
#[derive(Clone, Debug)]
pub struct VerifyReport {
    pub seed: u64,
    pub checks: Vec<CheckReport>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    /// First failing check, if any, in replayable form.
    pub fn failing_case(&self) -> Option<FailingCase> {
        self.checks.iter().find(|c| !c.passed).map(|c| FailingCase {
            check: c.name.to_string(),
            seed: self.seed,
        })
    }
}

/// Enough information to rerun a failed check exactly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FailingCase {
    pub check: String,
    pub seed: u64,
}

pub const CHECK_NAMES: [&str; 6] = [
    "penrose-conditions",
    "opium-vs-batch",
    "alpha-one-degeneracy",
    "psi-theta-identity",
    "greville-interpolation",
    "residual-contraction",
];

fn finish(
    name: &'static str,
    worst: f64,
    tolerance: f64,
    details: String,
    start: Instant,
) -> CheckReport {
    CheckReport {
        name,
        passed: worst.is_finite() && worst <= tolerance,
        worst,
        tolerance,
        details,
        millis: start.elapsed().as_secs_f64() * 1e3,
    }
}

fn random_matrix(rng: &mut ChaCha12Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0)).expect("finite entries")
}

fn random_low_rank(rng: &mut ChaCha12Rng, rows: usize, cols: usize, rank: usize) -> Matrix {
    let left = random_matrix(rng, rows, rank);
    let right = random_matrix(rng, rank, cols);
    left.matmul(&right).expect("conforming shapes")
}

fn check_penrose(seed: u64, quick: bool) -> CheckReport {
    let start = Instant::now();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let instances = if quick { 12 } else { 48 };
    let mut worst = 0.0f64;
    for i in 0..instances {
        let rows = rng.gen_range(1..=30);
        let cols = rng.gen_range(1..=30);
        let a = if i % 3 == 0 && rows.min(cols) > 2 {
            let rank = rng.gen_range(1..rows.min(cols));
            random_low_rank(&mut rng, rows, cols, rank)
        } else {
            random_matrix(&mut rng, rows, cols)
        };
        match pinv_auto(&a).and_then(|x| penrose_errors(&a, &x)) {
            Ok(errors) => {
                for e in errors {
                    worst = worst.max(e);
                }
            }
            Err(_) => {
                worst = f64::INFINITY;
                break;
            }
        }
    }
    finish(
        "penrose-conditions",
        worst,
        1e-9,
        format!("{instances} random matrices up to 30x30, a third rank-deficient"),
        start,
    )
}

fn random_stream(
    rng: &mut ChaCha12Rng,
    hidden_dim: usize,
    output_dim: usize,
    steps: usize,
) -> Vec<SamplePair> {
    (0..steps)
        .map(|_| {
            SamplePair::new(
                (0..hidden_dim).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                (0..output_dim).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            )
        })
        .collect()
}

fn stream_matrices(stream: &[SamplePair], m: usize, n: usize) -> (Matrix, Matrix) {
    let mut a = Matrix::zeros(m, stream.len());
    let mut y = Matrix::zeros(n, stream.len());
    for (j, pair) in stream.iter().enumerate() {
        a.set_col(j, &pair.activation);
        y.set_col(j, &pair.target);
    }
    (a, y)
}

fn check_opium_vs_batch(seed: u64, quick: bool) -> CheckReport {
    let start = Instant::now();
    let mut rng = ChaCha12Rng::seed_from_u64(seed.wrapping_add(1));
    let (m, n) = (15, 2);
    let steps = if quick { 60 } else { 200 };
    let rounds = if quick { 2 } else { 4 };
    let epsilon = 1e-3;
    let mut worst = 0.0f64;
    for _ in 0..rounds {
        let stream = random_stream(&mut rng, m, n, steps);
        let result = (|| -> Result<f64> {
            let mut solver = OpiumState::new(m, n, epsilon)?;
            for pair in &stream {
                solver.update(&pair.activation, &pair.target)?;
            }
            let (a, y) = stream_matrices(&stream, m, n);
            let aug_a = Matrix::scaled_identity(m, epsilon).hstack(&a)?;
            let aug_y = Matrix::zeros(n, m).hstack(&y)?;
            let w_batch = batch_solve(&aug_a, &aug_y)?;
            solver.weights().rel_frobenius_diff(&w_batch)
        })();
        match result {
            Ok(diff) => worst = worst.max(diff),
            Err(_) => {
                worst = f64::INFINITY;
                break;
            }
        }
    }
    finish(
        "opium-vs-batch",
        worst,
        1e-8,
        format!("{rounds} streams of {steps} samples, M={m}, N={n}, eps={epsilon}"),
        start,
    )
}

fn check_alpha_one_degeneracy(seed: u64, quick: bool) -> CheckReport {
    let start = Instant::now();
    let mut rng = ChaCha12Rng::seed_from_u64(seed.wrapping_add(2));
    let (m, n) = (12, 2);
    let steps = if quick { 300 } else { 2000 };
    let epsilon = 0.5;
    let mut worst = 0.0f64;
    let result = (|| -> Result<()> {
        let mut plain = OpiumState::new(m, n, epsilon)?;
        let mut fading = DynamicState::new(m, n, epsilon, 1.0)?;
        for pair in random_stream(&mut rng, m, n, steps) {
            plain.update(&pair.activation, &pair.target)?;
            fading.update(&pair.activation, &pair.target)?;
            let dw = plain
                .weights()
                .sub(fading.weights())?
                .max_abs();
            let dt = plain.theta().sub(fading.theta())?.max_abs();
            worst = worst.max(dw).max(dt);
        }
        Ok(())
    })();
    if result.is_err() {
        worst = f64::INFINITY;
    }
    finish(
        "alpha-one-degeneracy",
        worst,
        1e-12,
        format!("{steps} shared updates, W and theta compared each step"),
        start,
    )
}

fn check_psi_theta(seed: u64, quick: bool) -> CheckReport {
    let start = Instant::now();
    let rounds = if quick { 4 } else { 10 };
    let mut worst = 0.0f64;
    for r in 0..rounds {
        let mut rng = ChaCha12Rng::seed_from_u64(seed.wrapping_add(100 + r));
        let stream = random_stream(&mut rng, 10, 3, 100);
        match psi_crosscheck(&stream, 1e-2) {
            Ok(report) => worst = worst.max(report.max_rel_discrepancy),
            Err(_) => {
                worst = f64::INFINITY;
                break;
            }
        }
    }
    finish(
        "psi-theta-identity",
        worst,
        1e-8,
        format!("{rounds} streams, M=10, k=100, factored weights vs recursive"),
        start,
    )
}

fn check_greville_interpolation(seed: u64, quick: bool) -> CheckReport {
    let start = Instant::now();
    let mut rng = ChaCha12Rng::seed_from_u64(seed.wrapping_add(3));
    let (m, n) = (20, 2);
    let k = if quick { 8 } else { 14 };
    let rounds = if quick { 2 } else { 3 };
    let mut worst = 0.0f64;
    for _ in 0..rounds {
        let stream = random_stream(&mut rng, m, n, k);
        let result = (|| -> Result<()> {
            let mut solver = GrevilleState::new(m, n, 1e-9)?;
            for (j, pair) in stream.iter().enumerate() {
                solver.update(&pair.activation, &pair.target)?;
                let (a, y) = stream_matrices(&stream[..=j], m, n);
                let fit = solver.weights().matmul(&a)?;
                let num = fit.sub(&y)?.frobenius_norm();
                let den = y.frobenius_norm().max(f64::MIN_POSITIVE);
                worst = worst.max(num / den);
            }
            Ok(())
        })();
        if result.is_err() {
            worst = f64::INFINITY;
            break;
        }
    }
    finish(
        "greville-interpolation",
        worst,
        1e-8,
        format!("{rounds} streams of {k} independent columns, M={m}, exact fit each step"),
        start,
    )
}

fn check_residual_contraction(seed: u64, quick: bool) -> CheckReport {
    let start = Instant::now();
    let mut rng = ChaCha12Rng::seed_from_u64(seed.wrapping_add(4));
    let cases = if quick { 60 } else { 240 };
    let mut worst = f64::NEG_INFINITY;
    let result = (|| -> Result<()> {
        for i in 0..cases {
            let m = rng.gen_range(2..=12);
            let n = rng.gen_range(1..=4);
            let warm = rng.gen_range(0..8);
            let mut solver: Box<dyn OnlineSolver> = match i % 3 {
                0 => Box::new(OpiumState::new(m, n, rng.gen_range(0.01..2.0))?),
                1 => Box::new(LightState::new(m, n, rng.gen_range(0.1..4.0))?),
                _ => Box::new(DynamicState::new(
                    m,
                    n,
                    rng.gen_range(0.01..2.0),
                    rng.gen_range(1.0..1.9),
                )?),
            };
            for pair in random_stream(&mut rng, m, n, warm) {
                solver.update(&pair.activation, &pair.target)?;
            }
            let a: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let y: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let before = residual(solver.as_ref(), &a, &y)?;
            solver.update(&a, &y)?;
            let after = residual(solver.as_ref(), &a, &y)?;
            worst = worst.max(after - before);
        }
        Ok(())
    })();
    if result.is_err() {
        worst = f64::INFINITY;
    }
    finish(
        "residual-contraction",
        worst,
        1e-12,
        format!("{cases} single updates across the three online solvers"),
        start,
    )
}

fn residual(solver: &dyn OnlineSolver, a: &[f64], y: &[f64]) -> Result<f64> {
    let p = solver.predict(a)?;
    let diff: Vec<f64> = y.iter().zip(&p).map(|(t, v)| t - v).collect();
    Ok(vec_norm(&diff))
}

fn run_check(name: &str, seed: u64, quick: bool) -> Result<CheckReport> {
    match name {
        "penrose-conditions" => Ok(check_penrose(seed, quick)),
        "opium-vs-batch" => Ok(check_opium_vs_batch(seed, quick)),
        "alpha-one-degeneracy" => Ok(check_alpha_one_degeneracy(seed, quick)),
        "psi-theta-identity" => Ok(check_psi_theta(seed, quick)),
        "greville-interpolation" => Ok(check_greville_interpolation(seed, quick)),
        "residual-contraction" => Ok(check_residual_contraction(seed, quick)),
        other => Err(Error::InvalidParameter {
            name: "check",
            message: format!("unknown check {other:?}, expected one of {CHECK_NAMES:?}"),
        }),
    }
}

/// Runs every check against the given seed.
pub fn run_battery(seed: u64, quick: bool) -> VerifyReport {
    let checks = CHECK_NAMES
        .iter()
        .map(|name| run_check(name, seed, quick).expect("known name"))
        .collect();
    VerifyReport { seed, checks }
}

/// Reruns one named check, used to replay a serialized failing case.
pub fn replay_case(case: &FailingCase) -> Result<CheckReport> {
    run_check(&case.check, case.seed, false)
}
