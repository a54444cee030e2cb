//! Streaming task builders: input/target pairs drawn from signals.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One streaming step: a raw input vector and its target vector.
#[derive(Clone, Debug, PartialEq)]
pub struct TaskItem {
    pub input: Vec<f64>,
    pub target: Vec<f64>,
}

/// One-step-ahead sine prediction with a mid-run frequency switch.
///
/// The input at step t holds delayed samples of the signal itself, taken
/// at t - stride*dt, t - 2*stride*dt, ... The target is the current sample.
/// The signal runs at `f1` for `duration_each` seconds, then at `f2` for
/// the same span.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SineTaskConfig {
    /// Sample interval in seconds.
    pub dt: f64,
    /// Frequency of the first half, Hz.
    pub f1: f64,
    /// Frequency of the second half, Hz.
    pub f2: f64,
    /// Length of each half in seconds.
    pub duration_each: f64,
    /// Number of delayed samples in the input.
    pub num_taps: usize,
    /// Spacing between taps, in samples.
    pub tap_stride: usize,
}

impl Default for SineTaskConfig {
    fn default() -> Self {
        SineTaskConfig {
            dt: 1e-3,
            f1: 10.0,
            f2: 20.0,
            duration_each: 0.5,
            num_taps: 10,
            tap_stride: 10,
        }
    }
}

impl SineTaskConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::InvalidParameter {
                name: "dt",
                message: format!("sample interval must be positive, got {}", self.dt),
            });
        }
        for (name, v) in [("f1", self.f1), ("f2", self.f2), ("duration_each", self.duration_each)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter {
                    name,
                    message: format!("must be positive, got {v}"),
                });
            }
        }
        if self.num_taps == 0 {
            return Err(Error::InvalidParameter {
                name: "num_taps",
                message: "need at least one tap".into(),
            });
        }
        if self.tap_stride == 0 {
            return Err(Error::InvalidParameter {
                name: "tap_stride",
                message: "stride must be at least 1 sample".into(),
            });
        }
        Ok(())
    }

    /// Total number of streamed steps (both halves).
    pub fn total_steps(&self) -> usize {
        ((2.0 * self.duration_each / self.dt).round() as usize).max(1)
    }

    /// Step index at which the frequency switches.
    pub fn switch_step(&self) -> usize {
        (self.duration_each / self.dt).round() as usize
    }
}

/// Builds the sine-switch stream as a lazy iterator.
///
/// History before t = 0 is taken as zero, so early inputs are zero-padded.
pub fn make_sine_task(cfg: &SineTaskConfig) -> Result<impl Iterator<Item = TaskItem>> {
    cfg.validate()?;
    let cfg = cfg.clone();
    let total = cfg.total_steps();
    let switch = cfg.switch_step();
    let sample = move |idx: i64| -> f64 {
        if idx < 0 {
            return 0.0;
        }
        let f = if (idx as usize) < switch { cfg.f1 } else { cfg.f2 };
        (2.0 * PI * f * idx as f64 * cfg.dt).sin()
    };
    let num_taps = cfg.num_taps;
    let stride = cfg.tap_stride as i64;
    Ok((0..total).map(move |t| {
        let t = t as i64;
        let input: Vec<f64> = (1..=num_taps as i64).map(|j| sample(t - j * stride)).collect();
        TaskItem {
            input,
            target: vec![sample(t)],
        }
    }))
}

/// One-step-ahead prediction over a recorded series.
///
/// The stream starts at t = num_taps so every input is fully backed by
/// real history; nothing is padded. The input at t is
/// [series[t-1], ..., series[t-num_taps]] and the target is series[t].
pub fn make_series_task(series: &[f64], num_taps: usize) -> Result<impl Iterator<Item = TaskItem> + '_> {
    if num_taps == 0 {
        return Err(Error::InvalidParameter {
            name: "num_taps",
            message: "need at least one tap".into(),
        });
    }
    if series.len() <= num_taps {
        return Err(Error::InvalidParameter {
            name: "series",
            message: format!(
                "series of length {} cannot feed {} taps plus a target",
                series.len(),
                num_taps
            ),
        });
    }
    Ok((num_taps..series.len()).map(move |t| {
        let input: Vec<f64> = (1..=num_taps).map(|j| series[t - j]).collect();
        TaskItem {
            input,
            target: vec![series[t]],
        }
    }))
}
