//! Error metrics over prediction streams.

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Root mean square of the last `last_n` entries.
pub fn rms_error(errors: &[f64], last_n: usize) -> Result<f64> {
    if last_n == 0 {
        return Err(Error::InvalidParameter {
            name: "last_n",
            message: "window must cover at least one sample".into(),
        });
    }
    if errors.len() < last_n {
        return Err(Error::InvalidParameter {
            name: "last_n",
            message: format!("window of {last_n} exceeds {} recorded errors", errors.len()),
        });
    }
    let tail = &errors[errors.len() - last_n..];
    let mean_sq: f64 = tail.iter().map(|e| e * e).sum::<f64>() / last_n as f64;
    Ok(mean_sq.sqrt())
}

/// Index of the largest entry, lowest index winning ties.
pub(crate) fn argmax_lowest(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Fraction of columns whose argmax row disagrees with the label.
pub fn classification_error(scores: &Matrix, labels: &[usize]) -> Result<f64> {
    if scores.cols() != labels.len() {
        return Err(Error::dims(
            "classification_error",
            (scores.rows(), scores.cols()),
            (scores.rows(), labels.len()),
        ));
    }
    if labels.is_empty() {
        return Err(Error::InvalidParameter {
            name: "labels",
            message: "need at least one sample".into(),
        });
    }
    let mut wrong = 0usize;
    let mut column = vec![0.0; scores.rows()];
    for (j, &label) in labels.iter().enumerate() {
        for i in 0..scores.rows() {
            column[i] = scores.get(i, j);
        }
        if argmax_lowest(&column) != label {
            wrong += 1;
        }
    }
    Ok(wrong as f64 / labels.len() as f64)
}
