//! Scalar time series sources: CSV files and a synthetic heartbeat signal.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};

/// Loads a series stored as one numeric value per line.
///
/// A single non-numeric first line is treated as a header and skipped.
/// Any later non-numeric line is an error naming its 1-based line number.
/// Blank lines are ignored.
pub fn load_csv_series(path: &Path) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut values = Vec::new();
    let mut first_content_line: Option<u64> = None;
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx as u64 + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        match trimmed.parse::<f64>() {
            Ok(v) if v.is_finite() => {
                if first_content_line.is_none() {
                    first_content_line = Some(line_no);
                }
                values.push(v);
            }
            Ok(_) => {
                return Err(Error::Parse {
                    path: path.display().to_string(),
                    unit: "line",
                    position: line_no,
                    message: format!("non-finite value {trimmed:?}"),
                });
            }
            Err(_) => {
                if first_content_line.is_none() && values.is_empty() {
                    first_content_line = Some(line_no);
                    continue;
                }
                return Err(Error::Parse {
                    path: path.display().to_string(),
                    unit: "line",
                    position: line_no,
                    message: format!("expected a number, found {trimmed:?}"),
                });
            }
        }
    }
    if values.is_empty() {
        return Err(Error::Parse {
            path: path.display().to_string(),
            unit: "line",
            position: first_content_line.unwrap_or(1),
            message: "no numeric values in file".into(),
        });
    }
    Ok(values)
}

struct Bump {
    center: f64,
    width: f64,
    amplitude: f64,
}

const BEAT_SHAPE: [Bump; 5] = [
    Bump { center: 0.18, width: 0.025, amplitude: 0.12 },
    Bump { center: 0.355, width: 0.008, amplitude: -0.14 },
    Bump { center: 0.38, width: 0.010, amplitude: 1.0 },
    Bump { center: 0.405, width: 0.008, amplitude: -0.22 },
    Bump { center: 0.62, width: 0.045, amplitude: 0.28 },
];

/// Deterministic heartbeat-like waveform for demos and tests.
///
/// Each beat is a sum of Gaussian bumps with small seeded jitter in length
/// and amplitude, plus slow baseline wander and measurement noise.
pub fn synthetic_ecg(num_beats: usize, samples_per_beat: usize, seed: u64) -> Result<Vec<f64>> {
    if num_beats == 0 || samples_per_beat < 8 {
        return Err(Error::InvalidParameter {
            name: "shape",
            message: format!(
                "need at least 1 beat of 8+ samples, got {num_beats} beats of {samples_per_beat}"
            ),
        });
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut series = Vec::with_capacity(num_beats * samples_per_beat);
    let mut phase_offset = 0.0f64;
    for _ in 0..num_beats {
        let len_jitter: f64 = rng.gen_range(-0.07..0.07);
        let amp_jitter: f64 = rng.gen_range(-0.08..0.08);
        let beat_len = ((samples_per_beat as f64) * (1.0 + len_jitter)).round().max(8.0) as usize;
        for i in 0..beat_len {
            let t = i as f64 / beat_len as f64;
            let mut v = 0.0;
            for bump in &BEAT_SHAPE {
                let z = (t - bump.center) / bump.width;
                v += bump.amplitude * (-0.5 * z * z).exp();
            }
            v *= 1.0 + amp_jitter;
            let wander = 0.02 * (2.0 * PI * (phase_offset + t) / 11.0).sin();
            let noise: f64 = rng.gen_range(-0.004..0.004);
            series.push(v + wander + noise);
        }
        phase_offset += 1.0;
    }
    Ok(series)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write as _;

    fn write_tmp(contents: &str) -> (tempfile::TempDir, std::path::PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("series.csv");
        let mut f = fs::File::create(&path).unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        (dir, path)
    }

    #[test]
    fn plain_values_load_in_order() {
        let (_dir, path) = write_tmp("1.0\n2.0\n3.0\n");
        assert_eq!(load_csv_series(&path).unwrap(), vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn single_header_line_is_skipped() {
        let (_dir, path) = write_tmp("value\n0.5\n-0.25\n");
        assert_eq!(load_csv_series(&path).unwrap(), vec![0.5, -0.25]);
    }

    #[test]
    fn non_numeric_body_line_names_its_line_number() {
        let (_dir, path) = write_tmp("1.0\n2.0\noops\n4.0\n");
        let err = load_csv_series(&path).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 3"), "message: {msg}");
        assert!(msg.contains("oops"), "message: {msg}");
    }

    #[test]
    fn blank_lines_are_ignored() {
        let (_dir, path) = write_tmp("\n1.0\n\n2.0\n\n");
        assert_eq!(load_csv_series(&path).unwrap(), vec![1.0, 2.0]);
    }

    #[test]
    fn empty_and_header_only_files_are_rejected() {
        let (_dir, path) = write_tmp("");
        assert!(load_csv_series(&path).is_err());
        let (_dir2, path2) = write_tmp("value\n");
        let err = load_csv_series(&path2).unwrap_err();
        assert!(err.to_string().contains("no numeric values"));
    }

    #[test]
    fn non_finite_values_are_rejected() {
        let (_dir, path) = write_tmp("1.0\nNaN\n");
        let err = load_csv_series(&path).unwrap_err();
        assert!(err.to_string().contains("non-finite"));
    }

    #[test]
    fn ecg_is_deterministic_and_peaks_near_one() {
        let a = synthetic_ecg(6, 120, 9).unwrap();
        let b = synthetic_ecg(6, 120, 9).unwrap();
        assert_eq!(a, b);
        let c = synthetic_ecg(6, 120, 10).unwrap();
        assert_ne!(a, c);
        let peak = a.iter().cloned().fold(f64::MIN, f64::max);
        assert!(peak > 0.7 && peak < 1.3, "peak {peak}");
        assert!(a.len() >= 6 * 100);
        assert!(a.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn ecg_rejects_degenerate_shapes() {
        assert!(synthetic_ecg(0, 100, 1).is_err());
        assert!(synthetic_ecg(3, 4, 1).is_err());
    }
}
