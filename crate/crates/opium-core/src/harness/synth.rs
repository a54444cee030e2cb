//! Seeded synthetic digit-style dataset in raw image form.
//!
//! Ten classes, each a fixed arrangement of Gaussian blobs, rendered at
//! 28x28 with per-sample shift, scale, and noise. Useful wherever a small
//! labeled image set is needed without shipping real data.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

pub const SYNTH_SIDE: usize = 28;
pub const SYNTH_CLASSES: usize = 10;

struct Blob {
    row: f64,
    col: f64,
    sigma: f64,
    amplitude: f64,
}

fn class_template(class: usize) -> Vec<Blob> {
    // Blob layout depends only on the class id, so templates are stable.
    let mut rng = ChaCha12Rng::seed_from_u64(0x5EED_0000 + class as u64);
    (0..4)
        .map(|_| Blob {
            row: rng.gen_range(6.0..22.0),
            col: rng.gen_range(6.0..22.0),
            sigma: rng.gen_range(1.8..3.5),
            amplitude: rng.gen_range(0.6..1.0),
        })
        .collect()
}

fn render(template: &[Blob], shift_r: f64, shift_c: f64, scale: f64, rng: &mut ChaCha12Rng) -> Vec<u8> {
    let mut pixels = vec![0u8; SYNTH_SIDE * SYNTH_SIDE];
    for r in 0..SYNTH_SIDE {
        for c in 0..SYNTH_SIDE {
            let mut v = 0.0f64;
            for blob in template {
                let dr = r as f64 - (blob.row + shift_r);
                let dc = c as f64 - (blob.col + shift_c);
                let d2 = (dr * dr + dc * dc) / (blob.sigma * blob.sigma);
                v += scale * blob.amplitude * (-0.5 * d2).exp();
            }
            v += rng.gen_range(0.0..0.12);
            pixels[r * SYNTH_SIDE + c] = (v.clamp(0.0, 1.0) * 255.0).round() as u8;
        }
    }
    pixels
}

/// Generates `count` images with labels cycling through the ten classes.
///
/// The same seed always produces the same bytes.
pub fn synthetic_digits(count: usize, seed: u64) -> (Vec<Vec<u8>>, Vec<u8>) {
    let templates: Vec<Vec<Blob>> = (0..SYNTH_CLASSES).map(class_template).collect();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut images = Vec::with_capacity(count);
    let mut labels = Vec::with_capacity(count);
    for i in 0..count {
        let class = i % SYNTH_CLASSES;
        let shift_r = rng.gen_range(-2.0..2.0);
        let shift_c = rng.gen_range(-2.0..2.0);
        let scale = rng.gen_range(0.75..1.0);
        images.push(render(&templates[class], shift_r, shift_c, scale, &mut rng));
        labels.push(class as u8);
    }
    (images, labels)
}
