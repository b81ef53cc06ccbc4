//! Deterministic synthetic fixtures: fundus-like color images with a
//! vignetted disc, a tinted illumination gradient, curved vessel strokes,
//! and a few bright blobs, plus the matching binary vessel labels.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::image::{Field, Image};
use crate::io::LabelMap;

#[derive(Debug, Clone)]
pub struct Fixture {
    pub image: Image,
    pub labels: LabelMap,
}

pub fn fixture(seed: u64, height: usize, width: usize, channels: usize) -> Fixture {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (hf, wf) = (height as f64, width as f64);
    let scale = hf.min(wf);

    let tint: Vec<f64> = (0..channels).map(|_| rng.random_range(0.35..0.85)).collect();
    let grad_angle: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let (gx, gy) = (grad_angle.cos(), grad_angle.sin());
    let disc_r = scale * rng.random_range(0.40..0.48);
    let (cx, cy) = (
        wf / 2.0 + rng.random_range(-0.05..0.05) * wf,
        hf / 2.0 + rng.random_range(-0.05..0.05) * hf,
    );

    // Vessels: sinusoidal strokes radiating from an off-center point.
    let (ox, oy) = (
        cx + rng.random_range(-0.2..0.2) * disc_r,
        cy + rng.random_range(-0.2..0.2) * disc_r,
    );
    let vessels: Vec<(f64, f64, f64, f64)> = (0..rng.random_range(5..9))
        .map(|_| {
            (
                rng.random_range(0.0..std::f64::consts::TAU),
                rng.random_range(0.05..0.25),
                rng.random_range(2.0..6.0),
                scale * rng.random_range(0.006..0.014),
            )
        })
        .collect();
    let blobs: Vec<(f64, f64, f64)> = (0..rng.random_range(2..5))
        .map(|_| {
            (
                cx + rng.random_range(-0.6..0.6) * disc_r,
                cy + rng.random_range(-0.6..0.6) * disc_r,
                scale * rng.random_range(0.02..0.06),
            )
        })
        .collect();

    let mut vessel_mask = vec![false; height * width];
    let mut vessel_weight = vec![0.0; height * width];
    for row in 0..height {
        for col in 0..width {
            let (x, y) = (col as f64 - ox, row as f64 - oy);
            let rho = (x * x + y * y).sqrt();
            let theta = y.atan2(x);
            let mut best = 0.0f64;
            for &(base, amp, freq, thick) in &vessels {
                let path = base + amp * (freq * rho / scale).sin();
                let mut dt = (theta - path).rem_euclid(std::f64::consts::TAU);
                if dt > std::f64::consts::PI {
                    dt -= std::f64::consts::TAU;
                }
                let dist = (dt * rho).abs();
                let w = (1.0 - dist / thick).max(0.0);
                best = best.max(w);
            }
            let idx = row * width + col;
            vessel_weight[idx] = best;
            let in_disc = ((col as f64 - cx).powi(2) + (row as f64 - cy).powi(2)).sqrt() < disc_r;
            vessel_mask[idx] = best > 0.35 && in_disc;
        }
    }

    let noise_amp = 0.03;
    let data = Field::from_fn(height, width, channels, |c, row, col| {
        let (x, y) = (col as f64, row as f64);
        let r = ((x - cx).powi(2) + (y - cy).powi(2)).sqrt();
        let vignette = (1.0 - (r / disc_r).powi(4)).max(0.0);
        let gradient = 0.75 + 0.25 * ((x / wf - 0.5) * gx + (y / hf - 0.5) * gy);
        let mut v = tint[c] * vignette * gradient;
        for &(bx, by, br) in &blobs {
            let d2 = (x - bx).powi(2) + (y - by).powi(2);
            v += 0.25 * vignette * (-d2 / (2.0 * br * br)).exp();
        }
        let idx = row * width + col;
        v *= 1.0 - 0.55 * vessel_weight[idx];
        v
    });
    let mut field = data;
    for v in field.data_mut() {
        *v = (*v + noise_amp * (rng.random::<f64>() - 0.5)).clamp(0.0, 1.0);
    }

    Fixture {
        image: Image::try_from(field).expect("fixture values are clamped"),
        labels: LabelMap {
            height,
            width,
            values: vessel_mask.into_iter().map(u16::from).collect(),
        },
    }
}
