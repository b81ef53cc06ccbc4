//! Brute-force reference implementations, independent of the library's fast
//! paths, plus small fixture helpers.
#![allow(dead_code)]

use std::f64::consts::PI;

use freqaug::{Field, Image};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex64;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_field(seed: u64, h: usize, w: usize, c: usize) -> Field {
    let mut r = rng(seed);
    Field::from_fn(h, w, c, |_, _, _| r.random::<f64>())
}

pub fn random_image(seed: u64, h: usize, w: usize, c: usize) -> Image {
    Image::try_from(random_field(seed, h, w, c)).unwrap()
}

/// Direct double sum `F(u,v) = Σ_a Σ_b x(a,b) e^{-2πi(ua/M + vb/N)}` in
/// natural layout, one plane.
pub fn dft_direct(plane: &[f64], m: usize, n: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); m * n];
    for u in 0..m {
        for v in 0..n {
            let mut acc = Complex64::new(0.0, 0.0);
            for a in 0..m {
                for b in 0..n {
                    // Reduce the phase index first to keep the angle small.
                    let k = ((u * a) % m) as f64 / m as f64 + ((v * b) % n) as f64 / n as f64;
                    acc += plane[a * n + b] * Complex64::from_polar(1.0, -2.0 * PI * k);
                }
            }
            out[u * n + v] = acc;
        }
    }
    out
}

/// Direct inverse `x(a,b) = 1/(MN) Σ_u Σ_v F(u,v) e^{2πi(ua/M + vb/N)}`,
/// natural layout, one plane.
pub fn idft_direct(spec: &[Complex64], m: usize, n: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); m * n];
    let scale = 1.0 / (m * n) as f64;
    for a in 0..m {
        for b in 0..n {
            let mut acc = Complex64::new(0.0, 0.0);
            for u in 0..m {
                for v in 0..n {
                    let k = ((u * a) % m) as f64 / m as f64 + ((v * b) % n) as f64 / n as f64;
                    acc += spec[u * n + v] * Complex64::from_polar(1.0, 2.0 * PI * k);
                }
            }
            out[a * n + b] = acc * scale;
        }
    }
    out
}

/// Natural-layout index of the bin that sits at `(row, col)` in the centered
/// layout.
pub fn centered_to_natural(row: usize, col: usize, m: usize, n: usize) -> (usize, usize) {
    ((row + m - m / 2) % m, (col + n - n / 2) % n)
}

/// Distance of centered bin `(row, col)` from the centered DC bin.
pub fn center_distance(row: usize, col: usize, m: usize, n: usize) -> f64 {
    let du = row as f64 - (m / 2) as f64;
    let dv = col as f64 - (n / 2) as f64;
    (du * du + dv * dv).sqrt()
}

/// Reflect-101 border index.
pub fn mirror(i: isize, n: usize) -> usize {
    let n = n as isize;
    let mut j = i;
    while j < 0 || j >= n {
        j = if j < 0 { -j } else { 2 * (n - 1) - j };
    }
    j as usize
}

/// Non-separable 2-D convolution with a dense `(2r+1)^2` kernel given by
/// `weight(dy, dx)`, reflect-101 borders.
pub fn dense_convolve(
    field: &Field,
    r: usize,
    weight: impl Fn(isize, isize) -> f64,
) -> Field {
    let (h, w, c) = field.shape();
    let r = r as isize;
    Field::from_fn(h, w, c, |ch, row, col| {
        let mut acc = 0.0;
        for dy in -r..=r {
            for dx in -r..=r {
                let y = mirror(row as isize + dy, h);
                let x = mirror(col as isize + dx, w);
                acc += weight(dy, dx) * field.get(ch, y, x);
            }
        }
        acc
    })
}

/// Unnormalized Gaussian evaluated independently of the library kernel.
pub fn gaussian_2d(r: usize, sigma: f64) -> impl Fn(isize, isize) -> f64 {
    let ri = r as isize;
    let mut total = 0.0;
    for dy in -ri..=ri {
        for dx in -ri..=ri {
            total += (-((dy * dy + dx * dx) as f64) / (2.0 * sigma * sigma)).exp();
        }
    }
    move |dy, dx| (-((dy * dy + dx * dx) as f64) / (2.0 * sigma * sigma)).exp() / total
}

/// Sum of absolute differences between horizontal and vertical neighbours.
pub fn total_variation(field: &Field) -> f64 {
    let (h, w, c) = field.shape();
    let mut tv = 0.0;
    for ch in 0..c {
        for row in 0..h {
            for col in 0..w {
                let v = field.get(ch, row, col);
                if col + 1 < w {
                    tv += (field.get(ch, row, col + 1) - v).abs();
                }
                if row + 1 < h {
                    tv += (field.get(ch, row + 1, col) - v).abs();
                }
            }
        }
    }
    tv
}

/// White square of side `side` centered on a black `n x n` field.
pub fn white_square(n: usize, side: usize) -> Image {
    let lo = (n - side) / 2;
    let hi = lo + side;
    let f = Field::from_fn(n, n, 1, |_, row, col| {
        if (lo..hi).contains(&row) && (lo..hi).contains(&col) {
            1.0
        } else {
            0.0
        }
    });
    Image::try_from(f).unwrap()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Writes `n` synthetic image/label pairs as `images/fixtureNNN.png` and
/// `labels/fixtureNNN.png` under `root`.
pub fn write_fixture_dir(root: &std::path::Path, n: usize, h: usize, w: usize, channels: usize) {
    let images = root.join("images");
    let labels = root.join("labels");
    std::fs::create_dir_all(&images).unwrap();
    std::fs::create_dir_all(&labels).unwrap();
    for i in 0..n {
        let fx = freqaug::synthetic::fixture(i as u64, h, w, channels);
        let name = format!("fixture{i:03}.png");
        freqaug::io::save_png(&images.join(&name), &fx.image).unwrap();
        freqaug::io::save_labels(&labels.join(&name), &fx.labels).unwrap();
    }
}

/// Byte contents of every regular file below `dir`, keyed by relative path.
pub fn snapshot(dir: &std::path::Path) -> std::collections::BTreeMap<std::path::PathBuf, Vec<u8>> {
    let mut out = std::collections::BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(dir).unwrap().to_path_buf(), std::fs::read(&p).unwrap());
            }
        }
    }
    out
}
