mod common;

use common::*;
use freqaug::fft::Fft2d;
use freqaug::saliency::*;
use freqaug::{Error, Field, Image};
use proptest::prelude::*;

#[test]
fn reconstruction_identity() {
    let img = random_image(1, 40, 33, 3);
    let k = default_kernel_for(40, 33).unwrap();
    let sal = image_saliency(&img, &k).unwrap();
    let blur = gaussian_blur(img.as_field(), &k).unwrap();
    let sum: Vec<f64> = sal.data().iter().zip(blur.data()).map(|(s, b)| s + b).collect();
    assert!(max_abs_diff(&sum, img.data()) < 1e-12);
}

#[test]
fn constant_image_gives_zero_saliency() {
    let img = Image::try_from(Field::filled(24, 24, 2, 0.8)).unwrap();
    let k = GaussianKernel::new(4, 1.5).unwrap();
    let blur = gaussian_blur(img.as_field(), &k).unwrap();
    assert!(max_abs_diff(blur.data(), img.data()) < 1e-15);
    assert!(image_saliency(&img, &k).unwrap().data().iter().all(|v| v.abs() < 1e-15));
}

#[test]
fn dense_oracle_16x16() {
    let img = random_image(16, 16, 16, 2);
    for (r, sigma) in [(1, 1.0 / 3.0), (2, 2.0 / 3.0), (3, 1.2), (7, 2.5)] {
        let k = GaussianKernel::new(r, sigma).unwrap();
        let got = gaussian_blur(img.as_field(), &k).unwrap();
        let want = dense_convolve(img.as_field(), r, gaussian_2d(r, sigma));
        assert!(max_abs_diff(got.data(), want.data()) < 1e-12, "r={r}");
    }
}

#[test]
fn impulse_response_is_the_kernel() {
    let mut f = Field::zeros(15, 15, 1);
    f.set(0, 7, 7, 1.0);
    let k = GaussianKernel::new(3, 1.1).unwrap();
    let b = gaussian_blur(&f, &k).unwrap();
    let w = gaussian_2d(3, 1.1);
    for row in 0..15 {
        for col in 0..15 {
            let (dy, dx) = (row as isize - 7, col as isize - 7);
            let want = if dy.abs() <= 3 && dx.abs() <= 3 { w(dy, dx) } else { 0.0 };
            assert!((b.get(0, row, col) - want).abs() < 1e-15);
        }
    }
}

#[test]
fn step_edge_is_antisymmetric() {
    let step = Field::from_fn(32, 32, 1, |_, _, col| if col >= 16 { 1.0 } else { 0.0 });
    for (r, sigma) in [(1, 1.0 / 3.0), (3, 1.0)] {
        let k = GaussianKernel::new(r, sigma).unwrap();
        let sal = structure_saliency(&step, &k).unwrap();
        let oracle_blur = dense_convolve(&step, r, gaussian_2d(r, sigma));
        for row in 0..32 {
            for j in 0..16 {
                let (left, right) = (15 - j, 16 + j);
                let a = sal.get(0, row, left);
                let b = sal.get(0, row, right);
                assert!((a + b).abs() < 1e-12, "r={r} row={row} j={j}");
                let want = step.get(0, row, left) - oracle_blur.get(0, row, left);
                assert!((a - want).abs() < 1e-12);
                if j >= r {
                    assert!(a.abs() < 1e-15 && b.abs() < 1e-15);
                }
            }
            assert!(sal.get(0, row, 15) < 0.0 && sal.get(0, row, 16) > 0.0);
        }
    }
}

#[test]
fn oversized_kernel_is_invalid_input() {
    let f = Field::zeros(6, 30, 1);
    let k = GaussianKernel::new(3, 1.0).unwrap();
    assert!(matches!(gaussian_blur(&f, &k), Err(Error::InvalidInput(_))));
}

#[test]
fn default_rule_examples() {
    let k = default_kernel_for(512, 512).unwrap();
    assert_eq!((k.radius(), k.sigma()), (16, 16.0 / 3.0));
    let k = default_kernel_for(64, 64).unwrap();
    assert_eq!((k.radius(), k.sigma()), (2, 2.0 / 3.0));
    let k = default_kernel_for(8, 8).unwrap();
    assert_eq!(k.radius(), 1);
    assert_eq!(k.window(), 3);
    assert!(default_kernel_for(4, 64).is_err());
}

#[test]
fn translation_covariance_on_interior() {
    let big = random_field(77, 48, 48, 1);
    let k = GaussianKernel::new(2, 0.9).unwrap();
    let r = k.radius();
    let sal_big = structure_saliency(&big, &k).unwrap();
    let (sy, sx) = (5, 3);
    let crop = Field::from_fn(36, 36, 1, |c, row, col| big.get(c, row + sy, col + sx));
    let sal_crop = structure_saliency(&crop, &k).unwrap();
    for row in r..36 - r {
        for col in r..36 - r {
            let want = sal_big.get(0, row + sy, col + sx);
            assert!((sal_crop.get(0, row, col) - want).abs() < 1e-12);
        }
    }
}

#[test]
fn saliency_is_high_pass_on_white_noise() {
    let n = 64;
    let k = default_kernel_for(n, n).unwrap();
    let fft = Fft2d::new(n, n).unwrap();
    // Lowest 5% of bins by distance from the spectrum center.
    let mut order: Vec<(f64, usize)> = (0..n * n)
        .map(|i| (center_distance(i / n, i % n, n, n), i))
        .collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0));
    let low: Vec<usize> = order[..n * n / 20].iter().map(|&(_, i)| i).collect();
    let low_mean = |f: &Field| {
        let s = fft.forward(f).unwrap();
        low.iter().map(|&i| s.data()[i].norm()).sum::<f64>() / low.len() as f64
    };
    for seed in 0..12 {
        let noise = random_field(1000 + seed, n, n, 1);
        let sal = structure_saliency(&noise, &k).unwrap();
        let (a, b) = (low_mean(&sal), low_mean(&noise));
        assert!(a < b, "seed {seed}: saliency {a} vs input {b}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn kernel_is_normalized(r in 1usize..20, sigma in 0.1f64..20.0) {
        let k = GaussianKernel::new(r, sigma).unwrap();
        let w = k.weights();
        prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert_eq!(w.len(), 2 * r + 1);
        for i in 0..w.len() {
            prop_assert!(w[i] >= 0.0);
            prop_assert_eq!(w[i], w[w.len() - 1 - i]);
        }
    }

    #[test]
    fn offset_invariance(seed in any::<u64>(), c in -3.0f64..3.0) {
        let x = random_field(seed, 20, 17, 2);
        let shifted = Field::from_fn(20, 17, 2, |ch, r, k| x.get(ch, r, k) + c);
        let kernel = GaussianKernel::new(2, 0.8).unwrap();
        let a = structure_saliency(&x, &kernel).unwrap();
        let b = structure_saliency(&shifted, &kernel).unwrap();
        prop_assert!(max_abs_diff(a.data(), b.data()) < 1e-12);
    }

    #[test]
    fn saliency_shape_matches(h in 8usize..40, w in 8usize..40, c in 1usize..4) {
        let img = random_image((h * w * c) as u64, h, w, c);
        let k = default_kernel_for(h, w).unwrap();
        prop_assert_eq!(image_saliency(&img, &k).unwrap().shape(), (h, w, c));
    }
}
