//! Structure saliency: the residual of an image after Gaussian blurring.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{Field, Image};

/// Normalized 1-D Gaussian of half-width `radius`; the 2-D kernel is its
/// outer product with itself.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianKernel {
    radius: usize,
    sigma: f64,
    weights: Vec<f64>,
}

impl GaussianKernel {
    pub fn new(radius: usize, sigma: f64) -> Result<Self> {
        if radius < 1 {
            return Err(Error::config("gaussian kernel radius must be >= 1"));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::config(format!(
                "gaussian sigma must be positive, got {sigma}"
            )));
        }
        let raw: Vec<f64> = (0..=2 * radius)
            .map(|i| {
                let x = i as f64 - radius as f64;
                (-x * x / (2.0 * sigma * sigma)).exp()
            })
            .collect();
        let total: f64 = raw.iter().sum();
        let mut weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
        // Force exact mirror symmetry after the division.
        for i in 0..radius {
            weights[2 * radius - i] = weights[i];
        }
        Ok(GaussianKernel {
            radius,
            sigma,
            weights,
        })
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn window(&self) -> usize {
        2 * self.radius + 1
    }

    /// 1-D weights, index `radius` is the center tap.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Weight of the 2-D kernel at offset `(dy, dx)` from the center.
    pub fn weight_2d(&self, dy: isize, dx: isize) -> f64 {
        let r = self.radius as isize;
        if dy.abs() > r || dx.abs() > r {
            return 0.0;
        }
        self.weights[(dy + r) as usize] * self.weights[(dx + r) as usize]
    }
}

/// Rule mapping an image size to a kernel: `radius = max(1, round(min(H, W) /
/// divisor))`, `sigma = radius / sigma_ratio`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelRule {
    pub divisor: f64,
    pub sigma_ratio: f64,
}

impl Default for KernelRule {
    fn default() -> Self {
        KernelRule {
            divisor: 32.0,
            sigma_ratio: 3.0,
        }
    }
}

impl KernelRule {
    pub fn validate(&self) -> Result<()> {
        if !(self.divisor > 0.0 && self.sigma_ratio > 0.0) {
            return Err(Error::config(
                "kernel rule divisor and sigma ratio must be positive",
            ));
        }
        Ok(())
    }

    pub fn kernel_for(&self, height: usize, width: usize) -> Result<GaussianKernel> {
        self.validate()?;
        if height < 8 || width < 8 {
            return Err(Error::invalid(format!(
                "kernel rule needs images of at least 8x8, got {height}x{width}"
            )));
        }
        let radius = ((height.min(width) as f64 / self.divisor).round() as usize).max(1);
        GaussianKernel::new(radius, radius as f64 / self.sigma_ratio)
    }
}

/// Kernel from the default rule (`min(H, W) / 32`, `sigma = radius / 3`).
pub fn default_kernel_for(height: usize, width: usize) -> Result<GaussianKernel> {
    KernelRule::default().kernel_for(height, width)
}

/// Mirror index without repeating the edge sample (`... 2 1 | 0 1 2 ... n-1 | n-2 ...`).
#[inline]
fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    let j = if i < 0 { -i } else { i };
    (if j >= n { 2 * (n - 1) - j } else { j }) as usize
}

/// Separable Gaussian convolution per channel with reflective borders.
pub fn gaussian_blur(field: &Field, kernel: &GaussianKernel) -> Result<Field> {
    let (h, w) = (field.height(), field.width());
    if kernel.window() > h || kernel.window() > w {
        return Err(Error::invalid(format!(
            "kernel window {} exceeds image size {h}x{w}",
            kernel.window()
        )));
    }
    let r = kernel.radius as isize;
    let wts = kernel.weights();
    let mut out = Field::zeros(h, w, field.channels());
    let mut tmp = vec![0.0; h * w];
    for c in 0..field.channels() {
        let src = field.plane(c);
        for row in 0..h {
            let line = &src[row * w..(row + 1) * w];
            for col in 0..w {
                let mut acc = 0.0;
                for (k, &wt) in wts.iter().enumerate() {
                    acc += wt * line[reflect(col as isize + k as isize - r, w)];
                }
                tmp[row * w + col] = acc;
            }
        }
        let dst = out.plane_mut(c);
        for row in 0..h {
            for col in 0..w {
                let mut acc = 0.0;
                for (k, &wt) in wts.iter().enumerate() {
                    acc += wt * tmp[reflect(row as isize + k as isize - r, h) * w + col];
                }
                dst[row * w + col] = acc;
            }
        }
    }
    Ok(out)
}

/// `x - blur(x)`.
pub fn structure_saliency(field: &Field, kernel: &GaussianKernel) -> Result<Field> {
    let blurred = gaussian_blur(field, kernel)?;
    Ok(field - &blurred)
}

pub fn image_saliency(img: &Image, kernel: &GaussianKernel) -> Result<Field> {
    structure_saliency(img.as_field(), kernel)
}
