//! 2D discrete Fourier transform with a centered-spectrum convention.
//!
//! The forward transform is unnormalized and the inverse carries the
//! `1/(MN)` factor. Each channel is transformed independently. Spectra
//! leave [`dft2`] in centered layout, with the DC bin at
//! `(floor(M/2), floor(N/2))`.

use std::cell::RefCell;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::image::{Field, Image};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layout {
    /// DC at `(0, 0)`.
    Natural,
    /// DC at `(floor(M/2), floor(N/2))`.
    Centered,
}

/// Per-channel complex spectrum, channel-major like [`Field`].
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    height: usize,
    width: usize,
    channels: usize,
    layout: Layout,
    data: Vec<Complex64>,
}

impl Spectrum {
    pub fn new(
        height: usize,
        width: usize,
        channels: usize,
        layout: Layout,
        data: Vec<Complex64>,
    ) -> Result<Self> {
        check_dims(height, width)?;
        if channels == 0 || data.len() != height * width * channels {
            return Err(Error::invalid(format!(
                "spectrum data length {} does not match {height}x{width}x{channels}",
                data.len()
            )));
        }
        Ok(Spectrum {
            height,
            width,
            channels,
            layout,
            data,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn plane(&self, channel: usize) -> &[Complex64] {
        let n = self.height * self.width;
        &self.data[channel * n..(channel + 1) * n]
    }

    pub fn plane_mut(&mut self, channel: usize) -> &mut [Complex64] {
        let n = self.height * self.width;
        &mut self.data[channel * n..(channel + 1) * n]
    }

    #[inline]
    pub fn get(&self, channel: usize, u: usize, v: usize) -> Complex64 {
        self.data[(channel * self.height + u) * self.width + v]
    }

    /// Index of the DC bin in the current layout.
    pub fn dc_index(&self) -> (usize, usize) {
        match self.layout {
            Layout::Natural => (0, 0),
            Layout::Centered => (self.height / 2, self.width / 2),
        }
    }

    pub fn to_layout(&self, layout: Layout) -> Spectrum {
        match (self.layout, layout) {
            (Layout::Natural, Layout::Centered) => shift_center(self),
            (Layout::Centered, Layout::Natural) => unshift_center(self),
            _ => self.clone(),
        }
    }
}

/// Moves the DC bin from `(0, 0)` to `(floor(M/2), floor(N/2))`.
///
/// The input is relabeled regardless of its layout flag; the result is
/// flagged [`Layout::Centered`].
pub fn shift_center(spec: &Spectrum) -> Spectrum {
    roll(spec, spec.height / 2, spec.width / 2, Layout::Centered)
}

/// Inverse of [`shift_center`]: rolls by `ceil(M/2)`, `ceil(N/2)`.
pub fn unshift_center(spec: &Spectrum) -> Spectrum {
    roll(
        spec,
        spec.height.div_ceil(2),
        spec.width.div_ceil(2),
        Layout::Natural,
    )
}

fn roll(spec: &Spectrum, dr: usize, dc: usize, layout: Layout) -> Spectrum {
    let (h, w) = (spec.height, spec.width);
    let mut data = vec![Complex64::default(); spec.data.len()];
    for (src, dst) in spec.data.chunks_exact(h * w).zip(data.chunks_exact_mut(h * w)) {
        for row in 0..h {
            let new_row = (row + dr) % h;
            for col in 0..w {
                dst[new_row * w + (col + dc) % w] = src[row * w + col];
            }
        }
    }
    Spectrum {
        height: h,
        width: w,
        channels: spec.channels,
        layout,
        data,
    }
}

/// Planned row/column transforms for one `height x width` plane size.
///
/// Reusing a plan across many images of the same size avoids re-planning.
pub struct Fft2d {
    height: usize,
    width: usize,
    row_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Fft2d {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fft2d")
            .field("height", &self.height)
            .field("width", &self.width)
            .finish()
    }
}

impl Fft2d {
    pub fn new(height: usize, width: usize) -> Result<Self> {
        check_dims(height, width)?;
        let mut planner = FftPlanner::new();
        Ok(Fft2d {
            height,
            width,
            row_fwd: planner.plan_fft_forward(width),
            row_inv: planner.plan_fft_inverse(width),
            col_fwd: planner.plan_fft_forward(height),
            col_inv: planner.plan_fft_inverse(height),
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Unnormalized forward transform of every channel, centered layout.
    pub fn forward(&self, field: &Field) -> Result<Spectrum> {
        self.check_field(field)?;
        let mut data: Vec<Complex64> = field
            .data()
            .iter()
            .map(|&v| Complex64::new(v, 0.0))
            .collect();
        for plane in data.chunks_exact_mut(self.height * self.width) {
            self.transform_plane(plane, &self.row_fwd, &self.col_fwd);
        }
        let natural = Spectrum {
            height: self.height,
            width: self.width,
            channels: field.channels(),
            layout: Layout::Natural,
            data,
        };
        Ok(shift_center(&natural))
    }

    /// Inverse transform scaled by `1/(MN)`; returns the real part and the
    /// largest absolute imaginary residue.
    pub fn inverse(&self, spec: &Spectrum) -> Result<InverseOutput> {
        if spec.height != self.height || spec.width != self.width {
            return Err(Error::invalid(format!(
                "spectrum is {}x{}, plan is {}x{}",
                spec.height, spec.width, self.height, self.width
            )));
        }
        let natural = match spec.layout {
            Layout::Natural => spec.data.clone(),
            Layout::Centered => unshift_center(spec).data,
        };
        self.inverse_natural(natural, spec.channels)
    }

    /// Inverse of channel-major natural-layout data, consumed in place.
    pub fn inverse_natural(&self, mut data: Vec<Complex64>, channels: usize) -> Result<InverseOutput> {
        let plane = self.height * self.width;
        if channels == 0 || data.len() != plane * channels {
            return Err(Error::invalid(format!(
                "spectrum data length {} does not match {}x{}x{channels}",
                data.len(),
                self.height,
                self.width
            )));
        }
        for p in data.chunks_exact_mut(plane) {
            self.transform_plane(p, &self.row_inv, &self.col_inv);
        }
        let scale = 1.0 / plane as f64;
        let mut max_imag = 0.0f64;
        let real = data
            .iter()
            .map(|z| {
                max_imag = max_imag.max((z.im * scale).abs());
                z.re * scale
            })
            .collect();
        Ok(InverseOutput {
            field: Field::new(self.height, self.width, channels, real)?,
            max_imag,
        })
    }

    fn transform_plane(
        &self,
        plane: &mut [Complex64],
        rows: &Arc<dyn Fft<f64>>,
        cols: &Arc<dyn Fft<f64>>,
    ) {
        let (h, w) = (self.height, self.width);
        WORKSPACE.with(|ws| {
            let mut ws = ws.borrow_mut();
            let (scratch, t) = &mut *ws;
            let need = rows.get_inplace_scratch_len().max(cols.get_inplace_scratch_len());
            if scratch.len() < need {
                scratch.resize(need, Complex64::default());
            }
            t.resize(h * w, Complex64::default());
            rows.process_with_scratch(plane, &mut scratch[..rows.get_inplace_scratch_len()]);
            // Columns become contiguous rows after a transpose.
            transpose(plane, t, h, w);
            cols.process_with_scratch(t, &mut scratch[..cols.get_inplace_scratch_len()]);
            transpose(t, plane, w, h);
        });
    }

    fn check_field(&self, field: &Field) -> Result<()> {
        if field.height() != self.height || field.width() != self.width {
            return Err(Error::invalid(format!(
                "field is {}x{}, plan is {}x{}",
                field.height(),
                field.width(),
                self.height,
                self.width
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct InverseOutput {
    pub field: Field,
    pub max_imag: f64,
}

/// Forward transform of an image, one independent 2D transform per channel.
pub fn dft2(img: &Image) -> Result<Spectrum> {
    Fft2d::new(img.height(), img.width())?.forward(img.as_field())
}

/// Inverse transform of a spectrum in either layout.
pub fn idft2(spec: &Spectrum) -> Result<InverseOutput> {
    Fft2d::new(spec.height, spec.width)?.inverse(spec)
}

thread_local! {
    /// Per-thread FFT scratch and transpose buffers, reused across planes so
    /// large transforms do not fault in fresh pages every call.
    static WORKSPACE: RefCell<(Vec<Complex64>, Vec<Complex64>)> = const { RefCell::new((Vec::new(), Vec::new())) };
}

/// Cache-blocked transpose of a row-major `rows x cols` matrix.
fn transpose(src: &[Complex64], dst: &mut [Complex64], rows: usize, cols: usize) {
    const B: usize = 8;
    for r0 in (0..rows).step_by(B) {
        for c0 in (0..cols).step_by(B) {
            for r in r0..(r0 + B).min(rows) {
                for c in c0..(c0 + B).min(cols) {
                    dst[c * rows + r] = src[r * cols + c];
                }
            }
        }
    }
}

fn check_dims(height: usize, width: usize) -> Result<()> {
    if height < 2 || width < 2 {
        return Err(Error::invalid(format!(
            "transform needs both dimensions >= 2, got {height}x{width}"
        )));
    }
    Ok(())
}
