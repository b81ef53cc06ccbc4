//! Planar multi-channel sample containers.
//!
//! Data is stored channel-major: element `(c, row, col)` lives at
//! `c * height * width + row * width + col`. This matches the `(C, H, W)`
//! layout used for tensor files, so planes can be handed to the FFT and to
//! NPY writers without reshuffling.

use crate::error::{Error, Result};

/// Real-valued field with no range constraint (filtered residues, saliency maps,
/// blur outputs).
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f64>,
}

impl Field {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 || channels == 0 {
            return Err(Error::invalid(format!(
                "field dimensions must be nonzero, got {height}x{width}x{channels}"
            )));
        }
        if data.len() != height * width * channels {
            return Err(Error::invalid(format!(
                "field data length {} does not match {height}x{width}x{channels}",
                data.len()
            )));
        }
        Ok(Field {
            height,
            width,
            channels,
            data,
        })
    }

    pub fn zeros(height: usize, width: usize, channels: usize) -> Self {
        Self::filled(height, width, channels, 0.0)
    }

    pub fn filled(height: usize, width: usize, channels: usize, value: f64) -> Self {
        Field {
            height,
            width,
            channels,
            data: vec![value; height * width * channels],
        }
    }

    /// Builds a field by evaluating `f(channel, row, col)` at every element.
    pub fn from_fn(
        height: usize,
        width: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Self {
        let mut data = Vec::with_capacity(height * width * channels);
        for c in 0..channels {
            for row in 0..height {
                for col in 0..width {
                    data.push(f(c, row, col));
                }
            }
        }
        Field {
            height,
            width,
            channels,
            data,
        }
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

    pub fn plane_len(&self) -> usize {
        self.height * self.width
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.channels)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn plane(&self, channel: usize) -> &[f64] {
        let n = self.plane_len();
        &self.data[channel * n..(channel + 1) * n]
    }

    pub fn plane_mut(&mut self, channel: usize) -> &mut [f64] {
        let n = self.plane_len();
        &mut self.data[channel * n..(channel + 1) * n]
    }

    pub fn planes(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.plane_len())
    }

    #[inline]
    pub fn get(&self, channel: usize, row: usize, col: usize) -> f64 {
        self.data[(channel * self.height + row) * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, channel: usize, row: usize, col: usize, value: f64) {
        self.data[(channel * self.height + row) * self.width + col] = value;
    }

    pub fn same_shape(&self, other: &Field) -> bool {
        self.shape() == other.shape()
    }

    pub fn energy(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.data
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }

    /// Affine map of the whole field onto `[0, 1]`; flat fields map to 0.5.
    pub fn to_unit_range(&self) -> Image {
        let (lo, hi) = self.min_max();
        let span = hi - lo;
        let data = self
            .data
            .iter()
            .map(|&v| if span > 0.0 { (v - lo) / span } else { 0.5 })
            .collect();
        Image(Field {
            height: self.height,
            width: self.width,
            channels: self.channels,
            data,
        })
    }
}

impl std::ops::Sub for &Field {
    type Output = Field;

    fn sub(self, rhs: &Field) -> Field {
        assert!(self.same_shape(rhs), "shape mismatch in field subtraction");
        Field {
            height: self.height,
            width: self.width,
            channels: self.channels,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

/// Spatial-domain sample with every element in `[0, 1]` and both spatial
/// dimensions at least 2.
#[derive(Debug, Clone, PartialEq)]
pub struct Image(Field);

impl Image {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        Self::try_from(Field::new(height, width, channels, data)?)
    }

    pub fn as_field(&self) -> &Field {
        &self.0
    }

    pub fn into_field(self) -> Field {
        self.0
    }

    /// Clamps each value into `[0, 1]`; used where a convex combination may
    /// drift a few ulps outside the interval.
    pub(crate) fn from_field_clamped(mut field: Field) -> Self {
        for v in field.data_mut() {
            *v = v.clamp(0.0, 1.0);
        }
        Image(field)
    }
}

impl std::ops::Deref for Image {
    type Target = Field;

    fn deref(&self) -> &Field {
        &self.0
    }
}

impl TryFrom<Field> for Image {
    type Error = Error;

    fn try_from(field: Field) -> Result<Self> {
        if field.height < 2 || field.width < 2 {
            return Err(Error::invalid(format!(
                "image must be at least 2x2, got {}x{}",
                field.height, field.width
            )));
        }
        if let Some(bad) = field.data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::invalid(format!(
                "image value {bad} lies outside [0, 1]"
            )));
        }
        Ok(Image(field))
    }
}
