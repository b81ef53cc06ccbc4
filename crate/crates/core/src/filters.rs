//! High-pass frequency filters and the filter-one-image operation.
//!
//! Cutoffs are expressed as a fraction of the spectrum radius
//! `r = min(M, N) / 2`, with the distance `D(u, v)` measured in bins from the
//! centered DC bin. Butterworth gain is `1 / (1 + (D0 / D)^(2n))` with the
//! singular DC bin pinned to zero, so every filtered sample loses its mean.

use rand::Rng;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft::{Fft2d, Layout};
use crate::image::{Field, Image};

/// Largest cutoff fraction accepted for sampled or explicit filters.
pub const MAX_D0_FRACTION: f64 = 0.04;
/// Default lower bound for sampled cutoff fractions.
pub const DEFAULT_D0_MIN: f64 = 0.005;
pub const ALLOWED_ORDERS: [u32; 3] = [1, 2, 3];

/// Spans below this are treated as flat when renormalizing a channel.
const DEGENERATE_SPAN: f64 = 1e-9;

/// Butterworth high-pass gain at distance `d` for cutoff `d0` and order `n`.
///
/// Returns 0 at `d == 0`, the limit from above.
#[inline]
pub fn butterworth_response(d: f64, d0: f64, n: u32) -> f64 {
    if d == 0.0 {
        return 0.0;
    }
    1.0 / (1.0 + (d0 / d).powi(2 * n as i32))
}

/// Ideal high-pass gain; the cutoff itself passes.
#[inline]
pub fn ideal_response(d: f64, d0: f64) -> f64 {
    if d < d0 {
        0.0
    } else {
        1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ButterworthParams {
    d0_fraction: f64,
    order: u32,
}

impl ButterworthParams {
    pub fn new(d0_fraction: f64, order: u32) -> Result<Self> {
        check_d0(d0_fraction)?;
        if !ALLOWED_ORDERS.contains(&order) {
            return Err(Error::config(format!(
                "butterworth order must be one of {ALLOWED_ORDERS:?}, got {order}"
            )));
        }
        Ok(ButterworthParams { d0_fraction, order })
    }

    pub fn d0_fraction(&self) -> f64 {
        self.d0_fraction
    }

    pub fn order(&self) -> u32 {
        self.order
    }
}

fn check_d0(d0_fraction: f64) -> Result<()> {
    if !(d0_fraction > 0.0 && d0_fraction <= MAX_D0_FRACTION) {
        return Err(Error::config(format!(
            "cutoff fraction must lie in (0, {MAX_D0_FRACTION}], got {d0_fraction}"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterKind {
    Ideal,
    Butterworth,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ChannelFilter {
    Ideal { d0_fraction: f64 },
    Butterworth { d0_fraction: f64, order: u32 },
}

impl ChannelFilter {
    pub fn ideal(d0_fraction: f64) -> Result<Self> {
        check_d0(d0_fraction)?;
        Ok(ChannelFilter::Ideal { d0_fraction })
    }

    pub fn butterworth(params: ButterworthParams) -> Self {
        ChannelFilter::Butterworth {
            d0_fraction: params.d0_fraction,
            order: params.order,
        }
    }

    pub fn kind(&self) -> FilterKind {
        match self {
            ChannelFilter::Ideal { .. } => FilterKind::Ideal,
            ChannelFilter::Butterworth { .. } => FilterKind::Butterworth,
        }
    }

    pub fn d0_fraction(&self) -> f64 {
        match *self {
            ChannelFilter::Ideal { d0_fraction } | ChannelFilter::Butterworth { d0_fraction, .. } => {
                d0_fraction
            }
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            ChannelFilter::Ideal { d0_fraction } => check_d0(d0_fraction),
            ChannelFilter::Butterworth { d0_fraction, order } => {
                ButterworthParams::new(d0_fraction, order).map(|_| ())
            }
        }
    }

    /// Gain at distance `d` bins given spectrum radius `radius`.
    #[inline]
    pub fn gain(&self, d: f64, radius: f64) -> f64 {
        match *self {
            ChannelFilter::Ideal { d0_fraction } => ideal_response(d, d0_fraction * radius),
            ChannelFilter::Butterworth { d0_fraction, order } => {
                butterworth_response(d, d0_fraction * radius, order)
            }
        }
    }
}

/// Per-channel filter list. A single entry is shared by every channel
/// (the non-channel-wise variant); otherwise there is one entry per channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<ChannelFilter>", into = "Vec<ChannelFilter>")]
pub struct FilterSpec {
    per_channel: Vec<ChannelFilter>,
}

impl FilterSpec {
    pub fn new(per_channel: Vec<ChannelFilter>) -> Result<Self> {
        let first = per_channel
            .first()
            .ok_or_else(|| Error::config("filter spec needs at least one channel entry"))?;
        if per_channel.iter().any(|f| f.kind() != first.kind()) {
            return Err(Error::config("filter spec mixes ideal and butterworth entries"));
        }
        for f in &per_channel {
            f.validate()?;
        }
        Ok(FilterSpec { per_channel })
    }

    /// One filter applied to every channel.
    pub fn shared(filter: ChannelFilter) -> Result<Self> {
        Self::new(vec![filter])
    }

    pub fn kind(&self) -> FilterKind {
        self.per_channel[0].kind()
    }

    pub fn per_channel(&self) -> &[ChannelFilter] {
        &self.per_channel
    }

    pub fn is_channel_wise(&self) -> bool {
        self.per_channel.len() > 1
    }

    /// Filter for `channel` of an image with `channels` channels.
    pub fn for_channel(&self, channel: usize, channels: usize) -> Result<&ChannelFilter> {
        match self.per_channel.len() {
            1 => Ok(&self.per_channel[0]),
            n if n == channels => Ok(&self.per_channel[channel]),
            n => Err(Error::invalid(format!(
                "filter spec has {n} channel entries, image has {channels} channels"
            ))),
        }
    }
}

impl TryFrom<Vec<ChannelFilter>> for FilterSpec {
    type Error = Error;

    fn try_from(v: Vec<ChannelFilter>) -> Result<Self> {
        FilterSpec::new(v)
    }
}

impl From<FilterSpec> for Vec<ChannelFilter> {
    fn from(spec: FilterSpec) -> Self {
        spec.per_channel
    }
}

/// Sampling ranges for channel-wise Butterworth parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamRanges {
    pub d0_min: f64,
    pub d0_max: f64,
    pub orders: Vec<u32>,
}

impl Default for ParamRanges {
    fn default() -> Self {
        ParamRanges {
            d0_min: DEFAULT_D0_MIN,
            d0_max: MAX_D0_FRACTION,
            orders: ALLOWED_ORDERS.to_vec(),
        }
    }
}

impl ParamRanges {
    pub fn validate(&self) -> Result<()> {
        check_d0(self.d0_min)?;
        check_d0(self.d0_max)?;
        if self.d0_min > self.d0_max {
            return Err(Error::config(format!(
                "empty cutoff range: d0_min {} > d0_max {}",
                self.d0_min, self.d0_max
            )));
        }
        if self.orders.is_empty() {
            return Err(Error::config("order set is empty"));
        }
        if let Some(bad) = self.orders.iter().find(|o| !ALLOWED_ORDERS.contains(o)) {
            return Err(Error::config(format!(
                "order {bad} is outside {ALLOWED_ORDERS:?}"
            )));
        }
        Ok(())
    }
}

/// Draws an independent Butterworth filter for each of `channels` channels.
///
/// Draw order is fixed: channel 0 cutoff, channel 0 order, channel 1 cutoff,
/// and so on. One draw is consumed per parameter even when a range is
/// degenerate, so streams stay aligned across configurations.
pub fn sample_filter_spec<R: Rng + ?Sized>(
    rng: &mut R,
    channels: usize,
    ranges: &ParamRanges,
) -> Result<FilterSpec> {
    ranges.validate()?;
    if channels == 0 {
        return Err(Error::config("cannot sample a filter for zero channels"));
    }
    let per_channel = (0..channels)
        .map(|_| {
            let u: f64 = rng.random();
            let d0 = ranges.d0_min + u * (ranges.d0_max - ranges.d0_min);
            let order = ranges.orders[rng.random_range(0..ranges.orders.len())];
            ChannelFilter::Butterworth {
                d0_fraction: d0,
                order,
            }
        })
        .collect();
    FilterSpec::new(per_channel)
}

/// Distance of every bin from the centered DC bin, plus the spectrum radius.
#[derive(Debug, Clone)]
pub struct SpectrumGeometry {
    height: usize,
    width: usize,
    radius: f64,
    distance: Vec<f64>,
}

impl SpectrumGeometry {
    pub fn new(height: usize, width: usize) -> Self {
        let (cu, cv) = ((height / 2) as f64, (width / 2) as f64);
        let mut distance = Vec::with_capacity(height * width);
        for u in 0..height {
            let du = u as f64 - cu;
            for v in 0..width {
                let dv = v as f64 - cv;
                distance.push((du * du + dv * dv).sqrt());
            }
        }
        SpectrumGeometry {
            height,
            width,
            radius: height.min(width) as f64 / 2.0,
            distance,
        }
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Row-major distances in centered layout.
    pub fn distances(&self) -> &[f64] {
        &self.distance
    }

    pub fn distance(&self, u: usize, v: usize) -> f64 {
        self.distance[u * self.width + v]
    }

    pub fn gain_field(&self, filter: &ChannelFilter) -> Vec<f64> {
        self.distance
            .iter()
            .map(|&d| filter.gain(d, self.radius))
            .collect()
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelRange {
    pub min: f64,
    pub max: f64,
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterReport {
    /// Range of each channel before min-max renormalization.
    pub channels: Vec<ChannelRange>,
    /// Largest imaginary residue left by the inverse transform.
    pub max_imag: f64,
}

impl FilterReport {
    pub fn any_degenerate(&self) -> bool {
        self.channels.iter().any(|c| c.degenerate)
    }
}

/// A filtered, renormalized variant of one parent image.
#[derive(Debug, Clone)]
pub struct FilteredSample {
    pub parent_id: String,
    pub image: Image,
    pub spec: FilterSpec,
    pub report: FilterReport,
}

/// Forward spectrum of one source image, kept so that many filters can be
/// applied without repeating the forward transform.
///
/// The spectrum is held in natural layout alongside the matching distances,
/// so filtering needs no re-centering.
#[derive(Debug)]
pub struct SpectralSource {
    parent_id: String,
    fft: Fft2d,
    channels: usize,
    natural: Vec<Complex64>,
    natural_distance: Vec<f64>,
    geometry: SpectrumGeometry,
}

impl SpectralSource {
    pub fn new(img: &Image, parent_id: impl Into<String>) -> Result<Self> {
        let (h, w) = (img.height(), img.width());
        let fft = Fft2d::new(h, w)?;
        let natural = fft.forward(img.as_field())?.to_layout(Layout::Natural);
        let geometry = SpectrumGeometry::new(h, w);
        let mut natural_distance = Vec::with_capacity(h * w);
        for u in 0..h {
            for v in 0..w {
                natural_distance.push(geometry.distance((u + h / 2) % h, (v + w / 2) % w));
            }
        }
        Ok(SpectralSource {
            parent_id: parent_id.into(),
            channels: img.channels(),
            natural: natural.data().to_vec(),
            natural_distance,
            geometry,
            fft,
        })
    }

    pub fn parent_id(&self) -> &str {
        &self.parent_id
    }

    pub fn geometry(&self) -> &SpectrumGeometry {
        &self.geometry
    }

    /// Filtered real field before renormalization, with the imaginary residue.
    pub fn residual(&self, spec: &FilterSpec) -> Result<(Field, f64)> {
        let plane = self.natural_distance.len();
        let radius = self.geometry.radius;
        let mut filtered = Vec::with_capacity(self.natural.len());
        for c in 0..self.channels {
            let filter = spec.for_channel(c, self.channels)?;
            let bins = &self.natural[c * plane..(c + 1) * plane];
            filtered.extend(
                bins.iter()
                    .zip(&self.natural_distance)
                    .map(|(&z, &d)| z * filter.gain(d, radius)),
            );
        }
        let out = self.fft.inverse_natural(filtered, self.channels)?;
        Ok((out.field, out.max_imag))
    }

    pub fn filter(&self, spec: &FilterSpec) -> Result<FilteredSample> {
        let (field, max_imag) = self.residual(spec)?;
        let (image, channels) = renormalize(field);
        Ok(FilteredSample {
            parent_id: self.parent_id.clone(),
            image,
            spec: spec.clone(),
            report: FilterReport { channels, max_imag },
        })
    }
}

/// Filtered field of `img` before renormalization.
pub fn filter_residual(img: &Image, spec: &FilterSpec) -> Result<Field> {
    SpectralSource::new(img, "")?.residual(spec).map(|(f, _)| f)
}

/// Filters every channel of `img` and renormalizes each channel to `[0, 1]`.
pub fn apply_filter(img: &Image, spec: &FilterSpec, parent_id: &str) -> Result<FilteredSample> {
    spec.for_channel(0, img.channels())?;
    SpectralSource::new(img, parent_id)?.filter(spec)
}

/// Per-channel min-max mapping onto `[0, 1]`; flat channels become zeros.
pub fn renormalize(mut field: Field) -> (Image, Vec<ChannelRange>) {
    let mut ranges = Vec::with_capacity(field.channels());
    for c in 0..field.channels() {
        let plane = field.plane_mut(c);
        let (min, max) = plane
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            });
        let span = max - min;
        let degenerate = span <= DEGENERATE_SPAN;
        for v in plane.iter_mut() {
            *v = if degenerate { 0.0 } else { (*v - min) / span };
        }
        ranges.push(ChannelRange {
            min,
            max,
            degenerate,
        });
    }
    (Image::from_field_clamped(field), ranges)
}
