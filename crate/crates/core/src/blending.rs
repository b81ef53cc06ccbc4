//! Homologous sample blending.
//!
//! Two filtered variants of the same parent are combined as
//! `M * x_m + (1 - M) * x_n`, with the mask `M` shared by all channels.
//! Continuous masks are normalized distance maps from a random center; patch
//! and grid masks are binary.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filters::FilteredSample;
use crate::image::{Field, Image};

pub const DEFAULT_PATCH_AREA: (f64, f64) = (0.25, 0.75);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MaskKind {
    #[default]
    Continuous,
    Patch,
    Grid,
}

impl std::str::FromStr for MaskKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "continuous" => Ok(MaskKind::Continuous),
            "patch" => Ok(MaskKind::Patch),
            "grid" => Ok(MaskKind::Grid),
            other => Err(Error::config(format!(
                "unknown mask kind `{other}` (expected continuous, patch or grid)"
            ))),
        }
    }
}

/// Parameters that fully determine a mask for a given image size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MaskParams {
    /// Distance center as `(column, row)`.
    Continuous { center: (usize, usize) },
    Patch {
        top: usize,
        left: usize,
        height: usize,
        width: usize,
    },
    Grid { cell: usize },
}

impl MaskParams {
    pub fn kind(&self) -> MaskKind {
        match self {
            MaskParams::Continuous { .. } => MaskKind::Continuous,
            MaskParams::Patch { .. } => MaskKind::Patch,
            MaskParams::Grid { .. } => MaskKind::Grid,
        }
    }

    pub fn build(&self, height: usize, width: usize) -> Result<BlendMask> {
        match *self {
            MaskParams::Continuous { center } => continuous_mask(height, width, center),
            MaskParams::Patch {
                top,
                left,
                height: ph,
                width: pw,
            } => rect_mask(height, width, top, left, ph, pw),
            MaskParams::Grid { cell } => grid_mask(height, width, cell),
        }
    }
}

/// Single-channel blend weights in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlendMask {
    params: MaskParams,
    values: Field,
}

impl BlendMask {
    pub fn params(&self) -> &MaskParams {
        &self.params
    }

    pub fn kind(&self) -> MaskKind {
        self.params.kind()
    }

    pub fn height(&self) -> usize {
        self.values.height()
    }

    pub fn width(&self) -> usize {
        self.values.width()
    }

    pub fn values(&self) -> &[f64] {
        self.values.data()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values.get(0, row, col)
    }

    pub fn as_field(&self) -> &Field {
        &self.values
    }

    /// `1 - M`, keeping the same parameters for provenance.
    pub fn complement(&self) -> BlendMask {
        let mut values = self.values.clone();
        for v in values.data_mut() {
            *v = 1.0 - *v;
        }
        BlendMask {
            params: self.params,
            values,
        }
    }
}

/// `M(row, col) = dist((col, row), center) / D_max`, where `D_max` is the
/// largest distance from the center to any image corner.
pub fn continuous_mask(height: usize, width: usize, center: (usize, usize)) -> Result<BlendMask> {
    check_size(height, width)?;
    let (cw, ch) = center;
    if cw >= width || ch >= height {
        return Err(Error::invalid(format!(
            "mask center ({cw}, {ch}) lies outside a {width}x{height} image"
        )));
    }
    let dist = |row: usize, col: usize| {
        let dx = col as f64 - cw as f64;
        let dy = row as f64 - ch as f64;
        (dx * dx + dy * dy).sqrt()
    };
    let d_max = [(0, 0), (0, width - 1), (height - 1, 0), (height - 1, width - 1)]
        .into_iter()
        .map(|(r, c)| dist(r, c))
        .fold(0.0, f64::max);
    let values = Field::from_fn(height, width, 1, |_, row, col| dist(row, col) / d_max);
    Ok(BlendMask {
        params: MaskParams::Continuous { center },
        values,
    })
}

/// Continuous mask with a center drawn uniformly over all pixels
/// (column first, then row).
pub fn random_continuous_mask<R: Rng + ?Sized>(
    rng: &mut R,
    height: usize,
    width: usize,
) -> Result<BlendMask> {
    check_size(height, width)?;
    let cw = rng.random_range(0..width);
    let ch = rng.random_range(0..height);
    continuous_mask(height, width, (cw, ch))
}

/// Checkerboard of `cell x cell` squares; the top-left cell is 1.
pub fn grid_mask(height: usize, width: usize, cell: usize) -> Result<BlendMask> {
    check_size(height, width)?;
    if cell == 0 || cell > height || cell > width {
        return Err(Error::invalid(format!(
            "grid cell {cell} must lie in [1, {}]",
            height.min(width)
        )));
    }
    let values = Field::from_fn(height, width, 1, |_, row, col| {
        if (row / cell + col / cell).is_multiple_of(2) {
            1.0
        } else {
            0.0
        }
    });
    Ok(BlendMask {
        params: MaskParams::Grid { cell },
        values,
    })
}

/// Default grid cell: `ceil(min(H, W) / 8)`.
pub fn default_grid_cell(height: usize, width: usize) -> usize {
    height.min(width).div_ceil(8).max(1)
}

/// Rectangle of ones on a zero field.
///
/// The area ratio is drawn uniformly from `area`; each side is the matching
/// image side times `sqrt(ratio)`, rounded to nearest and clamped to
/// `[1, side]`. Draw order: ratio, top, left.
pub fn patch_mask<R: Rng + ?Sized>(
    rng: &mut R,
    height: usize,
    width: usize,
    area: (f64, f64),
) -> Result<BlendMask> {
    check_size(height, width)?;
    let (lo, hi) = area;
    if !(lo > 0.0 && lo <= hi && hi <= 1.0) {
        return Err(Error::config(format!(
            "patch area range ({lo}, {hi}) must satisfy 0 < lo <= hi <= 1"
        )));
    }
    let u: f64 = rng.random();
    let ratio = lo + u * (hi - lo);
    let (ph, pw) = patch_sides(height, width, ratio);
    let top = rng.random_range(0..=height - ph);
    let left = rng.random_range(0..=width - pw);
    rect_mask(height, width, top, left, ph, pw)
}

/// Side lengths of a patch covering `ratio` of the image.
pub fn patch_sides(height: usize, width: usize, ratio: f64) -> (usize, usize) {
    let s = ratio.sqrt();
    let side = |n: usize| ((n as f64 * s).round() as usize).clamp(1, n);
    (side(height), side(width))
}

fn rect_mask(
    height: usize,
    width: usize,
    top: usize,
    left: usize,
    ph: usize,
    pw: usize,
) -> Result<BlendMask> {
    check_size(height, width)?;
    if ph == 0 || pw == 0 || top + ph > height || left + pw > width {
        return Err(Error::invalid(format!(
            "patch {ph}x{pw} at ({top}, {left}) does not fit a {height}x{width} image"
        )));
    }
    let values = Field::from_fn(height, width, 1, |_, row, col| {
        let inside = (top..top + ph).contains(&row) && (left..left + pw).contains(&col);
        if inside {
            1.0
        } else {
            0.0
        }
    });
    Ok(BlendMask {
        params: MaskParams::Patch {
            top,
            left,
            height: ph,
            width: pw,
        },
        values,
    })
}

fn check_size(height: usize, width: usize) -> Result<()> {
    if height == 0 || width == 0 {
        return Err(Error::invalid("mask dimensions must be nonzero"));
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct BlendedSample {
    pub parent_id: String,
    pub image: Image,
}

/// `M * x_m + (1 - M) * x_n`, per channel.
pub fn blend(x_m: &FilteredSample, x_n: &FilteredSample, mask: &BlendMask) -> Result<BlendedSample> {
    if x_m.parent_id != x_n.parent_id {
        return Err(Error::Homology {
            left: x_m.parent_id.clone(),
            right: x_n.parent_id.clone(),
        });
    }
    let image = blend_images(&x_m.image, &x_n.image, mask)?;
    Ok(BlendedSample {
        parent_id: x_m.parent_id.clone(),
        image,
    })
}

/// Pixel-level blend without the provenance check.
pub fn blend_images(a: &Image, b: &Image, mask: &BlendMask) -> Result<Image> {
    if !a.same_shape(b) {
        return Err(Error::invalid(format!(
            "blend inputs differ in shape: {:?} vs {:?}",
            a.shape(),
            b.shape()
        )));
    }
    if mask.height() != a.height() || mask.width() != a.width() {
        return Err(Error::invalid(format!(
            "mask is {}x{}, images are {}x{}",
            mask.height(),
            mask.width(),
            a.height(),
            a.width()
        )));
    }
    let m = mask.values();
    let mut out = Field::zeros(a.height(), a.width(), a.channels());
    for c in 0..a.channels() {
        let dst = out.plane_mut(c);
        for (((d, &pa), &pb), &w) in dst.iter_mut().zip(a.plane(c)).zip(b.plane(c)).zip(m) {
            // Equal inputs short-circuit so x_m = x_n reproduces x_m exactly.
            *d = if pa == pb { pa } else { w * pa + (1.0 - w) * pb };
        }
    }
    Ok(Image::from_field_clamped(out))
}
