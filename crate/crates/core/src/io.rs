//! Image decoding to unit-interval samples, label maps, resizing and PNG output.

use std::path::Path;

use image::imageops::{self, FilterType};
use image::{DynamicImage, ImageBuffer, ImageReader, Luma, Rgb};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::image::{Field, Image};

pub const SUPPORTED_EXTENSIONS: [&str; 6] = ["png", "bmp", "ppm", "pgm", "pnm", "pbm"];

pub fn is_supported(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .map(|e| SUPPORTED_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
        .unwrap_or(false)
}

fn open(path: &Path) -> Result<DynamicImage> {
    ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?
        .decode()
        .map_err(|e| Error::data(path, e.to_string()))
}

/// Decodes an image file. 8-bit samples are divided by 255, 16-bit samples
/// by 65535. Gray inputs keep one channel, color inputs three; alpha is
/// dropped.
pub fn load_image(path: &Path) -> Result<Image> {
    let img = open(path)?;
    decode_dynamic(&img).map_err(|e| match e {
        Error::InvalidInput(msg) => Error::data(path, msg),
        other => other,
    })
}

pub fn decode_dynamic(img: &DynamicImage) -> Result<Image> {
    let (w, h) = (img.width() as usize, img.height() as usize);
    let gray = !img.color().has_color();
    let sixteen = img.color().bits_per_pixel() / u16::from(img.color().channel_count()) > 8;
    let channels = if gray { 1 } else { 3 };
    let interleaved: Vec<f64> = match (gray, sixteen) {
        (true, false) => img.to_luma8().into_raw().into_iter().map(|v| f64::from(v) / 255.0).collect(),
        (true, true) => img.to_luma16().into_raw().into_iter().map(|v| f64::from(v) / 65535.0).collect(),
        (false, false) => img.to_rgb8().into_raw().into_iter().map(|v| f64::from(v) / 255.0).collect(),
        (false, true) => img.to_rgb16().into_raw().into_iter().map(|v| f64::from(v) / 65535.0).collect(),
    };
    let field = Field::from_fn(h, w, channels, |c, row, col| {
        interleaved[(row * w + col) * channels + c]
    });
    Image::try_from(field)
}

/// Integer category map decoded from a label image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    pub height: usize,
    pub width: usize,
    pub values: Vec<u16>,
}

pub fn load_labels(path: &Path) -> Result<LabelMap> {
    let img = open(path)?;
    let sixteen = img.color().bits_per_pixel() / u16::from(img.color().channel_count()) > 8;
    let values = if sixteen {
        img.to_luma16().into_raw()
    } else {
        img.to_luma8().into_raw().into_iter().map(u16::from).collect()
    };
    Ok(LabelMap {
        height: img.height() as usize,
        width: img.width() as usize,
        values,
    })
}

/// Bilinear (triangle-filter) resize of every channel.
pub fn resize_image(img: &Image, height: usize, width: usize) -> Result<Image> {
    if img.height() == height && img.width() == width {
        return Ok(img.clone());
    }
    let (h, w) = (img.height() as u32, img.width() as u32);
    let mut out = Field::zeros(height, width, img.channels());
    for c in 0..img.channels() {
        let plane: Vec<f32> = img.plane(c).iter().map(|&v| v as f32).collect();
        let buf: ImageBuffer<Luma<f32>, Vec<f32>> =
            ImageBuffer::from_raw(w, h, plane).expect("plane length matches dimensions");
        let resized = imageops::resize(&buf, width as u32, height as u32, FilterType::Triangle);
        for (dst, src) in out.plane_mut(c).iter_mut().zip(resized.into_raw()) {
            *dst = f64::from(src).clamp(0.0, 1.0);
        }
    }
    Image::try_from(out)
}

/// Nearest-neighbor resize; category values are never interpolated.
pub fn resize_labels(labels: &LabelMap, height: usize, width: usize) -> LabelMap {
    if labels.height == height && labels.width == width {
        return labels.clone();
    }
    let buf: ImageBuffer<Luma<u16>, Vec<u16>> = ImageBuffer::from_raw(
        labels.width as u32,
        labels.height as u32,
        labels.values.clone(),
    )
    .expect("label length matches dimensions");
    let resized = imageops::resize(&buf, width as u32, height as u32, FilterType::Nearest);
    LabelMap {
        height,
        width,
        values: resized.into_raw(),
    }
}

pub fn save_labels(path: &Path, labels: &LabelMap) -> Result<()> {
    let (w, h) = (labels.width as u32, labels.height as u32);
    let result = if labels.values.iter().all(|&v| v <= 255) {
        let raw: Vec<u8> = labels.values.iter().map(|&v| v as u8).collect();
        DynamicImage::ImageLuma8(ImageBuffer::from_raw(w, h, raw).expect("length matches"))
            .save(path)
    } else {
        DynamicImage::ImageLuma16(
            ImageBuffer::from_raw(w, h, labels.values.clone()).expect("length matches"),
        )
        .save(path)
    };
    result.map_err(|e| image_error(path, e))
}

/// 8-bit interleaved pixel buffer, `round(255 * v)` per sample.
pub fn quantize(img: &Image) -> Vec<u8> {
    let (h, w, c) = img.shape();
    let mut out = Vec::with_capacity(h * w * c);
    for row in 0..h {
        for col in 0..w {
            for ch in 0..c {
                out.push((img.get(ch, row, col) * 255.0).round() as u8);
            }
        }
    }
    out
}

/// SHA-256 over the dimensions and the quantized pixel buffer.
pub fn image_hash(img: &Image) -> String {
    let (h, w, c) = img.shape();
    let mut hasher = Sha256::new();
    for d in [h, w, c] {
        hasher.update((d as u32).to_le_bytes());
    }
    hasher.update(quantize(img));
    hex::encode(hasher.finalize())
}

/// SHA-256 over the float32 little-endian payload of a field.
pub fn field_hash(field: &Field) -> String {
    let mut hasher = Sha256::new();
    let (h, w, c) = field.shape();
    for d in [h, w, c] {
        hasher.update((d as u32).to_le_bytes());
    }
    for v in field.data() {
        hasher.update((*v as f32).to_le_bytes());
    }
    hex::encode(hasher.finalize())
}

pub fn to_dynamic(img: &Image) -> Result<DynamicImage> {
    let (h, w) = (img.height() as u32, img.width() as u32);
    match img.channels() {
        1 => Ok(DynamicImage::ImageLuma8(
            ImageBuffer::from_raw(w, h, quantize(img)).expect("length matches"),
        )),
        3 => Ok(DynamicImage::ImageRgb8(
            ImageBuffer::<Rgb<u8>, _>::from_raw(w, h, quantize(img)).expect("length matches"),
        )),
        c => Err(Error::invalid(format!(
            "cannot encode a {c}-channel image as PNG"
        ))),
    }
}

pub fn save_png(path: &Path, img: &Image) -> Result<()> {
    to_dynamic(img)?
        .save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| image_error(path, e))
}

fn image_error(path: &Path, e: image::ImageError) -> Error {
    match e {
        image::ImageError::IoError(io) => Error::io(path, io),
        other => Error::data(path, other.to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eight_and_sixteen_bit_normalization() {
        let dir = tempfile::tempdir().unwrap();
        let p8 = dir.path().join("a.png");
        let buf8: ImageBuffer<Luma<u8>, _> = ImageBuffer::from_raw(2, 2, vec![0u8, 255, 51, 102]).unwrap();
        buf8.save(&p8).unwrap();
        let img = load_image(&p8).unwrap();
        assert_eq!(img.channels(), 1);
        assert_eq!(img.data(), &[0.0, 1.0, 0.2, 0.4]);

        let p16 = dir.path().join("b.png");
        let buf16: ImageBuffer<Luma<u16>, _> =
            ImageBuffer::from_raw(2, 2, vec![0u16, 65535, 0, 65535]).unwrap();
        DynamicImage::ImageLuma16(buf16).save(&p16).unwrap();
        let img = load_image(&p16).unwrap();
        assert_eq!(img.get(0, 0, 1), 1.0);
    }

    #[test]
    fn color_ppm_and_bmp_decode_to_three_channels() {
        let dir = tempfile::tempdir().unwrap();
        let rgb: ImageBuffer<Rgb<u8>, _> =
            ImageBuffer::from_raw(2, 2, vec![255, 0, 0, 0, 255, 0, 0, 0, 255, 255, 255, 255]).unwrap();
        for name in ["c.ppm", "c.bmp"] {
            let p = dir.path().join(name);
            rgb.save(&p).unwrap();
            let img = load_image(&p).unwrap();
            assert_eq!(img.shape(), (2, 2, 3));
            assert_eq!(img.get(0, 0, 0), 1.0);
            assert_eq!(img.get(1, 0, 1), 1.0);
            assert_eq!(img.get(2, 1, 0), 1.0);
        }
    }

    #[test]
    fn save_then_load_is_exact_for_quantized_values() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("q.png");
        let img = Image::new(2, 3, 3, (0..18).map(|i| i as f64 / 255.0).collect()).unwrap();
        save_png(&p, &img).unwrap();
        assert_eq!(load_image(&p).unwrap(), img);
    }

    #[test]
    fn label_resize_keeps_categories() {
        let labels = LabelMap {
            height: 2,
            width: 2,
            values: vec![0, 1, 2, 3],
        };
        let big = resize_labels(&labels, 4, 4);
        assert_eq!(big.values.len(), 16);
        assert!(big.values.iter().all(|v| *v <= 3));
        assert_eq!(big.values[0], 0);
        assert_eq!(big.values[15], 3);
    }

    #[test]
    fn resize_stays_in_unit_range() {
        let img = Image::new(4, 4, 1, (0..16).map(|i| (i % 2) as f64).collect()).unwrap();
        let r = resize_image(&img, 7, 9).unwrap();
        assert_eq!(r.shape(), (7, 9, 1));
        assert!(r.data().iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn unreadable_file_is_data_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("broken.png");
        std::fs::write(&p, b"\x89PNG garbage").unwrap();
        assert!(matches!(load_image(&p), Err(Error::Data { .. })));
    }
}
