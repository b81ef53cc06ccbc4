//! NPY tensor files (`<f4` on write; `f4` or `f8`, C order, on read).

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use npyz::WriterBuilder;

use crate::error::{Error, Result};
use crate::image::Field;

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    /// Interprets a rank-3 `(C, H, W)` tensor as a field.
    pub fn into_field(self) -> Result<Field> {
        match self.shape[..] {
            [c, h, w] => Field::new(h, w, c, self.data),
            [h, w] => Field::new(h, w, 1, self.data),
            _ => Err(Error::invalid(format!(
                "expected a (C, H, W) tensor, got shape {:?}",
                self.shape
            ))),
        }
    }

    /// Splits a rank-4 `(K, C, H, W)` tensor into K fields; a rank-3 tensor
    /// yields a single field.
    pub fn into_views(self) -> Result<Vec<Field>> {
        match self.shape[..] {
            [k, c, h, w] => {
                let n = c * h * w;
                if n == 0 {
                    return Err(Error::invalid("tensor has an empty view"));
                }
                self.data
                    .chunks_exact(n)
                    .take(k)
                    .map(|chunk| Field::new(h, w, c, chunk.to_vec()))
                    .collect()
            }
            _ => Ok(vec![self.into_field()?]),
        }
    }
}

/// Writes a field as a `(C, H, W)` little-endian float32 array.
pub fn write_field(path: &Path, field: &Field) -> Result<()> {
    let (h, w, c) = field.shape();
    write_f32(path, &[c, h, w], field.data())
}

pub fn write_views(path: &Path, views: &[Field]) -> Result<()> {
    let first = views
        .first()
        .ok_or_else(|| Error::invalid("no views to write"))?;
    let (h, w, c) = first.shape();
    if views.iter().any(|v| !v.same_shape(first)) {
        return Err(Error::invalid("views differ in shape"));
    }
    let data: Vec<f64> = views.iter().flat_map(|v| v.data().iter().copied()).collect();
    write_f32(path, &[views.len(), c, h, w], &data)
}

pub fn write_f32(path: &Path, shape: &[usize], data: &[f64]) -> Result<()> {
    let expected: usize = shape.iter().product();
    if expected != data.len() {
        return Err(Error::invalid(format!(
            "shape {shape:?} does not match {} elements",
            data.len()
        )));
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let shape: Vec<u64> = shape.iter().map(|&s| s as u64).collect();
    let dtype = npyz::DType::Plain("<f4".parse().expect("valid type string"));
    let io_err = |e| Error::io(path, e);
    let mut writer = npyz::WriteOptions::new()
        .dtype(dtype)
        .shape(&shape)
        .writer(BufWriter::new(file))
        .begin_nd()
        .map_err(io_err)?;
    writer
        .extend(data.iter().map(|&v| v as f32))
        .map_err(io_err)?;
    writer.finish().map_err(io_err)
}

pub fn read(path: &Path) -> Result<Tensor> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let npy = npyz::NpyFile::new(BufReader::new(file))
        .map_err(|e| Error::data(path, format!("not an NPY file: {e}")))?;
    if npy.order() != npyz::Order::C {
        return Err(Error::data(path, "only C-order arrays are supported"));
    }
    let shape: Vec<usize> = npy.shape().iter().map(|&s| s as usize).collect();
    let data = match npy.try_data::<f32>() {
        Ok(reader) => reader
            .map(|v| v.map(f64::from))
            .collect::<std::io::Result<Vec<_>>>(),
        Err(npy) => match npy.try_data::<f64>() {
            Ok(reader) => reader.collect::<std::io::Result<Vec<_>>>(),
            Err(npy) => {
                return Err(Error::data(
                    path,
                    format!("unsupported dtype {}", npy.dtype().descr()),
                ))
            }
        },
    }
    .map_err(|e| Error::io(path, e))?;
    Ok(Tensor { shape, data })
}
