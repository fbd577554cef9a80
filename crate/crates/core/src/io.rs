//! PNG images/masks and the `MLF1` float raster format.
//!
//! `MLF1` layout: the magic bytes `MLF1`, width and height as little-endian
//! `u32`, then `width * height` little-endian `f32` values in row-major order.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::image::{BinaryMask, GrayImage, LikelihoodMap};
use crate::loss::GradientMap;

pub const F32_MAGIC: &[u8; 4] = b"MLF1";
const HEADER_LEN: usize = 12;

#[derive(Clone, Debug, PartialEq)]
pub struct F32Raster {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f32>,
}

impl F32Raster {
    pub fn new(width: usize, height: usize, values: Vec<f32>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidRaster(format!("empty raster {width}x{height}")));
        }
        if values.len() != width * height {
            return Err(Error::InvalidRaster(format!(
                "{} values for {width}x{height}",
                values.len()
            )));
        }
        Ok(Self { width, height, values })
    }

    pub fn from_likelihood(map: &LikelihoodMap) -> Self {
        Self {
            width: map.width(),
            height: map.height(),
            values: map.values().iter().map(|&v| v as f32).collect(),
        }
    }

    pub fn from_gradient(grad: &GradientMap) -> Self {
        Self {
            width: grad.width,
            height: grad.height,
            values: grad.values.iter().map(|&v| v as f32).collect(),
        }
    }

    pub fn to_likelihood(&self) -> Result<LikelihoodMap> {
        LikelihoodMap::new(
            self.width,
            self.height,
            self.values.iter().map(|&v| f64::from(v)).collect(),
        )
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + 4 * self.values.len());
        out.extend_from_slice(F32_MAGIC);
        out.extend_from_slice(&(self.width as u32).to_le_bytes());
        out.extend_from_slice(&(self.height as u32).to_le_bytes());
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let fmt = |offset, message: &str| Error::Format {
            offset,
            message: message.to_owned(),
        };
        if bytes.len() < HEADER_LEN {
            return Err(fmt(bytes.len(), "truncated header"));
        }
        if &bytes[..4] != F32_MAGIC {
            return Err(fmt(0, "bad magic, expected MLF1"));
        }
        let word = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap()) as usize;
        let (width, height) = (word(4), word(8));
        if width == 0 {
            return Err(fmt(4, "zero width"));
        }
        if height == 0 {
            return Err(fmt(8, "zero height"));
        }
        let expected = width
            .checked_mul(height)
            .and_then(|n| n.checked_mul(4))
            .and_then(|n| n.checked_add(HEADER_LEN))
            .ok_or_else(|| fmt(4, "dimensions overflow"))?;
        if bytes.len() != expected {
            return Err(fmt(
                bytes.len().min(expected),
                &format!("length {} does not match {width}x{height} (expected {expected})", bytes.len()),
            ));
        }
        let values = bytes[HEADER_LEN..]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(Self { width, height, values })
    }
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

pub fn read_f32_raster(path: impl AsRef<Path>) -> Result<F32Raster> {
    F32Raster::from_bytes(&read_bytes(path.as_ref())?)
}

pub fn write_f32_raster(path: impl AsRef<Path>, raster: &F32Raster) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, raster.to_bytes()).map_err(|e| Error::io(path, e))
}

pub fn read_gray_png(path: impl AsRef<Path>) -> Result<GrayImage> {
    let bytes = read_bytes(path.as_ref())?;
    let img = image::load_from_memory_with_format(&bytes, image::ImageFormat::Png)?.into_luma8();
    let (w, h) = img.dimensions();
    GrayImage::new(w as usize, h as usize, img.into_raw())
}

pub fn write_gray_png(path: impl AsRef<Path>, img: &GrayImage) -> Result<()> {
    let buf = image::GrayImage::from_raw(
        img.width() as u32,
        img.height() as u32,
        img.pixels().to_vec(),
    )
    .expect("pixel buffer matches dimensions");
    buf.save_with_format(path.as_ref(), image::ImageFormat::Png)?;
    Ok(())
}

/// Reads a mask PNG; pixels `>= 128` are foreground.
pub fn read_mask_png(path: impl AsRef<Path>) -> Result<BinaryMask> {
    let img = read_gray_png(path)?;
    let (w, h) = img.dims();
    BinaryMask::new(w, h, img.pixels().iter().map(|&v| v >= 128).collect())
}

/// Writes a mask as 0/255 PNG.
pub fn write_mask_png(path: impl AsRef<Path>, mask: &BinaryMask) -> Result<()> {
    write_gray_png(path, &mask.to_gray())
}

/// Reads an `MLF1` raster or a PNG (scaled by 1/255), detected by magic bytes.
pub fn read_likelihood(path: impl AsRef<Path>) -> Result<LikelihoodMap> {
    let bytes = read_bytes(path.as_ref())?;
    if bytes.starts_with(F32_MAGIC) {
        F32Raster::from_bytes(&bytes)?.to_likelihood()
    } else {
        let img = image::load_from_memory_with_format(&bytes, image::ImageFormat::Png)?.into_luma8();
        let (w, h) = img.dimensions();
        Ok(GrayImage::new(w as usize, h as usize, img.into_raw())?.to_likelihood())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn f32_roundtrip_bytes() {
        let r = F32Raster::new(3, 2, vec![0.0, 0.25, 1.0, f32::MIN_POSITIVE, 0.1, 0.7]).unwrap();
        let back = F32Raster::from_bytes(&r.to_bytes()).unwrap();
        assert_eq!(back, r);
        assert_eq!(r.to_bytes().len(), 12 + 4 * 6);
    }

    #[test]
    fn f32_format_errors_name_offsets() {
        let r = F32Raster::new(2, 2, vec![0.5; 4]).unwrap();
        let mut b = r.to_bytes();
        b[0] = b'X';
        assert!(matches!(F32Raster::from_bytes(&b), Err(Error::Format { offset: 0, .. })));

        let b = r.to_bytes();
        let short = &b[..b.len() - 3];
        assert!(matches!(F32Raster::from_bytes(short), Err(Error::Format { offset: 25, .. })));
        assert!(matches!(F32Raster::from_bytes(&b[..7]), Err(Error::Format { offset: 7, .. })));
    }

    #[test]
    fn png_and_raster_files() {
        let dir = tempfile::tempdir().unwrap();
        let m = BinaryMask::from_fn(5, 3, |x, y| (x + y) % 3 == 0);
        let p = dir.path().join("m.png");
        write_mask_png(&p, &m).unwrap();
        assert_eq!(read_mask_png(&p).unwrap(), m);

        let l = read_likelihood(&p).unwrap();
        assert_eq!(l.values()[0], 1.0);
        assert_eq!(l.values()[1], 0.0);

        let r = F32Raster::new(2, 1, vec![0.3, 0.9]).unwrap();
        let q = dir.path().join("r.mlf");
        write_f32_raster(&q, &r).unwrap();
        assert_eq!(read_f32_raster(&q).unwrap(), r);
        assert_eq!(read_likelihood(&q).unwrap().values()[0], f64::from(0.3f32));
    }
}
