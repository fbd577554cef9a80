use serde::{Deserialize, Serialize};

use super::GrayImage;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResizeMode {
    Nearest,
    Bilinear,
}

/// Median over the `(2r+1)^2` neighbourhood, clamping coordinates to the border.
pub fn median_filter(img: &GrayImage, radius: usize) -> Result<GrayImage> {
    if radius == 0 {
        return Err(Error::param("radius", "must be at least 1"));
    }
    let (w, h) = img.dims();
    let r = radius as isize;
    let window = (2 * radius + 1).pow(2);
    let mut hist = [0u32; 256];
    let mut out = GrayImage::filled(w, h, 0);
    for y in 0..h {
        for x in 0..w {
            hist.fill(0);
            for dy in -r..=r {
                let sy = (y as isize + dy).clamp(0, h as isize - 1) as usize;
                for dx in -r..=r {
                    let sx = (x as isize + dx).clamp(0, w as isize - 1) as usize;
                    hist[img.get(sx, sy) as usize] += 1;
                }
            }
            let mid = (window / 2) as u32;
            let mut seen = 0u32;
            for (v, &c) in hist.iter().enumerate() {
                seen += c;
                if seen > mid {
                    out.set(x, y, v as u8);
                    break;
                }
            }
        }
    }
    Ok(out)
}

/// Resamples to `new_w` x `new_h`.
///
/// Bilinear sampling maps output pixel centres onto source pixel centres
/// (`src = (dst + 0.5) * scale - 0.5`) with edge clamping.
pub fn resize(img: &GrayImage, new_w: usize, new_h: usize, mode: ResizeMode) -> Result<GrayImage> {
    if new_w == 0 || new_h == 0 {
        return Err(Error::param("size", "target dimensions must be at least 1"));
    }
    let samples = resample(
        img.width(),
        img.height(),
        |x, y| f64::from(img.get(x, y)),
        new_w,
        new_h,
        mode,
    );
    let pixels = samples.iter().map(|&v| quantize(v)).collect();
    GrayImage::new(new_w, new_h, pixels)
}

pub(crate) fn quantize(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

pub(crate) fn resample(
    w: usize,
    h: usize,
    src: impl Fn(usize, usize) -> f64,
    new_w: usize,
    new_h: usize,
    mode: ResizeMode,
) -> Vec<f64> {
    if (w, h) == (new_w, new_h) {
        let mut out = Vec::with_capacity(w * h);
        for y in 0..h {
            for x in 0..w {
                out.push(src(x, y));
            }
        }
        return out;
    }
    let sx = w as f64 / new_w as f64;
    let sy = h as f64 / new_h as f64;
    let mut out = Vec::with_capacity(new_w * new_h);
    for oy in 0..new_h {
        for ox in 0..new_w {
            let v = match mode {
                ResizeMode::Nearest => {
                    let x = (((ox as f64 + 0.5) * sx).floor() as usize).min(w - 1);
                    let y = (((oy as f64 + 0.5) * sy).floor() as usize).min(h - 1);
                    src(x, y)
                }
                ResizeMode::Bilinear => {
                    let fx = ((ox as f64 + 0.5) * sx - 0.5).clamp(0.0, (w - 1) as f64);
                    let fy = ((oy as f64 + 0.5) * sy - 0.5).clamp(0.0, (h - 1) as f64);
                    let (x0, y0) = (fx.floor() as usize, fy.floor() as usize);
                    let (x1, y1) = ((x0 + 1).min(w - 1), (y0 + 1).min(h - 1));
                    let (tx, ty) = (fx - x0 as f64, fy - y0 as f64);
                    let top = src(x0, y0) * (1.0 - tx) + src(x1, y0) * tx;
                    let bottom = src(x0, y1) * (1.0 - tx) + src(x1, y1) * tx;
                    top * (1.0 - ty) + bottom * ty
                }
            };
            out.push(v);
        }
    }
    out
}

/// Separable Gaussian blur on a float canvas with clamped borders.
///
/// `kernel_side` must be odd; `None` uses `2*ceil(3*sigma)+1`. A
/// non-positive sigma returns the input unchanged.
pub fn gaussian_blur(
    values: &[f64],
    w: usize,
    h: usize,
    sigma: f64,
    kernel_side: Option<usize>,
) -> Vec<f64> {
    if sigma <= 0.0 {
        return values.to_vec();
    }
    let side = kernel_side.unwrap_or_else(|| 2 * (3.0 * sigma).ceil() as usize + 1);
    let half = (side / 2) as isize;
    let mut kernel: Vec<f64> = (-half..=half)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let norm: f64 = kernel.iter().sum();
    kernel.iter_mut().for_each(|k| *k /= norm);

    let mut tmp = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            tmp[y * w + x] = kernel
                .iter()
                .enumerate()
                .map(|(k, wgt)| {
                    let sx = (x as isize + k as isize - half).clamp(0, w as isize - 1) as usize;
                    wgt * values[y * w + sx]
                })
                .sum();
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            out[y * w + x] = kernel
                .iter()
                .enumerate()
                .map(|(k, wgt)| {
                    let sy = (y as isize + k as isize - half).clamp(0, h as isize - 1) as usize;
                    wgt * tmp[sy * w + x]
                })
                .sum();
        }
    }
    out
}
