use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{check_dims, Error, Result};
use crate::image::{gaussian_blur, quantize, resample, BinaryMask, GrayImage, ResizeMode};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentConfig {
    pub intensity: f64,
    /// Chance of applying the whole transform chain.
    pub probability: f64,
    pub seed: u64,
}

impl Default for AugmentConfig {
    /// Tuned values: probability 0.385, intensity 0.61.
    fn default() -> Self {
        Self {
            intensity: 0.61,
            probability: 0.385,
            seed: 0,
        }
    }
}

impl AugmentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.intensity > 0.0 && self.intensity <= 1.0) {
            return Err(Error::param("intensity", format!("{} is outside (0, 1]", self.intensity)));
        }
        if !(0.0..=1.0).contains(&self.probability) {
            return Err(Error::param("probability", format!("{} is outside [0, 1]", self.probability)));
        }
        Ok(())
    }
}

/// Parameters drawn for one application of the chain.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AugmentRecord {
    /// Area fraction of the crop.
    pub crop_scale: f64,
    /// Crop rectangle `(x, y, width, height)` in the input.
    pub crop: (usize, usize, usize, usize),
    pub blur_sigma: f64,
    pub blur_kernel: usize,
    pub brightness: f64,
    pub contrast: f64,
    pub flip_vertical: bool,
    pub flip_horizontal: bool,
    /// Noise sigma on unit-scaled values.
    pub noise_sigma: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Augmented {
    pub image: GrayImage,
    pub gt: BinaryMask,
    /// `None` when the chain was skipped.
    pub record: Option<AugmentRecord>,
}

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        rng.random_range(lo..=hi)
    } else {
        lo
    }
}

/// All transforms or none, with probability `cfg.probability`:
/// resized crop, blur, brightness/contrast, vertical and horizontal flips,
/// additive noise. Geometric steps act on image and mask alike; photometric
/// steps on the image only.
pub fn augment(image: &GrayImage, gt: &BinaryMask, cfg: &AugmentConfig) -> Result<Augmented> {
    cfg.validate()?;
    check_dims(image.dims(), gt.dims())?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    if rng.random::<f64>() >= cfg.probability {
        return Ok(Augmented {
            image: image.clone(),
            gt: gt.clone(),
            record: None,
        });
    }
    let i = cfg.intensity;
    let (w, h) = image.dims();

    // Resized crop keeping the aspect ratio.
    let crop_scale = uniform(&mut rng, 0.99 - 0.5 * i, 0.99);
    let side = crop_scale.sqrt();
    let cw = ((w as f64 * side).round() as usize).clamp(1, w);
    let ch = ((h as f64 * side).round() as usize).clamp(1, h);
    let cx = rng.random_range(0..=w - cw);
    let cy = rng.random_range(0..=h - ch);
    let unit = |x: usize, y: usize| f64::from(image.get(cx + x, cy + y)) / 255.0;
    let mut values = resample(cw, ch, unit, w, h, ResizeMode::Bilinear);
    let mask_crop = gt.crop(cx, cy, cw, ch);
    let mask_bits = resample(cw, ch, |x, y| f64::from(u8::from(mask_crop.get(x, y))), w, h, ResizeMode::Nearest);
    let mut mask = BinaryMask::new(w, h, mask_bits.iter().map(|&v| v > 0.5).collect())?;

    let blur_sigma = 5.0 * i;
    let blur_kernel = 5 + 2 * rng.random_range(0..=2usize);
    values = gaussian_blur(&values, w, h, blur_sigma, Some(blur_kernel));

    let brightness = uniform(&mut rng, 1.0 - 0.75 * i, 1.0 + 0.75 * i);
    let contrast = uniform(&mut rng, 1.0 - 0.5 * i, 1.0 + 0.5 * i);
    for v in &mut values {
        *v = (*v * brightness).clamp(0.0, 1.0);
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    for v in &mut values {
        *v = ((*v - mean) * contrast + mean).clamp(0.0, 1.0);
    }

    let flip_vertical = rng.random_bool(0.5 * i);
    let flip_horizontal = rng.random_bool(0.5 * i);
    if flip_vertical {
        values = (0..h).rev().flat_map(|y| values[y * w..(y + 1) * w].to_vec()).collect();
        mask = mask.flip_vertical();
    }
    if flip_horizontal {
        values = values
            .chunks(w)
            .flat_map(|row| row.iter().rev().copied().collect::<Vec<_>>())
            .collect();
        mask = mask.flip_horizontal();
    }

    let noise_sigma = 0.5 * i;
    let noise = Normal::new(0.0, noise_sigma).expect("valid sigma");
    for v in &mut values {
        *v = (*v + noise.sample(&mut rng)).clamp(0.0, 1.0);
    }

    let pixels = values.iter().map(|&v| quantize(v * 255.0)).collect();
    Ok(Augmented {
        image: GrayImage::new(w, h, pixels)?,
        gt: mask,
        record: Some(AugmentRecord {
            crop_scale,
            crop: (cx, cy, cw, ch),
            blur_sigma,
            blur_kernel,
            brightness,
            contrast,
            flip_vertical,
            flip_horizontal,
            noise_sigma,
        }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> (GrayImage, BinaryMask) {
        let gt = BinaryMask::from_fn(40, 30, |x, y| (x / 4 + y / 3) % 3 == 0);
        (GrayImage::from_fn(40, 30, |x, y| (x * 5 + y * 3) as u8), gt)
    }

    #[test]
    fn probability_zero_is_identity() {
        let (img, gt) = sample();
        let cfg = AugmentConfig {
            probability: 0.0,
            ..Default::default()
        };
        for seed in 0..20 {
            let a = augment(&img, &gt, &AugmentConfig { seed, ..cfg }).unwrap();
            assert_eq!((a.image, a.gt, a.record), (img.clone(), gt.clone(), None));
        }
    }

    #[test]
    fn record_ranges() {
        let (img, gt) = sample();
        for seed in 0..50 {
            let cfg = AugmentConfig {
                probability: 1.0,
                seed,
                ..Default::default()
            };
            let r = augment(&img, &gt, &cfg).unwrap().record.unwrap();
            let i = cfg.intensity;
            assert!((0.99 - 0.5 * i..=0.99).contains(&r.crop_scale));
            assert!([5, 7, 9].contains(&r.blur_kernel));
            assert!((1.0 - 0.75 * i..=1.0 + 0.75 * i).contains(&r.brightness));
            assert!((1.0 - 0.5 * i..=1.0 + 0.5 * i).contains(&r.contrast));
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let (img, gt) = sample();
        let cfg = AugmentConfig {
            probability: 1.0,
            seed: 9,
            ..Default::default()
        };
        assert_eq!(augment(&img, &gt, &cfg).unwrap(), augment(&img, &gt, &cfg).unwrap());
    }
}
