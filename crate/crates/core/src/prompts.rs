//! Point prompts from classical bright-structure detection.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{median_filter, morph, remove_small_objects, BinaryMask, Connectivity, GrayImage, MorphOp};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PromptConfig {
    /// Brightness quantile used as the threshold.
    pub quantile: f64,
    pub min_object_size: usize,
    pub morph_radius: usize,
    pub n_points: usize,
    pub seed: u64,
}

impl Default for PromptConfig {
    fn default() -> Self {
        Self {
            quantile: 0.95,
            min_object_size: 32,
            morph_radius: 1,
            n_points: 5,
            seed: 0,
        }
    }
}

impl PromptConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.quantile > 0.0 && self.quantile < 1.0) {
            return Err(Error::param("quantile", format!("{} is outside (0, 1)", self.quantile)));
        }
        if self.n_points == 0 {
            return Err(Error::param("n_points", "must be at least 1"));
        }
        if self.min_object_size == 0 {
            return Err(Error::param("min_object_size", "must be at least 1"));
        }
        if self.morph_radius == 0 {
            return Err(Error::param("morph_radius", "must be at least 1"));
        }
        Ok(())
    }
}

/// Smallest present pixel value `v` with at most `(1 - q) * N` pixels `>= v`;
/// the maximum value when even that is exceeded.
pub fn quantile_threshold(img: &GrayImage, q: f64) -> u8 {
    let mut hist = [0usize; 256];
    for &v in img.pixels() {
        hist[v as usize] += 1;
    }
    let budget = (1.0 - q) * img.pixels().len() as f64;
    let mut above = 0usize;
    let mut best = None;
    for v in (0..256).rev() {
        if hist[v] == 0 {
            continue;
        }
        above += hist[v];
        if above as f64 > budget {
            break;
        }
        best = Some(v as u8);
    }
    best.unwrap_or_else(|| *img.pixels().iter().max().expect("non-empty image"))
}

/// Median filter, quantile threshold, small-object removal, open, close.
///
/// A raw threshold covering more than half the image yields an empty mask.
pub fn foreground_seed_mask(img: &GrayImage, cfg: &PromptConfig) -> Result<BinaryMask> {
    cfg.validate()?;
    let denoised = median_filter(img, 1)?;
    let t = quantile_threshold(&denoised, cfg.quantile);
    let raw = crate::image::threshold(&denoised, t);
    let (w, h) = img.dims();
    if 2 * raw.count() > w * h {
        return Ok(BinaryMask::empty(w, h));
    }
    let kept = remove_small_objects(&raw, cfg.min_object_size, Connectivity::Eight)?;
    let opened = morph(&kept, MorphOp::Open, cfg.morph_radius)?;
    morph(&opened, MorphOp::Close, cfg.morph_radius)
}

/// Up to `n_points` distinct foreground pixels as `(x, y)`.
///
/// With at most `n_points` foreground pixels all are returned in row-major
/// order; otherwise they are drawn uniformly without replacement.
pub fn sample_prompts(seed_mask: &BinaryMask, cfg: &PromptConfig) -> Vec<(usize, usize)> {
    let w = seed_mask.width();
    let fg: Vec<usize> = seed_mask.foreground_indices().collect();
    let picked: Vec<usize> = if fg.len() <= cfg.n_points {
        fg
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rand::seq::index::sample(&mut rng, fg.len(), cfg.n_points)
            .into_iter()
            .map(|i| fg[i])
            .collect()
    };
    picked.into_iter().map(|i| (i % w, i / w)).collect()
}

/// Seed mask then sampling; falls back to the image center when the mask is empty.
pub fn prompts_or_center(img: &GrayImage, cfg: &PromptConfig) -> Result<Vec<(usize, usize)>> {
    let points = sample_prompts(&foreground_seed_mask(img, cfg)?, cfg);
    if points.is_empty() {
        Ok(vec![(img.width() / 2, img.height() / 2)])
    } else {
        Ok(points)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_image_gives_empty_mask() {
        let img = GrayImage::filled(40, 40, 128);
        assert!(foreground_seed_mask(&img, &PromptConfig::default()).unwrap().is_empty());
        assert_eq!(prompts_or_center(&img, &PromptConfig::default()).unwrap(), vec![(20, 20)]);
    }

    #[test]
    fn bright_bars_are_found() {
        // Two 4-pixel-wide bars, 6.25% of the image.
        let img = GrayImage::from_fn(64, 64, |x, y| {
            if (10..14).contains(&y) && (8..40).contains(&x) || (40..44).contains(&x) && (20..52).contains(&y) {
                220
            } else {
                40
            }
        });
        let gt = crate::image::threshold(&img, 128);
        let m = foreground_seed_mask(&img, &PromptConfig::default()).unwrap();
        assert!(m.is_subset_of(&gt));
        assert!(m.count() * 10 >= gt.count() * 9);
    }

    #[test]
    fn small_masks_return_everything() {
        let mut m = BinaryMask::empty(10, 10);
        for (x, y) in [(9, 0), (1, 1), (5, 5), (0, 9), (3, 2)] {
            m.set(x, y, true);
        }
        let pts = sample_prompts(&m, &PromptConfig::default());
        assert_eq!(pts, vec![(9, 0), (1, 1), (3, 2), (5, 5), (0, 9)]);
        assert!(sample_prompts(&BinaryMask::empty(4, 4), &PromptConfig::default()).is_empty());
    }

    #[test]
    fn sampling_is_seeded() {
        let m = BinaryMask::filled(100, 100, true);
        let cfg = PromptConfig::default();
        let a = sample_prompts(&m, &cfg);
        assert_eq!(a, sample_prompts(&m, &cfg));
        let b = sample_prompts(&m, &PromptConfig { seed: 1, ..cfg });
        assert_ne!(a, b);
        let mut dedup = a.clone();
        dedup.sort();
        dedup.dedup();
        assert_eq!(dedup.len(), 5);
    }
}
