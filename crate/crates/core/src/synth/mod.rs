//! Synthetic metal-layer images with exact ground truth, defect injection
//! with known ESD effect, and training-style augmentation.

mod augment;
mod defects;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{gaussian_blur, label_components, BinaryMask, Connectivity, GrayImage};

pub use augment::{augment, AugmentConfig, AugmentRecord, Augmented};
pub use defects::{inject_defect_set, inject_defects, DefectKind, DefectParams, DefectSite, DefectSpec, Injection};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Routing {
    /// Horizontal and vertical segments, straight or L-shaped.
    #[default]
    Manhattan,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub width: usize,
    pub height: usize,
    pub line_width_range: (usize, usize),
    pub line_count_range: (usize, usize),
    /// Per-line brightness as (mean, std).
    pub line_brightness: (f64, f64),
    /// Per-image background brightness as (mean, std).
    pub background_brightness: (f64, f64),
    pub noise_sigma: f64,
    pub blur_sigma: f64,
    pub routing: Routing,
    /// Minimum number of background pixels between two lines.
    pub min_spacing: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            width: 256,
            height: 256,
            line_width_range: (4, 8),
            line_count_range: (6, 12),
            line_brightness: (200.0, 12.0),
            background_brightness: (60.0, 8.0),
            noise_sigma: 6.0,
            blur_sigma: 1.0,
            routing: Routing::Manhattan,
            min_spacing: 3,
            seed: 0,
        }
    }
}

impl SynthConfig {
    /// The same configuration without blur and noise.
    pub fn noiseless(self) -> Self {
        Self {
            noise_sigma: 0.0,
            blur_sigma: 0.0,
            ..self
        }
    }

    /// Threshold separating lines from background in noiseless images.
    pub fn midpoint(&self) -> u8 {
        ((self.line_brightness.0 + self.background_brightness.0) / 2.0)
            .round()
            .clamp(0.0, 255.0) as u8
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::param("width", "image must be at least 1x1"));
        }
        let (wmin, wmax) = self.line_width_range;
        if wmin == 0 || wmin > wmax {
            return Err(Error::param("line_width_range", format!("({wmin}, {wmax}) is empty")));
        }
        let (cmin, cmax) = self.line_count_range;
        if cmin > cmax {
            return Err(Error::param("line_count_range", format!("({cmin}, {cmax}) is empty")));
        }
        if self.line_brightness.0 <= self.background_brightness.0 {
            return Err(Error::param(
                "line_brightness",
                "mean must exceed the background mean",
            ));
        }
        let m = self.midpoint();
        if m == 0 || m == 255 {
            return Err(Error::param("line_brightness", "midpoint leaves no room for both levels"));
        }
        for (name, (_, std)) in [
            ("line_brightness", self.line_brightness),
            ("background_brightness", self.background_brightness),
        ] {
            if !(std >= 0.0 && std.is_finite()) {
                return Err(Error::param(name, format!("std {std} is invalid")));
            }
        }
        if !(self.noise_sigma >= 0.0 && self.blur_sigma >= 0.0) {
            return Err(Error::param("noise_sigma", "sigmas must be non-negative"));
        }
        if self.min_spacing == 0 {
            return Err(Error::param("min_spacing", "lines must not touch"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthImage {
    pub image: GrayImage,
    pub gt: BinaryMask,
    pub line_count: usize,
    pub midpoint: u8,
}

/// Axis-aligned rectangle `[x0, x1) x [y0, y1)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Rect {
    x0: usize,
    y0: usize,
    x1: usize,
    y1: usize,
}

impl Rect {
    fn pixels(self) -> impl Iterator<Item = (usize, usize)> {
        (self.y0..self.y1).flat_map(move |y| (self.x0..self.x1).map(move |x| (x, y)))
    }
}

const MARGIN: usize = 2;
const PLACEMENT_TRIES: usize = 500;

fn random_line(rng: &mut ChaCha8Rng, cfg: &SynthConfig) -> Option<Vec<Rect>> {
    let (w, h) = (cfg.width, cfg.height);
    let lw = rng.random_range(cfg.line_width_range.0..=cfg.line_width_range.1);
    let usable = |dim: usize| dim.checked_sub(2 * MARGIN).filter(|&u| u > lw);
    let (uw, uh) = (usable(w)?, usable(h)?);
    let length = |rng: &mut ChaCha8Rng, u: usize| {
        let lo = (4 * lw).max(12).min(u);
        let hi = (u * 4 / 5).max(lo);
        rng.random_range(lo..=hi)
    };
    let horizontal = rng.random_bool(0.5);
    let bent = rng.random_bool(0.35);

    let (len_x, len_y) = if horizontal {
        (length(rng, uw), lw)
    } else {
        (lw, length(rng, uh))
    };
    let x0 = MARGIN + rng.random_range(0..=uw - len_x);
    let y0 = MARGIN + rng.random_range(0..=uh - len_y);
    let main = Rect {
        x0,
        y0,
        x1: x0 + len_x,
        y1: y0 + len_y,
    };
    if !bent {
        return Some(vec![main]);
    }

    // A perpendicular arm starting at one end of the main segment.
    let at_end = rng.random_bool(0.5);
    let positive = rng.random_bool(0.5);
    let arm = if horizontal {
        let ax = if at_end { main.x1 - lw } else { main.x0 };
        let len = length(rng, uh);
        let (ay0, ay1) = if positive {
            (main.y0, main.y0 + len)
        } else {
            (main.y1.checked_sub(len)?, main.y1)
        };
        Rect {
            x0: ax,
            y0: ay0,
            x1: ax + lw,
            y1: ay1,
        }
    } else {
        let ay = if at_end { main.y1 - lw } else { main.y0 };
        let len = length(rng, uw);
        let (ax0, ax1) = if positive {
            (main.x0, main.x0 + len)
        } else {
            (main.x1.checked_sub(len)?, main.x1)
        };
        Rect {
            x0: ax0,
            y0: ay,
            x1: ax1,
            y1: ay + lw,
        }
    };
    if arm.x0 < MARGIN || arm.y0 < MARGIN || arm.x1 > w - MARGIN || arm.y1 > h - MARGIN {
        return None;
    }
    Some(vec![main, arm])
}

/// Random Manhattan lines, rendered with per-line brightness, blurred and
/// noised. Deterministic per seed.
pub fn generate(cfg: &SynthConfig) -> Result<SynthImage> {
    cfg.validate()?;
    let (w, h) = (cfg.width, cfg.height);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let target = rng.random_range(cfg.line_count_range.0..=cfg.line_count_range.1);
    let spacing = cfg.min_spacing;

    let mut gt = BinaryMask::empty(w, h);
    let mut blocked = BinaryMask::empty(w, h);
    let mut lines: Vec<Vec<Rect>> = Vec::with_capacity(target);
    'lines: while lines.len() < target {
        for _ in 0..PLACEMENT_TRIES {
            let Some(rects) = random_line(&mut rng, cfg) else {
                continue;
            };
            if rects.iter().flat_map(|r| r.pixels()).any(|(x, y)| blocked.get(x, y)) {
                continue;
            }
            for r in &rects {
                for (x, y) in r.pixels() {
                    gt.set(x, y, true);
                }
                let grown = Rect {
                    x0: r.x0.saturating_sub(spacing),
                    y0: r.y0.saturating_sub(spacing),
                    x1: (r.x1 + spacing).min(w),
                    y1: (r.y1 + spacing).min(h),
                };
                for (x, y) in grown.pixels() {
                    blocked.set(x, y, true);
                }
            }
            lines.push(rects);
            continue 'lines;
        }
        if lines.len() >= cfg.line_count_range.0 {
            break;
        }
        return Err(Error::Placement(format!(
            "placed {} of at least {} lines in a {w}x{h} image",
            lines.len(),
            cfg.line_count_range.0
        )));
    }

    let m = f64::from(cfg.midpoint());
    let line_dist = Normal::new(cfg.line_brightness.0, cfg.line_brightness.1).expect("valid std");
    let bg_dist = Normal::new(cfg.background_brightness.0, cfg.background_brightness.1).expect("valid std");
    let bg = bg_dist.sample(&mut rng).round().clamp(0.0, m - 1.0);
    let mut canvas = vec![bg; w * h];
    for rects in &lines {
        let level = line_dist.sample(&mut rng).round().clamp(m, 255.0);
        for (x, y) in rects.iter().flat_map(|r| r.pixels()) {
            canvas[y * w + x] = level;
        }
    }
    let mut canvas = gaussian_blur(&canvas, w, h, cfg.blur_sigma, None);
    if cfg.noise_sigma > 0.0 {
        let noise = Normal::new(0.0, cfg.noise_sigma).expect("valid sigma");
        for v in &mut canvas {
            *v += noise.sample(&mut rng);
        }
    }
    let pixels = canvas.iter().map(|&v| crate::image::quantize(v)).collect();
    let image = GrayImage::new(w, h, pixels)?;
    let line_count = label_components(&gt, Connectivity::Eight).component_count;
    Ok(SynthImage {
        image,
        gt,
        line_count,
        midpoint: cfg.midpoint(),
    })
}
