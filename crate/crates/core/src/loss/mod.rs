//! Segmentation losses: BCE and Dice pixel losses, the Betti matching
//! topological loss, and their blend
//! `alpha * BCE + (1 - alpha) * Dice + lambda * Betti`.

mod betti;
mod pixel;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::LikelihoodMap;

pub use betti::{
    betti_loss, comparison_image, induced_matching, BettiMatchConfig, BettiMatchResult,
    FiltrationType, MatchedPair, TaggedBar,
};
pub use pixel::{bce_loss, dice_loss};

/// Per-pixel derivative raster; values are unbounded.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradientMap {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
}

impl GradientMap {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            values: vec![0.0; width * height],
        }
    }

    fn axpy(&mut self, a: f64, other: &GradientMap) {
        for (v, o) in self.values.iter_mut().zip(&other.values) {
            *v += a * o;
        }
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossConfig {
    /// BCE weight within the pixel loss, in (0, 1).
    pub alpha: f64,
    /// Weight of the Betti matching term, in [0, 1].
    pub lambda: f64,
    pub betti: BettiMatchConfig,
    pub bce_clamp: f64,
    pub dice_smooth: f64,
}

impl Default for LossConfig {
    /// Tuned values: alpha 0.6, lambda 0.375.
    fn default() -> Self {
        Self {
            alpha: 0.6,
            lambda: 0.375,
            betti: BettiMatchConfig::default(),
            bce_clamp: 1e-7,
            dice_smooth: 1.0,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::param("alpha", format!("{} is outside (0, 1)", self.alpha)));
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::param("lambda", format!("{} is outside [0, 1]", self.lambda)));
        }
        self.betti.validate()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub bce: f64,
    pub dice: f64,
    pub pixel: f64,
    pub betti: f64,
}

#[derive(Clone, Debug)]
pub struct SegLoss {
    pub value: f64,
    pub grad: GradientMap,
    pub breakdown: LossBreakdown,
    pub betti: BettiMatchResult,
}

/// Blended segmentation loss of prediction `l` against ground truth `g`.
pub fn seg_loss(g: &LikelihoodMap, l: &LikelihoodMap, cfg: &LossConfig) -> Result<SegLoss> {
    cfg.validate()?;
    let (bce, bce_grad) = bce_loss(g, l, cfg.bce_clamp)?;
    let (dice, dice_grad) = dice_loss(g, l, cfg.dice_smooth)?;
    let betti = betti_loss(g, l, &cfg.betti)?;

    let breakdown = blend(cfg.alpha, bce, dice, betti.loss);
    let mut grad = GradientMap::zeros(g.width(), g.height());
    grad.axpy(cfg.alpha, &bce_grad);
    grad.axpy(1.0 - cfg.alpha, &dice_grad);
    if cfg.lambda != 0.0 {
        grad.axpy(cfg.lambda, &betti.grad);
    }
    Ok(SegLoss {
        value: breakdown.pixel + cfg.lambda * breakdown.betti,
        grad,
        breakdown,
        betti,
    })
}

fn blend(alpha: f64, bce: f64, dice: f64, betti: f64) -> LossBreakdown {
    LossBreakdown {
        bce,
        dice,
        pixel: alpha * bce + (1.0 - alpha) * dice,
        betti,
    }
}
