use super::GradientMap;
use crate::error::{Error, Result};
use crate::image::{same_dims, LikelihoodMap};

/// Mean binary cross-entropy of prediction `l` against target `g`.
///
/// Predictions are clamped to `[clamp, 1 - clamp]`; the gradient is zero
/// wherever the clamp is active.
pub fn bce_loss(g: &LikelihoodMap, l: &LikelihoodMap, clamp: f64) -> Result<(f64, GradientMap)> {
    same_dims(g.dims(), l.dims())?;
    if !(clamp > 0.0 && clamp <= 0.01) {
        return Err(Error::param("bce_clamp", format!("{clamp} is outside (0, 0.01]")));
    }
    let n = g.values().len() as f64;
    let mut sum = 0.0;
    let mut grad = GradientMap::zeros(g.width(), g.height());
    for (i, (&t, &p)) in g.values().iter().zip(l.values()).enumerate() {
        let pc = p.clamp(clamp, 1.0 - clamp);
        sum += t * pc.ln() + (1.0 - t) * (1.0 - pc).ln();
        if p > clamp && p < 1.0 - clamp {
            grad.values[i] = -(t / pc - (1.0 - t) / (1.0 - pc)) / n;
        }
    }
    Ok((-sum / n, grad))
}

/// Soft Dice loss `1 - (2*sum(p*g) + s) / (sum(p) + sum(g) + s)`.
pub fn dice_loss(g: &LikelihoodMap, l: &LikelihoodMap, smooth: f64) -> Result<(f64, GradientMap)> {
    same_dims(g.dims(), l.dims())?;
    if !(smooth > 0.0) {
        return Err(Error::param("dice_smooth", "must be positive"));
    }
    let (mut inter, mut sp, mut sg) = (0.0, 0.0, 0.0);
    for (&t, &p) in g.values().iter().zip(l.values()) {
        inter += p * t;
        sp += p;
        sg += t;
    }
    let num = 2.0 * inter + smooth;
    let den = sp + sg + smooth;
    let mut grad = GradientMap::zeros(g.width(), g.height());
    for (gv, &t) in grad.values.iter_mut().zip(g.values()) {
        *gv = -(2.0 * t * den - num) / (den * den);
    }
    Ok((1.0 - num / den, grad))
}
