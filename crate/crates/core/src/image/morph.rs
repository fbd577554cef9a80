use serde::{Deserialize, Serialize};

use super::{label_components, BinaryMask, Connectivity};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MorphOp {
    Erode,
    Dilate,
    Open,
    Close,
}

/// Binary morphology with a `(2r+1)`-square structuring element.
///
/// Pixels outside the raster are background. `Close` evaluates its dilation
/// on a canvas padded by `radius`, so the composite equals the closing on the
/// unbounded plane; a full mask is invariant under both `Open` and `Close`.
pub fn morph(mask: &BinaryMask, op: MorphOp, radius: usize) -> Result<BinaryMask> {
    if radius == 0 {
        return Err(Error::param("radius", "must be at least 1"));
    }
    Ok(match op {
        MorphOp::Erode => erode(mask, radius, false),
        MorphOp::Dilate => dilate(mask, radius),
        MorphOp::Open => dilate(&erode(mask, radius, false), radius),
        MorphOp::Close => {
            let (w, h) = mask.dims();
            let padded = BinaryMask::from_fn(w + 2 * radius, h + 2 * radius, |x, y| {
                mask.get_or_background(x as isize - radius as isize, y as isize - radius as isize)
            });
            erode(&dilate(&padded, radius), radius, false).crop(radius, radius, w, h)
        }
    })
}

pub(crate) fn dilate(mask: &BinaryMask, radius: usize) -> BinaryMask {
    separable(mask, radius, |count, _window| count > 0, false)
}

/// `border` is the value assumed outside the raster.
pub(crate) fn erode(mask: &BinaryMask, radius: usize, border: bool) -> BinaryMask {
    separable(mask, radius, |count, window| count == window, border)
}

// Row pass then column pass; `keep(count, window)` decides a pixel from the
// number of foreground samples in its (2r+1) window.
fn separable(
    mask: &BinaryMask,
    radius: usize,
    keep: impl Fn(usize, usize) -> bool,
    border: bool,
) -> BinaryMask {
    let (w, h) = mask.dims();
    let window = 2 * radius + 1;
    let r = radius as isize;
    let sample = |m: &BinaryMask, x: isize, y: isize| -> bool {
        if x < 0 || y < 0 || x >= w as isize || y >= h as isize {
            border
        } else {
            m.get(x as usize, y as usize)
        }
    };

    let mut rows = BinaryMask::empty(w, h);
    for y in 0..h as isize {
        let mut count = (-r..=r).filter(|&dx| sample(mask, dx, y)).count();
        for x in 0..w as isize {
            rows.set(x as usize, y as usize, keep(count, window));
            count -= usize::from(sample(mask, x - r, y));
            count += usize::from(sample(mask, x + r + 1, y));
        }
    }

    let mut out = BinaryMask::empty(w, h);
    for x in 0..w as isize {
        let mut count = (-r..=r).filter(|&dy| sample(&rows, x, dy)).count();
        for y in 0..h as isize {
            out.set(x as usize, y as usize, keep(count, window));
            count -= usize::from(sample(&rows, x, y - r));
            count += usize::from(sample(&rows, x, y + r + 1));
        }
    }
    out
}

/// Drops components with fewer than `min_size` pixels.
pub fn remove_small_objects(
    mask: &BinaryMask,
    min_size: usize,
    connectivity: Connectivity,
) -> Result<BinaryMask> {
    if min_size == 0 {
        return Err(Error::param("min_size", "must be at least 1"));
    }
    let labeling = label_components(mask, connectivity);
    let bits = labeling
        .labels
        .iter()
        .map(|&l| l != 0 && labeling.sizes[l as usize - 1] >= min_size)
        .collect();
    BinaryMask::new(mask.width(), mask.height(), bits)
}
