//! Multi-scale mask fusion: a full-image mask (model A) and overlapping
//! upscaled patches (model B) are combined patch by patch, and patches where
//! both models produce speckle noise are flagged for manual inspection.

mod pipeline;
mod provider;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{check_dims, Error, Result};
use crate::image::{label_components, BinaryMask, Connectivity};

pub use pipeline::{run_pipeline, PipelineConfig};
pub use provider::{
    FnProvider, MaskProvider, MaskRequest, ProviderMask, ProviderRequest, ProviderResponse, Scale,
    ScoredMask, SubprocessProvider, DEFAULT_TIMEOUT,
};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FusionConfig {
    pub patch_size: usize,
    pub min_overlap_fraction: f64,
    /// Largest component size counted as a speckle.
    pub speckle_max_size: usize,
    /// Speckle count at which a full-image mask patch counts as speckled.
    pub speckle_count_threshold_full: usize,
    /// Speckle count at which a patch-model mask counts as speckled.
    pub speckle_count_threshold_patch: usize,
    pub agreement_threshold: f64,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            patch_size: 512,
            min_overlap_fraction: 0.10,
            speckle_max_size: 16,
            speckle_count_threshold_full: 50,
            speckle_count_threshold_patch: 50,
            agreement_threshold: 0.60,
        }
    }
}

impl FusionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.patch_size < 32 {
            return Err(Error::param("patch_size", format!("{} is below 32", self.patch_size)));
        }
        if !(self.min_overlap_fraction > 0.0 && self.min_overlap_fraction < 1.0) {
            return Err(Error::param(
                "min_overlap_fraction",
                format!("{} is outside (0, 1)", self.min_overlap_fraction),
            ));
        }
        if self.max_stride() == 0 {
            return Err(Error::param("min_overlap_fraction", "leaves no usable stride"));
        }
        if self.speckle_max_size == 0 {
            return Err(Error::param("speckle_max_size", "must be positive"));
        }
        if self.speckle_count_threshold_full == 0 || self.speckle_count_threshold_patch == 0 {
            return Err(Error::param("speckle_count_threshold", "must be positive"));
        }
        if !(self.agreement_threshold > 0.0 && self.agreement_threshold <= 1.0) {
            return Err(Error::param(
                "agreement_threshold",
                format!("{} is outside (0, 1]", self.agreement_threshold),
            ));
        }
        Ok(())
    }

    pub fn max_stride(&self) -> usize {
        (self.patch_size as f64 * (1.0 - self.min_overlap_fraction)).floor() as usize
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatchGrid {
    pub image_width: usize,
    pub image_height: usize,
    pub patch_size: usize,
    /// Top-left corners, row-major over `ys` then `xs`.
    pub origins: Vec<(usize, usize)>,
    pub xs: Vec<usize>,
    pub ys: Vec<usize>,
    pub stride_x: usize,
    pub stride_y: usize,
}

fn axis_origins(dim: usize, patch: usize, max_stride: usize) -> (Vec<usize>, usize) {
    let span = dim - patch;
    if span == 0 {
        return (vec![0], 0);
    }
    let n = span.div_ceil(max_stride) + 1;
    let origins = (0..n).map(|i| i * span / (n - 1)).collect();
    (origins, span / (n - 1))
}

/// Overlapping patch grid covering a `width x height` image.
///
/// Per axis `n = ceil((dim - p) / max_stride) + 1` patches are spread evenly
/// with origins `floor(i * (dim - p) / (n - 1))`, so the last patch ends at
/// the border and no gap exceeds `max_stride`.
pub fn plan_patches(width: usize, height: usize, cfg: &FusionConfig) -> Result<PatchGrid> {
    cfg.validate()?;
    let p = cfg.patch_size;
    if width < p || height < p {
        return Err(Error::ImageSmallerThanPatch {
            width,
            height,
            patch_size: p,
        });
    }
    let (xs, stride_x) = axis_origins(width, p, cfg.max_stride());
    let (ys, stride_y) = axis_origins(height, p, cfg.max_stride());
    let origins = ys.iter().flat_map(|&y| xs.iter().map(move |&x| (x, y))).collect();
    Ok(PatchGrid {
        image_width: width,
        image_height: height,
        patch_size: p,
        origins,
        xs,
        ys,
        stride_x,
        stride_y,
    })
}

/// Number of 8-connected components with at most `max_size` pixels.
pub fn speckle_count(patch: &BinaryMask, max_size: usize) -> usize {
    label_components(patch, Connectivity::Eight)
        .sizes
        .iter()
        .filter(|&&s| s <= max_size)
        .count()
}

/// Fraction of positions where `a` and `b` agree.
pub fn agreement(a: &BinaryMask, b: &BinaryMask) -> Result<f64> {
    check_dims(a.dims(), b.dims())?;
    let same = a.bits().iter().zip(b.bits()).filter(|(x, y)| x == y).count();
    Ok(same as f64 / a.bits().len() as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PatchChoice {
    UseA,
    UseB,
    Flagged,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatchDecision {
    pub origin: (usize, usize),
    pub choice: PatchChoice,
    pub speckles_a: usize,
    pub speckles_b: usize,
    pub agreement: f64,
}

/// The decision table on precomputed statistics.
pub fn choose(speckles_a: usize, speckles_b: usize, agreement: f64, cfg: &FusionConfig) -> PatchChoice {
    let a_speckled = speckles_a >= cfg.speckle_count_threshold_full;
    let b_speckled = speckles_b >= cfg.speckle_count_threshold_patch;
    match (a_speckled, b_speckled) {
        (true, true) => PatchChoice::Flagged,
        (true, false) => PatchChoice::UseB,
        (false, true) => PatchChoice::UseA,
        (false, false) if agreement >= cfg.agreement_threshold => PatchChoice::UseB,
        (false, false) if speckles_b <= speckles_a => PatchChoice::UseB,
        (false, false) => PatchChoice::UseA,
    }
}

/// Decides between the model-A crop and the model-B patch of one cell.
///
/// The returned origin is `(0, 0)`; [`compose`] fills in the cell origin.
pub fn decide(patch_a: &BinaryMask, patch_b: &BinaryMask, cfg: &FusionConfig) -> Result<PatchDecision> {
    let agreement = agreement(patch_a, patch_b)?;
    let speckles_a = speckle_count(patch_a, cfg.speckle_max_size);
    let speckles_b = speckle_count(patch_b, cfg.speckle_max_size);
    Ok(PatchDecision {
        origin: (0, 0),
        choice: choose(speckles_a, speckles_b, agreement, cfg),
        speckles_a,
        speckles_b,
        agreement,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Region {
    pub x: usize,
    pub y: usize,
    pub width: usize,
    pub height: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FusionResult {
    #[serde(skip)]
    pub final_mask: BinaryMask,
    pub decisions: Vec<PatchDecision>,
    pub flagged_regions: Vec<Region>,
}

/// For each pixel along one axis, the index of the nearest patch center;
/// ties go to the smaller index.
fn nearest_centers(dim: usize, origins: &[usize], patch: usize) -> Vec<usize> {
    (0..dim)
        .map(|p| {
            // Doubled coordinates keep pixel and patch centers integral.
            let c = 2 * p as i64 + 1;
            let mut best = 0;
            let mut best_d = i64::MAX;
            for (i, &o) in origins.iter().enumerate() {
                let d = (c - (2 * o + patch) as i64).abs();
                if d < best_d {
                    best = i;
                    best_d = d;
                }
            }
            best
        })
        .collect()
}

/// Fuses `mask_a_full` with per-cell patches of model B.
///
/// Every grid origin needs exactly one patch. Each output pixel comes from
/// the chosen mask of the cell whose center is nearest; flagged cells
/// contribute model-A pixels.
pub fn compose(
    mask_a_full: &BinaryMask,
    patches_b: &[((usize, usize), BinaryMask)],
    grid: &PatchGrid,
    cfg: &FusionConfig,
) -> Result<FusionResult> {
    check_dims((grid.image_width, grid.image_height), mask_a_full.dims())?;
    let p = grid.patch_size;
    let index: HashMap<(usize, usize), usize> =
        grid.origins.iter().enumerate().map(|(i, &o)| (o, i)).collect();
    let mut by_cell: Vec<Option<&BinaryMask>> = vec![None; grid.origins.len()];
    for (origin, patch) in patches_b {
        let &i = index.get(origin).ok_or(Error::MisalignedPatch { origin: *origin })?;
        if by_cell[i].is_some() {
            return Err(Error::MisalignedPatch { origin: *origin });
        }
        check_dims((p, p), patch.dims())?;
        by_cell[i] = Some(patch);
    }

    let mut decisions = Vec::with_capacity(grid.origins.len());
    let mut chosen = Vec::with_capacity(grid.origins.len());
    let mut flagged_regions = Vec::new();
    for (i, &(x, y)) in grid.origins.iter().enumerate() {
        let b = by_cell[i].ok_or(Error::MisalignedPatch { origin: (x, y) })?;
        let a = mask_a_full.crop(x, y, p, p);
        let d = PatchDecision {
            origin: (x, y),
            ..decide(&a, b, cfg)?
        };
        chosen.push(match d.choice {
            PatchChoice::UseB => b.clone(),
            PatchChoice::UseA => a,
            PatchChoice::Flagged => {
                flagged_regions.push(Region {
                    x,
                    y,
                    width: p,
                    height: p,
                });
                a
            }
        });
        decisions.push(d);
    }

    let col = nearest_centers(grid.image_width, &grid.xs, p);
    let row = nearest_centers(grid.image_height, &grid.ys, p);
    let nx = grid.xs.len();
    let final_mask = BinaryMask::from_fn(grid.image_width, grid.image_height, |x, y| {
        let (i, j) = (col[x], row[y]);
        let (ox, oy) = (grid.xs[i], grid.ys[j]);
        chosen[j * nx + i].get(x - ox, y - oy)
    });
    Ok(FusionResult {
        final_mask,
        decisions,
        flagged_regions,
    })
}
