use serde::{Deserialize, Serialize};

use super::provider::{best_mask, MaskProvider, MaskRequest, Scale};
use super::{compose, plan_patches, FusionConfig, FusionResult};
use crate::error::{check_dims, Error, Result};
use crate::image::{BinaryMask, GrayImage};
use crate::prompts::{prompts_or_center, PromptConfig};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub fusion: FusionConfig,
    pub prompts: PromptConfig,
}

/// Prompt seed for request `id`.
fn request_seed(seed: u64, id: u64) -> u64 {
    seed ^ id.wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

fn ask(
    provider: &mut dyn MaskProvider,
    id: u64,
    image: &GrayImage,
    scale: Scale,
    prompts: &PromptConfig,
    seed: u64,
) -> Result<BinaryMask> {
    let cfg = PromptConfig {
        seed: request_seed(seed, id),
        ..*prompts
    };
    let points = prompts_or_center(image, &cfg)?;
    let req = MaskRequest {
        id,
        image,
        points: &points,
        scale,
    };
    let masks = provider.request(&req)?;
    let fail = |message: String| Error::Provider {
        provider: provider.name().to_owned(),
        request_id: id,
        message,
    };
    let best = best_mask(masks).ok_or_else(|| fail("response contains no masks".into()))?;
    check_dims(image.dims(), best.mask.dims()).map_err(|e| fail(e.to_string()))?;
    Ok(best.mask)
}

/// Full pipeline: prompts, one full-image request (id 0) to `provider_full`,
/// one request per grid cell (ids 1..) to `provider_patch`, then [`compose`].
///
/// `seed` replaces `cfg.prompts.seed`. Images smaller than the patch size
/// return the full-image mask with no decisions.
pub fn run_pipeline(
    image: &GrayImage,
    provider_full: &mut dyn MaskProvider,
    provider_patch: &mut dyn MaskProvider,
    cfg: &PipelineConfig,
    seed: u64,
) -> Result<FusionResult> {
    cfg.fusion.validate()?;
    cfg.prompts.validate()?;
    let mask_a = ask(provider_full, 0, image, Scale::Full, &cfg.prompts, seed)?;

    let (w, h) = image.dims();
    let p = cfg.fusion.patch_size;
    if w < p || h < p {
        log::warn!("image {w}x{h} is smaller than patch size {p}; using the full-image mask only");
        return Ok(FusionResult {
            final_mask: mask_a,
            decisions: Vec::new(),
            flagged_regions: Vec::new(),
        });
    }

    let grid = plan_patches(w, h, &cfg.fusion)?;
    let mut patches = Vec::with_capacity(grid.origins.len());
    for (i, &(x, y)) in grid.origins.iter().enumerate() {
        let crop = image.crop(x, y, p, p);
        let mask = ask(provider_patch, i as u64 + 1, &crop, Scale::Patch, &cfg.prompts, seed)?;
        patches.push(((x, y), mask));
    }
    compose(&mask_a, &patches, &grid, &cfg.fusion)
}
