//! The subcommands as library functions. Each returns its report and writes
//! its outputs; `main` only parses flags.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use metalseg::fusion::{run_pipeline, FusionResult, PatchDecision, PipelineConfig, Region, SubprocessProvider};
use metalseg::io::{read_gray_png, read_likelihood, read_mask_png, write_f32_raster, write_gray_png, write_mask_png, F32Raster};
use metalseg::loss::{seg_loss, LossBreakdown, LossConfig, MatchedPair, TaggedBar};
use metalseg::prompts::{foreground_seed_mask, sample_prompts, PromptConfig};
use metalseg::report::{
    evaluate_pair, timestamp_now, to_stable_json, CountsManifest, EvaluationConfig, EvaluationReport,
};
use metalseg::synth::{augment, generate, inject_defect_set, AugmentConfig, AugmentRecord, DefectSite, DefectSpec, SynthConfig};
use metalseg::{barcode, Barcode, EsdReport, Filtration};
use serde::Serialize;

use crate::error::{CliError, CliResult};

/// Writes `text` to `path`, or to stdout when `path` is `-`.
pub fn write_output(path: &Path, text: &str) -> CliResult<()> {
    if path == Path::new("-") {
        print!("{text}");
        return Ok(());
    }
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn png_names(dir: &Path) -> CliResult<Vec<String>> {
    let mut names = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| CliError::io(dir, e))? {
        let entry = entry.map_err(|e| CliError::io(dir, e))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if name.to_ascii_lowercase().ends_with(".png") {
            names.push(name);
        }
    }
    names.sort();
    Ok(names)
}

/// Per-image and pooled metrics of every `pred_dir/X.png` against `gt_dir/X.png`.
pub fn evaluate(pred_dir: &Path, gt_dir: &Path, cfg: &EvaluationConfig) -> CliResult<EvaluationReport> {
    let preds = png_names(pred_dir)?;
    let gts = png_names(gt_dir)?;
    for (names, other, dir, other_dir) in [(&preds, &gts, pred_dir, gt_dir), (&gts, &preds, gt_dir, pred_dir)] {
        if let Some(orphan) = names.iter().find(|n| other.binary_search(n).is_err()) {
            return Err(CliError::Orphan {
                orphan: dir.join(orphan),
                missing_in: other_dir.to_owned(),
            });
        }
    }
    let mut images = Vec::with_capacity(gts.len());
    for name in &gts {
        let pred = read_mask_png(pred_dir.join(name))?;
        let gt = read_mask_png(gt_dir.join(name))?;
        let id = name.rsplit_once('.').map_or(name.as_str(), |(stem, _)| stem);
        let eval = evaluate_pair(id, &pred, &gt, cfg).map_err(|source| CliError::Image {
            name: name.clone(),
            source,
        })?;
        images.push(eval);
    }
    Ok(EvaluationReport::new(*cfg, images, timestamp_now()))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RateSummary {
    pub name: String,
    pub esd: EsdReport,
    /// Two decimals.
    pub rate_display: String,
}

/// Aggregate rate of a per-image counts manifest.
pub fn rate(manifest: &Path) -> CliResult<RateSummary> {
    let text = fs::read_to_string(manifest).map_err(|e| CliError::io(manifest, e))?;
    let m: CountsManifest = serde_json::from_str(&text).map_err(metalseg::Error::from)?;
    let esd = m.aggregate();
    Ok(RateSummary {
        name: m.name,
        rate_display: esd.rate_display(),
        esd,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FlagReport {
    pub width: usize,
    pub height: usize,
    pub seed: u64,
    pub flagged_regions: Vec<Region>,
    pub decisions: Vec<PatchDecision>,
}

pub struct FuseArgs<'a> {
    pub image: &'a Path,
    pub provider_full: &'a str,
    pub provider_patch: &'a str,
    pub config: PipelineConfig,
    pub seed: u64,
    pub timeout: Duration,
    pub out_mask: &'a Path,
    pub out_flags: &'a Path,
}

/// Runs the multi-scale pipeline against two provider processes.
pub fn fuse(args: &FuseArgs<'_>) -> CliResult<FusionResult> {
    let image = read_gray_png(args.image)?;
    let mut full = SubprocessProvider::spawn("provider-full", args.provider_full, args.timeout)?;
    let mut patch = SubprocessProvider::spawn("provider-patch", args.provider_patch, args.timeout)?;
    let result = run_pipeline(&image, &mut full, &mut patch, &args.config, args.seed)?;
    write_mask_png(args.out_mask, &result.final_mask)?;
    let flags = FlagReport {
        width: image.width(),
        height: image.height(),
        seed: args.seed,
        flagged_regions: result.flagged_regions.clone(),
        decisions: result.decisions.clone(),
    };
    write_output(args.out_flags, &to_stable_json(&flags)?)?;
    Ok(result)
}

#[derive(Clone, Debug, Serialize)]
pub struct BettiMatchReport {
    /// Betti matching loss.
    pub loss: f64,
    /// Blended segmentation loss.
    pub total: f64,
    pub breakdown: LossBreakdown,
    pub config: LossConfig,
    pub matched: Vec<MatchedPair>,
    pub unmatched_pred: Vec<TaggedBar>,
    pub unmatched_gt: Vec<TaggedBar>,
    pub noise_pred: Vec<TaggedBar>,
}

/// Betti matching of `pred` against `gt`; optionally writes the gradient of
/// the Betti loss with respect to `pred` as an MLF1 raster.
pub fn betti_match(gt: &Path, pred: &Path, cfg: &LossConfig, grad_out: Option<&Path>) -> CliResult<BettiMatchReport> {
    let g = read_likelihood(gt)?;
    let l = read_likelihood(pred)?;
    let s = seg_loss(&g, &l, cfg)?;
    if let Some(path) = grad_out {
        write_f32_raster(path, &F32Raster::from_gradient(&s.betti.grad))?;
    }
    Ok(BettiMatchReport {
        loss: s.betti.loss,
        total: s.value,
        breakdown: s.breakdown,
        config: *cfg,
        matched: s.betti.matched,
        unmatched_pred: s.betti.unmatched_pred,
        unmatched_gt: s.betti.unmatched_gt,
        noise_pred: s.betti.noise_pred,
    })
}

/// Barcode with bars sorted by `(dim, birth, death, birth_pixel)`.
pub fn persistence(raster: &Path, filtration: Filtration) -> CliResult<Barcode> {
    let map = read_likelihood(raster)?;
    let mut bc = barcode(&map, filtration)?;
    bc.sort_stable();
    Ok(bc)
}

/// Prompt points `[x, y]` sampled from the seed mask; empty when the image
/// has no distinguishable bright structure.
pub fn prompts(image: &Path, cfg: &PromptConfig) -> CliResult<Vec<[usize; 2]>> {
    let img = read_gray_png(image)?;
    let mask = foreground_seed_mask(&img, cfg)?;
    Ok(sample_prompts(&mask, cfg).into_iter().map(|(x, y)| [x, y]).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SynthEntry {
    pub image_id: String,
    pub seed: u64,
    pub image: PathBuf,
    pub gt: PathBuf,
    pub line_count: usize,
    pub midpoint: u8,
    pub defects: Vec<DefectSite>,
    pub expected_esd_delta: EsdReport,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SynthManifest {
    pub config: SynthConfig,
    pub defect_specs: Vec<DefectSpec>,
    pub entries: Vec<SynthEntry>,
}

/// `count` images with seeds `cfg.seed..cfg.seed + count` under
/// `out_dir/images` and `out_dir/gt`, plus `out_dir/manifest.json`.
pub fn synth(cfg: &SynthConfig, defects: &[DefectSpec], count: usize, out_dir: &Path) -> CliResult<SynthManifest> {
    let mut entries = Vec::with_capacity(count);
    for i in 0..count as u64 {
        let seed = cfg.seed + i;
        let s = generate(&SynthConfig { seed, ..*cfg })?;
        let (image, sites, delta) = if defects.is_empty() {
            let delta = EsdReport::from_counts(0, 0, 0, 0, s.line_count as u64);
            (s.image, Vec::new(), delta)
        } else {
            let inj = inject_defect_set(&s.image, &s.gt, defects, seed)?;
            (inj.image, inj.sites, inj.expected_esd_delta)
        };
        let id = format!("synth_{seed:06}");
        let image_rel = PathBuf::from("images").join(format!("{id}.png"));
        let gt_rel = PathBuf::from("gt").join(format!("{id}.png"));
        for rel in [&image_rel, &gt_rel] {
            let dir = out_dir.join(rel.parent().expect("relative path has a parent"));
            fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
        }
        write_gray_png(out_dir.join(&image_rel), &image)?;
        write_mask_png(out_dir.join(&gt_rel), &s.gt)?;
        entries.push(SynthEntry {
            image_id: id,
            seed,
            image: image_rel,
            gt: gt_rel,
            line_count: s.line_count,
            midpoint: s.midpoint,
            defects: sites,
            expected_esd_delta: delta,
        });
    }
    let manifest = SynthManifest {
        config: *cfg,
        defect_specs: defects.to_vec(),
        entries,
    };
    write_output(&out_dir.join("manifest.json"), &to_stable_json(&manifest)?)?;
    Ok(manifest)
}

/// Augments one image/mask pair into `out_dir/{image,gt}.png` and returns
/// the drawn parameters, `None` when the chain was skipped.
pub fn augment_pair(image: &Path, gt: &Path, cfg: &AugmentConfig, out_dir: &Path) -> CliResult<Option<AugmentRecord>> {
    let img = read_gray_png(image)?;
    let mask = read_mask_png(gt)?;
    let a = augment(&img, &mask, cfg)?;
    fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;
    write_gray_png(out_dir.join("image.png"), &a.image)?;
    write_mask_png(out_dir.join("gt.png"), &a.gt)?;
    Ok(a.record)
}
