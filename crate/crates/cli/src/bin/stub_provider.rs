//! File-backed mask provider for tests and demos.
//!
//! Answers every request with a crop of a fixed full-resolution mask. Full
//! requests get the whole mask; patch requests are located in `--source` by
//! exact pixel comparison, trying the patch grid first.

use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;
use metalseg::fusion::{plan_patches, FusionConfig, ProviderMask, ProviderRequest, ProviderResponse};
use metalseg::io::{read_gray_png, read_mask_png, write_mask_png};
use metalseg::{BinaryMask, GrayImage};

#[derive(Parser)]
#[command(name = "metalseg-stub-provider", about = "Answers mask requests from a fixed mask file")]
struct Args {
    /// Full-resolution answer mask (PNG).
    #[arg(long)]
    answer: PathBuf,
    /// The image the pipeline segments (PNG).
    #[arg(long)]
    source: PathBuf,
    #[arg(long, default_value_t = 0.9)]
    score: f64,
    /// Overlap fraction used to guess patch origins.
    #[arg(long, default_value_t = 0.10)]
    min_overlap_fraction: f64,
}

fn matches_at(src: &GrayImage, patch: &GrayImage, x0: usize, y0: usize) -> bool {
    let (w, h) = patch.dims();
    (0..h).all(|y| (0..w).all(|x| src.get(x0 + x, y0 + y) == patch.get(x, y)))
}

fn locate(src: &GrayImage, patch: &GrayImage, id: u64, overlap: f64) -> Option<(usize, usize)> {
    let (sw, sh) = src.dims();
    let (pw, ph) = patch.dims();
    if pw > sw || ph > sh {
        return None;
    }
    let mut candidates = Vec::new();
    if pw == ph {
        let cfg = FusionConfig {
            patch_size: pw,
            min_overlap_fraction: overlap,
            ..Default::default()
        };
        if let Ok(grid) = plan_patches(sw, sh, &cfg) {
            if let Some(&o) = usize::try_from(id).ok().and_then(|i| grid.origins.get(i.wrapping_sub(1))) {
                candidates.push(o);
            }
            candidates.extend(grid.origins);
        }
    }
    candidates
        .into_iter()
        .chain((0..=sh - ph).flat_map(|y| (0..=sw - pw).map(move |x| (x, y))))
        .find(|&(x, y)| matches_at(src, patch, x, y))
}

fn answer(req: &ProviderRequest, args: &Args, src: &GrayImage, full: &BinaryMask) -> Result<PathBuf, String> {
    let img = read_gray_png(&req.image).map_err(|e| e.to_string())?;
    let mask = if img.dims() == full.dims() {
        full.clone()
    } else {
        let (x, y) = locate(src, &img, req.id, args.min_overlap_fraction)
            .ok_or_else(|| format!("request image {} not found in source", req.image.display()))?;
        full.crop(x, y, img.width(), img.height())
    };
    let dir = req.image.parent().unwrap_or(Path::new("."));
    let path = dir.join(format!("stub-mask-{}.png", req.id));
    write_mask_png(&path, &mask).map_err(|e| e.to_string())?;
    Ok(path)
}

fn main() -> ExitCode {
    let args = Args::parse();
    let (src, full) = match (read_gray_png(&args.source), read_mask_png(&args.answer)) {
        (Ok(s), Ok(m)) if s.dims() == m.dims() => (s, m),
        (Ok(_), Ok(_)) => {
            eprintln!("source and answer dimensions differ");
            return ExitCode::FAILURE;
        }
        (Err(e), _) | (_, Err(e)) => {
            eprintln!("{e}");
            return ExitCode::FAILURE;
        }
    };
    let stdout = io::stdout();
    let mut out = stdout.lock();
    for line in io::stdin().lock().lines() {
        let Ok(line) = line else { break };
        if line.trim().is_empty() {
            continue;
        }
        let resp = match serde_json::from_str::<ProviderRequest>(&line) {
            Err(e) => ProviderResponse {
                id: 0,
                masks: Vec::new(),
                error: Some(format!("malformed request: {e}")),
            },
            Ok(req) => match answer(&req, &args, &src, &full) {
                Ok(path) => ProviderResponse {
                    id: req.id,
                    masks: vec![ProviderMask { path, score: args.score }],
                    error: None,
                },
                Err(e) => ProviderResponse {
                    id: req.id,
                    masks: Vec::new(),
                    error: Some(e),
                },
            },
        };
        let text = serde_json::to_string(&resp).expect("response serializes");
        if writeln!(out, "{text}").and_then(|()| out.flush()).is_err() {
            break;
        }
    }
    ExitCode::SUCCESS
}
