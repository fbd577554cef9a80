mod common;

use std::time::Duration;

use metalseg::fusion::{
    compose, plan_patches, run_pipeline, FnProvider, FusionConfig, MaskRequest, PatchChoice, PipelineConfig,
    ScoredMask, SubprocessProvider,
};
use metalseg::io::write_mask_png;
use metalseg::{BinaryMask, GrayImage, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::blocky_mask;

fn cfg(patch_size: usize) -> FusionConfig {
    FusionConfig {
        patch_size,
        ..Default::default()
    }
}

#[test]
fn grid_covers_image_with_minimum_overlap() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..300 {
        let p = [32, 48, 64, 100, 512][rng.random_range(0..5)];
        let (w, h) = (rng.random_range(p..=4 * p), rng.random_range(p..=4 * p));
        let c = cfg(p);
        let g = plan_patches(w, h, &c).unwrap();
        let min_overlap = (0.10 * p as f64).floor() as usize;
        for (axis, dim) in [(&g.xs, w), (&g.ys, h)] {
            assert_eq!(axis[0], 0);
            assert_eq!(axis.last().unwrap() + p, dim);
            for pair in axis.windows(2) {
                assert!(pair[0] < pair[1]);
                assert!(pair[0] + p - pair[1] >= min_overlap, "{axis:?} p {p}");
            }
        }
        assert_eq!(g.origins.len(), g.xs.len() * g.ys.len());
        let mut covered = vec![false; w * h];
        for &(x, y) in &g.origins {
            for yy in y..y + p {
                for xx in x..x + p {
                    covered[yy * w + xx] = true;
                }
            }
        }
        assert!(covered.iter().all(|&c| c));
    }
}

/// Nearest patch center in the plane, ties to the smaller grid index.
fn voronoi_owner(x: usize, y: usize, origins: &[(usize, usize)], p: usize) -> usize {
    let (cx, cy) = (2 * x as i64 + 1, 2 * y as i64 + 1);
    let mut best = (i64::MAX, 0);
    for (i, &(ox, oy)) in origins.iter().enumerate() {
        let dx = cx - (2 * ox + p) as i64;
        let dy = cy - (2 * oy + p) as i64;
        let d = dx * dx + dy * dy;
        if d < best.0 {
            best = (d, i);
        }
    }
    best.1
}

#[test]
fn composition_follows_voronoi_cells() {
    for (w, h, p) in [(1024, 512, 512), (100, 75, 40), (130, 130, 64)] {
        let c = cfg(p);
        let g = plan_patches(w, h, &c).unwrap();
        let empty = BinaryMask::empty(w, h);
        for k in 0..g.origins.len() {
            let patches: Vec<_> = g
                .origins
                .iter()
                .enumerate()
                .map(|(i, &o)| (o, BinaryMask::filled(p, p, i == k)))
                .collect();
            let r = compose(&empty, &patches, &g, &c).unwrap();
            assert!(r.decisions.iter().all(|d| d.choice == PatchChoice::UseB));
            for y in 0..h {
                for x in 0..w {
                    assert_eq!(r.final_mask.get(x, y), voronoi_owner(x, y, &g.origins, p) == k, "({x}, {y}) k {k}");
                }
            }
        }
    }
}

#[test]
fn ground_truth_from_both_models_is_kept() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..20 {
        let p = 32;
        let (w, h) = (rng.random_range(p..100), rng.random_range(p..100));
        let gt = blocky_mask(&mut rng, w, h, 10);
        let c = cfg(p);
        let g = plan_patches(w, h, &c).unwrap();
        let patches: Vec<_> = g.origins.iter().map(|&(x, y)| ((x, y), gt.crop(x, y, p, p))).collect();
        assert_eq!(compose(&gt, &patches, &g, &c).unwrap().final_mask, gt);
    }
}

#[test]
fn flags_exactly_the_doubly_speckled_cells() {
    let p = 32;
    let c = FusionConfig {
        patch_size: p,
        speckle_count_threshold_full: 20,
        speckle_count_threshold_patch: 20,
        ..Default::default()
    };
    let (w, h) = (96, 64);
    let g = plan_patches(w, h, &c).unwrap();
    let dots = |x: usize, y: usize| x % 3 == 0 && y % 3 == 0;
    // Model A is speckled on the left half, model B in every cell but the last.
    let a = BinaryMask::from_fn(w, h, |x, y| x < 48 && dots(x, y));
    let last = *g.origins.last().unwrap();
    let patches: Vec<_> = g
        .origins
        .iter()
        .map(|&o| (o, BinaryMask::from_fn(p, p, |x, y| o != last && dots(x, y))))
        .collect();
    let r = compose(&a, &patches, &g, &c).unwrap();
    for d in &r.decisions {
        let a_sp = d.speckles_a >= 20;
        let b_sp = d.speckles_b >= 20;
        assert_eq!(d.choice == PatchChoice::Flagged, a_sp && b_sp);
        assert_eq!(
            r.flagged_regions.iter().any(|reg| (reg.x, reg.y) == d.origin),
            a_sp && b_sp
        );
    }
    assert!(!r.flagged_regions.is_empty());
    // Every dot is its own component, so speckle counts are dot counts.
    for d in &r.decisions {
        let (ox, oy) = d.origin;
        let in_a = (oy..oy + p)
            .flat_map(|y| (ox..ox + p).map(move |x| (x, y)))
            .filter(|&(x, y)| x < 48 && dots(x, y))
            .count();
        assert_eq!(d.speckles_a, in_a);
    }
}

#[test]
fn subprocess_provider_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let gt = BinaryMask::from_fn(24, 20, |x, y| (x / 4) % 2 == 0 && y > 2);
    let mask_path = dir.path().join("answer.png");
    write_mask_png(&mask_path, &gt).unwrap();
    let script = format!(
        r#"while read -r line; do id=$(printf '%s' "$line" | sed 's/.*"id":\([0-9]*\).*/\1/'); printf '{{"id":%s,"masks":[{{"path":"{}","score":0.5}}]}}\n' "$id"; done"#,
        mask_path.display()
    );
    let mut full = SubprocessProvider::spawn("stub", &script, Duration::from_secs(30)).unwrap();
    let mut patch = FnProvider::new("unused", |_: &MaskRequest<'_>| -> Result<Vec<ScoredMask>> {
        unreachable!("image is smaller than the patch")
    });
    let img = GrayImage::filled(24, 20, 7);
    let r = run_pipeline(&img, &mut full, &mut patch, &PipelineConfig::default(), 1).unwrap();
    assert_eq!(r.final_mask, gt);

    // Wrong dimensions are reported with the request id.
    let small = GrayImage::filled(10, 10, 7);
    let err = run_pipeline(&small, &mut full, &mut patch, &PipelineConfig::default(), 1).unwrap_err();
    assert!(err.to_string().contains("stub"), "{err}");
}
