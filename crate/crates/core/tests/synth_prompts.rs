mod common;

use metalseg::image::threshold;
use metalseg::prompts::{foreground_seed_mask, sample_prompts, PromptConfig};
use metalseg::synth::{augment, generate, inject_defect_set, AugmentConfig, DefectKind, DefectSpec, SynthConfig};
use metalseg::{esd_errors, BinaryMask};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{esd_oracle, flood_components};

fn small(seed: u64) -> SynthConfig {
    SynthConfig {
        width: 128,
        height: 128,
        line_count_range: (4, 8),
        seed,
        ..SynthConfig::default()
    }
}

#[test]
fn lines_keep_their_spacing() {
    for seed in 0..30 {
        let cfg = small(seed);
        let s = generate(&cfg).unwrap();
        let (w, h) = s.gt.dims();
        let (labels, n) = flood_components(s.gt.bits(), w, h, true);
        assert_eq!(n, s.line_count);
        let gap = cfg.min_spacing as isize;
        for y in 0..h as isize {
            for x in 0..w as isize {
                let a = labels[(y as usize) * w + x as usize];
                if a == 0 {
                    continue;
                }
                for dy in -gap..=gap {
                    for dx in -gap..=gap {
                        let (nx, ny) = (x + dx, y + dy);
                        if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                            continue;
                        }
                        let b = labels[ny as usize * w + nx as usize];
                        assert!(b == 0 || b == a, "seed {seed}: lines {a} and {b} closer than {gap}");
                    }
                }
            }
        }
    }
}

#[test]
fn injected_defects_have_their_expected_effect() {
    let kinds = [
        DefectKind::Bridge,
        DefectKind::Cut,
        DefectKind::SpeckleField,
        DefectKind::ShadingBlob,
        DefectKind::OutlineOnly,
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut injected = 0;
    for case in 0..40u64 {
        let cfg = small(case).noiseless();
        let s = generate(&cfg).unwrap();
        let mut specs = vec![DefectSpec::new(kinds[case as usize % 5], 1)];
        if case % 2 == 1 {
            specs.push(DefectSpec::new(kinds[rng.random_range(0..5)], rng.random_range(1..3)));
        }
        let inj = match inject_defect_set(&s.image, &s.gt, &specs, case) {
            Ok(inj) => inj,
            Err(metalseg::Error::Placement(_)) => continue,
            Err(e) => panic!("{e}"),
        };
        injected += 1;
        assert_eq!(inj.gt, s.gt);
        let pred = threshold(&inj.image, s.midpoint);
        let r = esd_errors(&pred, &inj.gt, 1).unwrap();
        assert_eq!(r, inj.expected_esd_delta, "case {case} {specs:?}");
        let o = esd_oracle(&pred, &inj.gt, 1);
        assert_eq!(
            (o.opens, o.shorts, o.false_positives, o.false_negatives),
            (r.opens, r.shorts, r.false_positives, r.false_negatives)
        );
    }
    assert!(injected >= 30, "only {injected} of 40 cases placed");
}

#[test]
fn augmentation_moves_mask_and_image_together() {
    // A noiseless two-level image whose mask is its own threshold; any
    // geometric step must keep the mask inside the brighter half.
    let gt = BinaryMask::from_fn(64, 48, |x, y| x < 20 && y < 12);
    let img = gt.to_gray();
    for seed in 0..40 {
        let cfg = AugmentConfig {
            probability: 1.0,
            intensity: 0.05,
            seed,
        };
        let a = augment(&img, &gt, &cfg).unwrap();
        let rec = a.record.unwrap();
        let (w, h) = gt.dims();
        let (cx, cy, cw, ch) = rec.crop;
        let expected = BinaryMask::from_fn(w, h, |x, y| {
            let x = if rec.flip_horizontal { w - 1 - x } else { x };
            let y = if rec.flip_vertical { h - 1 - y } else { y };
            let sx = (((x as f64 + 0.5) * cw as f64 / w as f64).floor() as usize).min(cw - 1);
            let sy = (((y as f64 + 0.5) * ch as f64 / h as f64).floor() as usize).min(ch - 1);
            gt.get(cx + sx, cy + sy)
        });
        assert_eq!(a.gt, expected, "seed {seed}");
        // The marked corner follows the flips in the image as well.
        let mean = |m: &BinaryMask, on: bool| {
            let v: Vec<f64> = (0..w * h)
                .filter(|&i| m.bits()[i] == on)
                .map(|i| f64::from(a.image.pixels()[i]))
                .collect();
            v.iter().sum::<f64>() / v.len().max(1) as f64
        };
        if a.gt.count() > 0 && a.gt.count() < w * h {
            assert!(mean(&a.gt, true) > mean(&a.gt, false), "seed {seed}");
        }
    }
}

#[test]
fn prompts_land_on_metal() {
    let mut on_gt = 0;
    let mut total = 0;
    for seed in 0..60 {
        let s = generate(&small(seed)).unwrap();
        let cfg = PromptConfig {
            seed,
            ..Default::default()
        };
        let seed_mask = foreground_seed_mask(&s.image, &cfg).unwrap();
        let points = sample_prompts(&seed_mask, &cfg);
        assert_eq!(points, sample_prompts(&seed_mask, &cfg));
        let mut uniq = points.clone();
        uniq.sort();
        uniq.dedup();
        assert_eq!(uniq.len(), points.len());
        for &(x, y) in &points {
            assert!(seed_mask.get(x, y));
            total += 1;
            on_gt += usize::from(s.gt.get(x, y));
        }
    }
    assert!(total > 0);
    assert!(on_gt as f64 >= 0.99 * total as f64, "{on_gt}/{total}");
}
