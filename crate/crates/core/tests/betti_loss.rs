mod common;

use std::collections::HashSet;

use metalseg::loss::{
    bce_loss, betti_loss, dice_loss, induced_matching, seg_loss, BettiMatchConfig, FiltrationType, LossConfig,
};
use metalseg::{barcode, BinaryMask, Filtration, LikelihoodMap, PersistenceBar};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{distinct_pair, gradient_mismatch, leveled_map, random_mask};

const TYPES: [FiltrationType; 3] = [FiltrationType::Sublevel, FiltrationType::Superlevel, FiltrationType::Bothlevels];

fn key(f: Filtration, b: &PersistenceBar) -> (Filtration, u8, (usize, usize), Option<(usize, usize)>) {
    (f, b.dim, b.birth_pixel, b.death_pixel)
}

#[test]
fn identical_maps_have_zero_loss() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for case in 0..60 {
        let (w, h) = (rng.random_range(1..=16), rng.random_range(1..=16));
        let g = match case % 3 {
            0 => leveled_map(&mut rng, w, h, 8),
            1 => random_mask(&mut rng, w, h, 0.4).to_likelihood(),
            _ => distinct_pair(&mut rng, w, h, 0.345).1,
        };
        for t in TYPES {
            for push in [true, false] {
                let cfg = BettiMatchConfig {
                    filtration_type: t,
                    push_unmatched_to_1_0: push,
                    ..Default::default()
                };
                let r = betti_loss(&g, &g, &cfg).unwrap();
                assert_eq!(r.loss, 0.0, "case {case} {t:?}");
                assert!(r.grad.is_zero());
            }
        }
    }
}

#[test]
fn gradients_match_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for case in 0..30 {
        let (w, h) = (rng.random_range(2..=16), rng.random_range(2..=16));
        let (g, l) = distinct_pair(&mut rng, w, h, 0.345);
        for t in TYPES {
            for push in [true, false] {
                let cfg = BettiMatchConfig {
                    filtration_type: t,
                    push_unmatched_to_1_0: push,
                    ..Default::default()
                };
                let r = betti_loss(&g, &l, &cfg).unwrap();
                let bad = gradient_mismatch(&l, &r.grad.values, |m| betti_loss(&g, m, &cfg).unwrap().loss);
                assert_eq!(bad, None, "betti case {case} {t:?} push {push}");
            }
        }
        let (_, grad) = bce_loss(&g, &l, 1e-7).unwrap();
        assert_eq!(gradient_mismatch(&l, &grad.values, |m| bce_loss(&g, m, 1e-7).unwrap().0), None);
        let (_, grad) = dice_loss(&g, &l, 1.0).unwrap();
        assert_eq!(gradient_mismatch(&l, &grad.values, |m| dice_loss(&g, m, 1.0).unwrap().0), None);
        let cfg = LossConfig::default();
        let s = seg_loss(&g, &l, &cfg).unwrap();
        assert_eq!(gradient_mismatch(&l, &s.grad.values, |m| seg_loss(&g, m, &cfg).unwrap().value), None);
    }
}

#[test]
fn gradient_lives_on_critical_pixels_of_prediction() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..60 {
        let (w, h) = (rng.random_range(2..=16), rng.random_range(2..=16));
        let (g, l) = distinct_pair(&mut rng, w, h, 0.345);
        for t in TYPES {
            let cfg = BettiMatchConfig {
                filtration_type: t,
                ..Default::default()
            };
            let r = betti_loss(&g, &l, &cfg).unwrap();
            let mut critical = HashSet::new();
            for f in [Filtration::Sublevel, Filtration::Superlevel] {
                for b in barcode(&l.inverted(), f).unwrap().bars {
                    critical.insert(b.birth_pixel.1 * w + b.birth_pixel.0);
                    if let Some((x, y)) = b.death_pixel {
                        critical.insert(y * w + x);
                    }
                }
            }
            for (i, &v) in r.grad.values.iter().enumerate() {
                if v != 0.0 {
                    assert!(critical.contains(&i), "pixel {i} carries gradient {v}");
                }
            }
        }
    }
}

#[test]
fn matching_is_a_partial_bijection_covering_all_bars() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for case in 0..80 {
        let (w, h) = (rng.random_range(1..=16), rng.random_range(1..=16));
        let g = random_mask(&mut rng, w, h, 0.4).to_likelihood();
        let l = leveled_map(&mut rng, w, h, 10);
        for t in TYPES {
            let cfg = BettiMatchConfig {
                filtration_type: t,
                ..Default::default()
            };
            let r = induced_matching(&g, &l, &cfg).unwrap();
            let mut pred_seen = HashSet::new();
            let mut gt_seen = HashSet::new();
            for m in &r.matched {
                assert!(pred_seen.insert(key(m.filtration, &m.pred)), "case {case}");
                assert!(gt_seen.insert(key(m.filtration, &m.gt)), "case {case}");
                assert_eq!(m.gt.dim, m.pred.dim);
            }
            for tb in r.unmatched_pred.iter().chain(&r.noise_pred) {
                assert!(pred_seen.insert(key(tb.filtration, &tb.bar)));
            }
            for tb in &r.unmatched_gt {
                assert!(gt_seen.insert(key(tb.filtration, &tb.bar)));
            }
            let filtrations: &[Filtration] = match t {
                FiltrationType::Sublevel => &[Filtration::Sublevel],
                FiltrationType::Superlevel => &[Filtration::Superlevel],
                FiltrationType::Bothlevels => &[Filtration::Sublevel, Filtration::Superlevel],
            };
            let mut all_pred = HashSet::new();
            let mut all_gt = HashSet::new();
            for &f in filtrations {
                for b in barcode(&l.inverted(), f).unwrap().bars {
                    all_pred.insert(key(f, &b));
                }
                for b in barcode(&g.inverted(), f).unwrap().bars {
                    if b.persistence() > 0.0 || gt_seen.contains(&key(f, &b)) {
                        all_gt.insert(key(f, &b));
                    }
                }
            }
            assert_eq!(pred_seen, all_pred, "case {case} {t:?}");
            assert_eq!(gt_seen, all_gt, "case {case} {t:?}");
        }
    }
}

#[test]
fn raising_threshold_never_adds_loss_bars() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..40 {
        let (w, h) = (rng.random_range(2..=16), rng.random_range(2..=16));
        let g = random_mask(&mut rng, w, h, 0.3).to_likelihood();
        let l = leveled_map(&mut rng, w, h, 12);
        let mut last = usize::MAX;
        for k in 0..=20 {
            let cfg = BettiMatchConfig {
                barcode_length_threshold: k as f64 / 20.0,
                filtration_type: FiltrationType::Bothlevels,
                ..Default::default()
            };
            let n = induced_matching(&g, &l, &cfg).unwrap().unmatched_pred.len();
            assert!(n <= last);
            last = n;
        }
    }
}

#[test]
fn shallow_loop_is_pulled_toward_ground_truth_loop() {
    let ring = BinaryMask::from_fn(7, 7, |x, y| {
        (1..6).contains(&x) && (1..6).contains(&y) && !(x == 3 && y == 3)
    });
    let g = ring.to_likelihood();
    let mut vals: Vec<f64> = g.values().iter().map(|&v| if v > 0.5 { 0.9 } else { 0.1 }).collect();
    vals[3 * 7 + 3] = 0.8;
    let l = LikelihoodMap::new(7, 7, vals).unwrap();
    let r = betti_loss(&g, &l, &BettiMatchConfig::default()).unwrap();
    let loop_pair = r.matched.iter().find(|m| m.gt.dim == 1).expect("loop matched");
    assert_eq!((loop_pair.gt.birth, loop_pair.gt.death), (0.0, 1.0));
    assert!((loop_pair.pred.birth - 0.1).abs() < 1e-12);
    assert!((loop_pair.pred.death - 0.2).abs() < 1e-12);
    // Raising the hole's likelihood fills the loop even sooner.
    assert!(r.grad.values[3 * 7 + 3] > 0.0);
    assert!(r.loss >= 0.1 * 0.1 + 0.8 * 0.8 - 1e-12);
}
