mod common;

use metalseg::{barcode, betti_numbers, Filtration, LikelihoodMap};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{betti_sweep, leveled_map, sweep_points};

fn random_dims(rng: &mut ChaCha8Rng, max: usize) -> (usize, usize) {
    (rng.random_range(1..=max), rng.random_range(1..=max))
}

#[test]
fn betti_numbers_match_threshold_sweep() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for case in 0..120 {
        let (w, h) = random_dims(&mut rng, 24);
        let levels = rng.random_range(1..=16);
        let map = leveled_map(&mut rng, w, h, levels);
        for f in [Filtration::Sublevel, Filtration::Superlevel] {
            let bc = barcode(&map, f).unwrap();
            let superlevel = f == Filtration::Superlevel;
            let mut eps_list = sweep_points(map.values());
            if superlevel {
                eps_list[0] = eps_list.last().unwrap() + 0.5;
            }
            for eps in eps_list {
                assert_eq!(
                    betti_numbers(&bc, eps),
                    betti_sweep(map.values(), w, h, eps, superlevel),
                    "case {case} {f:?} eps {eps}"
                );
            }
        }
    }
}

#[test]
fn bar_values_sit_on_critical_pixels() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..100 {
        let (w, h) = random_dims(&mut rng, 20);
        let map = leveled_map(&mut rng, w, h, 12);
        for f in [Filtration::Sublevel, Filtration::Superlevel] {
            let bc = barcode(&map, f).unwrap();
            assert_eq!(bc.dim(0).filter(|b| b.essential).count(), 1);
            for b in &bc.bars {
                assert_eq!(b.birth, map.get(b.birth_pixel.0, b.birth_pixel.1));
                match b.death_pixel {
                    Some((x, y)) => {
                        assert!(!b.essential);
                        assert_eq!(b.death, map.get(x, y));
                    }
                    None => {
                        assert!(b.essential);
                        assert_eq!(b.death, f.terminal_value());
                    }
                }
                match f {
                    Filtration::Sublevel => assert!(b.birth <= b.death),
                    Filtration::Superlevel => assert!(b.birth >= b.death),
                }
            }
        }
    }
}

/// Values on a 1/64 grid, so `1 - v` is exact.
fn dyadic_map(rng: &mut ChaCha8Rng, w: usize, h: usize, top: u32) -> LikelihoodMap {
    let values = (0..w * h).map(|_| f64::from(rng.random_range(0..=top)) / 64.0).collect();
    LikelihoodMap::new(w, h, values).unwrap()
}

#[test]
fn superlevel_is_sublevel_of_complement() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..100 {
        let (w, h) = random_dims(&mut rng, 20);
        let map = dyadic_map(&mut rng, w, h, 64);
        let mut sup = barcode(&map, Filtration::Superlevel).unwrap();
        let mut sub = barcode(&map.inverted(), Filtration::Sublevel).unwrap();
        for b in &mut sub.bars {
            b.birth = 1.0 - b.birth;
            b.death = 1.0 - b.death;
        }
        sup.sort_stable();
        sub.sort_stable();
        assert_eq!(sup.bars, sub.bars);
    }
}

#[test]
fn constant_shift_moves_finite_bars() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..100 {
        let (w, h) = random_dims(&mut rng, 16);
        let map = dyadic_map(&mut rng, w, h, 32);
        let shifted = LikelihoodMap::new(w, h, map.values().iter().map(|v| v + 0.25).collect()).unwrap();
        let mut a = barcode(&map, Filtration::Sublevel).unwrap();
        let mut b = barcode(&shifted, Filtration::Sublevel).unwrap();
        a.sort_stable();
        b.sort_stable();
        assert_eq!(a.bars.len(), b.bars.len());
        for (x, y) in a.bars.iter().zip(&b.bars) {
            assert_eq!(y.birth, x.birth + 0.25);
            assert_eq!((x.birth_pixel, x.death_pixel), (y.birth_pixel, y.death_pixel));
            if x.essential {
                assert_eq!(y.death, 1.0);
            } else {
                assert_eq!(y.death, x.death + 0.25);
            }
        }
    }
}

#[test]
fn worked_examples() {
    let m = LikelihoodMap::new(3, 3, vec![0.1, 0.9, 0.2, 0.9, 0.9, 0.9, 0.9, 0.9, 0.9]).unwrap();
    let bc = barcode(&m, Filtration::Sublevel).unwrap();
    let d0: Vec<(f64, f64, bool)> = bc.dim(0).map(|b| (b.birth, b.death, b.essential)).collect();
    assert_eq!(d0.len(), 2);
    assert!(d0.contains(&(0.1, 1.0, true)));
    assert!(d0.contains(&(0.2, 0.9, false)));
    assert_eq!(betti_numbers(&bc, 0.5), (2, 0));
    assert_eq!(betti_numbers(&bc, 0.05), (0, 0));

    let ring = LikelihoodMap::new(
        5,
        5,
        (0..25)
            .map(|i| {
                let (x, y) = (i % 5, i / 5);
                let on = (1..4).contains(&x) && (1..4).contains(&y) && !(x == 2 && y == 2);
                if on { 1.0 } else { 0.0 }
            })
            .collect(),
    )
    .unwrap();
    let bc = barcode(&ring, Filtration::Superlevel).unwrap();
    assert_eq!(bc.dim(0).count(), 1);
    assert!(bc.dim(0).all(|b| b.essential && b.birth == 1.0));
    assert_eq!(bc.dim(1).count(), 1);
    assert_eq!(betti_numbers(&bc, 1.0), (1, 1));
}

#[test]
fn non_finite_is_rejected() {
    assert!(LikelihoodMap::new(1, 1, vec![f64::NAN]).is_err());
}
