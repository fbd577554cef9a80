//! Independent reference implementations shared by the integration and
//! acceptance suites. Nothing here calls into the library's algorithms.

#![allow(dead_code)]

use std::collections::VecDeque;

use metalseg::{BinaryMask, LikelihoodMap};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

const N4: [(isize, isize); 4] = [(1, 0), (-1, 0), (0, 1), (0, -1)];
const N8: [(isize, isize); 8] = [(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1)];

/// Breadth-first flood fill. Returns per-pixel labels (0 = off) and the
/// number of components, numbered in order of discovery in row-major scan.
pub fn flood_components(on: &[bool], w: usize, h: usize, eight: bool) -> (Vec<usize>, usize) {
    let nbrs: &[(isize, isize)] = if eight { &N8 } else { &N4 };
    let mut labels = vec![0usize; w * h];
    let mut next = 0;
    for start in 0..w * h {
        if !on[start] || labels[start] != 0 {
            continue;
        }
        next += 1;
        labels[start] = next;
        let mut queue = VecDeque::from([start]);
        while let Some(p) = queue.pop_front() {
            let (x, y) = ((p % w) as isize, (p / w) as isize);
            for &(dx, dy) in nbrs {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                    continue;
                }
                let q = ny as usize * w + nx as usize;
                if on[q] && labels[q] == 0 {
                    labels[q] = next;
                    queue.push_back(q);
                }
            }
        }
    }
    (labels, next)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EsdCounts {
    pub opens: u64,
    pub shorts: u64,
    pub false_positives: u64,
    pub false_negatives: u64,
    pub gt_lines: u64,
}

/// ESD by materializing the full pred x gt overlap matrix and reading
/// degrees off its rows and columns.
pub fn esd_oracle(pred: &BinaryMask, gt: &BinaryMask, min_overlap: usize) -> EsdCounts {
    let (w, h) = gt.dims();
    let (pl, np) = flood_components(pred.bits(), w, h, true);
    let (gl, ng) = flood_components(gt.bits(), w, h, true);
    let mut overlap = vec![vec![0usize; ng]; np];
    for i in 0..w * h {
        if pl[i] > 0 && gl[i] > 0 {
            overlap[pl[i] - 1][gl[i] - 1] += 1;
        }
    }
    let mut c = EsdCounts {
        opens: 0,
        shorts: 0,
        false_positives: 0,
        false_negatives: 0,
        gt_lines: ng as u64,
    };
    for row in &overlap {
        match row.iter().filter(|&&n| n >= min_overlap).count() {
            0 => c.false_positives += 1,
            k => c.shorts += k as u64 - 1,
        }
    }
    for j in 0..ng {
        match (0..np).filter(|&i| overlap[i][j] >= min_overlap).count() {
            0 => c.false_negatives += 1,
            k => c.opens += k as u64 - 1,
        }
    }
    c
}

/// `(beta_0, beta_1)` of the binarized raster `on`: 8-connected foreground
/// components, and 4-connected background components that do not reach the
/// border (the border is adjacent to the outside frame).
pub fn betti_of_mask(on: &[bool], w: usize, h: usize) -> (usize, usize) {
    let (_, b0) = flood_components(on, w, h, true);
    let off: Vec<bool> = on.iter().map(|&v| !v).collect();
    let (labels, n) = flood_components(&off, w, h, false);
    let mut touches = vec![false; n + 1];
    for y in 0..h {
        for x in 0..w {
            if x == 0 || y == 0 || x == w - 1 || y == h - 1 {
                touches[labels[y * w + x]] = true;
            }
        }
    }
    let holes = (1..=n).filter(|&l| !touches[l]).count();
    (b0, holes)
}

/// Betti numbers of `{f <= eps}` (sublevel) or `{f >= eps}` (superlevel).
pub fn betti_sweep(values: &[f64], w: usize, h: usize, eps: f64, superlevel: bool) -> (usize, usize) {
    let on: Vec<bool> = values
        .iter()
        .map(|&v| if superlevel { v >= eps } else { v <= eps })
        .collect();
    betti_of_mask(&on, w, h)
}

pub fn random_mask(rng: &mut ChaCha8Rng, w: usize, h: usize, density: f64) -> BinaryMask {
    BinaryMask::from_fn(w, h, |_, _| rng.random_bool(density))
}

/// Random mask made of a few filled rectangles, which gives larger
/// components than i.i.d. pixels.
pub fn blocky_mask(rng: &mut ChaCha8Rng, w: usize, h: usize, rects: usize) -> BinaryMask {
    let mut m = BinaryMask::empty(w, h);
    for _ in 0..rects {
        let (x0, y0) = (rng.random_range(0..w), rng.random_range(0..h));
        let (rw, rh) = (rng.random_range(1..=w.min(12)), rng.random_range(1..=h.min(12)));
        for y in y0..(y0 + rh).min(h) {
            for x in x0..(x0 + rw).min(w) {
                m.set(x, y, true);
            }
        }
    }
    m
}

/// Map with at most `levels` distinct values on a 0.001 grid.
pub fn leveled_map(rng: &mut ChaCha8Rng, w: usize, h: usize, levels: usize) -> LikelihoodMap {
    let palette: Vec<f64> = (0..levels).map(|_| rng.random_range(0..=1000) as f64 / 1000.0).collect();
    let values = (0..w * h).map(|_| palette[rng.random_range(0..levels)]).collect();
    LikelihoodMap::new(w, h, values).unwrap()
}

/// Every distinct value of a map plus one value below all of them.
pub fn sweep_points(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v.dedup();
    let mut out = vec![v[0] - 0.5];
    out.extend(v);
    out
}

/// Step `s` for `n` distinct values in `[0.01, 0.99 - s]` such that no possible
/// bar length lies within `margin` of `threshold`. Finite bars have length
/// `k s`; essential bars end at 0 or 1 and have length `0.01 + k s`.
pub fn safe_step(n: usize, threshold: f64, margin: f64) -> f64 {
    let mut slots = n.max(2);
    loop {
        let s = 0.98 / slots as f64;
        let near = (0..=slots).any(|k| {
            let k = k as f64;
            [k * s, 0.01 + k * s].iter().any(|len| (len - threshold).abs() < margin)
        });
        if !near {
            return s;
        }
        slots += 1;
    }
}

/// A prediction/target pair with no plateaus and no shared values: `l` is a
/// random permutation of the grid `0.01 + k s`, `g` a permutation of the grid
/// shifted by `s / 2`. Bar lengths of `l` are multiples of `s`, which keeps
/// them away from `threshold`.
pub fn distinct_pair(
    rng: &mut ChaCha8Rng,
    w: usize,
    h: usize,
    threshold: f64,
) -> (LikelihoodMap, LikelihoodMap) {
    let n = w * h;
    let s = safe_step(n, threshold, 2.5e-4);
    let grid = |offset: f64, rng: &mut ChaCha8Rng| {
        let mut v: Vec<f64> = (0..n).map(|k| 0.01 + offset + k as f64 * s).collect();
        v.shuffle(rng);
        v
    };
    let l = grid(0.0, rng);
    let g = grid(s / 2.0, rng);
    (
        LikelihoodMap::new(w, h, g).unwrap(),
        LikelihoodMap::new(w, h, l).unwrap(),
    )
}

/// Central difference of `f` with respect to pixel `i` of `l`.
pub fn central_difference(l: &LikelihoodMap, i: usize, h: f64, f: impl Fn(&LikelihoodMap) -> f64) -> f64 {
    let mut plus = l.values().to_vec();
    let mut minus = plus.clone();
    plus[i] += h;
    minus[i] -= h;
    let lp = LikelihoodMap::new(l.width(), l.height(), plus).unwrap();
    let lm = LikelihoodMap::new(l.width(), l.height(), minus).unwrap();
    (f(&lp) - f(&lm)) / (2.0 * h)
}

/// `|numeric - analytic| <= rtol * max(|numeric|, |analytic|) + atol`.
pub fn close(numeric: f64, analytic: f64, rtol: f64, atol: f64) -> bool {
    (numeric - analytic).abs() <= rtol * numeric.abs().max(analytic.abs()) + atol
}

/// First pixel whose central difference disagrees with `grad`, if any.
pub fn gradient_mismatch(
    l: &LikelihoodMap,
    grad: &[f64],
    f: impl Fn(&LikelihoodMap) -> f64,
) -> Option<(usize, f64, f64)> {
    (0..grad.len()).find_map(|i| {
        let fd = central_difference(l, i, 1e-4, &f);
        (!close(fd, grad[i], 1e-3, 1e-8)).then_some((i, fd, grad[i]))
    })
}
