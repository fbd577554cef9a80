//! Persistent homology of 2D rasters in dimensions 0 and 1.
//!
//! Pixels are vertices of a cubical complex (V-construction). Dimension-0
//! features are tracked by a union-find sweep over pixels sorted by
//! `(value, index)` with 8-connectivity and the elder rule. Dimension-1
//! features are obtained by duality: the same sweep runs over the
//! complement in reverse order with 4-connectivity on a grid padded by a
//! background frame, and each dual component that is not the frame yields a
//! loop with birth and death exchanged.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{Connectivity, LikelihoodMap};
use crate::unionfind::DisjointSet;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Filtration {
    /// Features appear as values increase: `{p : f(p) <= eps}`.
    #[default]
    Sublevel,
    /// Features appear as values decrease: `{p : f(p) >= eps}`.
    Superlevel,
}

impl Filtration {
    pub fn opposite(self) -> Self {
        match self {
            Filtration::Sublevel => Filtration::Superlevel,
            Filtration::Superlevel => Filtration::Sublevel,
        }
    }

    /// Death value assigned to essential bars: the last value of the filtration.
    pub fn terminal_value(self) -> f64 {
        match self {
            Filtration::Sublevel => 1.0,
            Filtration::Superlevel => 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PersistenceBar {
    pub dim: u8,
    pub birth: f64,
    pub death: f64,
    pub birth_pixel: (usize, usize),
    pub death_pixel: Option<(usize, usize)>,
    pub essential: bool,
}

impl PersistenceBar {
    /// Length of the bar, `|death - birth|`.
    pub fn persistence(&self) -> f64 {
        (self.death - self.birth).abs()
    }

    /// Whether the feature exists in the filtered space at `eps`.
    pub fn alive_at(&self, eps: f64, filtration: Filtration) -> bool {
        match filtration {
            Filtration::Sublevel => self.birth <= eps && (self.essential || eps < self.death),
            Filtration::Superlevel => eps <= self.birth && (self.essential || self.death < eps),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Barcode {
    pub bars: Vec<PersistenceBar>,
    pub filtration: Filtration,
    pub source_dims: (usize, usize),
}

impl Barcode {
    pub fn dim(&self, dim: u8) -> impl Iterator<Item = &PersistenceBar> {
        self.bars.iter().filter(move |b| b.dim == dim)
    }

    /// Sorts bars by `(dim, birth, death, birth_pixel)`.
    pub fn sort_stable(&mut self) {
        self.bars.sort_by(|a, b| {
            a.dim
                .cmp(&b.dim)
                .then(a.birth.total_cmp(&b.birth))
                .then(a.death.total_cmp(&b.death))
                .then((a.birth_pixel.1, a.birth_pixel.0).cmp(&(b.birth_pixel.1, b.birth_pixel.0)))
        });
    }
}

/// Barcode of `map` under `filtration`.
///
/// Superlevel persistence of `f` is sublevel persistence of `1 - f` with
/// values mapped back; bar values are always the map's own values at the
/// critical pixels, and essential bars die at [`Filtration::terminal_value`].
pub fn barcode(map: &LikelihoodMap, filtration: Filtration) -> Result<Barcode> {
    if let Some(index) = map.values().iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    let keys: Vec<f64> = match filtration {
        Filtration::Sublevel => map.values().to_vec(),
        Filtration::Superlevel => map.values().iter().map(|v| -v).collect(),
    };
    let raw = raw_barcode(&keys, map.width(), map.height());
    Ok(raw.to_barcode(map, filtration))
}

/// `(beta_0, beta_1)` at filtration value `eps`.
pub fn betti_numbers(bc: &Barcode, eps: f64) -> (usize, usize) {
    let count = |d| bc.dim(d).filter(|b| b.alive_at(eps, bc.filtration)).count();
    (count(0), count(1))
}

/// A persistence pair as pixel indices, before values are attached.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct RawBar {
    pub birth: usize,
    /// `None` for essential bars.
    pub death: Option<usize>,
}

#[derive(Clone, Debug, Default)]
pub(crate) struct RawBarcode {
    pub dim0: Vec<RawBar>,
    pub dim1: Vec<RawBar>,
}

impl RawBarcode {
    /// Attaches values read from `values` at the critical pixels.
    pub fn to_barcode(&self, values: &LikelihoodMap, filtration: Filtration) -> Barcode {
        let w = values.width();
        let xy = |i: usize| (i % w, i / w);
        let v = values.values();
        let mut bars = Vec::with_capacity(self.dim0.len() + self.dim1.len());
        for (dim, set) in [(0u8, &self.dim0), (1u8, &self.dim1)] {
            for bar in set {
                bars.push(PersistenceBar {
                    dim,
                    birth: v[bar.birth],
                    death: bar.death.map_or(filtration.terminal_value(), |d| v[d]),
                    birth_pixel: xy(bar.birth),
                    death_pixel: bar.death.map(xy),
                    essential: bar.death.is_none(),
                });
            }
        }
        Barcode {
            bars,
            filtration,
            source_dims: values.dims(),
        }
    }
}

/// Pixel indices sorted ascending by `(key, index)`.
pub(crate) fn sort_order(keys: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..keys.len()).collect();
    order.sort_by(|&a, &b| keys[a].total_cmp(&keys[b]).then(a.cmp(&b)));
    order
}

/// Union-find over pixels entering one at a time, with the elder rule.
///
/// The optional frame is an extra vertex, present from the start and older
/// than every pixel, adjacent to all border pixels.
pub(crate) struct MergeSweep {
    width: usize,
    height: usize,
    connectivity: Connectivity,
    frame: Option<usize>,
    ds: DisjointSet,
    present: Vec<bool>,
    /// Per root: the birth pixel of the component (the frame for its own).
    oldest: Vec<usize>,
    /// Entry position of each vertex; the frame has position 0.
    rank: Vec<usize>,
    next_rank: usize,
}

/// Outcome of inserting one pixel.
pub(crate) struct Insertion {
    /// Distinct neighbouring components before the merge, as birth vertices,
    /// eldest first.
    pub joined: Vec<usize>,
}

impl MergeSweep {
    pub fn new(width: usize, height: usize, connectivity: Connectivity, with_frame: bool) -> Self {
        let n = width * height;
        let total = n + usize::from(with_frame);
        let mut sweep = Self {
            width,
            height,
            connectivity,
            frame: with_frame.then_some(n),
            ds: DisjointSet::new(total),
            present: vec![false; total],
            oldest: (0..total).collect(),
            rank: vec![usize::MAX; total],
            next_rank: 1,
        };
        if let Some(f) = sweep.frame {
            sweep.present[f] = true;
            sweep.rank[f] = 0;
        }
        sweep
    }

    pub fn frame(&self) -> Option<usize> {
        self.frame
    }

    /// Birth vertex of the component containing `v`.
    pub fn component_birth(&mut self, v: usize) -> usize {
        let r = self.ds.find(v);
        self.oldest[r]
    }

    fn neighbours(&self, p: usize) -> impl Iterator<Item = usize> + '_ {
        let (x, y) = ((p % self.width) as isize, (p / self.width) as isize);
        let (w, h) = (self.width as isize, self.height as isize);
        let frame = self.frame;
        let on_border = x == 0 || y == 0 || x == w - 1 || y == h - 1;
        self.connectivity
            .offsets()
            .iter()
            .filter_map(move |&(dx, dy)| {
                let (nx, ny) = (x + dx, y + dy);
                (nx >= 0 && ny >= 0 && nx < w && ny < h).then(|| (ny * w + nx) as usize)
            })
            .chain(frame.filter(|_| on_border))
    }

    /// Adds pixel `p`; its component takes over the eldest neighbour's
    /// identity, younger neighbours die at `p`.
    pub fn insert(&mut self, p: usize) -> Insertion {
        debug_assert!(!self.present[p]);
        self.present[p] = true;
        self.rank[p] = self.next_rank;
        self.next_rank += 1;

        let nbrs: Vec<usize> = self.neighbours(p).filter(|&q| self.present[q]).collect();
        let mut roots: Vec<usize> = nbrs.into_iter().map(|q| self.ds.find(q)).collect();
        roots.sort_unstable();
        roots.dedup();
        let mut joined: Vec<usize> = roots.iter().map(|&r| self.oldest[r]).collect();
        joined.sort_by_key(|&b| self.rank[b]);

        if let Some(&eldest) = joined.first() {
            for &r in &roots {
                let root = self.ds.union(p, r).unwrap_or_else(|| self.ds.find(p));
                self.oldest[root] = eldest;
            }
            let root = self.ds.find(p);
            self.oldest[root] = eldest;
        } else {
            let root = self.ds.find(p);
            self.oldest[root] = p;
        }
        Insertion { joined }
    }
}

/// Dimension-0 pairs of the sublevel filtration of `keys`.
fn sweep_dim0(
    keys: &[f64],
    width: usize,
    height: usize,
    connectivity: Connectivity,
    with_frame: bool,
) -> Vec<RawBar> {
    let mut sweep = MergeSweep::new(width, height, connectivity, with_frame);
    let mut bars = Vec::new();
    for p in sort_order(keys) {
        let ins = sweep.insert(p);
        if ins.joined.is_empty() {
            continue;
        }
        for &younger in &ins.joined[1..] {
            if Some(younger) != sweep.frame() {
                bars.push(RawBar {
                    birth: younger,
                    death: Some(p),
                });
            }
        }
    }
    // Survivors: every component whose birth vertex is still its own
    // component's identity and that never died. Without a frame, that is one
    // per final component.
    if !with_frame {
        let mut seen = vec![false; keys.len()];
        for p in 0..keys.len() {
            let b = sweep.component_birth(p);
            if !seen[b] {
                seen[b] = true;
                bars.push(RawBar {
                    birth: b,
                    death: None,
                });
            }
        }
    }
    bars
}

/// Raw barcode of the sublevel filtration of `keys`, dims 0 and 1.
pub(crate) fn raw_barcode(keys: &[f64], width: usize, height: usize) -> RawBarcode {
    let dim0 = sweep_dim0(keys, width, height, Connectivity::Eight, false);
    let dual: Vec<f64> = keys.iter().map(|k| -k).collect();
    let dim1 = sweep_dim0(&dual, width, height, Connectivity::Four, true)
        .into_iter()
        .map(|b| RawBar {
            birth: b.death.expect("dual components all merge into the frame"),
            death: Some(b.birth),
        })
        .collect();
    RawBarcode { dim0, dim1 }
}
