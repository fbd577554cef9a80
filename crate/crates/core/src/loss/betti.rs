//! Betti matching between a ground-truth map `G` and a prediction `L`.
//!
//! Both maps are foreground-high. They are filtered on `u = 1 - value`, so
//! that under `Sublevel` confident foreground is born first; every reported
//! birth and death is a `u` value. Bars are matched through the comparison
//! image `C`: the inclusions `G -> C` and `L -> C` each induce a partial
//! matching of barcodes (via the image persistence module), and a bar of `G`
//! is matched with a bar of `L` when both are sent to the same bar of `C`.
//! Dimension 1 runs the same construction on the dual (complement)
//! filtrations, where the inclusions reverse direction.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::GradientMap;
use crate::error::{Error, Result};
use crate::image::{same_dims, Connectivity, LikelihoodMap};
use crate::persistence::{
    raw_barcode, Filtration, MergeSweep, PersistenceBar, RawBarcode,
};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FiltrationType {
    #[default]
    Sublevel,
    Superlevel,
    /// Mean of the sublevel and superlevel results.
    Bothlevels,
}

impl FiltrationType {
    fn filtrations(self) -> &'static [Filtration] {
        match self {
            FiltrationType::Sublevel => &[Filtration::Sublevel],
            FiltrationType::Superlevel => &[Filtration::Superlevel],
            FiltrationType::Bothlevels => &[Filtration::Sublevel, Filtration::Superlevel],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BettiMatchConfig {
    pub filtration_type: FiltrationType,
    /// Unmatched prediction bars shorter than this carry no loss.
    pub barcode_length_threshold: f64,
    /// Push unmatched prediction bars to `(1, 0)` instead of the diagonal.
    pub push_unmatched_to_1_0: bool,
}

impl Default for BettiMatchConfig {
    /// Tuned values: sublevel, 0.345, push enabled.
    fn default() -> Self {
        Self {
            filtration_type: FiltrationType::Sublevel,
            barcode_length_threshold: 0.345,
            push_unmatched_to_1_0: true,
        }
    }
}

impl BettiMatchConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.barcode_length_threshold) {
            return Err(Error::param(
                "barcode_length_threshold",
                format!("{} is outside [0, 1]", self.barcode_length_threshold),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchedPair {
    pub filtration: Filtration,
    pub gt: PersistenceBar,
    pub pred: PersistenceBar,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaggedBar {
    pub filtration: Filtration,
    pub bar: PersistenceBar,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BettiMatchResult {
    pub matched: Vec<MatchedPair>,
    /// Unmatched prediction bars at or above the length threshold.
    pub unmatched_pred: Vec<TaggedBar>,
    /// Unmatched ground-truth bars of nonzero length.
    pub unmatched_gt: Vec<TaggedBar>,
    /// Unmatched prediction bars discarded as short-lived noise.
    pub noise_pred: Vec<TaggedBar>,
    pub loss: f64,
    /// d(loss)/d(L) per pixel.
    pub grad: GradientMap,
}

/// Element-wise `min` for sublevel and `max` for superlevel, so both inputs'
/// filtered spaces include into the comparison image's.
pub fn comparison_image(
    g: &LikelihoodMap,
    l: &LikelihoodMap,
    filtration: Filtration,
) -> Result<LikelihoodMap> {
    same_dims(g.dims(), l.dims())?;
    let pick = match filtration {
        Filtration::Sublevel => f64::min,
        Filtration::Superlevel => f64::max,
    };
    let values = g
        .values()
        .iter()
        .zip(l.values())
        .map(|(&a, &b)| pick(a, b))
        .collect();
    LikelihoodMap::new(g.width(), g.height(), values)
}

/// Matches the barcodes of `g` and `l` without evaluating the loss.
///
/// `loss` is left at zero and `grad` empty; see [`betti_loss`].
pub fn induced_matching(
    g: &LikelihoodMap,
    l: &LikelihoodMap,
    cfg: &BettiMatchConfig,
) -> Result<BettiMatchResult> {
    same_dims(g.dims(), l.dims())?;
    cfg.validate()?;
    let mut out = BettiMatchResult {
        matched: Vec::new(),
        unmatched_pred: Vec::new(),
        unmatched_gt: Vec::new(),
        noise_pred: Vec::new(),
        loss: 0.0,
        grad: GradientMap::zeros(g.width(), g.height()),
    };
    for &f in cfg.filtration_type.filtrations() {
        let m = match_filtration(g, l, f)?;
        for (gi, li) in &m.pairs {
            out.matched.push(MatchedPair {
                filtration: f,
                gt: m.gt.bars[*gi].clone(),
                pred: m.pred.bars[*li].clone(),
            });
        }
        for i in m.unmatched_pred {
            let bar = m.pred.bars[i].clone();
            if bar.persistence() < cfg.barcode_length_threshold {
                out.noise_pred.push(TaggedBar { filtration: f, bar });
            } else {
                out.unmatched_pred.push(TaggedBar { filtration: f, bar });
            }
        }
        for i in m.unmatched_gt {
            let bar = m.gt.bars[i].clone();
            if bar.persistence() > 0.0 {
                out.unmatched_gt.push(TaggedBar { filtration: f, bar });
            }
        }
    }
    Ok(out)
}

/// Betti matching loss with its gradient with respect to `l`.
///
/// Per filtration:
/// `sum_matched [(b_L - b_G)^2 + (d_L - d_G)^2] + sum_unmatched_pred U + sum_unmatched_gt (b_G - d_G)^2`
/// where `U` pushes `(b, d)` to `(1, 0)` or, with pushing disabled, to its
/// own midpoint. `Bothlevels` averages the two filtrations.
pub fn betti_loss(
    g: &LikelihoodMap,
    l: &LikelihoodMap,
    cfg: &BettiMatchConfig,
) -> Result<BettiMatchResult> {
    let mut res = induced_matching(g, l, cfg)?;
    let w = l.width();
    let idx = |(x, y): (usize, usize)| y * w + x;
    let mut loss = 0.0;
    let mut grad = GradientMap::zeros(l.width(), l.height());

    // Reported values are u = 1 - L, so d/dL = -d/du.
    let mut push = |bar: &PersistenceBar, d_birth: f64, d_death: f64| {
        grad.values[idx(bar.birth_pixel)] -= d_birth;
        if let Some(p) = bar.death_pixel {
            grad.values[idx(p)] -= d_death;
        }
    };

    for m in &res.matched {
        let (db, dd) = (m.pred.birth - m.gt.birth, m.pred.death - m.gt.death);
        loss += db * db + dd * dd;
        push(&m.pred, 2.0 * db, 2.0 * dd);
    }
    for t in &res.unmatched_pred {
        let (b, d) = (t.bar.birth, t.bar.death);
        let (tb, td) = if cfg.push_unmatched_to_1_0 {
            (1.0, 0.0)
        } else {
            ((b + d) / 2.0, (b + d) / 2.0)
        };
        loss += (b - tb).powi(2) + (d - td).powi(2);
        if cfg.push_unmatched_to_1_0 {
            push(&t.bar, 2.0 * (b - tb), 2.0 * (d - td));
        } else {
            // (b - m)^2 + (d - m)^2 = (b - d)^2 / 2
            push(&t.bar, b - d, d - b);
        }
    }
    for t in &res.unmatched_gt {
        loss += (t.bar.birth - t.bar.death).powi(2);
    }

    let n = cfg.filtration_type.filtrations().len() as f64;
    res.loss = loss / n;
    grad.values.iter_mut().for_each(|v| *v /= n);
    res.grad = grad;
    Ok(res)
}

struct FiltrationMatch {
    gt: crate::persistence::Barcode,
    pred: crate::persistence::Barcode,
    /// Indices into `gt.bars` and `pred.bars`.
    pairs: Vec<(usize, usize)>,
    unmatched_gt: Vec<usize>,
    unmatched_pred: Vec<usize>,
}

fn match_filtration(
    g: &LikelihoodMap,
    l: &LikelihoodMap,
    filtration: Filtration,
) -> Result<FiltrationMatch> {
    let (w, h) = g.dims();
    let ug = g.inverted();
    let ul = l.inverted();
    let uc = comparison_image(&ug, &ul, filtration)?;

    // Sweep keys: the filtration order expressed as an ascending sort.
    let keys = |m: &LikelihoodMap| -> Vec<f64> {
        match filtration {
            Filtration::Sublevel => m.values().to_vec(),
            Filtration::Superlevel => m.values().iter().map(|v| -v).collect(),
        }
    };
    let (kg, kl, kc) = (keys(&ug), keys(&ul), keys(&uc));
    let neg = |k: &[f64]| -> Vec<f64> { k.iter().map(|v| -v).collect() };

    let raw_g = raw_barcode(&kg, w, h);
    let raw_l = raw_barcode(&kl, w, h);

    // Dimension 0: G -> C and L -> C, keyed by birth pixel.
    let g_to_c = induced_map(&kg, &kc, w, h, Connectivity::Eight, false);
    let l_to_c = induced_map(&kl, &kc, w, h, Connectivity::Eight, false);
    // Dimension 1 on the duals: C* -> G* and C* -> L*, keyed by the dual
    // birth pixel, which is the primal death pixel.
    let (dc, dg, dl) = (neg(&kc), neg(&kg), neg(&kl));
    let c_to_g = induced_map(&dc, &dg, w, h, Connectivity::Four, true);
    let c_to_l = induced_map(&dc, &dl, w, h, Connectivity::Four, true);

    let gt = raw_g.to_barcode(&ug, filtration);
    let pred = raw_l.to_barcode(&ul, filtration);
    let pairs = pair_bars(&raw_g, &raw_l, &g_to_c, &l_to_c, &c_to_g, &c_to_l);

    let mut g_used = vec![false; gt.bars.len()];
    let mut l_used = vec![false; pred.bars.len()];
    for &(a, b) in &pairs {
        g_used[a] = true;
        l_used[b] = true;
    }
    let unmatched = |used: &[bool]| (0..used.len()).filter(|&i| !used[i]).collect();
    Ok(FiltrationMatch {
        unmatched_gt: unmatched(&g_used),
        unmatched_pred: unmatched(&l_used),
        gt,
        pred,
        pairs,
    })
}

// Bar indices follow `RawBarcode::to_barcode`: dim-0 bars, then dim-1 bars.
fn pair_bars(
    raw_g: &RawBarcode,
    raw_l: &RawBarcode,
    g_to_c: &HashMap<usize, usize>,
    l_to_c: &HashMap<usize, usize>,
    c_to_g: &HashMap<usize, usize>,
    c_to_l: &HashMap<usize, usize>,
) -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();

    let mut g_by_c: HashMap<usize, usize> = HashMap::new();
    for (i, bar) in raw_g.dim0.iter().enumerate() {
        if let Some(&c) = g_to_c.get(&bar.birth) {
            g_by_c.insert(c, i);
        }
    }
    for (j, bar) in raw_l.dim0.iter().enumerate() {
        if let Some(gi) = l_to_c.get(&bar.birth).and_then(|c| g_by_c.get(c)) {
            pairs.push((*gi, j));
        }
    }

    let by_death = |bars: &[crate::persistence::RawBar]| -> HashMap<usize, usize> {
        bars.iter()
            .enumerate()
            .filter_map(|(i, b)| b.death.map(|d| (d, i)))
            .collect()
    };
    let g1 = by_death(&raw_g.dim1);
    let l1 = by_death(&raw_l.dim1);
    let mut dual_c: Vec<&usize> = c_to_g.keys().collect();
    dual_c.sort_unstable();
    for c in dual_c {
        let (Some(gd), Some(ld)) = (c_to_g.get(c), c_to_l.get(c)) else {
            continue;
        };
        if let (Some(&gi), Some(&li)) = (g1.get(gd), l1.get(ld)) {
            pairs.push((raw_g.dim0.len() + gi, raw_l.dim0.len() + li));
        }
    }
    pairs
}

#[derive(Clone, Copy)]
struct Mark {
    /// Entry position in the small filtration.
    order: usize,
    /// Small-filtration birth vertex that created the mark.
    vertex: usize,
}

/// Induced matching of the inclusion `small -> big` in dimension 0.
///
/// Requires `big[p] <= small[p]` for every pixel, i.e. the big filtration's
/// sublevel sets contain the small one's. Returns, for each small bar that
/// survives into the image module, the birth vertex of the big bar it is
/// matched to. Both bar sets are identified by birth vertex, as produced by
/// the plain sweep with the same keys.
///
/// The image module is tracked by marking components of the big sweep once
/// they contain a pixel of the small filtration; marks follow the elder rule
/// in small-filtration order, and when marked components merge the younger
/// mark dies together with a big bar dying at the same pixel.
pub(crate) fn induced_map(
    small: &[f64],
    big: &[f64],
    width: usize,
    height: usize,
    connectivity: Connectivity,
    with_frame: bool,
) -> HashMap<usize, usize> {
    debug_assert!(small.iter().zip(big).all(|(s, b)| b <= s));
    let n = small.len();

    // (key, kind, pixel); kind 0 = enters big, 1 = enters small.
    let mut events: Vec<(f64, u8, usize)> = Vec::with_capacity(2 * n);
    events.extend((0..n).map(|p| (big[p], 0u8, p)));
    events.extend((0..n).map(|p| (small[p], 1u8, p)));
    events.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    let mut sweep = MergeSweep::new(width, height, connectivity, with_frame);
    let total = n + usize::from(with_frame);
    let mut marks: Vec<Option<Mark>> = vec![None; total];
    if let Some(f) = sweep.frame() {
        marks[f] = Some(Mark {
            order: 0,
            vertex: f,
        });
    }
    let mut next_order = 1;
    let mut result = HashMap::new();

    for (_, kind, p) in events {
        if kind == 0 {
            let ins = sweep.insert(p);
            let Some((&eldest, younger)) = ins.joined.split_first() else {
                continue;
            };
            let mut marked: Vec<(usize, Mark)> = ins
                .joined
                .iter()
                .filter_map(|&c| marks[c].map(|m| (c, m)))
                .collect();
            marked.sort_by_key(|(_, m)| m.order);
            if let Some(&(survivor_comp, survivor)) = marked.first() {
                for &(comp, mark) in &marked[1..] {
                    // The mark's own component dies in the big sweep unless it
                    // is the eldest; then the class carrying the surviving
                    // mark is the one that dies.
                    let dying_bar = if comp != eldest { comp } else { survivor_comp };
                    if Some(mark.vertex) != sweep.frame() {
                        result.insert(mark.vertex, dying_bar);
                    }
                }
                marks[eldest] = Some(survivor);
            }
            for &c in younger {
                marks[c] = None;
            }
        } else {
            let comp = sweep.component_birth(p);
            if marks[comp].is_none() {
                marks[comp] = Some(Mark {
                    order: next_order,
                    vertex: p,
                });
                next_order += 1;
            }
        }
    }

    // Essential bars: marks still alive are matched with the bar of the
    // component that carries them.
    for v in 0..total {
        if let Some(m) = marks[v] {
            if Some(m.vertex) != sweep.frame() && sweep.component_birth(v) == v {
                result.insert(m.vertex, v);
            }
        }
    }
    result
}
