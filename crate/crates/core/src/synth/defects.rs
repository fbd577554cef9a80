use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dims, Error, Result};
use crate::image::{label_components, BinaryMask, ComponentLabeling, Connectivity, GrayImage};
use crate::metrics::EsdReport;
use crate::unionfind::DisjointSet;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DefectKind {
    /// Bright connector between two distinct lines.
    Bridge,
    /// Dark gap across a line.
    Cut,
    /// Small bright dots away from all lines.
    SpeckleField,
    /// Dark disc over a line.
    ShadingBlob,
    /// Line interior darkened, leaving its outline.
    OutlineOnly,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DefectParams {
    pub bridge_width: usize,
    pub bridge_max_length: usize,
    pub cut_length: usize,
    /// Side of a square speckle dot, at most 4.
    pub speckle_size: usize,
    /// Blob radius beyond half the local line width.
    pub blob_margin: usize,
    pub outline_thickness: usize,
}

impl Default for DefectParams {
    fn default() -> Self {
        Self {
            bridge_width: 2,
            bridge_max_length: 24,
            cut_length: 3,
            speckle_size: 2,
            blob_margin: 2,
            outline_thickness: 1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DefectSpec {
    pub kind: DefectKind,
    pub count: usize,
    #[serde(default)]
    pub params: DefectParams,
}

impl DefectSpec {
    pub fn new(kind: DefectKind, count: usize) -> Self {
        Self {
            kind,
            count,
            params: DefectParams::default(),
        }
    }

    fn validate(&self) -> Result<()> {
        let p = &self.params;
        if p.bridge_width == 0 || p.bridge_max_length == 0 {
            return Err(Error::param("bridge_width", "bridge sizes must be positive"));
        }
        if p.cut_length < 2 {
            return Err(Error::param("cut_length", "gap must be at least 2 pixels"));
        }
        if !(1..=4).contains(&p.speckle_size) {
            return Err(Error::param("speckle_size", "must be in [1, 4]"));
        }
        if p.outline_thickness == 0 {
            return Err(Error::param("outline_thickness", "must be positive"));
        }
        Ok(())
    }
}

/// Bounding box of one injected defect.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DefectSite {
    pub kind: DefectKind,
    pub x: usize,
    pub y: usize,
    pub width: usize,
    pub height: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Injection {
    pub image: GrayImage,
    /// The unchanged ground truth.
    pub gt: BinaryMask,
    /// ESD report a pixel-faithful segmentation of `image` incurs against `gt`.
    pub expected_esd_delta: EsdReport,
    pub sites: Vec<DefectSite>,
}

struct Canvas<'a> {
    w: usize,
    h: usize,
    gt: &'a BinaryMask,
    labels: ComponentLabeling,
    members: Vec<Vec<usize>>,
    bbox: Vec<(usize, usize, usize, usize)>,
    /// Pixels near earlier defects.
    reserved: Vec<bool>,
    /// Line pixels darkened so far.
    removed: Vec<bool>,
    pieces: Vec<usize>,
    line_level: u8,
    bg_level: u8,
}

fn median(mut v: Vec<u8>) -> Option<u8> {
    if v.is_empty() {
        return None;
    }
    let mid = v.len() / 2;
    Some(*v.select_nth_unstable(mid).1)
}

impl<'a> Canvas<'a> {
    fn new(image: &GrayImage, gt: &'a BinaryMask) -> Self {
        let (w, h) = gt.dims();
        let labels = label_components(gt, Connectivity::Eight);
        let n = labels.component_count;
        let mut members = vec![Vec::new(); n];
        let mut bbox = vec![(usize::MAX, usize::MAX, 0, 0); n];
        for (i, &l) in labels.labels.iter().enumerate() {
            if l > 0 {
                let c = l as usize - 1;
                members[c].push(i);
                let (x, y) = (i % w, i / w);
                let b = &mut bbox[c];
                *b = (b.0.min(x), b.1.min(y), b.2.max(x + 1), b.3.max(y + 1));
            }
        }
        let on: Vec<u8> = gt.foreground_indices().map(|i| image.pixels()[i]).collect();
        let off: Vec<u8> = (0..w * h).filter(|&i| !gt.bits()[i]).map(|i| image.pixels()[i]).collect();
        Self {
            w,
            h,
            gt,
            labels,
            members,
            bbox,
            reserved: vec![false; w * h],
            removed: vec![false; w * h],
            pieces: vec![1; n],
            line_level: median(on).unwrap_or(255),
            bg_level: median(off).unwrap_or(0),
        }
    }

    fn label(&self, i: usize) -> u32 {
        self.labels.labels[i]
    }

    fn free(&self, pixels: &[usize]) -> bool {
        pixels.iter().all(|&i| !self.reserved[i])
    }

    fn reserve(&mut self, pixels: &[usize], radius: usize) {
        let r = radius as isize;
        for &i in pixels {
            let (x, y) = ((i % self.w) as isize, (i / self.w) as isize);
            for dy in -r..=r {
                for dx in -r..=r {
                    if let Some(j) = self.index(x + dx, y + dy) {
                        self.reserved[j] = true;
                    }
                }
            }
        }
    }

    fn index(&self, x: isize, y: isize) -> Option<usize> {
        (x >= 0 && y >= 0 && (x as usize) < self.w && (y as usize) < self.h)
            .then(|| y as usize * self.w + x as usize)
    }

    /// Labels found within Chebyshev distance 1 of `pixels`, excluding `pixels`.
    fn neighbour_labels(&self, pixels: &[usize]) -> Vec<u32> {
        let mut out = Vec::new();
        for &i in pixels {
            let (x, y) = ((i % self.w) as isize, (i / self.w) as isize);
            for dy in -1..=1 {
                for dx in -1..=1 {
                    if let Some(j) = self.index(x + dx, y + dy) {
                        let l = self.label(j);
                        if l > 0 && !out.contains(&l) {
                            out.push(l);
                        }
                    }
                }
            }
        }
        out
    }

    /// 8-connected pieces of line `c` once `extra` pixels are also removed.
    fn pieces_after(&self, c: usize, extra: &[usize]) -> usize {
        let (x0, y0, x1, y1) = self.bbox[c];
        let label = c as u32 + 1;
        let mut extra = extra.to_vec();
        extra.sort_unstable();
        let gone = |i: usize| self.removed[i] || extra.binary_search(&i).is_ok();
        let crop = BinaryMask::from_fn(x1 - x0, y1 - y0, |x, y| {
            let i = (y + y0) * self.w + x + x0;
            self.label(i) == label && !gone(i)
        });
        label_components(&crop, Connectivity::Eight).component_count
    }

    fn site(&self, kind: DefectKind, pixels: &[usize]) -> DefectSite {
        let xs = pixels.iter().map(|i| i % self.w);
        let ys = pixels.iter().map(|i| i / self.w);
        let (x0, x1) = (xs.clone().min().unwrap(), xs.max().unwrap());
        let (y0, y1) = (ys.clone().min().unwrap(), ys.max().unwrap());
        DefectSite {
            kind,
            x: x0,
            y: y0,
            width: x1 - x0 + 1,
            height: y1 - y0 + 1,
        }
    }
}

const DIRECTIONS: [(isize, isize); 4] = [(1, 0), (-1, 0), (0, 1), (0, -1)];

/// Adds `spec.count` defects of one kind to `image`.
///
/// Every defect is placed so that thresholding a noiseless image at the
/// line/background midpoint changes the ESD counts by exactly its share:
/// a bridge adds one short, a cut or shading blob one open, each speckle
/// one false positive, an outline nothing.
pub fn inject_defects(image: &GrayImage, gt: &BinaryMask, spec: &DefectSpec, seed: u64) -> Result<Injection> {
    inject_defect_set(image, gt, std::slice::from_ref(spec), seed)
}

/// Applies several specs in order on one canvas, keeping defects apart so
/// their ESD effects add up.
pub fn inject_defect_set(image: &GrayImage, gt: &BinaryMask, specs: &[DefectSpec], seed: u64) -> Result<Injection> {
    check_dims(gt.dims(), image.dims())?;
    for spec in specs {
        spec.validate()?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cv = Canvas::new(image, gt);
    let mut st = State {
        out: image.clone(),
        forest: DisjointSet::new(cv.labels.component_count + 1),
        hollowed: vec![false; cv.labels.component_count],
        counts: (0, 0, 0),
        sites: Vec::new(),
    };
    for spec in specs {
        place(&mut cv, &mut st, spec, &mut rng)?;
    }
    let (opens, shorts, fps) = st.counts;
    Ok(Injection {
        image: st.out,
        gt: gt.clone(),
        expected_esd_delta: EsdReport::from_counts(opens, shorts, fps, 0, cv.labels.component_count as u64),
        sites: st.sites,
    })
}

struct State {
    out: GrayImage,
    forest: DisjointSet,
    hollowed: Vec<bool>,
    /// Opens, shorts, false positives.
    counts: (u64, u64, u64),
    sites: Vec<DefectSite>,
}

fn place(cv: &mut Canvas<'_>, st: &mut State, spec: &DefectSpec, rng: &mut ChaCha8Rng) -> Result<()> {
    let gt = cv.gt;
    let fg: Vec<usize> = gt.foreground_indices().collect();
    let p = spec.params;
    let budget = 2000 * spec.count + 100;
    let mut placed = 0;
    let mut tries = 0;
    while placed < spec.count {
        tries += 1;
        if tries > budget {
            return Err(Error::Placement(format!(
                "placed {placed} of {} {:?} defects",
                spec.count, spec.kind
            )));
        }
        let pixels = match spec.kind {
            DefectKind::Bridge => {
                let Some(start) = pick(rng, &fg) else { continue };
                let dir = DIRECTIONS[rng.random_range(0..4)];
                let Some((pixels, a, b)) = bridge(cv, start, dir, p.bridge_width, p.bridge_max_length) else {
                    continue;
                };
                if st.forest.find(a as usize) == st.forest.find(b as usize) || !cv.free(&pixels) {
                    continue;
                }
                st.forest.union(a as usize, b as usize);
                st.counts.1 += 1;
                pixels
            }
            DefectKind::Cut => {
                let Some(start) = pick(rng, &fg) else { continue };
                let c = cv.label(start) as usize - 1;
                let vertical_band = rng.random_bool(0.5);
                let (sx, sy) = (start % cv.w, start / cv.w);
                let lo = |v: usize| v.saturating_sub(p.cut_length / 2);
                let pixels: Vec<usize> = cv.members[c]
                    .iter()
                    .copied()
                    .filter(|&i| {
                        let (x, y) = (i % cv.w, i / cv.w);
                        if vertical_band {
                            (lo(sx)..lo(sx) + p.cut_length).contains(&x)
                        } else {
                            (lo(sy)..lo(sy) + p.cut_length).contains(&y)
                        }
                    })
                    .filter(|&i| !cv.removed[i])
                    .collect();
                if pixels.is_empty() || !cv.free(&pixels) || cv.pieces_after(c, &pixels) != cv.pieces[c] + 1 {
                    continue;
                }
                cv.pieces[c] += 1;
                st.counts.0 += 1;
                pixels
            }
            DefectKind::SpeckleField => {
                let s = p.speckle_size;
                if cv.w < s || cv.h < s {
                    continue;
                }
                let x0 = rng.random_range(0..=cv.w - s);
                let y0 = rng.random_range(0..=cv.h - s);
                let pixels: Vec<usize> = (y0..y0 + s)
                    .flat_map(|y| (x0..x0 + s).map(move |x| (x, y)))
                    .map(|(x, y)| y * cv.w + x)
                    .collect();
                if !cv.neighbour_labels(&pixels).is_empty() || !cv.free(&pixels) {
                    continue;
                }
                st.counts.2 += 1;
                pixels
            }
            DefectKind::ShadingBlob => {
                let Some(center) = pick(rng, &fg) else { continue };
                let label = cv.label(center);
                let c = label as usize - 1;
                let Some(pixels) = blob(cv, center, p.blob_margin) else { continue };
                let hits_other = pixels.iter().any(|&i| cv.label(i) != 0 && cv.label(i) != label);
                let on_line: Vec<usize> = pixels.iter().copied().filter(|&i| cv.label(i) == label).collect();
                if hits_other || !cv.free(&pixels) || cv.pieces_after(c, &on_line) != cv.pieces[c] + 1 {
                    continue;
                }
                cv.pieces[c] += 1;
                st.counts.0 += 1;
                pixels
            }
            DefectKind::OutlineOnly => {
                let candidates: Vec<usize> = (0..st.hollowed.len()).filter(|&c| !st.hollowed[c]).collect();
                let Some(c) = pick(rng, &candidates) else { continue };
                st.hollowed[c] = true;
                let pixels = interior(cv, c, p.outline_thickness);
                if pixels.is_empty() || !cv.free(&pixels) || cv.pieces_after(c, &pixels) != cv.pieces[c] {
                    continue;
                }
                pixels
            }
        };
        let bright = matches!(spec.kind, DefectKind::Bridge | DefectKind::SpeckleField);
        let level = if bright { cv.line_level } else { cv.bg_level };
        for &i in &pixels {
            st.out.set(i % cv.w, i / cv.w, level);
            if !bright && gt.bits()[i] {
                cv.removed[i] = true;
            }
        }
        cv.reserve(&pixels, 2);
        st.sites.push(cv.site(spec.kind, &pixels));
        placed += 1;
    }
    Ok(())
}

/// A uniformly random element.
fn pick<T: Copy>(rng: &mut ChaCha8Rng, items: &[T]) -> Option<T> {
    (!items.is_empty()).then(|| items[rng.random_range(0..items.len())])
}

/// Straight connector of `width` pixels leaving the line at `start` in
/// direction `dir` and ending at the next line. Returns its pixels and the
/// two labels it joins.
fn bridge(cv: &Canvas<'_>, start: usize, dir: (isize, isize), width: usize, max_len: usize) -> Option<(Vec<usize>, u32, u32)> {
    let a = cv.label(start);
    let (mut x, mut y) = ((start % cv.w) as isize, (start / cv.w) as isize);
    while cv.index(x, y).is_some_and(|i| cv.label(i) == a) {
        x += dir.0;
        y += dir.1;
    }
    let mut len = 0;
    let b = loop {
        let i = cv.index(x + dir.0 * len as isize, y + dir.1 * len as isize)?;
        match cv.label(i) {
            0 => len += 1,
            l if l == a => return None,
            l => break l,
        }
        if len > max_len {
            return None;
        }
    };
    if len == 0 {
        return None;
    }
    let across = (dir.1.abs(), dir.0.abs());
    let mut pixels = Vec::with_capacity(len * width);
    for k in 0..width as isize {
        for s in 0..len as isize {
            let i = cv.index(x + dir.0 * s + across.0 * k, y + dir.1 * s + across.1 * k)?;
            if cv.gt.bits()[i] {
                return None;
            }
            pixels.push(i);
        }
    }
    let mut touched = cv.neighbour_labels(&pixels);
    touched.sort_unstable();
    let mut expected = vec![a, b];
    expected.sort_unstable();
    (touched == expected).then_some((pixels, a, b))
}

/// Disc centred on a line pixel, wider than the local line width.
fn blob(cv: &Canvas<'_>, center: usize, margin: usize) -> Option<Vec<usize>> {
    let label = cv.label(center);
    let (cx, cy) = ((center % cv.w) as isize, (center / cv.w) as isize);
    let run = |dx: isize, dy: isize| {
        let count = |s: isize| {
            (1..)
                .take_while(|&k| cv.index(cx + s * dx * k, cy + s * dy * k).is_some_and(|i| cv.label(i) == label))
                .count()
        };
        1 + count(1) + count(-1)
    };
    let width = run(1, 0).min(run(0, 1));
    let r = (width / 2 + margin) as isize;
    let mut pixels = Vec::new();
    for dy in -r..=r {
        for dx in -r..=r {
            if dx * dx + dy * dy <= r * r {
                pixels.push(cv.index(cx + dx, cy + dy)?);
            }
        }
    }
    Some(pixels)
}

/// Pixels of line `c` at Chebyshev distance more than `t` from its outside.
fn interior(cv: &Canvas<'_>, c: usize, t: usize) -> Vec<usize> {
    let label = c as u32 + 1;
    let t = t as isize;
    cv.members[c]
        .iter()
        .copied()
        .filter(|&i| {
            let (x, y) = ((i % cv.w) as isize, (i / cv.w) as isize);
            (-t..=t).all(|dy| (-t..=t).all(|dx| cv.index(x + dx, y + dy).is_some_and(|j| cv.label(j) == label)))
        })
        .collect()
}
