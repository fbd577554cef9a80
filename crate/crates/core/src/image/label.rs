use serde::{Deserialize, Serialize};

use super::BinaryMask;
use crate::unionfind::DisjointSet;

/// Pixel adjacency used for connected components.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Connectivity {
    Four,
    #[default]
    Eight,
}

impl Connectivity {
    /// Neighbour offsets that precede a pixel in row-major order.
    pub(crate) fn backward_offsets(self) -> &'static [(isize, isize)] {
        match self {
            Connectivity::Four => &[(-1, 0), (0, -1)],
            Connectivity::Eight => &[(-1, 0), (-1, -1), (0, -1), (1, -1)],
        }
    }

    pub(crate) fn offsets(self) -> &'static [(isize, isize)] {
        match self {
            Connectivity::Four => &[(-1, 0), (1, 0), (0, -1), (0, 1)],
            Connectivity::Eight => &[
                (-1, -1),
                (0, -1),
                (1, -1),
                (-1, 0),
                (1, 0),
                (-1, 1),
                (0, 1),
                (1, 1),
            ],
        }
    }

    pub fn from_count(n: u8) -> Option<Self> {
        match n {
            4 => Some(Connectivity::Four),
            8 => Some(Connectivity::Eight),
            _ => None,
        }
    }

    pub fn count(self) -> u8 {
        match self {
            Connectivity::Four => 4,
            Connectivity::Eight => 8,
        }
    }
}

/// Connected-component decomposition of a mask's foreground.
///
/// Label 0 is background; components are numbered `1..=component_count` in
/// order of their first pixel in row-major order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ComponentLabeling {
    pub width: usize,
    pub height: usize,
    pub labels: Vec<u32>,
    pub component_count: usize,
    pub sizes: Vec<usize>,
    pub connectivity: Connectivity,
}

impl ComponentLabeling {
    pub fn label_at(&self, x: usize, y: usize) -> u32 {
        self.labels[y * self.width + x]
    }
}

/// Two-pass union-find labeling.
pub fn label_components(mask: &BinaryMask, connectivity: Connectivity) -> ComponentLabeling {
    let (w, h) = mask.dims();
    let bits = mask.bits();
    let mut ds = DisjointSet::new(w * h);
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            if !bits[i] {
                continue;
            }
            for &(dx, dy) in connectivity.backward_offsets() {
                let (nx, ny) = (x as isize + dx, y as isize + dy);
                if nx >= 0 && ny >= 0 && (nx as usize) < w && mask.get_or_background(nx, ny) {
                    ds.union(i, ny as usize * w + nx as usize);
                }
            }
        }
    }

    let mut labels = vec![0u32; w * h];
    let mut root_label = vec![0u32; w * h];
    let mut sizes = Vec::new();
    for i in 0..w * h {
        if !bits[i] {
            continue;
        }
        let r = ds.find(i);
        if root_label[r] == 0 {
            sizes.push(0);
            root_label[r] = sizes.len() as u32;
        }
        let l = root_label[r];
        labels[i] = l;
        sizes[l as usize - 1] += 1;
    }

    ComponentLabeling {
        width: w,
        height: h,
        labels,
        component_count: sizes.len(),
        sizes,
        connectivity,
    }
}
