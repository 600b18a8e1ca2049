//! Connected-component labelling of binary grids.

use crate::grid::{Image2, Volume};

/// Voxel adjacency in 3D.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Connectivity3 {
    /// Face neighbours.
    Six,
    /// Face and edge neighbours.
    Eighteen,
    /// Face, edge and corner neighbours.
    #[default]
    TwentySix,
}

/// Pixel adjacency in 2D.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Connectivity2 {
    Four,
    #[default]
    Eight,
}

impl Connectivity3 {
    pub fn offsets(self) -> Vec<[isize; 3]> {
        let mut out = Vec::new();
        for dz in -1..=1isize {
            for dy in -1..=1isize {
                for dx in -1..=1isize {
                    let order = dx.abs() + dy.abs() + dz.abs();
                    let keep = match self {
                        Connectivity3::Six => order == 1,
                        Connectivity3::Eighteen => order == 1 || order == 2,
                        Connectivity3::TwentySix => order >= 1,
                    };
                    if keep {
                        out.push([dx, dy, dz]);
                    }
                }
            }
        }
        out
    }

    pub fn from_count(n: u32) -> Option<Self> {
        match n {
            6 => Some(Self::Six),
            18 => Some(Self::Eighteen),
            26 => Some(Self::TwentySix),
            _ => None,
        }
    }
}

impl Connectivity2 {
    pub fn offsets(self) -> Vec<[isize; 3]> {
        let mut out = Vec::new();
        for dy in -1..=1isize {
            for dx in -1..=1isize {
                let order = dx.abs() + dy.abs();
                if order == 1 || (order == 2 && self == Connectivity2::Eight) {
                    out.push([dx, dy, 0]);
                }
            }
        }
        out
    }

    pub fn is_eight(self) -> bool {
        self == Connectivity2::Eight
    }

    pub fn from_count(n: u32) -> Option<Self> {
        match n {
            4 => Some(Self::Four),
            8 => Some(Self::Eight),
            _ => None,
        }
    }
}

/// Labels foreground in scan order: the component containing the first
/// foreground index gets 1, the next unvisited one 2, and so on.
/// Returns the labels and the component count.
fn label_grid(dims: [usize; 3], fg: &[bool], offsets: &[[isize; 3]]) -> (Vec<u32>, u32) {
    let [nx, ny, nz] = dims;
    let mut labels = vec![0u32; fg.len()];
    let mut next = 0u32;
    let mut stack = Vec::new();
    for start in 0..fg.len() {
        if !fg[start] || labels[start] != 0 {
            continue;
        }
        next += 1;
        labels[start] = next;
        stack.push(start);
        while let Some(i) = stack.pop() {
            let x = (i % nx) as isize;
            let y = ((i / nx) % ny) as isize;
            let z = (i / (nx * ny)) as isize;
            for o in offsets {
                let (qx, qy, qz) = (x + o[0], y + o[1], z + o[2]);
                if qx < 0 || qy < 0 || qz < 0 || qx >= nx as isize || qy >= ny as isize || qz >= nz as isize {
                    continue;
                }
                let q = qx as usize + nx * (qy as usize + ny * qz as usize);
                if fg[q] && labels[q] == 0 {
                    labels[q] = next;
                    stack.push(q);
                }
            }
        }
    }
    (labels, next)
}

/// Connected components of a 3D mask. Background is 0, components are
/// numbered 1..=K in order of their first voxel in linear index order.
pub fn connected_components(mask: &Volume<bool>, conn: Connectivity3) -> (Volume<u32>, u32) {
    let (labels, k) = label_grid(mask.meta.dims, &mask.data, &conn.offsets());
    (Volume { meta: mask.meta.clone(), data: labels }, k)
}

/// 2D counterpart of [`connected_components`].
pub fn connected_components_2d(mask: &Image2<bool>, conn: Connectivity2) -> (Image2<u32>, u32) {
    let (labels, k) = label_grid([mask.width, mask.height, 1], &mask.data, &conn.offsets());
    (Image2::from_vec(mask.width, mask.height, labels), k)
}

/// Voxel count per label, index 0 unused.
pub fn component_sizes(labels: &[u32], count: u32) -> Vec<usize> {
    let mut sizes = vec![0usize; count as usize + 1];
    for &l in labels {
        if l != 0 {
            sizes[l as usize] += 1;
        }
    }
    sizes
}
