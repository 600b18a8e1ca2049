//! Seeded watershed on peel images.
//!
//! Seeds come from the regional minima of the h-minima transform and can be
//! edited by hand. The flood assigns every in-domain pixel to exactly one
//! seed; there are no watershed-line pixels.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{Image2, Volume};
use crate::shells::{connected_components_2d, Connectivity2};
use crate::volume_io::{load_labels, save_labels, VolumeIoError, VolumeMeta};

#[derive(Debug, Error)]
pub enum SegmentError {
    #[error("no seeds")]
    NoSeeds,
    #[error("no seed with label {0}")]
    UnknownLabel(u32),
    #[error("a seed already sits at ({row}, {col})")]
    Occupied { row: usize, col: usize },
    #[error("seed position ({row}, {col}) outside the {width}x{height} image")]
    OutOfBounds { row: usize, col: usize, width: usize, height: usize },
    #[error("invalid seed set: {0}")]
    InvalidSeeds(String),
    #[error("invalid parameters: {0}")]
    Params(String),
    #[error("image is empty")]
    EmptyImage,
    #[error(transparent)]
    Io(#[from] VolumeIoError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SeedSource {
    Auto,
    Manual,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Seed {
    pub row: usize,
    pub col: usize,
    pub label: u32,
    pub src: SeedSource,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedSet {
    pub seeds: Vec<Seed>,
}

impl SeedSet {
    pub fn len(&self) -> usize {
        self.seeds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.seeds.is_empty()
    }

    pub fn labels(&self) -> Vec<u32> {
        self.seeds.iter().map(|s| s.label).collect()
    }

    pub fn max_label(&self) -> u32 {
        self.seeds.iter().map(|s| s.label).max().unwrap_or(0)
    }

    /// Labels unique and >= 1, positions inside `width x height` and
    /// pairwise distinct.
    pub fn validate(&self, width: usize, height: usize) -> Result<(), SegmentError> {
        let mut labels = std::collections::BTreeSet::new();
        let mut spots = std::collections::BTreeSet::new();
        for s in &self.seeds {
            if s.label == 0 {
                return Err(SegmentError::InvalidSeeds("label 0 is reserved".into()));
            }
            if !labels.insert(s.label) {
                return Err(SegmentError::InvalidSeeds(format!("label {} used twice", s.label)));
            }
            if s.row >= height || s.col >= width {
                return Err(SegmentError::OutOfBounds { row: s.row, col: s.col, width, height });
            }
            if !spots.insert((s.row, s.col)) {
                return Err(SegmentError::Occupied { row: s.row, col: s.col });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SegParams {
    pub h: f64,
    /// 4 or 8.
    pub connectivity: u8,
    pub invert: bool,
}

impl Default for SegParams {
    fn default() -> Self {
        Self { h: 4.0, connectivity: 4, invert: false }
    }
}

impl SegParams {
    pub fn validate(&self) -> Result<(), SegmentError> {
        if !(self.h >= 0.0) || !self.h.is_finite() {
            return Err(SegmentError::Params(format!("h must be >= 0, got {}", self.h)));
        }
        self.conn().map(|_| ())
    }

    fn conn(&self) -> Result<Connectivity2, SegmentError> {
        Connectivity2::from_count(self.connectivity as u32)
            .ok_or_else(|| SegmentError::Params(format!("connectivity must be 4 or 8, got {}", self.connectivity)))
    }
}

/// The image the flood actually runs on: inverted when cells are bright.
fn working_image(img: &Image2<f64>, p: &SegParams) -> Image2<f64> {
    if !p.invert {
        return img.clone();
    }
    let max = img.data.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    img.map(|&v| max - v)
}

fn in_domain(domain: Option<&Image2<bool>>, r: usize, c: usize) -> bool {
    domain.is_none_or(|d| *d.get(r, c))
}

/// Min-heap entry ordered by value, then insertion sequence.
#[derive(Debug, Clone, Copy)]
struct Entry {
    value: f64,
    seq: u64,
    idx: usize,
    label: u32,
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Entry {}
impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        // reversed for BinaryHeap's max-first order
        other.value.total_cmp(&self.value).then(other.seq.cmp(&self.seq))
    }
}

/// Reconstruction by erosion of `img + h` over `img`.
pub fn h_minima_transform(img: &Image2<f64>, domain: Option<&Image2<bool>>, h: f64, eight: bool) -> Image2<f64> {
    let mut out = img.map(|&v| v + h);
    let mut heap = BinaryHeap::new();
    let mut seq = 0u64;
    for r in 0..img.height {
        for c in 0..img.width {
            if in_domain(domain, r, c) {
                heap.push(Entry { value: *out.get(r, c), seq, idx: out.index(r, c), label: 0 });
                seq += 1;
            }
        }
    }
    while let Some(e) = heap.pop() {
        if e.value > out.data[e.idx] {
            continue;
        }
        let (r, c) = (e.idx / img.width, e.idx % img.width);
        for (rr, cc) in img.neighbors(r, c, eight) {
            if !in_domain(domain, rr, cc) {
                continue;
            }
            let cand = e.value.max(*img.get(rr, cc));
            if cand < *out.get(rr, cc) {
                out.set(rr, cc, cand);
                heap.push(Entry { value: cand, seq, idx: out.index(rr, cc), label: 0 });
                seq += 1;
            }
        }
    }
    out
}

/// One automatic seed per regional minimum of the h-minima transform, at
/// the minimum's first pixel in scan order. Labels follow scan order.
pub fn h_minima_seeds(img: &Image2<f64>, domain: Option<&Image2<bool>>, p: &SegParams) -> Result<SeedSet, SegmentError> {
    p.validate()?;
    if img.is_empty() {
        return Err(SegmentError::EmptyImage);
    }
    let eight = p.conn()?.is_eight();
    let work = working_image(img, p);
    let hmin = h_minima_transform(&work, domain, p.h, eight);

    // plateaus of equal value
    let (w, h) = (img.width, img.height);
    let mut plateau = vec![u32::MAX; w * h];
    let mut seeds = Vec::new();
    let mut stack = Vec::new();
    for r0 in 0..h {
        for c0 in 0..w {
            let i0 = hmin.index(r0, c0);
            if plateau[i0] != u32::MAX || !in_domain(domain, r0, c0) {
                continue;
            }
            let v = hmin.data[i0];
            let id = i0 as u32;
            plateau[i0] = id;
            stack.push((r0, c0));
            let mut minimum = true;
            while let Some((r, c)) = stack.pop() {
                for (rr, cc) in img.neighbors(r, c, eight) {
                    if !in_domain(domain, rr, cc) {
                        continue;
                    }
                    let j = hmin.index(rr, cc);
                    let u = hmin.data[j];
                    if u < v {
                        minimum = false;
                    } else if u == v && plateau[j] == u32::MAX {
                        plateau[j] = id;
                        stack.push((rr, cc));
                    }
                }
            }
            if minimum {
                seeds.push(Seed { row: r0, col: c0, label: seeds.len() as u32 + 1, src: SeedSource::Auto });
            }
        }
    }
    Ok(SeedSet { seeds })
}

/// Removes `remove` first, then adds manual seeds with fresh labels
/// counting up from the largest label ever present in `s`.
pub fn edit_seeds(
    s: &SeedSet,
    add: &[[usize; 2]],
    remove: &[u32],
    width: usize,
    height: usize,
) -> Result<SeedSet, SegmentError> {
    let mut out = s.clone();
    let mut next = s.max_label();
    for &l in remove {
        let before = out.seeds.len();
        out.seeds.retain(|x| x.label != l);
        if out.seeds.len() == before {
            return Err(SegmentError::UnknownLabel(l));
        }
    }
    for &[row, col] in add {
        if row >= height || col >= width {
            return Err(SegmentError::OutOfBounds { row, col, width, height });
        }
        if out.seeds.iter().any(|x| x.row == row && x.col == col) {
            return Err(SegmentError::Occupied { row, col });
        }
        next += 1;
        out.seeds.push(Seed { row, col, label: next, src: SeedSource::Manual });
    }
    Ok(out)
}

/// Priority flood from the seeds. Pixels leave the queue in (value,
/// insertion) order and take the label of the neighbour that queued them.
/// Pixels outside `domain` stay 0.
pub fn seeded_watershed(
    img: &Image2<f64>,
    seeds: &SeedSet,
    domain: Option<&Image2<bool>>,
    p: &SegParams,
) -> Result<Image2<u32>, SegmentError> {
    p.validate()?;
    if seeds.is_empty() {
        return Err(SegmentError::NoSeeds);
    }
    seeds.validate(img.width, img.height)?;
    for s in &seeds.seeds {
        if !in_domain(domain, s.row, s.col) {
            return Err(SegmentError::InvalidSeeds(format!("seed {} at ({}, {}) lies outside the domain", s.label, s.row, s.col)));
        }
    }
    let eight = p.conn()?.is_eight();
    let work = working_image(img, p);
    let mut labels = Image2::filled(img.width, img.height, 0u32);
    let mut queued = vec![false; img.len()];
    let mut heap = BinaryHeap::new();
    let mut seq = 0u64;
    for s in &seeds.seeds {
        let idx = img.index(s.row, s.col);
        queued[idx] = true;
        heap.push(Entry { value: work.data[idx], seq, idx, label: s.label });
        seq += 1;
    }
    while let Some(e) = heap.pop() {
        labels.data[e.idx] = e.label;
        let (r, c) = (e.idx / img.width, e.idx % img.width);
        for (rr, cc) in img.neighbors(r, c, eight) {
            let j = img.index(rr, cc);
            if queued[j] || !in_domain(domain, rr, cc) {
                continue;
            }
            queued[j] = true;
            heap.push(Entry { value: work.data[j], seq, idx: j, label: e.label });
            seq += 1;
        }
    }
    Ok(labels)
}

/// Pixel-edge polylines separating different labels, in corner
/// coordinates `(row, col)`. Edges against label 0 are included, edges on
/// the image border are not. Output order is deterministic.
pub fn label_boundaries(labels: &Image2<u32>) -> Vec<Vec<[usize; 2]>> {
    let (w, h) = (labels.width, labels.height);
    let mut adj: BTreeMap<[usize; 2], Vec<[usize; 2]>> = BTreeMap::new();
    let mut add = |a: [usize; 2], b: [usize; 2]| {
        adj.entry(a).or_default().push(b);
        adj.entry(b).or_default().push(a);
    };
    for r in 0..h {
        for c in 0..w {
            let l = *labels.get(r, c);
            if c + 1 < w && *labels.get(r, c + 1) != l {
                add([r, c + 1], [r + 1, c + 1]);
            }
            if r + 1 < h && *labels.get(r + 1, c) != l {
                add([r + 1, c], [r + 1, c + 1]);
            }
        }
    }
    for v in adj.values_mut() {
        v.sort();
    }
    let mut used: std::collections::BTreeSet<([usize; 2], [usize; 2])> = Default::default();
    let key = |a: [usize; 2], b: [usize; 2]| if a < b { (a, b) } else { (b, a) };
    let mut lines = Vec::new();
    // open chains first (start at junctions and ends), then closed loops
    let starts: Vec<[usize; 2]> = adj.iter().filter(|(_, n)| n.len() != 2).map(|(k, _)| *k).chain(adj.keys().copied()).collect();
    for s in starts {
        while let Some(&first) = adj[&s].iter().find(|&&n| !used.contains(&key(s, n))) {
            let mut line = vec![s, first];
            used.insert(key(s, first));
            let mut cur = first;
            while adj[&cur].len() == 2 {
                let Some(&n) = adj[&cur].iter().find(|&&n| !used.contains(&key(cur, n))) else { break };
                used.insert(key(cur, n));
                line.push(n);
                cur = n;
            }
            lines.push(line);
        }
    }
    lines
}

/// Writes a label image as a one-page 16-bit TIFF (32-bit when needed).
pub fn save_label_image(labels: &Image2<u32>, path: &Path) -> Result<(), SegmentError> {
    let meta = VolumeMeta::unit([labels.width, labels.height, 1]);
    save_labels(&Volume { meta, data: labels.data.clone() }, path)?;
    Ok(())
}

pub fn load_label_image(path: &Path) -> Result<Image2<u32>, SegmentError> {
    let v = load_labels(path)?;
    let [w, h, n] = v.meta.dims;
    if n != 1 {
        return Err(SegmentError::Io(VolumeIoError::Shape(format!("{}: expected one page, found {n}", path.display()))));
    }
    Ok(Image2::from_vec(w, h, v.data))
}

/// True when every label's region is connected under `connectivity`.
pub fn regions_connected(labels: &Image2<u32>, connectivity: Connectivity2) -> bool {
    let present: std::collections::BTreeSet<u32> = labels.data.iter().copied().filter(|&l| l != 0).collect();
    present.into_iter().all(|l| {
        let (_, n) = connected_components_2d(&labels.map(|&v| v == l), connectivity);
        n == 1
    })
}
