//! Unwrapping of surface shells into 2D peel images.
//!
//! Each y slice of a shell holds one closed ring in the xz plane. Rings are
//! traced one after the other; the start pixel of a slice is the ring pixel
//! closest to the previous slice's start, so columns stay aligned along the
//! body axis. Row `j` of the peel holds the raw intensities along ring `j`.

mod io;
mod ops;
mod trace;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::Image2;
use crate::shells::{connected_components_2d, Connectivity2};
use crate::volume_io::{IntensityVolume, MaskVolume};

pub use io::{load_furrow, load_peel, peel_sidecar_path, save_furrow, save_peel, PeelLayout, PeelSidecar};
pub use ops::{fill_holes, measure_length, rectify, FurrowLine};
pub use trace::{trace_slice_ring, RingTrace};

#[derive(Debug, Error)]
pub enum PeelError {
    #[error("slice {slice}: start ({x}, {z}) is not a shell pixel")]
    StartNotOnRing { slice: usize, x: usize, z: usize },
    #[error("slice {slice}: ring broken, traced {visited} of {total} pixels before a dead end")]
    BrokenRing { slice: usize, visited: usize, total: usize },
    #[error("slice {slice}: tracing leaves {orphans} of {total} ring pixels unvisited")]
    Orphans { slice: usize, orphans: usize, total: usize },
    #[error("shell is empty")]
    EmptyShell,
    #[error("slice {0} inside the shell's y-extent is empty")]
    EmptySlice(usize),
    #[error("slice {slice} holds {rings} separate rings")]
    MultipleRings { slice: usize, rings: u32 },
    #[error("shell {shell:?} and raw {raw:?} dims differ")]
    DimMismatch { shell: [usize; 3], raw: [usize; 3] },
    #[error("index out of range: {0}")]
    Index(String),
    #[error("invalid furrow line: {0}")]
    Furrow(String),
    #[error("peel file: {0}")]
    Io(String),
}

/// An unwrapped shell.
#[derive(Debug, Clone, PartialEq)]
pub struct PeelImage {
    pub width: usize,
    pub height: usize,
    pub intensity: Image2<f64>,
    /// Length of the step arriving at each pixel (column 0 carries the
    /// ring's closing step); 0 on padding.
    pub metric: Image2<f64>,
    /// False on padding and on pixels that were filled in afterwards.
    pub valid: Image2<bool>,
    /// Ring length per row; columns at or beyond it are padding.
    pub row_len: Vec<usize>,
    /// y index of row 0.
    pub first_slice: usize,
    /// `(x, y, z)` voxel at column 0 of every row.
    pub starts: Vec<[usize; 3]>,
    /// Physical size of one peel pixel, `[column, row]` in µm.
    pub pixel_size: [f64; 2],
}

impl PeelImage {
    /// An all-padding peel with the given row lengths.
    pub fn empty(row_len: Vec<usize>) -> Self {
        let width = row_len.iter().copied().max().unwrap_or(0);
        let height = row_len.len();
        Self {
            width,
            height,
            intensity: Image2::filled(width, height, 0.0),
            metric: Image2::filled(width, height, 0.0),
            valid: Image2::filled(width, height, false),
            row_len,
            first_slice: 0,
            starts: vec![[0; 3]; height],
            pixel_size: [1.0, 1.0],
        }
    }

    /// Sum of the metric channel over one row, i.e. the ring perimeter in
    /// pixels.
    pub fn row_length(&self, row: usize) -> f64 {
        (0..self.row_len[row]).map(|c| *self.metric.get(row, c)).sum()
    }

    /// Inside a row's ring (valid or hole-filled).
    #[inline]
    pub fn in_domain(&self, row: usize, col: usize) -> bool {
        col < self.row_len[row]
    }
}

/// Per-slice bookkeeping from [`project_peel`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PeelDiagnostics {
    /// Shell pixels per traced slice.
    pub shell_pixels: Vec<usize>,
    /// Pixels dropped to make a slice traceable (normally all zero).
    pub thinned: Vec<usize>,
}

/// Traces every slice of `shell` in y order with start propagation.
pub fn trace_shell(shell: &MaskVolume) -> Result<(Vec<RingTrace>, PeelDiagnostics), PeelError> {
    let [nx, ny, nz] = shell.meta.dims;
    let occupied: Vec<usize> = (0..ny).filter(|&y| (0..nz).any(|z| (0..nx).any(|x| *shell.get(x, y, z)))).collect();
    let (Some(&y0), Some(&y1)) = (occupied.first(), occupied.last()) else {
        return Err(PeelError::EmptyShell);
    };

    let mut traces = Vec::with_capacity(y1 - y0 + 1);
    let mut diag = PeelDiagnostics::default();
    let mut prev_start: Option<[usize; 2]> = None;
    for y in y0..=y1 {
        let slice = shell.slice_y(y);
        let pixels: Vec<[usize; 2]> =
            (0..nz).flat_map(|z| (0..nx).map(move |x| [x, z])).filter(|p| *slice.get(p[1], p[0])).collect();
        if pixels.is_empty() {
            return Err(PeelError::EmptySlice(y));
        }
        let (_, rings) = connected_components_2d(&slice, Connectivity2::Eight);
        if rings > 1 {
            return Err(PeelError::MultipleRings { slice: y, rings });
        }
        let (trace, dropped) = trace_with_thinning(slice, y, prev_start)?;
        diag.shell_pixels.push(pixels.len());
        diag.thinned.push(dropped);
        prev_start = Some(trace.points[0]);
        traces.push(trace);
    }
    Ok((traces, diag))
}

/// First slice: topmost pixel (minimum z, then minimum x). Later slices:
/// nearest pixel to the previous start, ties to smaller x then smaller z.
fn pick_start(slice: &Image2<bool>, prev: Option<[usize; 2]>) -> Option<[usize; 2]> {
    let mut best: Option<([usize; 2], (usize, usize, usize))> = None;
    for z in 0..slice.height {
        for x in 0..slice.width {
            if !*slice.get(z, x) {
                continue;
            }
            let key = match prev {
                None => (z, x, 0),
                Some(p) => (p[0].abs_diff(x).pow(2) + p[1].abs_diff(z).pow(2), x, z),
            };
            if best.as_ref().is_none_or(|(_, k)| key < *k) {
                best = Some(([x, z], key));
            }
        }
    }
    best.map(|(p, _)| p)
}

/// Removes one redundant ring pixel: one with at least three ring
/// neighbours whose neighbours stay 8-connected without it. Pixels with the
/// most neighbours go first, then scan order.
fn thin_once(slice: &mut Image2<bool>) -> bool {
    let mut best: Option<(usize, usize, usize)> = None;
    for z in 0..slice.height {
        for x in 0..slice.width {
            if !*slice.get(z, x) {
                continue;
            }
            let nb: Vec<(usize, usize)> = slice.neighbors(z, x, true).filter(|&(r, c)| *slice.get(r, c)).collect();
            if nb.len() < 3 || !single_group(&nb) {
                continue;
            }
            if best.is_none_or(|(k, _, _)| nb.len() > k) {
                best = Some((nb.len(), z, x));
            }
        }
    }
    match best {
        Some((_, z, x)) => {
            slice.set(z, x, false);
            true
        }
        None => false,
    }
}

fn single_group(nb: &[(usize, usize)]) -> bool {
    let mut seen = vec![false; nb.len()];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(i) = stack.pop() {
        for j in 0..nb.len() {
            if !seen[j] && nb[i].0.abs_diff(nb[j].0) <= 1 && nb[i].1.abs_diff(nb[j].1) <= 1 {
                seen[j] = true;
                stack.push(j);
            }
        }
    }
    seen.iter().all(|&s| s)
}

/// True when some pixel has all four 4-neighbours set, i.e. the band is
/// more than two pixels thick somewhere.
fn has_thick_part(slice: &Image2<bool>) -> bool {
    (0..slice.height).any(|z| {
        (0..slice.width).any(|x| {
            *slice.get(z, x) && slice.neighbors(z, x, false).filter(|&(r, c)| *slice.get(r, c)).count() == 4
        })
    })
}

/// Zhang-Suen thinning, then removal of staircase corners and of spurs
/// (pixels with fewer than two neighbours, repeated until none are left). A band around a hole
/// shrinks to a closed curve near its middle.
fn skeletonize(slice: &mut Image2<bool>) {
    // P2..P9 as (dz, dx), clockwise from north
    const RING: [(isize, isize); 8] = [(-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1), (-1, -1)];
    let (h, w) = (slice.height as isize, slice.width as isize);
    let around = |s: &Image2<bool>, z: usize, x: usize| -> [bool; 8] {
        RING.map(|(dz, dx)| {
            let (r, c) = (z as isize + dz, x as isize + dx);
            r >= 0 && r < h && c >= 0 && c < w && *s.get(r as usize, c as usize)
        })
    };
    loop {
        let mut changed = false;
        for pass in 0..2 {
            let mut remove = Vec::new();
            for z in 0..slice.height {
                for x in 0..slice.width {
                    if !*slice.get(z, x) {
                        continue;
                    }
                    let p = around(slice, z, x);
                    let b = p.iter().filter(|&&v| v).count();
                    let a = (0..8).filter(|&i| !p[i] && p[(i + 1) % 8]).count();
                    let (n, e, s, wst) = (p[0], p[2], p[4], p[6]);
                    let cut = if pass == 0 { !(n && e && s) && !(e && s && wst) } else { !(n && e && wst) && !(n && s && wst) };
                    if (2..=6).contains(&b) && a == 1 && cut {
                        remove.push((z, x));
                    }
                }
            }
            changed |= !remove.is_empty();
            for (z, x) in remove {
                slice.set(z, x, false);
            }
        }
        if !changed {
            break;
        }
    }
    // staircase corners: pixels whose neighbours stay 8-connected without them
    loop {
        let mut changed = false;
        for z in 0..slice.height {
            for x in 0..slice.width {
                if !*slice.get(z, x) {
                    continue;
                }
                let nb: Vec<(usize, usize)> = slice.neighbors(z, x, true).filter(|&(r, c)| *slice.get(r, c)).collect();
                if nb.len() >= 2 && single_group(&nb) {
                    slice.set(z, x, false);
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    loop {
        let spurs: Vec<(usize, usize)> = (0..slice.height)
            .flat_map(|z| (0..slice.width).map(move |x| (z, x)))
            .filter(|&(z, x)| *slice.get(z, x) && slice.neighbors(z, x, true).filter(|&(r, c)| *slice.get(r, c)).count() < 2)
            .collect();
        if spurs.is_empty() {
            break;
        }
        for (z, x) in spurs {
            slice.set(z, x, false);
        }
    }
}

fn trace_with_thinning(
    mut slice: Image2<bool>,
    y: usize,
    prev_start: Option<[usize; 2]>,
) -> Result<(RingTrace, usize), PeelError> {
    let mut dropped = 0;
    let mut skeletonized = false;
    loop {
        let start = pick_start(&slice, prev_start).ok_or(PeelError::EmptySlice(y))?;
        match trace_slice_ring(&slice, y, start) {
            Ok(t) => {
                if dropped > 0 {
                    log::debug!("slice {y}: dropped {dropped} redundant shell pixel(s) before tracing");
                }
                return Ok((t, dropped));
            }
            Err(e @ (PeelError::Orphans { .. } | PeelError::BrokenRing { .. })) => {
                if !skeletonized && has_thick_part(&slice) {
                    skeletonized = true;
                    let before = slice.data.iter().filter(|&&v| v).count();
                    skeletonize(&mut slice);
                    let after = slice.data.iter().filter(|&&v| v).count();
                    if after == 0 {
                        return Err(e);
                    }
                    dropped += before - after;
                    continue;
                }
                if !thin_once(&mut slice) {
                    return Err(e);
                }
                dropped += 1;
            }
            Err(e) => return Err(e),
        }
    }
}

/// Unwraps `shell` into a peel sampling `raw` along each traced ring.
///
/// `raw` should already be isotropic (see
/// [`resample_isotropic`](crate::volume_io::resample_isotropic)) so that
/// rows and columns have the same physical pitch.
pub fn project_peel(shell: &MaskVolume, raw: &IntensityVolume) -> Result<(PeelImage, PeelDiagnostics), PeelError> {
    if shell.meta.dims != raw.grid.meta.dims {
        return Err(PeelError::DimMismatch { shell: shell.meta.dims, raw: raw.grid.meta.dims });
    }
    let (traces, diag) = trace_shell(shell)?;
    let mut peel = PeelImage::empty(traces.iter().map(|t| t.len()).collect());
    peel.first_slice = traces[0].slice_index;
    let s = raw.grid.meta.spacing;
    peel.pixel_size = [s[0], s[1]];
    for (row, t) in traces.iter().enumerate() {
        let y = t.slice_index;
        for (col, p) in t.points.iter().enumerate() {
            peel.intensity.set(row, col, *raw.grid.get(p[0], y, p[1]) as f64);
            let m = if col == 0 { t.closing_len } else { t.step_len[col] };
            peel.metric.set(row, col, m);
            peel.valid.set(row, col, true);
        }
        peel.starts[row] = [t.points[0][0], y, t.points[0][1]];
    }
    Ok((peel, diag))
}
