//! Linking segmented objects over time.
//!
//! 2D peel segmentations are linked by nearest centroids inside a gate, 3D
//! label volumes by largest voxel overlap. Track IDs start at 1 and are
//! handed out in label order, first for frame 0 and then for every object
//! that starts a track later.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::Image2;
use crate::volume_io::LabelVolume;

#[derive(Debug, Error)]
pub enum TrackError {
    #[error("invalid tracking parameters: {0}")]
    Params(String),
    #[error("need at least {need} frames, got {got}")]
    TooFewFrames { need: usize, got: usize },
    #[error("frame {frame} has dims {got:?}, frame 0 has {want:?}")]
    DimMismatch { frame: usize, got: [usize; 3], want: [usize; 3] },
    #[error("track table: {0}")]
    Table(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrackStatus {
    Active,
    Ended,
    Discarded,
}

/// One object in one frame; the CSV row layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackRow {
    pub track_id: u32,
    pub frame: usize,
    pub label: u32,
    pub cx: f64,
    pub cy: f64,
    pub cz: f64,
    pub status: TrackStatus,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrackTable {
    /// Sorted by frame, then track ID.
    pub rows: Vec<TrackRow>,
    /// Tracks that won or lost an overlap conflict.
    pub conflicted: BTreeSet<u32>,
}

impl TrackTable {
    /// Rows per track ID, in frame order.
    pub fn tracks(&self) -> BTreeMap<u32, Vec<&TrackRow>> {
        let mut out: BTreeMap<u32, Vec<&TrackRow>> = BTreeMap::new();
        for r in &self.rows {
            out.entry(r.track_id).or_default().push(r);
        }
        for v in out.values_mut() {
            v.sort_by_key(|r| r.frame);
        }
        out
    }

    /// Track IDs with at least one row not marked discarded.
    pub fn kept_ids(&self) -> BTreeSet<u32> {
        self.rows.iter().filter(|r| r.status != TrackStatus::Discarded).map(|r| r.track_id).collect()
    }

    pub fn row(&self, track_id: u32, frame: usize) -> Option<&TrackRow> {
        self.rows.iter().find(|r| r.track_id == track_id && r.frame == frame)
    }

    /// Checks the table invariants: one row per (track, frame) and per
    /// (frame, label), contiguous frames within a track.
    pub fn validate(&self) -> Result<(), TrackError> {
        let mut seen = BTreeSet::new();
        let mut objects = BTreeSet::new();
        for r in &self.rows {
            if !seen.insert((r.track_id, r.frame)) {
                return Err(TrackError::Table(format!("track {} appears twice in frame {}", r.track_id, r.frame)));
            }
            if !objects.insert((r.frame, r.label)) {
                return Err(TrackError::Table(format!("label {} of frame {} is in two tracks", r.label, r.frame)));
            }
        }
        for (id, rows) in self.tracks() {
            if rows.windows(2).any(|w| w[1].frame != w[0].frame + 1) {
                return Err(TrackError::Table(format!("track {id} skips a frame")));
            }
        }
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), TrackError> {
        let mut wr = csv::Writer::from_writer(w);
        for r in &self.rows {
            wr.serialize(r).map_err(|e| TrackError::Table(e.to_string()))?;
        }
        wr.flush().map_err(|e| TrackError::Table(e.to_string()))
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self, TrackError> {
        let mut rd = csv::Reader::from_reader(r);
        let rows = rd
            .deserialize()
            .collect::<Result<Vec<TrackRow>, _>>()
            .map_err(|e| TrackError::Table(e.to_string()))?;
        let t = Self { rows, conflicted: BTreeSet::new() };
        t.validate()?;
        Ok(t)
    }

    pub fn save(&self, path: &Path) -> Result<(), TrackError> {
        let f = std::fs::File::create(path).map_err(|e| TrackError::Table(format!("{}: {e}", path.display())))?;
        self.write_csv(std::io::BufWriter::new(f))
    }

    pub fn load(path: &Path) -> Result<Self, TrackError> {
        let f = std::fs::File::open(path).map_err(|e| TrackError::Table(format!("{}: {e}", path.display())))?;
        Self::read_csv(std::io::BufReader::new(f))
    }

    fn finish(mut self, n_frames: usize) -> Self {
        self.rows.sort_by_key(|r| (r.frame, r.track_id));
        let present: BTreeSet<(u32, usize)> = self.rows.iter().map(|r| (r.track_id, r.frame)).collect();
        for r in &mut self.rows {
            let continues = present.contains(&(r.track_id, r.frame + 1));
            r.status = if continues || r.frame + 1 == n_frames { TrackStatus::Active } else { TrackStatus::Ended };
        }
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrackParams {
    /// Gating radius, µm.
    pub max_dist: f64,
    /// Seconds between frames.
    pub frame_interval: f64,
}

impl Default for TrackParams {
    fn default() -> Self {
        Self { max_dist: 5.0, frame_interval: crate::FRAME_INTERVAL_S }
    }
}

impl TrackParams {
    pub fn validate(&self) -> Result<(), TrackError> {
        if !(self.max_dist > 0.0) || !self.max_dist.is_finite() {
            return Err(TrackError::Params(format!("max_dist must be > 0, got {}", self.max_dist)));
        }
        if !(self.frame_interval > 0.0) || !self.frame_interval.is_finite() {
            return Err(TrackError::Params(format!("frame_interval must be > 0, got {}", self.frame_interval)));
        }
        Ok(())
    }
}

/// Physical centroids `(cx, cy, cz)` of every non-zero label in a 2D image,
/// with columns along x and rows along y.
pub fn centroids_2d(labels: &Image2<u32>, pixel_size: [f64; 2]) -> BTreeMap<u32, [f64; 3]> {
    let mut acc: BTreeMap<u32, [f64; 3]> = BTreeMap::new();
    for r in 0..labels.height {
        for c in 0..labels.width {
            let l = *labels.get(r, c);
            if l != 0 {
                let a = acc.entry(l).or_default();
                a[0] += c as f64;
                a[1] += r as f64;
                a[2] += 1.0;
            }
        }
    }
    acc.into_iter().map(|(l, a)| (l, [a[0] / a[2] * pixel_size[0], a[1] / a[2] * pixel_size[1], 0.0])).collect()
}

/// Physical centroids of every non-zero label in a volume.
pub fn centroids_3d(labels: &LabelVolume) -> BTreeMap<u32, [f64; 3]> {
    let [nx, ny, _] = labels.meta.dims;
    let mut acc: BTreeMap<u32, [f64; 4]> = BTreeMap::new();
    for (i, &l) in labels.data.iter().enumerate() {
        if l != 0 {
            let a = acc.entry(l).or_default();
            a[0] += (i % nx) as f64;
            a[1] += ((i / nx) % ny) as f64;
            a[2] += (i / (nx * ny)) as f64;
            a[3] += 1.0;
        }
    }
    let s = labels.meta.spacing;
    acc.into_iter().map(|(l, a)| (l, [a[0] / a[3] * s[0], a[1] / a[3] * s[1], a[2] / a[3] * s[2]])).collect()
}

fn row(track_id: u32, frame: usize, label: u32, c: [f64; 3]) -> TrackRow {
    TrackRow { track_id, frame, label, cx: c[0], cy: c[1], cz: c[2], status: TrackStatus::Active }
}

/// Nearest-neighbour linking of 2D segmentations. Candidate pairs within
/// `max_dist` are matched greedily by increasing distance (ties by previous
/// then current label); each object is used at most once.
pub fn track_2d(frames: &[Image2<u32>], pixel_size: [f64; 2], p: &TrackParams) -> Result<TrackTable, TrackError> {
    p.validate()?;
    if frames.is_empty() {
        return Err(TrackError::TooFewFrames { need: 1, got: 0 });
    }
    let cents: Vec<BTreeMap<u32, [f64; 3]>> = frames.iter().map(|f| centroids_2d(f, pixel_size)).collect();
    link_by_distance(&cents, p.max_dist)
}

/// Greedy distance matching over arbitrary per-frame centroid maps.
pub fn link_by_distance(cents: &[BTreeMap<u32, [f64; 3]>], max_dist: f64) -> Result<TrackTable, TrackError> {
    let mut table = TrackTable::default();
    let mut next_id = 1u32;
    let mut current: BTreeMap<u32, u32> = BTreeMap::new();
    for (&l, &c) in &cents[0] {
        current.insert(l, next_id);
        table.rows.push(row(next_id, 0, l, c));
        next_id += 1;
    }
    for t in 1..cents.len() {
        let (prev, cur) = (&cents[t - 1], &cents[t]);
        let mut cands = Vec::new();
        for (&lp, cp) in prev {
            for (&lc, cc) in cur {
                let d = ((cp[0] - cc[0]).powi(2) + (cp[1] - cc[1]).powi(2) + (cp[2] - cc[2]).powi(2)).sqrt();
                if d <= max_dist {
                    cands.push((d, lp, lc));
                }
            }
        }
        cands.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        let mut used_prev = BTreeSet::new();
        let mut next: BTreeMap<u32, u32> = BTreeMap::new();
        for (_, lp, lc) in cands {
            if used_prev.contains(&lp) || next.contains_key(&lc) {
                continue;
            }
            used_prev.insert(lp);
            next.insert(lc, current[&lp]);
        }
        for (&lc, &c) in cur {
            let id = *next.entry(lc).or_insert_with(|| {
                next_id += 1;
                next_id - 1
            });
            table.rows.push(row(id, t, lc, c));
        }
        current = next;
    }
    Ok(table.finish(cents.len()))
}

/// Voxel overlap counts `(previous label, current label) -> voxels`.
pub fn overlap_counts(prev: &LabelVolume, cur: &LabelVolume) -> BTreeMap<(u32, u32), usize> {
    let mut out = BTreeMap::new();
    for (&a, &b) in prev.data.iter().zip(&cur.data) {
        if a != 0 && b != 0 {
            *out.entry((a, b)).or_insert(0) += 1;
        }
    }
    out
}

/// Largest-overlap label propagation.
///
/// Every object of frame t+1 claims the track of the frame-t object it
/// overlaps most (ties to the smaller frame-t label). When several objects
/// claim one track the largest overlap wins (ties to the smaller new
/// label); the others start new tracks and every track involved is marked
/// conflicted.
pub fn track_3d_overlap(frames: &[LabelVolume]) -> Result<TrackTable, TrackError> {
    if frames.len() < 2 {
        return Err(TrackError::TooFewFrames { need: 2, got: frames.len() });
    }
    let want = frames[0].meta.dims;
    for (i, f) in frames.iter().enumerate() {
        if f.meta.dims != want {
            return Err(TrackError::DimMismatch { frame: i, got: f.meta.dims, want });
        }
    }
    let mut table = TrackTable::default();
    let mut next_id = 1u32;
    let mut current: BTreeMap<u32, u32> = BTreeMap::new();
    let c0 = centroids_3d(&frames[0]);
    for (&l, &c) in &c0 {
        current.insert(l, next_id);
        table.rows.push(row(next_id, 0, l, c));
        next_id += 1;
    }
    for t in 1..frames.len() {
        let cents = centroids_3d(&frames[t]);
        let counts = overlap_counts(&frames[t - 1], &frames[t]);
        // best partner per new object
        let mut best: BTreeMap<u32, (u32, usize)> = BTreeMap::new();
        for (&(lp, lc), &n) in &counts {
            let e = best.entry(lc).or_insert((lp, n));
            if n > e.1 || (n == e.1 && lp < e.0) {
                *e = (lp, n);
            }
        }
        let mut claims: BTreeMap<u32, Vec<(u32, usize)>> = BTreeMap::new();
        for (&lc, &(lp, n)) in &best {
            claims.entry(lp).or_default().push((lc, n));
        }
        let mut next: BTreeMap<u32, u32> = BTreeMap::new();
        for (lp, mut cl) in claims {
            cl.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
            let id = current[&lp];
            next.insert(cl[0].0, id);
            if cl.len() > 1 {
                table.conflicted.insert(id);
            }
        }
        for (&lc, &c) in &cents {
            let id = match next.get(&lc) {
                Some(&id) => id,
                None => {
                    let id = next_id;
                    next_id += 1;
                    if best.get(&lc).is_some_and(|&(lp, _)| next.values().any(|&v| v == current[&lp])) {
                        table.conflicted.insert(id);
                    }
                    next.insert(lc, id);
                    id
                }
            };
            table.rows.push(row(id, t, lc, c));
        }
        current = next;
    }
    Ok(table.finish(frames.len()))
}

/// Labels with at least one voxel on a volume face.
pub fn boundary_labels(labels: &LabelVolume) -> BTreeSet<u32> {
    labels
        .data
        .iter()
        .enumerate()
        .filter(|&(i, &l)| l != 0 && labels.on_border(i))
        .map(|(_, &l)| l)
        .collect()
}

/// Keeps tracks present in all `n_frames`, free of conflicts and never on
/// the volume boundary; every row of any other track is marked discarded.
/// `boundary[f]` lists the boundary labels of frame `f` (may be empty).
pub fn filter_complete_tracks(t: &TrackTable, n_frames: usize, boundary: &[BTreeSet<u32>]) -> TrackTable {
    let mut out = t.clone();
    let tracks = t.tracks();
    let keep: BTreeSet<u32> = tracks
        .iter()
        .filter(|(id, rows)| {
            let frames: BTreeSet<usize> = rows.iter().map(|r| r.frame).collect();
            frames.len() == n_frames
                && (0..n_frames).all(|f| frames.contains(&f))
                && !t.conflicted.contains(id)
                && rows.iter().all(|r| !boundary.get(r.frame).is_some_and(|b| b.contains(&r.label)))
        })
        .map(|(id, _)| *id)
        .collect();
    for r in &mut out.rows {
        if !keep.contains(&r.track_id) {
            r.status = TrackStatus::Discarded;
        }
    }
    out
}
