//! Per-cell measurements.
//!
//! 2D: area, eccentricity and speed of peel segments. 3D: volume, apical
//! area (PCA-plane projection of the outer-surface patch) and apical-basal
//! length (extent along the patch normal).

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{Matrix2, Matrix3, SymmetricEigen, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{Image2, Volume};
use crate::peel::PeelImage;
use crate::shells::{squared_distance_to_features, EdmBorder};
use crate::tracking::{TrackStatus, TrackTable};
use crate::volume_io::LabelVolume;

#[derive(Debug, Error)]
pub enum QuantifyError {
    #[error("invalid parameters: {0}")]
    Params(String),
    #[error("frame {frame}: track {track_id} refers to label {label}, which is absent")]
    MissingLabel { track_id: u32, frame: usize, label: u32 },
    #[error("frame {0} is missing")]
    MissingFrame(usize),
    #[error("area undefined: {0}")]
    UndefinedArea(String),
    #[error("degenerate patch normal: {0}")]
    DegenerateNormal(String),
    #[error("label image and peel differ in size: {0}")]
    DimMismatch(String),
    #[error("unknown feature {0:?}")]
    UnknownFeature(String),
    #[error("feature table: {0}")]
    Table(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRow {
    pub track_id: u32,
    pub frame: usize,
    pub feature: String,
    pub value: f64,
    pub unit: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FeatureTable {
    pub rows: Vec<FeatureRow>,
}

impl FeatureTable {
    fn push(&mut self, track_id: u32, frame: usize, feature: Feature, value: f64) {
        self.rows.push(FeatureRow {
            track_id,
            frame,
            feature: feature.name().into(),
            value,
            unit: feature.unit().into(),
        });
    }

    pub fn get(&self, track_id: u32, frame: usize, feature: &str) -> Option<f64> {
        self.rows.iter().find(|r| r.track_id == track_id && r.frame == frame && r.feature == feature).map(|r| r.value)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), QuantifyError> {
        let mut wr = csv::Writer::from_writer(w);
        for r in &self.rows {
            wr.serialize(r).map_err(|e| QuantifyError::Table(e.to_string()))?;
        }
        wr.flush().map_err(|e| QuantifyError::Table(e.to_string()))
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self, QuantifyError> {
        let rows = csv::Reader::from_reader(r)
            .deserialize()
            .collect::<Result<Vec<FeatureRow>, _>>()
            .map_err(|e| QuantifyError::Table(e.to_string()))?;
        Ok(Self { rows })
    }

    pub fn save(&self, path: &Path) -> Result<(), QuantifyError> {
        let f = std::fs::File::create(path).map_err(|e| QuantifyError::Table(format!("{}: {e}", path.display())))?;
        self.write_csv(std::io::BufWriter::new(f))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Feature {
    Area,
    Eccentricity,
    Speed,
    Volume,
    ApicalArea,
    AbLength,
}

impl Feature {
    pub const ALL_2D: [Feature; 3] = [Feature::Area, Feature::Eccentricity, Feature::Speed];
    pub const ALL_3D: [Feature; 3] = [Feature::Volume, Feature::ApicalArea, Feature::AbLength];

    pub fn name(self) -> &'static str {
        match self {
            Feature::Area => "area",
            Feature::Eccentricity => "eccentricity",
            Feature::Speed => "speed",
            Feature::Volume => "volume",
            Feature::ApicalArea => "apical_area",
            Feature::AbLength => "ab_length",
        }
    }

    pub fn unit(self) -> &'static str {
        match self {
            Feature::Area | Feature::ApicalArea => "µm²",
            Feature::Eccentricity => "dimensionless",
            Feature::Speed => "µm/s",
            Feature::Volume => "µm³",
            Feature::AbLength => "µm",
        }
    }

    pub fn parse(s: &str) -> Result<Self, QuantifyError> {
        [Feature::Area, Feature::Eccentricity, Feature::Speed, Feature::Volume, Feature::ApicalArea, Feature::AbLength]
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| QuantifyError::UnknownFeature(s.into()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuantifyParams {
    /// Ball radius for the outer-shell erosion, px.
    pub shell_radius: f64,
    /// Raster cell for the PCA-plane area, µm; `None` means the lateral
    /// voxel spacing.
    pub plane_cell: Option<f64>,
}

impl Default for QuantifyParams {
    fn default() -> Self {
        Self { shell_radius: 2.0, plane_cell: None }
    }
}

impl QuantifyParams {
    pub fn validate(&self) -> Result<(), QuantifyError> {
        if !(self.shell_radius >= 1.0) || !self.shell_radius.is_finite() {
            return Err(QuantifyError::Params(format!("shell_radius must be >= 1, got {}", self.shell_radius)));
        }
        if self.plane_cell.is_some_and(|c| !(c > 0.0) || !c.is_finite()) {
            return Err(QuantifyError::Params("plane_cell must be > 0".into()));
        }
        Ok(())
    }
}

fn kept_rows(tracks: &TrackTable) -> impl Iterator<Item = &crate::tracking::TrackRow> {
    tracks.rows.iter().filter(|r| r.status != TrackStatus::Discarded)
}

struct Moments {
    n: f64,
    area: f64,
    sr: f64,
    sc: f64,
    srr: f64,
    scc: f64,
    src: f64,
}

/// Area, eccentricity and speed of tracked peel segments. `frames[f]` is
/// the label image of peel `peels[f]`.
pub fn features_2d(
    frames: &[Image2<u32>],
    peels: &[PeelImage],
    tracks: &TrackTable,
    frame_interval: f64,
) -> Result<FeatureTable, QuantifyError> {
    if frames.len() != peels.len() {
        return Err(QuantifyError::DimMismatch(format!("{} label images, {} peels", frames.len(), peels.len())));
    }
    let mut per_frame: Vec<BTreeMap<u32, Moments>> = Vec::with_capacity(frames.len());
    for (f, (lab, peel)) in frames.iter().zip(peels).enumerate() {
        if (lab.width, lab.height) != (peel.width, peel.height) {
            return Err(QuantifyError::DimMismatch(format!(
                "frame {f}: labels {}x{}, peel {}x{}",
                lab.width, lab.height, peel.width, peel.height
            )));
        }
        let mut m: BTreeMap<u32, Moments> = BTreeMap::new();
        for r in 0..lab.height {
            for c in 0..lab.width {
                let l = *lab.get(r, c);
                if l == 0 {
                    continue;
                }
                let e = m.entry(l).or_insert(Moments { n: 0.0, area: 0.0, sr: 0.0, sc: 0.0, srr: 0.0, scc: 0.0, src: 0.0 });
                let (rf, cf) = (r as f64, c as f64);
                e.n += 1.0;
                e.area += *peel.metric.get(r, c) * peel.pixel_size[0] * peel.pixel_size[1];
                e.sr += rf;
                e.sc += cf;
                e.srr += rf * rf;
                e.scc += cf * cf;
                e.src += rf * cf;
            }
        }
        per_frame.push(m);
    }

    let mut out = FeatureTable::default();
    let by_track = tracks.tracks();
    for row in kept_rows(tracks) {
        let f = row.frame;
        let m = per_frame.get(f).ok_or(QuantifyError::MissingFrame(f))?;
        let mo = m.get(&row.label).ok_or(QuantifyError::MissingLabel { track_id: row.track_id, frame: f, label: row.label })?;
        out.push(row.track_id, f, Feature::Area, mo.area);
        out.push(row.track_id, f, Feature::Eccentricity, eccentricity(mo));

        let prev = by_track[&row.track_id].iter().find(|r| r.frame + 1 == f).copied();
        if let Some(prev) = prev {
            let pm = per_frame[prev.frame]
                .get(&prev.label)
                .ok_or(QuantifyError::MissingLabel { track_id: prev.track_id, frame: prev.frame, label: prev.label })?;
            let px = peels[f].pixel_size;
            let dc = (mo.sc / mo.n - pm.sc / pm.n) * px[0];
            let dr = (mo.sr / mo.n - pm.sr / pm.n) * px[1];
            out.push(row.track_id, f, Feature::Speed, dc.hypot(dr) / frame_interval);
        }
    }
    Ok(out)
}

fn eccentricity(m: &Moments) -> f64 {
    let (mr, mc) = (m.sr / m.n, m.sc / m.n);
    let crr = m.srr / m.n - mr * mr;
    let ccc = m.scc / m.n - mc * mc;
    let crc = m.src / m.n - mr * mc;
    let eig = SymmetricEigen::new(Matrix2::new(crr, crc, crc, ccc)).eigenvalues;
    let (l1, l2) = (eig[0].max(eig[1]), eig[0].min(eig[1]).max(0.0));
    if l1 <= 0.0 {
        return 0.0;
    }
    (1.0 - l2 / l1).max(0.0).sqrt()
}

/// Voxel count times voxel volume for every non-zero label.
pub fn cell_volume(labels: &LabelVolume) -> BTreeMap<u32, f64> {
    let v = labels.meta.voxel_volume();
    let mut counts: BTreeMap<u32, usize> = BTreeMap::new();
    for &l in labels.data.iter().filter(|&&l| l != 0) {
        *counts.entry(l).or_default() += 1;
    }
    counts.into_iter().map(|(l, n)| (l, n as f64 * v)).collect()
}

/// Outer shell of the foreground: foreground minus its erosion by the
/// discrete ball of radius `p.shell_radius`, carrying the original labels.
/// Faces of the volume count as background.
pub fn extract_apical_patches(labels: &LabelVolume, p: &QuantifyParams) -> Result<LabelVolume, QuantifyError> {
    p.validate()?;
    let dims = labels.meta.dims;
    let bg: Vec<bool> = labels.data.iter().map(|&l| l == 0).collect();
    let d2 = squared_distance_to_features(dims, &bg, EdmBorder::closed());
    let r2 = p.shell_radius * p.shell_radius;
    // a voxel survives the erosion iff no background lies within the ball
    let data = labels.data.iter().zip(&d2).map(|(&l, &d)| if l != 0 && d <= r2 { l } else { 0 }).collect();
    Ok(Volume { meta: labels.meta.clone(), data })
}

/// Covariance eigen-decomposition, eigenvalues descending, each eigenvector
/// with its first non-zero component positive.
fn principal_axes(points: &[[f64; 3]]) -> ([f64; 3], [Vector3<f64>; 3]) {
    let n = points.len() as f64;
    let mean = points.iter().fold([0.0; 3], |a, p| [a[0] + p[0], a[1] + p[1], a[2] + p[2]]).map(|s| s / n);
    let mut cov = Matrix3::zeros();
    for p in points {
        let d = Vector3::new(p[0] - mean[0], p[1] - mean[1], p[2] - mean[2]);
        cov += d * d.transpose();
    }
    cov /= n;
    let eig = SymmetricEigen::new(cov);
    let mut idx = [0usize, 1, 2];
    idx.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let vals = idx.map(|i| eig.eigenvalues[i]);
    let vecs = idx.map(|i| {
        let v: Vector3<f64> = eig.eigenvectors.column(i).into_owned();
        let first = v.iter().copied().find(|c| c.abs() > 1e-12).unwrap_or(1.0);
        if first < 0.0 {
            -v
        } else {
            v
        }
    });
    (vals, vecs)
}

fn rank2(vals: &[f64; 3]) -> bool {
    vals[0] > 1e-12 && vals[1] > 1e-9 * vals[0].max(1.0)
}

/// Area of a surface patch: points projected onto the plane of the first
/// two principal axes and rasterized into square cells of size `cell`.
///
/// The in-plane orientation of a nearly isotropic patch is arbitrary, so
/// the raster is turned (in 0.5° steps) to the orientation whose bounding
/// rectangle of the projected points is smallest, and its origin is shifted
/// in tenths of a cell to the phase with the fewest occupied cells.
pub fn apical_area(points: &[[f64; 3]], cell: f64) -> Result<f64, QuantifyError> {
    if points.len() < 3 {
        return Err(QuantifyError::UndefinedArea(format!("{} voxels, need at least 3", points.len())));
    }
    if !(cell > 0.0) {
        return Err(QuantifyError::Params(format!("cell size must be > 0, got {cell}")));
    }
    let (vals, vecs) = principal_axes(points);
    if !rank2(&vals) {
        return Err(QuantifyError::UndefinedArea("points are collinear".into()));
    }
    let proj: Vec<[f64; 2]> = points
        .iter()
        .map(|p| {
            let v = Vector3::new(p[0], p[1], p[2]);
            [v.dot(&vecs[0]), v.dot(&vecs[1])]
        })
        .collect();
    // orient the raster along the tightest bounding rectangle
    let rotate = |deg: f64| {
        let (s, c) = deg.to_radians().sin_cos();
        proj.iter().map(move |p| [c * p[0] - s * p[1], s * p[0] + c * p[1]])
    };
    let bbox = |pts: &mut dyn Iterator<Item = [f64; 2]>| {
        pts.fold([f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY], |b, p| {
            [b[0].min(p[0]), b[1].min(p[1]), b[2].max(p[0]), b[3].max(p[1])]
        })
    };
    let mut best = (f64::INFINITY, 0.0);
    for step in 0..180 {
        let deg = step as f64 * 0.5;
        let b = bbox(&mut rotate(deg));
        let area = (b[2] - b[0]) * (b[3] - b[1]);
        if area < best.0 - 1e-9 {
            best = (area, deg);
        }
    }
    let pts: Vec<[f64; 2]> = rotate(best.1).collect();
    let b = bbox(&mut pts.iter().copied());
    // grid phase in tenths of a cell; the fewest occupied cells wins
    let mut count = usize::MAX;
    for i in 0..10 {
        for j in 0..10 {
            let (o0, o1) = (b[0] - cell * (i as f64 / 10.0 + 1e-9), b[1] - cell * (j as f64 / 10.0 + 1e-9));
            let cells: BTreeSet<(i64, i64)> =
                pts.iter().map(|p| (((p[0] - o0) / cell).floor() as i64, ((p[1] - o1) / cell).floor() as i64)).collect();
            count = count.min(cells.len());
        }
    }
    Ok(count as f64 * cell * cell)
}

/// Extent of a cell along its apical patch normal (third principal axis),
/// plus the voxel's own extent along that direction.
pub fn apical_basal_length(cell: &[[f64; 3]], patch: &[[f64; 3]], spacing: [f64; 3]) -> Result<f64, QuantifyError> {
    if patch.len() < 3 {
        return Err(QuantifyError::DegenerateNormal(format!("patch has {} voxels", patch.len())));
    }
    let (vals, vecs) = principal_axes(patch);
    if !rank2(&vals) {
        return Err(QuantifyError::DegenerateNormal("patch is collinear".into()));
    }
    let n = vecs[2];
    let proj = cell.iter().map(|p| n.dot(&Vector3::new(p[0], p[1], p[2])));
    let (lo, hi) = proj.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        return Err(QuantifyError::DegenerateNormal("cell is empty".into()));
    }
    let voxel = n[0].abs() * spacing[0] + n[1].abs() * spacing[1] + n[2].abs() * spacing[2];
    Ok(hi - lo + voxel)
}

/// Physical voxel-centre coordinates per non-zero label.
pub fn label_points(labels: &LabelVolume) -> BTreeMap<u32, Vec<[f64; 3]>> {
    let s = labels.meta.spacing;
    let mut out: BTreeMap<u32, Vec<[f64; 3]>> = BTreeMap::new();
    for (i, &l) in labels.data.iter().enumerate() {
        if l != 0 {
            let [x, y, z] = labels.coords(i);
            out.entry(l).or_default().push([x as f64 * s[0], y as f64 * s[1], z as f64 * s[2]]);
        }
    }
    out
}

/// Volumes, cell voxels and patch voxels of one frame.
type FrameCache = (BTreeMap<u32, f64>, BTreeMap<u32, Vec<[f64; 3]>>, BTreeMap<u32, Vec<[f64; 3]>>);

/// Volume, apical area and apical-basal length for every kept track row.
/// Cells whose patch is too small for an area or normal get no row for
/// that feature (logged).
pub fn quantify_3d(
    frames: &[LabelVolume],
    tracks: &TrackTable,
    p: &QuantifyParams,
    features: &[Feature],
) -> Result<FeatureTable, QuantifyError> {
    p.validate()?;
    let want: BTreeSet<Feature> = features.iter().copied().collect();
    let need_patch = want.contains(&Feature::ApicalArea) || want.contains(&Feature::AbLength);
    let mut out = FeatureTable::default();
    let mut cache: BTreeMap<usize, FrameCache> = BTreeMap::new();
    for row in kept_rows(tracks) {
        let f = row.frame;
        let labels = frames.get(f).ok_or(QuantifyError::MissingFrame(f))?;
        if let std::collections::btree_map::Entry::Vacant(e) = cache.entry(f) {
            let vols = cell_volume(labels);
            let (pts, patches) = if need_patch {
                (label_points(labels), label_points(&extract_apical_patches(labels, p)?))
            } else {
                (BTreeMap::new(), BTreeMap::new())
            };
            e.insert((vols, pts, patches));
        }
        let (vols, pts, patches) = &cache[&f];
        let Some(&vol) = vols.get(&row.label) else {
            return Err(QuantifyError::MissingLabel { track_id: row.track_id, frame: f, label: row.label });
        };
        if want.contains(&Feature::Volume) {
            out.push(row.track_id, f, Feature::Volume, vol);
        }
        if !need_patch {
            continue;
        }
        let patch = patches.get(&row.label).map(Vec::as_slice).unwrap_or(&[]);
        if want.contains(&Feature::ApicalArea) {
            let cell = p.plane_cell.unwrap_or(labels.meta.spacing[0]);
            match apical_area(patch, cell) {
                Ok(a) => out.push(row.track_id, f, Feature::ApicalArea, a),
                Err(e) => log::warn!("track {} frame {f}: {e}", row.track_id),
            }
        }
        if want.contains(&Feature::AbLength) {
            match apical_basal_length(&pts[&row.label], patch, labels.meta.spacing) {
                Ok(l) => out.push(row.track_id, f, Feature::AbLength, l),
                Err(e) => log::warn!("track {} frame {f}: {e}", row.track_id),
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tracking::{track_2d, TrackParams};
    use crate::volume_io::VolumeMeta;
    use std::f64::consts::PI;

    fn boxes(dims: [usize; 3], spacing: [f64; 3], items: &[(u32, [usize; 3], [usize; 3])]) -> LabelVolume {
        let mut v = Volume::filled(VolumeMeta { dims, spacing, frame_interval: None }, 0u32);
        for &(l, lo, hi) in items {
            for z in lo[2]..hi[2] {
                for y in lo[1]..hi[1] {
                    for x in lo[0]..hi[0] {
                        v.set(x, y, z, l);
                    }
                }
            }
        }
        v
    }

    #[test]
    fn cube_volume_at_recording_spacing() {
        let v = boxes([12, 12, 12], [0.19, 0.19, 0.5], &[(3, [1, 1, 1], [11, 11, 11])]);
        let vols = cell_volume(&v);
        assert!((vols[&3] - 18.05).abs() < 1e-9);
        assert!(!vols.contains_key(&1));
    }

    #[test]
    fn volume_is_additive() {
        let whole = boxes([10, 10, 10], [0.3, 0.3, 0.7], &[(1, [1, 1, 1], [9, 9, 9])]);
        let split = boxes([10, 10, 10], [0.3, 0.3, 0.7], &[(1, [1, 1, 1], [5, 9, 9]), (2, [5, 1, 1], [9, 9, 9])]);
        let a: f64 = cell_volume(&whole).values().sum();
        let b: f64 = cell_volume(&split).values().sum();
        assert!((a - b).abs() < 1e-12);
    }

    /// Erosion by explicit ball offsets.
    fn brute_shell(v: &LabelVolume, r: f64) -> LabelVolume {
        let [nx, ny, nz] = v.meta.dims;
        let ri = r.floor() as i64;
        let mut out = v.clone();
        for z in 0..nz {
            for y in 0..ny {
                for x in 0..nx {
                    if *v.get(x, y, z) == 0 {
                        continue;
                    }
                    let mut eroded = true;
                    'o: for dz in -ri..=ri {
                        for dy in -ri..=ri {
                            for dx in -ri..=ri {
                                if ((dx * dx + dy * dy + dz * dz) as f64) > r * r {
                                    continue;
                                }
                                let q = [x as i64 + dx, y as i64 + dy, z as i64 + dz];
                                let inside = q.iter().zip(&[nx, ny, nz]).all(|(&c, &n)| c >= 0 && c < n as i64);
                                if !inside || *v.get(q[0] as usize, q[1] as usize, q[2] as usize) == 0 {
                                    eroded = false;
                                    break 'o;
                                }
                            }
                        }
                    }
                    if eroded {
                        out.set(x, y, z, 0);
                    }
                }
            }
        }
        out
    }

    #[test]
    fn cube_shell_matches_ball_erosion() {
        let v = boxes([14, 14, 14], [1.0; 3], &[(1, [2, 2, 2], [12, 12, 12])]);
        let s = extract_apical_patches(&v, &QuantifyParams::default()).unwrap();
        assert_eq!(s.data.iter().filter(|&&l| l != 0).count(), 784);
        assert_eq!(s, brute_shell(&v, 2.0));
        for r in [1.0, 1.5, 3.0] {
            let p = QuantifyParams { shell_radius: r, ..QuantifyParams::default() };
            assert_eq!(extract_apical_patches(&v, &p).unwrap(), brute_shell(&v, r));
        }
    }

    #[test]
    fn large_radius_keeps_whole_object() {
        let v = boxes([10, 10, 10], [1.0; 3], &[(1, [3, 3, 3], [7, 7, 7])]);
        let p = QuantifyParams { shell_radius: 2.0, ..QuantifyParams::default() };
        assert_eq!(extract_apical_patches(&v, &p).unwrap(), v);
    }

    #[test]
    fn cell_contacts_are_not_in_the_shell() {
        let v = boxes([16, 10, 10], [1.0; 3], &[(1, [1, 1, 1], [8, 9, 9]), (2, [8, 1, 1], [15, 9, 9])]);
        let s = extract_apical_patches(&v, &QuantifyParams::default()).unwrap();
        // voxels next to the shared face, deep inside the union
        assert_eq!(*s.get(7, 5, 5), 0);
        assert_eq!(*s.get(8, 5, 5), 0);
        assert_eq!(*s.get(7, 1, 5), 1);
        for (a, b) in s.data.iter().zip(&v.data) {
            assert!(*a == 0 || a == b);
        }
    }

    fn flat_patch() -> Vec<[f64; 3]> {
        (0..10).flat_map(|y| (0..10).map(move |x| [x as f64, y as f64, 3.0])).collect()
    }

    #[test]
    fn flat_patch_area() {
        assert!((apical_area(&flat_patch(), 1.0).unwrap() - 100.0).abs() < 1e-9);
        assert!(apical_area(&flat_patch()[..2], 1.0).is_err());
        let line: Vec<[f64; 3]> = (0..5).map(|i| [i as f64, 0.0, 0.0]).collect();
        assert!(apical_area(&line, 1.0).is_err());
    }

    /// Voxels of a 10x10 square of the plane through `c` with unit normal
    /// `n`, voxelized as a 6-connected digital plane.
    pub(crate) fn rotated_patch(angle_deg: f64) -> Vec<[f64; 3]> {
        let a = angle_deg.to_radians();
        let u = Vector3::new(1.0, 0.0, 0.0);
        let w = Vector3::new(0.0, a.cos(), a.sin());
        let n = u.cross(&w);
        let thick = (n[0].abs() + n[1].abs() + n[2].abs()) / 2.0;
        let c = Vector3::new(10.0, 10.0, 10.0);
        let mut pts = Vec::new();
        for z in 0..24 {
            for y in 0..24 {
                for x in 0..24 {
                    let d = Vector3::new(x as f64, y as f64, z as f64) - c;
                    let (pu, pw, pn) = (d.dot(&u), d.dot(&w), d.dot(&n));
                    if pn.abs() <= thick && pn > -thick && (0.0..10.0).contains(&pu) && (0.0..10.0).contains(&pw) {
                        pts.push([x as f64, y as f64, z as f64]);
                    }
                }
            }
        }
        pts
    }

    #[test]
    fn rotated_patch_area_within_five_percent() {
        for angle in (0..=18).map(|k| k as f64 * 5.0) {
            let a = apical_area(&rotated_patch(angle), 1.0).unwrap();
            assert!((a - 100.0).abs() <= 5.0, "angle {angle}: {a}");
        }
    }

    #[test]
    fn column_length() {
        let v = boxes([6, 6, 22], [1.0; 3], &[(1, [1, 1, 1], [5, 5, 21])]);
        let cell = &label_points(&v)[&1];
        let face: Vec<[f64; 3]> = cell.iter().copied().filter(|p| p[2] == 20.0).collect();
        let l = apical_basal_length(cell, &face, [1.0; 3]).unwrap();
        assert!((l - 20.0).abs() <= 1.0, "{l}");
        let flat = flat_patch();
        assert!((apical_basal_length(&flat, &flat, [1.0; 3]).unwrap() - 1.0).abs() < 1e-9);
        assert!(apical_basal_length(cell, &face[..2], [1.0; 3]).is_err());
    }

    #[test]
    fn sphere_length_near_diameter() {
        let s = crate::phantom::digital_sphere(8.0, 2);
        let labels = s.map(|&b| b as u32);
        let patch = label_points(&extract_apical_patches(&labels, &QuantifyParams::default()).unwrap());
        let pts = &label_points(&labels)[&1];
        // only the upper cap, as an apical surface would be
        let cap: Vec<[f64; 3]> = patch[&1].iter().copied().filter(|p| p[2] >= 16.0).collect();
        let l = apical_basal_length(pts, &cap, [1.0; 3]).unwrap();
        assert!((l - 17.0).abs() <= 2.0, "{l}");
    }

    fn peel_for(labels: &Image2<u32>, px: f64) -> PeelImage {
        let mut p = PeelImage::empty(vec![labels.width; labels.height]);
        p.metric = Image2::filled(labels.width, labels.height, 1.0);
        p.valid = Image2::filled(labels.width, labels.height, true);
        p.pixel_size = [px, px];
        p
    }

    fn disk(w: usize, h: usize, cr: f64, cc: f64, ar: f64, ac: f64) -> Image2<u32> {
        let mut img = Image2::filled(w, h, 0u32);
        for r in 0..h {
            for c in 0..w {
                let (dr, dc) = ((r as f64 - cr) / ar, (c as f64 - cc) / ac);
                if dr * dr + dc * dc <= 1.0 {
                    img.set(r, c, 1);
                }
            }
        }
        img
    }

    #[test]
    fn two_d_shape_features() {
        let round = disk(41, 41, 20.0, 20.0, 15.0, 15.0);
        let oval = disk(61, 41, 20.0, 30.0, 10.0, 20.0);
        for (img, want, tol) in [(round, 0.0, 0.1), (oval, (0.75f64).sqrt(), 0.02)] {
            let peel = peel_for(&img, 0.19);
            let tt = track_2d(std::slice::from_ref(&img), [0.19, 0.19], &TrackParams::default()).unwrap();
            let ft = features_2d(std::slice::from_ref(&img), &[peel], &tt, 40.0).unwrap();
            let e = ft.get(1, 0, "eccentricity").unwrap();
            assert!((e - want).abs() < tol, "{e}");
            let n = img.data.iter().filter(|&&l| l == 1).count() as f64;
            assert!((ft.get(1, 0, "area").unwrap() - n * 0.19 * 0.19).abs() < 1e-9);
            assert!(ft.get(1, 0, "speed").is_none());
        }
    }

    #[test]
    fn speed_from_displacement() {
        let a = disk(30, 11, 5.0, 10.0, 3.0, 3.0);
        let b = disk(30, 11, 5.0, 12.0, 3.0, 3.0);
        let peels = vec![peel_for(&a, 0.19), peel_for(&b, 0.19)];
        let tt = track_2d(&[a.clone(), b.clone()], [0.19, 0.19], &TrackParams::default()).unwrap();
        let ft = features_2d(&[a, b], &peels, &tt, 40.0).unwrap();
        assert!((ft.get(1, 1, "speed").unwrap() - 0.0095).abs() < 1e-12);
        let unit = &ft.rows.iter().find(|r| r.feature == "speed").unwrap().unit;
        assert_eq!(unit, "µm/s");
    }

    #[test]
    fn sphere_volume_within_five_percent() {
        let s = crate::phantom::digital_sphere(15.0, 2).map(|&b| b as u32);
        let v = cell_volume(&s)[&1];
        let truth = 4.0 / 3.0 * PI * 15f64.powi(3);
        assert!((v - truth).abs() / truth < 0.05);
    }

    #[test]
    fn feature_csv_and_names() {
        let mut t = FeatureTable::default();
        t.push(1, 0, Feature::Volume, 18.05);
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), "track_id,frame,feature,value,unit\n1,0,volume,18.05,µm³\n");
        assert_eq!(FeatureTable::read_csv(buf.as_slice()).unwrap(), t);
        assert_eq!(Feature::parse("ab_length").unwrap(), Feature::AbLength);
        assert!(Feature::parse("mass").is_err());
        assert!(QuantifyParams { shell_radius: 0.5, plane_cell: None }.validate().is_err());
    }
}
