//! Dense masks from sparse cross-section annotations, and the bright
//! safety margin written onto the raw stack.
//!
//! Annotations are closed polygons in the xz plane of chosen y slices. Between
//! two annotated slices the mask is morphed by blending the signed distance
//! fields of the two rasterized cross-sections and thresholding at zero.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{Image2, Volume};
use crate::shells::{squared_distance_to_features, EdmBorder};
use crate::volume_io::{IntensityVolume, MaskVolume, VolumeMeta};

#[derive(Debug, Error)]
pub enum MaskError {
    #[error("slice {slice}: {reason}")]
    Polygon { slice: usize, reason: String },
    #[error("annotation set: {0}")]
    Set(String),
    #[error("raw {raw:?} and mask {mask:?} dims differ")]
    DimMismatch { raw: [usize; 3], mask: [usize; 3] },
}

/// Closed polygon of `(x, z)` vertices; the closing edge is implicit.
pub type Polygon = Vec<[f64; 2]>;

/// Outer (and optional inner) boundary drawn on one y slice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceAnnotation {
    #[serde(rename = "index")]
    pub slice_index: usize,
    pub outer: Polygon,
    #[serde(default)]
    pub inner: Option<Polygon>,
}

/// All annotated slices of one stack. Serialized as the annotation JSON
/// exchanged with the annotator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationSet {
    pub version: u32,
    pub axis: String,
    pub dims: [usize; 3],
    pub slices: Vec<SliceAnnotation>,
}

impl AnnotationSet {
    pub fn new(dims: [usize; 3], mut slices: Vec<SliceAnnotation>) -> Self {
        slices.sort_by_key(|s| s.slice_index);
        Self { version: 1, axis: "y".into(), dims, slices }
    }

    pub fn validate(&self) -> Result<(), MaskError> {
        if self.axis != "y" {
            return Err(MaskError::Set(format!("annotation axis must be \"y\", got {:?}", self.axis)));
        }
        if self.dims.contains(&0) {
            return Err(MaskError::Set(format!("dims must be positive, got {:?}", self.dims)));
        }
        if self.slices.len() < 2 {
            return Err(MaskError::Set(format!("need at least 2 annotated slices, got {}", self.slices.len())));
        }
        for pair in self.slices.windows(2) {
            if pair[0].slice_index >= pair[1].slice_index {
                return Err(MaskError::Set(format!(
                    "slice indices must strictly increase ({} then {})",
                    pair[0].slice_index, pair[1].slice_index
                )));
            }
        }
        let last = self.slices.last().unwrap().slice_index;
        if last >= self.dims[1] {
            return Err(MaskError::Set(format!("slice {last} outside [0, {})", self.dims[1])));
        }
        for s in &self.slices {
            s.validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Location {
    Inside,
    OnEdge,
    Outside,
}

const EDGE_EPS: f64 = 1e-9;

fn locate(p: [f64; 2], poly: &[[f64; 2]]) -> Location {
    let n = poly.len();
    let mut inside = false;
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        if on_segment(p, a, b) {
            return Location::OnEdge;
        }
        // even-odd crossing of a ray towards +x
        if (a[1] > p[1]) != (b[1] > p[1]) {
            let x_cross = a[0] + (p[1] - a[1]) * (b[0] - a[0]) / (b[1] - a[1]);
            if p[0] < x_cross {
                inside = !inside;
            }
        }
    }
    if inside {
        Location::Inside
    } else {
        Location::Outside
    }
}

fn on_segment(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> bool {
    let cross = (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]);
    let len = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
    if cross.abs() > EDGE_EPS * len.max(1.0) {
        return false;
    }
    p[0] >= a[0].min(b[0]) - EDGE_EPS
        && p[0] <= a[0].max(b[0]) + EDGE_EPS
        && p[1] >= a[1].min(b[1]) - EDGE_EPS
        && p[1] <= a[1].max(b[1]) + EDGE_EPS
}

fn orient(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

fn segments_intersect(a: [f64; 2], b: [f64; 2], c: [f64; 2], d: [f64; 2]) -> bool {
    let (o1, o2, o3, o4) = (orient(a, b, c), orient(a, b, d), orient(c, d, a), orient(c, d, b));
    if ((o1 > 0.0 && o2 < 0.0) || (o1 < 0.0 && o2 > 0.0)) && ((o3 > 0.0 && o4 < 0.0) || (o3 < 0.0 && o4 > 0.0)) {
        return true;
    }
    on_segment(c, a, b) || on_segment(d, a, b) || on_segment(a, c, d) || on_segment(b, c, d)
}

fn check_simple(poly: &[[f64; 2]], slice: usize, which: &str) -> Result<(), MaskError> {
    let err = |reason: String| MaskError::Polygon { slice, reason: format!("{which} polygon: {reason}") };
    let n = poly.len();
    if n < 3 {
        return Err(err(format!("needs at least 3 vertices, got {n}")));
    }
    if poly.iter().any(|v| !v[0].is_finite() || !v[1].is_finite()) {
        return Err(err("non-finite vertex".into()));
    }
    for i in 0..n {
        if poly[i] == poly[(i + 1) % n] {
            return Err(err(format!("repeated vertex at {i}")));
        }
    }
    for i in 0..n {
        for j in (i + 1)..n {
            // adjacent edges share a vertex by construction
            if j == i + 1 || (i == 0 && j == n - 1) {
                continue;
            }
            if segments_intersect(poly[i], poly[(i + 1) % n], poly[j], poly[(j + 1) % n]) {
                return Err(err(format!("edges {i} and {j} intersect")));
            }
        }
    }
    Ok(())
}

impl SliceAnnotation {
    pub fn validate(&self) -> Result<(), MaskError> {
        check_simple(&self.outer, self.slice_index, "outer")?;
        if let Some(inner) = &self.inner {
            check_simple(inner, self.slice_index, "inner")?;
            if let Some(v) = inner.iter().find(|&&v| locate(v, &self.outer) != Location::Inside) {
                return Err(MaskError::Polygon {
                    slice: self.slice_index,
                    reason: format!("inner vertex ({}, {}) is not strictly inside the outer polygon", v[0], v[1]),
                });
            }
            for i in 0..inner.len() {
                for j in 0..self.outer.len() {
                    let (a, b) = (inner[i], inner[(i + 1) % inner.len()]);
                    let (c, d) = (self.outer[j], self.outer[(j + 1) % self.outer.len()]);
                    if segments_intersect(a, b, c, d) {
                        return Err(MaskError::Polygon {
                            slice: self.slice_index,
                            reason: "inner polygon crosses the outer polygon".into(),
                        });
                    }
                }
            }
        }
        Ok(())
    }
}

/// Rasterizes one annotation onto an `nx x nz` cross-section (rows are z).
///
/// A pixel is foreground when its centre, at integer `(x, z)`, lies inside or
/// on the outer polygon and strictly outside the inner one.
pub fn rasterize_annotation(ann: &SliceAnnotation, dims_xz: (usize, usize)) -> Result<Image2<bool>, MaskError> {
    ann.validate()?;
    let (nx, nz) = dims_xz;
    let mut img = Image2::filled(nx, nz, false);
    for z in 0..nz {
        for x in 0..nx {
            let p = [x as f64, z as f64];
            let in_outer = locate(p, &ann.outer) != Location::Outside;
            let in_inner = ann.inner.as_ref().is_some_and(|poly| locate(p, poly) != Location::Outside);
            img.set(z, x, in_outer && !in_inner);
        }
    }
    Ok(img)
}

/// Signed distance to the cross-section boundary: positive inside, negative
/// outside, zero on boundary pixels (foreground pixels with a 4-neighbour in
/// background or on the image edge).
pub fn signed_distance(mask: &Image2<bool>) -> Vec<f64> {
    let (w, h) = (mask.width, mask.height);
    let boundary: Vec<bool> = (0..mask.len())
        .map(|i| {
            if !mask.data[i] {
                return false;
            }
            let (r, c) = (i / w, i % w);
            if r == 0 || c == 0 || r + 1 == h || c + 1 == w {
                return true;
            }
            mask.neighbors(r, c, false).any(|(rr, cc)| !*mask.get(rr, cc))
        })
        .collect();
    if !boundary.iter().any(|&b| b) {
        return vec![-((w + h) as f64); mask.len()];
    }
    let sq = squared_distance_to_features([w, h, 1], &boundary, EdmBorder::none());
    sq.iter().zip(&mask.data).map(|(&d, &fg)| if fg { d.sqrt() } else { -d.sqrt() }).collect()
}

/// Builds the full 3D mask by piecewise-linear shape interpolation between
/// successive annotated slices. Slices outside the annotated range stay
/// empty. The returned mask has unit spacing; callers copy the stack's.
pub fn interpolate_masks(anns: &AnnotationSet) -> Result<MaskVolume, MaskError> {
    anns.validate()?;
    let [nx, ny, nz] = anns.dims;
    let mut mask = Volume::filled(VolumeMeta::unit([nx, ny, nz]), false);

    let rasters = anns
        .slices
        .iter()
        .map(|s| rasterize_annotation(s, (nx, nz)))
        .collect::<Result<Vec<_>, _>>()?;
    let fields: Vec<Vec<f64>> = rasters.iter().map(signed_distance).collect();

    for (k, pair) in anns.slices.windows(2).enumerate() {
        let (a, b) = (pair[0].slice_index, pair[1].slice_index);
        mask.set_slice_y(a, &rasters[k]);
        let (da, db) = (&fields[k], &fields[k + 1]);
        for y in (a + 1)..b {
            let alpha = (y - a) as f64 / (b - a) as f64;
            let data = da.iter().zip(db).map(|(&u, &v)| (1.0 - alpha) * u + alpha * v >= 0.0).collect();
            mask.set_slice_y(y, &Image2::from_vec(nx, nz, data));
        }
    }
    let last = anns.slices.len() - 1;
    mask.set_slice_y(anns.slices[last].slice_index, &rasters[last]);
    Ok(mask)
}

/// Foreground voxels with a background 6-neighbour or on a volume face.
pub fn mask_surface(mask: &MaskVolume) -> Vec<bool> {
    let [nx, ny, nz] = mask.meta.dims;
    let mut out = vec![false; mask.data.len()];
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                let i = mask.index(x, y, z);
                if !mask.data[i] {
                    continue;
                }
                out[i] = x == 0
                    || y == 0
                    || z == 0
                    || x + 1 == nx
                    || y + 1 == ny
                    || z + 1 == nz
                    || !*mask.get(x - 1, y, z)
                    || !*mask.get(x + 1, y, z)
                    || !*mask.get(x, y - 1, z)
                    || !*mask.get(x, y + 1, z)
                    || !*mask.get(x, y, z - 1)
                    || !*mask.get(x, y, z + 1);
            }
        }
    }
    out
}

/// Zeroes everything outside the mask and writes the brightest value of the
/// stack's bit depth onto the mask surface, leaving the interior untouched.
pub fn apply_mask_with_margin(raw: &IntensityVolume, mask: &MaskVolume) -> Result<IntensityVolume, MaskError> {
    if raw.grid.meta.dims != mask.meta.dims {
        return Err(MaskError::DimMismatch { raw: raw.grid.meta.dims, mask: mask.meta.dims });
    }
    let barrier = raw.depth.max_value();
    let surface = mask_surface(mask);
    let data = raw
        .grid
        .data
        .iter()
        .zip(&mask.data)
        .zip(&surface)
        .map(|((&v, &fg), &s)| match (fg, s) {
            (false, _) => 0,
            (true, true) => barrier,
            (true, false) => v,
        })
        .collect();
    Ok(IntensityVolume::new(Volume { meta: raw.grid.meta.clone(), data }, raw.depth))
}
