//! Synthetic volumes with known geometry.
//!
//! The cylinder phantoms run along y, so every xz slice shows an annulus.
//! Voxel `(x, z)` belongs to the annulus when its centre lies at a distance
//! `d` from the axis with `r_in < d <= r_out`.

use std::f64::consts::PI;

use crate::grid::Volume;
use crate::masking::{AnnotationSet, SliceAnnotation};
use crate::volume_io::{BitDepth, IntensityVolume, LabelVolume, MaskVolume, VolumeMeta};

/// Straight-walled V cut into the dorsal side of a cylinder.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Groove {
    /// Half width of the opening on the outer surface, px.
    pub half_width: f64,
    /// Depth of the tip below the outer surface, px.
    pub depth: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CylinderSpec {
    pub r_out: f64,
    pub r_in: f64,
    pub height: usize,
    /// Empty voxels between the outer radius and the volume faces.
    pub margin: usize,
    pub spacing: [f64; 3],
    pub groove: Option<Groove>,
    /// Cells around the circumference.
    pub sectors: usize,
    /// Cell length along y, px.
    pub cell_length: usize,
}

impl CylinderSpec {
    pub fn new(r_out: f64, r_in: f64, height: usize) -> Self {
        Self {
            r_out,
            r_in,
            height,
            margin: 4,
            spacing: [1.0; 3],
            groove: None,
            sectors: 24,
            cell_length: 12,
        }
    }

    pub fn dims(&self) -> [usize; 3] {
        let n = 2 * (self.r_out.ceil() as usize + self.margin) + 1;
        [n, self.height, n]
    }

    /// Axis position in voxel coordinates (same for x and z).
    pub fn centre(&self) -> f64 {
        (self.dims()[0] / 2) as f64
    }

    pub fn meta(&self) -> VolumeMeta {
        VolumeMeta { dims: self.dims(), spacing: self.spacing, frame_interval: None }
    }

    /// True when `(x, z)` belongs to the annulus cross-section.
    pub fn inside(&self, x: usize, z: usize) -> bool {
        let c = self.centre();
        let (dx, dz) = (x as f64 - c, z as f64 - c);
        let d = (dx * dx + dz * dz).sqrt();
        if d <= self.r_in || d > self.r_out {
            return false;
        }
        match self.groove {
            None => true,
            Some(g) => !in_groove(g, self.r_out, dx, dz),
        }
    }

    /// Cell label of an annulus voxel in `frame`, with cells sliding along y
    /// by `shift` voxels per frame.
    pub fn cell_label(&self, x: usize, y: usize, z: usize, frame: usize, shift: usize) -> u32 {
        if !self.inside(x, z) {
            return 0;
        }
        let c = self.centre();
        let angle = (z as f64 - c).atan2(x as f64 - c).rem_euclid(2.0 * PI);
        let sector = ((angle / (2.0 * PI) * self.sectors as f64) as usize).min(self.sectors - 1);
        let along = y as i64 - (frame * shift) as i64;
        let block = along.div_euclid(self.cell_length as i64) + 1;
        1 + sector as u32 + self.sectors as u32 * block as u32
    }
}

fn in_groove(g: Groove, r_out: f64, dx: f64, dz: f64) -> bool {
    // apex at depth below the top of the circle, opening wider than the rim
    let top = -r_out;
    let tip = top + g.depth;
    if dz > tip {
        return false;
    }
    let slope = g.half_width / g.depth;
    dx.abs() <= (tip - dz) * slope
}

/// Binary annulus (optionally grooved) along the full height.
pub fn cylinder_mask(spec: &CylinderSpec) -> MaskVolume {
    let [nx, ny, nz] = spec.dims();
    let mut slice = vec![false; nx * nz];
    for z in 0..nz {
        for x in 0..nx {
            slice[x + nx * z] = spec.inside(x, z);
        }
    }
    let mut data = Vec::with_capacity(nx * ny * nz);
    for z in 0..nz {
        for _ in 0..ny {
            data.extend_from_slice(&slice[nx * z..nx * (z + 1)]);
        }
    }
    Volume { meta: spec.meta(), data }
}

/// Ground-truth cell labels for one frame.
pub fn cylinder_labels(spec: &CylinderSpec, frame: usize, shift: usize) -> LabelVolume {
    let [nx, ny, nz] = spec.dims();
    let mut data = Vec::with_capacity(nx * ny * nz);
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                data.push(spec.cell_label(x, y, z, frame, shift));
            }
        }
    }
    Volume { meta: spec.meta(), data }
}

/// Raw-like 8-bit stack: dim background, mid-grey cytoplasm and bright
/// membranes wherever a voxel's 6-neighbourhood holds a different label.
pub fn membrane_stack(labels: &LabelVolume) -> IntensityVolume {
    let [nx, ny, nz] = labels.meta.dims;
    let mut data = vec![0u16; labels.data.len()];
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                let i = labels.index(x, y, z);
                let l = labels.data[i];
                let v = if l == 0 {
                    10
                } else {
                    let p = [x as i64, y as i64, z as i64];
                    let edge = [[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1]].iter().any(|o| {
                        let q = [p[0] + o[0], p[1] + o[1], p[2] + o[2]];
                        if q[0] < 0 || q[1] < 0 || q[2] < 0 || q[0] >= nx as i64 || q[1] >= ny as i64 || q[2] >= nz as i64 {
                            // the crop ends along y cut through cells, not membranes
                            return o[1] == 0;
                        }
                        *labels.get(q[0] as usize, q[1] as usize, q[2] as usize) != l
                    });
                    // faint texture keeps plateaus from being perfectly flat
                    let tex = ((x * 7 + y * 13 + z * 5) % 5) as u16;
                    if edge {
                        200 + tex
                    } else {
                        60 + tex
                    }
                };
                data[i] = v;
            }
        }
    }
    IntensityVolume { depth: BitDepth::U8, grid: Volume { meta: labels.meta.clone(), data } }
}

fn circle(c: f64, r: f64, n: usize) -> Vec<[f64; 2]> {
    (0..n)
        .map(|k| {
            let a = 2.0 * PI * k as f64 / n as f64;
            [c + r * a.cos(), c + r * a.sin()]
        })
        .collect()
}

/// Annotations tracing the annulus as 64-gons on `count` evenly spaced
/// slices, first and last slice included.
pub fn cylinder_annotations(spec: &CylinderSpec, count: usize) -> AnnotationSet {
    let ny = spec.height;
    let count = count.clamp(2, ny.max(2));
    let c = spec.centre();
    let mut idx: Vec<usize> = (0..count).map(|k| k * (ny - 1) / (count - 1)).collect();
    idx.dedup();
    let slices = idx
        .into_iter()
        .map(|y| SliceAnnotation {
            slice_index: y,
            outer: circle(c, spec.r_out, 64),
            inner: Some(circle(c, spec.r_in + 0.5, 64)),
        })
        .collect();
    AnnotationSet::new(spec.dims(), slices)
}

/// Solid ball of radius `r` around the centre of a `(2r + 2m + 1)^3` grid.
pub fn digital_sphere(r: f64, margin: usize) -> MaskVolume {
    let n = 2 * (r.ceil() as usize + margin) + 1;
    let c = (n / 2) as f64;
    let mut data = Vec::with_capacity(n * n * n);
    for z in 0..n {
        for y in 0..n {
            for x in 0..n {
                let d2 = (x as f64 - c).powi(2) + (y as f64 - c).powi(2) + (z as f64 - c).powi(2);
                data.push(d2 <= r * r);
            }
        }
    }
    Volume { meta: VolumeMeta::unit([n, n, n]), data }
}

/// Cubes on a regular grid, moved by `shift` voxels along x per frame.
#[derive(Debug, Clone, PartialEq)]
pub struct TranslatedCells {
    pub dims: [usize; 3],
    pub size: usize,
    pub pitch: usize,
    pub shift: usize,
    pub frames: usize,
}

impl TranslatedCells {
    /// Lower corner of every cube in frame 0, x-fastest order; cube `k`
    /// carries label `k + 1` in every frame.
    pub fn origins(&self) -> Vec<[i64; 3]> {
        let mut out = Vec::new();
        let per = |n: usize| (n / self.pitch).max(1);
        let [nx, ny, nz] = self.dims;
        for k in 0..per(nz) {
            for j in 0..per(ny) {
                for i in 0..per(nx) {
                    let o = |m: usize| (m * self.pitch + 1) as i64;
                    out.push([o(i), o(j), o(k)]);
                }
            }
        }
        out
    }

    pub fn frame(&self, t: usize) -> LabelVolume {
        let [nx, ny, nz] = self.dims;
        let mut vol = Volume::filled(VolumeMeta::unit(self.dims), 0u32);
        for (k, o) in self.origins().into_iter().enumerate() {
            let ox = o[0] + (t * self.shift) as i64;
            for z in o[2]..o[2] + self.size as i64 {
                for y in o[1]..o[1] + self.size as i64 {
                    for x in ox..ox + self.size as i64 {
                        if x < nx as i64 && y < ny as i64 && z < nz as i64 {
                            vol.set(x as usize, y as usize, z as usize, k as u32 + 1);
                        }
                    }
                }
            }
        }
        vol
    }

    /// Labels of cubes that stay clear of every face in every frame.
    pub fn interior_labels(&self) -> Vec<u32> {
        let [nx, ny, nz] = self.dims.map(|d| d as i64);
        let s = self.size as i64;
        let last = ((self.frames.saturating_sub(1)) * self.shift) as i64;
        self.origins()
            .into_iter()
            .enumerate()
            .filter(|(_, o)| o[0] >= 1 && o[1] >= 1 && o[2] >= 1 && o[0] + last + s < nx && o[1] + s < ny && o[2] + s < nz)
            .map(|(k, _)| k as u32 + 1)
            .collect()
    }
}
