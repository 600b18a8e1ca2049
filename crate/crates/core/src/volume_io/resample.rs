use super::{IntensityVolume, MaskVolume, VolumeIoError, VolumeMeta};
use crate::grid::Volume;

const LATERAL_TOL: f64 = 1e-6;

/// Output z-size and source-plane step for axial upsampling.
fn plan(meta: &VolumeMeta) -> Result<(usize, f64), VolumeIoError> {
    let [sx, sy, sz] = meta.spacing;
    if (sx - sy).abs() > LATERAL_TOL {
        return Err(VolumeIoError::Resample(format!("lateral spacings differ: {sx} vs {sy}")));
    }
    if sz < sx - LATERAL_TOL {
        return Err(VolumeIoError::Resample(format!(
            "axial spacing {sz} is finer than lateral {sx}; downsampling is not supported"
        )));
    }
    let nz = meta.dims[2];
    let nz_out = ((nz as f64) * sz / sx).round().max(1.0) as usize;
    Ok((nz_out, sx / sz))
}

/// Source planes and blend weight for output plane `k`; positions past the
/// last input plane clamp to it.
#[inline]
fn source(k: usize, step: f64, nz: usize) -> (usize, usize, f64) {
    let pos = (k as f64 * step).min((nz - 1) as f64);
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(nz - 1);
    (lo, hi, pos - lo as f64)
}

fn resample_with<T: Copy, F: Fn(T, T, f64) -> T>(
    grid: &Volume<T>,
    blend: F,
) -> Result<Volume<T>, VolumeIoError> {
    let meta = &grid.meta;
    let (nz_out, step) = plan(meta)?;
    let [nx, ny, nz] = meta.dims;
    let sx = meta.spacing[0];
    let out_meta = VolumeMeta { dims: [nx, ny, nz_out], spacing: [sx, sx, sx], frame_interval: meta.frame_interval };
    if nz_out == nz && (meta.spacing[2] - sx).abs() <= LATERAL_TOL {
        return Ok(Volume { meta: out_meta, data: grid.data.clone() });
    }
    let plane = nx * ny;
    let mut data = Vec::with_capacity(plane * nz_out);
    for k in 0..nz_out {
        let (lo, hi, f) = source(k, step, nz);
        let a = &grid.data[lo * plane..(lo + 1) * plane];
        let b = &grid.data[hi * plane..(hi + 1) * plane];
        data.extend(a.iter().zip(b).map(|(&va, &vb)| blend(va, vb, f)));
    }
    Ok(Volume { meta: out_meta, data })
}

/// Upsamples along z so that all three spacings equal the lateral one.
///
/// Output plane `k` sits at physical depth `k * sx` and is linearly
/// interpolated between the two bracketing input planes; planes beyond the
/// last input plane repeat it. x and y are untouched.
pub fn resample_isotropic(vol: &IntensityVolume) -> Result<IntensityVolume, VolumeIoError> {
    let grid = resample_with(&vol.grid, |a, b, f| {
        (a as f64 * (1.0 - f) + b as f64 * f).round() as u16
    })?;
    Ok(IntensityVolume::new(grid, vol.depth))
}

/// Mask counterpart of [`resample_isotropic`]: linear weights, kept where
/// the interpolated occupancy reaches one half.
pub fn resample_mask_isotropic(mask: &MaskVolume) -> Result<MaskVolume, VolumeIoError> {
    resample_with(mask, |a, b, f| {
        let v = (a as u8 as f64) * (1.0 - f) + (b as u8 as f64) * f;
        v >= 0.5
    })
}
