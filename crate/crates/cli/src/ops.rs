//! Pipeline steps shared by the subcommands and the annotation server, so
//! both produce identical outputs for identical inputs.

use std::path::Path;

use cellpeel_core::masking::{apply_mask_with_margin, interpolate_masks, AnnotationSet};
use cellpeel_core::peel::{fill_holes, load_peel, peel_sidecar_path, project_peel, PeelDiagnostics, PeelImage};
use cellpeel_core::segment2d::{h_minima_seeds, seeded_watershed, SegParams, SeedSet};
use cellpeel_core::shells::{euclidean_distance_map_with, extract_shells, EdmBorder, ShellDiagnostics, ShellParams};
use cellpeel_core::volume_io::{load_stack, resample_isotropic, resample_mask_isotropic};
use cellpeel_core::{Image2, IntensityVolume, MaskVolume};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, OrCli};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Surface {
    #[default]
    Apical,
    Basal,
}

/// Replaces the spacing of a loaded stack, e.g. from `--spacing`.
pub fn override_spacing(vol: &mut IntensityVolume, spacing: Option<[f64; 3]>) -> Result<(), CliError> {
    if let Some(s) = spacing {
        vol.grid.meta.spacing = s;
        vol.grid.meta.validate().cli()?;
    }
    Ok(())
}

pub fn load_raw(path: &Path, spacing: Option<[f64; 3]>) -> Result<IntensityVolume, CliError> {
    let mut v = load_stack(path).cli()?;
    override_spacing(&mut v, spacing)?;
    Ok(v)
}

/// Interpolated mask (with the stack's spacing) and the masked stack.
pub fn build_mask(raw: &IntensityVolume, anns: &AnnotationSet) -> Result<(MaskVolume, IntensityVolume), CliError> {
    if anns.dims != raw.grid.meta.dims {
        return Err(CliError::new(
            "masking",
            format!("annotations are for {:?} but the stack is {:?}", anns.dims, raw.grid.meta.dims),
        ));
    }
    let mut mask = interpolate_masks(anns).cli()?;
    mask.meta = raw.grid.meta.clone();
    let masked = apply_mask_with_margin(raw, &mask).cli()?;
    Ok((mask, masked))
}

#[derive(Debug, Clone, Serialize)]
pub struct PeelReport {
    pub surface: Surface,
    pub resampled_dims: [usize; 3],
    pub shells: ShellDiagnostics,
    pub peel: PeelDiagnostics,
    pub width: usize,
    pub height: usize,
}

fn isotropic(s: [f64; 3]) -> bool {
    (s[0] - s[1]).abs() <= 1e-6 && (s[0] - s[2]).abs() <= 1e-6
}

/// Shell extraction and unwrapping for one frame. The mask takes the raw
/// stack's spacing; both are resampled to isotropic voxels when needed.
pub fn build_peel(
    mask: &MaskVolume,
    raw: &IntensityVolume,
    surface: Surface,
    params: &ShellParams,
    fill: bool,
) -> Result<(PeelImage, PeelReport), CliError> {
    if mask.meta.dims != raw.grid.meta.dims {
        return Err(CliError::new(
            "peel",
            format!("mask {:?} and raw {:?} dims differ", mask.meta.dims, raw.grid.meta.dims),
        ));
    }
    params.validate().cli()?;
    let mut mask = mask.clone();
    mask.meta = raw.grid.meta.clone();
    let (mask, raw) = if isotropic(raw.grid.meta.spacing) {
        (mask, raw.clone())
    } else {
        (resample_mask_isotropic(&mask).cli()?, resample_isotropic(raw).cli()?)
    };
    // the stack is a crop along y, so its y faces are not tissue boundaries
    let edm = euclidean_distance_map_with(&mask, EdmBorder::open_along_y()).cli()?;
    let (pair, sdiag) = extract_shells(&edm, params).cli()?;
    let shell = match surface {
        Surface::Apical => &pair.apical,
        Surface::Basal => &pair.basal,
    };
    let (peel, pdiag) = project_peel(shell, &raw).cli()?;
    let peel = if fill { fill_holes(&peel) } else { peel };
    let report = PeelReport {
        surface,
        resampled_dims: mask.meta.dims,
        shells: sdiag,
        peel: pdiag,
        width: peel.width,
        height: peel.height,
    };
    Ok((peel, report))
}

/// Pixels a segmentation may label: everything left of each row's end.
pub fn peel_domain(peel: &PeelImage) -> Image2<bool> {
    let mut d = Image2::filled(peel.width, peel.height, false);
    for r in 0..peel.height {
        for c in 0..peel.row_len[r] {
            d.set(r, c, true);
        }
    }
    d
}

/// A 2D image to segment: a peel (detected by its sidecar, holes filled)
/// or a single-page grayscale TIFF.
pub fn load_2d_input(path: &Path) -> Result<(Image2<f64>, Option<PeelImage>), CliError> {
    if peel_sidecar_path(path).exists() {
        let peel = fill_holes(&load_peel(path).cli()?);
        return Ok((peel.intensity.clone(), Some(peel)));
    }
    let v = load_stack(path).cli()?;
    let [w, h, n] = v.grid.meta.dims;
    if n != 1 {
        return Err(CliError::new("segment2d", format!("{}: expected one page, found {n}", path.display())));
    }
    Ok((Image2::from_vec(w, h, v.grid.data.iter().map(|&x| x as f64).collect()), None))
}

/// Seeds (given, or automatic from h-minima) and the watershed labels.
pub fn segment(
    img: &Image2<f64>,
    domain: Option<&Image2<bool>>,
    seeds: Option<SeedSet>,
    p: &SegParams,
) -> Result<(SeedSet, Image2<u32>), CliError> {
    let seeds = match seeds {
        Some(s) => s,
        None => h_minima_seeds(img, domain, p).cli()?,
    };
    let labels = seeded_watershed(img, &seeds, domain, p).cli()?;
    Ok((seeds, labels))
}

/// Writes through a temporary file and a rename so readers never see a
/// partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let tmp = path.with_extension(format!(
        "{}.tmp",
        path.extension().and_then(|e| e.to_str()).unwrap_or("")
    ));
    std::fs::write(&tmp, bytes).map_err(|e| CliError::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| CliError::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::io(path, e))?;
    write_atomic(path, (text + "\n").as_bytes())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use cellpeel_core::phantom::{cylinder_annotations, cylinder_labels, cylinder_mask, membrane_stack, CylinderSpec};

    #[test]
    fn mask_from_phantom_annotations_matches_truth() {
        let spec = CylinderSpec::new(14.5, 6.0, 12);
        let raw = membrane_stack(&cylinder_labels(&spec, 0, 0));
        let anns = cylinder_annotations(&spec, 3);
        let (mask, masked) = build_mask(&raw, &anns).unwrap();
        let truth = cylinder_mask(&spec);
        let c = spec.centre();
        for (i, (a, b)) in mask.data.iter().zip(&truth.data).enumerate() {
            if a != b {
                // polygon and disc only disagree on rim pixels
                let [x, _, z] = mask.coords(i);
                let d = ((x as f64 - c).powi(2) + (z as f64 - c).powi(2)).sqrt();
                assert!((d - spec.r_out).abs() < 1.0 || (d - spec.r_in).abs() < 1.0, "voxel {i} at radius {d}");
            }
        }
        assert!(masked.grid.data.iter().zip(&mask.data).all(|(&v, &m)| m || v == 0));
    }

    #[test]
    fn peel_of_phantom_has_one_row_per_slice() {
        let spec = CylinderSpec::new(14.5, 6.0, 10);
        let raw = membrane_stack(&cylinder_labels(&spec, 0, 0));
        let mask = cylinder_mask(&spec);
        let (peel, rep) = build_peel(&mask, &raw, Surface::Apical, &ShellParams::new(3.0, 0.5).unwrap(), true).unwrap();
        assert_eq!(peel.height, 10);
        assert_eq!(rep.shells.component_count, 2);
        assert!(rep.peel.thinned.iter().all(|&t| t == 0));
        let dom = peel_domain(&peel);
        assert_eq!(dom.data.iter().filter(|&&b| b).count(), peel.row_len.iter().sum::<usize>());
    }

    #[test]
    fn mismatched_dims_name_the_module() {
        let spec = CylinderSpec::new(10.5, 4.0, 4);
        let raw = membrane_stack(&cylinder_labels(&spec, 0, 0));
        let mut anns = cylinder_annotations(&spec, 2);
        anns.dims[1] += 1;
        assert_eq!(build_mask(&raw, &anns).unwrap_err().module, "masking");
    }

    #[test]
    fn atomic_write_leaves_no_temp_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.json");
        write_json(&p, &serde_json::json!({"x": 1})).unwrap();
        let names: Vec<_> = std::fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
        assert_eq!(names.len(), 1);
        let v: serde_json::Value = read_json(&p).unwrap();
        assert_eq!(v["x"], 1);
    }
}
