//! Peel images on disk.
//!
//! A peel is either one RGB16 TIFF page (R = intensity, G = metric x 1000,
//! B = valid 0/255) or three 16-bit grayscale files with `_intensity`,
//! `_metric` and `_valid` suffixes. Row lengths, the first slice, the start
//! voxels and the pixel size go into `<stem>.peel.json` next to it.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{FurrowLine, PeelError, PeelImage};
use crate::grid::Image2;
use crate::volume_io::{read_pages, write_pages};

const METRIC_SCALE: f64 = 1000.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PeelLayout {
    #[default]
    Combined,
    Separate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeelSidecar {
    pub row_len: Vec<usize>,
    pub first_slice: usize,
    pub starts: Vec<[usize; 3]>,
    pub pixel_size: [f64; 2],
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let ext = path.extension().map(|e| e.to_string_lossy().into_owned()).unwrap_or_else(|| "tif".into());
    path.with_file_name(format!("{stem}{suffix}.{ext}"))
}

pub fn peel_sidecar_path(path: &Path) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.peel.json"))
}

fn channel_paths(path: &Path) -> [PathBuf; 3] {
    [with_suffix(path, "_intensity"), with_suffix(path, "_metric"), with_suffix(path, "_valid")]
}

fn to_u16(v: f64) -> u32 {
    v.round().clamp(0.0, 65535.0) as u32
}

fn io_err(e: impl std::fmt::Display) -> PeelError {
    PeelError::Io(e.to_string())
}

/// Writes a peel. Intensities are rounded to 16 bits.
pub fn save_peel(peel: &PeelImage, path: &Path, layout: PeelLayout) -> Result<(), PeelError> {
    let (w, h) = (peel.width, peel.height);
    if w == 0 || h == 0 {
        return Err(PeelError::Io("cannot write an empty peel".into()));
    }
    let intensity: Vec<u32> = peel.intensity.data.iter().map(|&v| to_u16(v)).collect();
    let metric: Vec<u32> = peel.metric.data.iter().map(|&v| to_u16(v * METRIC_SCALE)).collect();
    let valid: Vec<u32> = peel.valid.data.iter().map(|&v| if v { 255 } else { 0 }).collect();
    match layout {
        PeelLayout::Combined => {
            let mut rgb = Vec::with_capacity(w * h * 3);
            for i in 0..w * h {
                rgb.extend([intensity[i], metric[i], valid[i]]);
            }
            write_pages(path, w, h, 16, 3, &rgb, None).map_err(io_err)?;
        }
        PeelLayout::Separate => {
            let [pi, pm, pv] = channel_paths(path);
            write_pages(&pi, w, h, 16, 1, &intensity, None).map_err(io_err)?;
            write_pages(&pm, w, h, 16, 1, &metric, None).map_err(io_err)?;
            write_pages(&pv, w, h, 16, 1, &valid, None).map_err(io_err)?;
        }
    }
    let side = PeelSidecar {
        row_len: peel.row_len.clone(),
        first_slice: peel.first_slice,
        starts: peel.starts.clone(),
        pixel_size: peel.pixel_size,
    };
    let sp = peel_sidecar_path(path);
    let text = serde_json::to_string_pretty(&side).expect("peel sidecar serializes");
    std::fs::write(&sp, text + "\n").map_err(|e| PeelError::Io(format!("{}: {e}", sp.display())))
}

/// Reads a peel written by [`save_peel`]; the layout is detected from which
/// files exist.
pub fn load_peel(path: &Path) -> Result<PeelImage, PeelError> {
    let (w, h, intensity, metric, valid) = if path.exists() {
        let p = read_pages(path).map_err(io_err)?;
        if p.samples != 3 || p.count != 1 {
            return Err(PeelError::Io(format!("{}: expected one RGB16 page", path.display())));
        }
        let n = p.width * p.height;
        let ch = |k: usize| (0..n).map(|i| p.data[3 * i + k]).collect::<Vec<u32>>();
        (p.width, p.height, ch(0), ch(1), ch(2))
    } else {
        let [pi, pm, pv] = channel_paths(path);
        if !pi.exists() {
            return Err(PeelError::Io(format!("{}: no such peel", path.display())));
        }
        let mut chans = Vec::new();
        let mut dims = None;
        for cp in [&pi, &pm, &pv] {
            let p = read_pages(cp).map_err(io_err)?;
            if p.samples != 1 || p.count != 1 {
                return Err(PeelError::Io(format!("{}: expected one grayscale page", cp.display())));
            }
            if dims.is_some_and(|d| d != (p.width, p.height)) {
                return Err(PeelError::Io(format!("{}: channel size differs", cp.display())));
            }
            dims = Some((p.width, p.height));
            chans.push(p.data);
        }
        let (w, h) = dims.expect("three channels read");
        let valid = chans.pop().expect("valid");
        let metric = chans.pop().expect("metric");
        let intensity = chans.pop().expect("intensity");
        (w, h, intensity, metric, valid)
    };

    let sp = peel_sidecar_path(path);
    let text = std::fs::read_to_string(&sp).map_err(|e| PeelError::Io(format!("{}: {e}", sp.display())))?;
    let side: PeelSidecar = serde_json::from_str(&text).map_err(|e| PeelError::Io(format!("{}: {e}", sp.display())))?;
    if side.row_len.len() != h || side.row_len.iter().any(|&l| l > w) || side.starts.len() != h {
        return Err(PeelError::Io(format!("{}: sidecar does not match a {w}x{h} peel", sp.display())));
    }

    Ok(PeelImage {
        width: w,
        height: h,
        intensity: Image2::from_vec(w, h, intensity.into_iter().map(f64::from).collect()),
        metric: Image2::from_vec(w, h, metric.into_iter().map(|v| v as f64 / METRIC_SCALE).collect()),
        valid: Image2::from_vec(w, h, valid.into_iter().map(|v| v != 0).collect()),
        row_len: side.row_len,
        first_slice: side.first_slice,
        starts: side.starts,
        pixel_size: side.pixel_size,
    })
}

pub fn save_furrow(furrow: &FurrowLine, path: &Path) -> Result<(), PeelError> {
    let text = serde_json::to_string_pretty(furrow).expect("furrow serializes");
    std::fs::write(path, text + "\n").map_err(|e| PeelError::Io(format!("{}: {e}", path.display())))
}

pub fn load_furrow(path: &Path) -> Result<FurrowLine, PeelError> {
    let text = std::fs::read_to_string(path).map_err(|e| PeelError::Io(format!("{}: {e}", path.display())))?;
    let f: FurrowLine = serde_json::from_str(&text).map_err(|e| PeelError::Furrow(e.to_string()))?;
    f.validate()?;
    Ok(f)
}
