//! Stacks, label volumes and their physical metadata.
//!
//! Axis convention: x = left-right, y = anteroposterior, z = dorsoventral.
//! TIFF pages map to z.

mod resample;
mod tiff_io;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::Volume;

pub use resample::{resample_isotropic, resample_mask_isotropic};
pub use tiff_io::{
    load_labels, load_mask, load_stack, read_pages, save_labels, save_mask, save_stack,
    sidecar_path, write_pages, Pages, Sidecar,
};

#[derive(Debug, Error)]
pub enum VolumeIoError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("format error in {path}: {reason}")]
    Format { path: String, reason: String },
    #[error("invalid metadata: {0}")]
    Meta(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("cannot resample: {0}")]
    Resample(String),
}

/// Dimensions and physical calibration of a volume.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VolumeMeta {
    /// Voxel counts `(nx, ny, nz)`.
    pub dims: [usize; 3],
    /// Voxel size in µm along x, y, z.
    pub spacing: [f64; 3],
    /// Seconds between frames, when the volume is part of a time series.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame_interval: Option<f64>,
}

impl VolumeMeta {
    pub fn new(dims: [usize; 3], spacing: [f64; 3]) -> Result<Self, VolumeIoError> {
        let meta = Self { dims, spacing, frame_interval: None };
        meta.validate()?;
        Ok(meta)
    }

    /// Unit spacing, no frame interval.
    pub fn unit(dims: [usize; 3]) -> Self {
        Self { dims, spacing: [1.0; 3], frame_interval: None }
    }

    pub fn with_frame_interval(mut self, seconds: f64) -> Self {
        self.frame_interval = Some(seconds);
        self
    }

    pub fn validate(&self) -> Result<(), VolumeIoError> {
        if self.dims.contains(&0) {
            return Err(VolumeIoError::Meta(format!("dims must be >= 1, got {:?}", self.dims)));
        }
        if self.spacing.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
            return Err(VolumeIoError::Meta(format!("spacing must be > 0, got {:?}", self.spacing)));
        }
        if let Some(dt) = self.frame_interval {
            if !(dt > 0.0) || !dt.is_finite() {
                return Err(VolumeIoError::Meta(format!("frame interval must be > 0, got {dt}")));
            }
        }
        Ok(())
    }

    #[inline]
    pub fn voxel_count(&self) -> usize {
        self.dims.iter().product()
    }

    /// Physical volume of one voxel, µm³.
    pub fn voxel_volume(&self) -> f64 {
        self.spacing.iter().product()
    }
}

/// Sample width of a raw intensity stack.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BitDepth {
    U8,
    U16,
}

impl BitDepth {
    pub fn max_value(self) -> u16 {
        match self {
            BitDepth::U8 => u8::MAX as u16,
            BitDepth::U16 => u16::MAX,
        }
    }

    pub fn bits(self) -> u8 {
        match self {
            BitDepth::U8 => 8,
            BitDepth::U16 => 16,
        }
    }
}

/// Raw microscopy data. 8-bit stacks are widened to `u16` in memory; `depth`
/// remembers the original width for saving and for the barrier value.
#[derive(Debug, Clone, PartialEq)]
pub struct IntensityVolume {
    pub depth: BitDepth,
    pub grid: Volume<u16>,
}

impl IntensityVolume {
    pub fn new(grid: Volume<u16>, depth: BitDepth) -> Self {
        Self { depth, grid }
    }

    #[inline]
    pub fn meta(&self) -> &VolumeMeta {
        &self.grid.meta
    }
}

/// Integer-labelled objects, 0 is background.
pub type LabelVolume = Volume<u32>;

/// Binary foreground.
pub type MaskVolume = Volume<bool>;
