//! Semi-automatic analysis of 3D+t light-sheet stacks of early embryos.
//!
//! The crate follows the processing chain used on cylindrical crops of the
//! embryo trunk:
//!
//! 1. [`volume_io`] loads multi-page TIFF stacks, carries voxel spacing and
//!    upsamples anisotropic stacks along z.
//! 2. [`masking`] turns a handful of annotated cross-sections into a dense
//!    3D mask and writes a bright barrier along its surface.
//! 3. [`shells`] computes the exact Euclidean distance map of the mask and
//!    cuts the apical and basal surface shells out of it.
//! 4. [`peel`] unwraps a shell slice by slice into a 2D peel image and
//!    straightens it around a user-drawn furrow line.
//! 5. [`segment2d`] runs a seeded watershed on peels with h-minima seeds.
//! 6. [`tracking`] links objects over time (nearest neighbour in 2D,
//!    largest overlap in 3D).
//! 7. [`quantify`] measures areas, volumes and lengths per tracked cell.
//!
//! [`phantom`] builds synthetic stacks with known geometry.

// parameter checks use `!(x > 0.0)` on purpose so that NaN is rejected
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod grid;
pub mod masking;
pub mod peel;
pub mod phantom;
pub mod quantify;
pub mod segment2d;
pub mod shells;
pub mod tracking;
pub mod volume_io;

pub use error::{Error, Result};
pub use grid::{Image2, Volume};
pub use volume_io::{BitDepth, IntensityVolume, LabelVolume, MaskVolume, VolumeMeta};

/// Lateral voxel size of the light-sheet recordings, µm.
pub const LATERAL_SPACING_UM: f64 = 0.19;
/// Axial voxel size of the light-sheet recordings, µm.
pub const AXIAL_SPACING_UM: f64 = 0.5;
/// Time between consecutive frames, s.
pub const FRAME_INTERVAL_S: f64 = 40.0;
/// Number of frames in the reference time series.
pub const REFERENCE_FRAME_COUNT: usize = 16;
