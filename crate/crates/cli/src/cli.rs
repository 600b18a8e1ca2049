//! Command line definition.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::ops::Surface;

#[derive(Debug, Parser)]
#[command(name = "cellpeel", version, about = "Surface peeling, segmentation, tracking and shape measurement of epithelial cells")]
pub struct Cli {
    /// Pipeline config file (.toml or .json); flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Voxel size in µm as x,y,z; overrides file metadata.
    #[arg(long, global = true, value_delimiter = ',')]
    pub spacing: Option<Vec<f64>>,
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Interpolate annotated cross-sections into a 3D mask.
    Mask(MaskArgs),
    /// Extract a surface shell and unwrap it into a peel image.
    Peel(PeelArgs),
    /// Centre a peel on a furrow line.
    Rectify(RectifyArgs),
    /// Seeded watershed of a peel or 2D image.
    Segment2d(Segment2dArgs),
    /// Link 2D label images over time by centroid distance.
    Track2d(Track2dArgs),
    /// Link 3D label volumes over time by overlap.
    Track3d(Track3dArgs),
    /// Per-cell measurements of tracked cells.
    Quantify(QuantifyArgs),
    /// Write synthetic test data.
    #[command(subcommand)]
    Phantom(PhantomCommand),
    /// Serve the HTTP API for the annotation front end.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct MaskArgs {
    /// Raw stack (TIFF).
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Annotation set (JSON).
    #[arg(long)]
    pub annotations: PathBuf,
    /// Output mask TIFF.
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the masked stack here.
    #[arg(long)]
    pub masked_raw: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PeelArgs {
    #[arg(long)]
    pub mask: PathBuf,
    /// Raw stack sampled along the shell.
    #[arg(long)]
    pub raw: PathBuf,
    #[arg(long, value_enum, default_value_t = Surface::Apical)]
    pub surface: Surface,
    /// Target depth below the surface, voxels.
    #[arg(long)]
    pub t: Option<f64>,
    /// Half width of the depth band, voxels.
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
    /// Write three grayscale files instead of one RGB page.
    #[arg(long)]
    pub separate: bool,
    /// Leave holes unfilled.
    #[arg(long)]
    pub no_fill: bool,
    /// Write shell and tracing diagnostics (JSON) here.
    #[arg(long)]
    pub diagnostics: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RectifyArgs {
    #[arg(long)]
    pub peel: PathBuf,
    /// Furrow polyline (JSON, `{"points": [[row, col], ...]}`).
    #[arg(long)]
    pub furrow: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub separate: bool,
}

#[derive(Debug, Args)]
pub struct Segment2dArgs {
    /// Peel (with its .peel.json) or single-page grayscale TIFF.
    #[arg(long)]
    pub image: PathBuf,
    /// Minimum depth of a basin that gets its own seed.
    #[arg(long)]
    pub h: Option<f64>,
    /// 4 or 8.
    #[arg(long)]
    pub connectivity: Option<u8>,
    /// Cells are bright and membranes dark.
    #[arg(long)]
    pub invert: bool,
    /// Use these seeds instead of automatic ones.
    #[arg(long)]
    pub seeds: Option<PathBuf>,
    /// Write the seeds used here.
    #[arg(long)]
    pub seeds_out: Option<PathBuf>,
    /// Output label TIFF.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct Track2dArgs {
    /// Label images, one per frame, or one `%03d` pattern.
    #[arg(long, num_args = 1.., required = true)]
    pub labels: Vec<PathBuf>,
    #[arg(long)]
    pub frames: Option<usize>,
    /// Peels the labels were drawn on; supplies the pixel size.
    #[arg(long, num_args = 1..)]
    pub peels: Vec<PathBuf>,
    /// Pixel size in µm as column,row (when no peels are given).
    #[arg(long, value_delimiter = ',')]
    pub pixel_size: Option<Vec<f64>>,
    /// Gating radius, µm.
    #[arg(long)]
    pub max_dist: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct Track3dArgs {
    /// Label volumes, one per frame, or one `%03d` pattern.
    #[arg(long, num_args = 1.., required = true)]
    pub labels: Vec<PathBuf>,
    #[arg(long)]
    pub frames: Option<usize>,
    /// Keep incomplete, conflicted and boundary tracks.
    #[arg(long)]
    pub keep_all: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct QuantifyArgs {
    /// Label volumes (3D features) or label images (2D features).
    #[arg(long, num_args = 1.., required = true)]
    pub labels: Vec<PathBuf>,
    #[arg(long)]
    pub frames: Option<usize>,
    /// Track table (CSV).
    #[arg(long)]
    pub tracks: PathBuf,
    /// Comma separated: volume, apical_area, ab_length, area, eccentricity, speed.
    #[arg(long, value_delimiter = ',', default_value = "volume,apical_area,ab_length")]
    pub features: Vec<String>,
    /// Peels matching 2D label images.
    #[arg(long, num_args = 1..)]
    pub peels: Vec<PathBuf>,
    /// Ball radius for the outer-shell erosion, voxels.
    #[arg(long)]
    pub shell_radius: Option<f64>,
    /// Raster cell for the apical area, µm.
    #[arg(long)]
    pub plane_cell: Option<f64>,
    /// Seconds between frames.
    #[arg(long)]
    pub frame_interval: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum PhantomCommand {
    /// Hollow cylinder of cells with membranes, masks and annotations.
    Cylinder(CylinderArgs),
    /// Solid digital sphere label volume.
    Sphere(SphereArgs),
    /// Cubes translated along x over several frames.
    Cells(CellsArgs),
}

#[derive(Debug, Args)]
pub struct CylinderArgs {
    #[arg(long)]
    pub r_out: f64,
    #[arg(long)]
    pub r_in: f64,
    #[arg(long)]
    pub height: usize,
    #[arg(long, default_value_t = 4)]
    pub margin: usize,
    #[arg(long, default_value_t = 1)]
    pub frames: usize,
    /// Cell displacement along y per frame, voxels.
    #[arg(long, default_value_t = 0)]
    pub shift: usize,
    #[arg(long, default_value_t = 24)]
    pub sectors: usize,
    #[arg(long, default_value_t = 12)]
    pub cell_length: usize,
    /// Depth of a dorsal V-groove; none when omitted.
    #[arg(long)]
    pub groove_depth: Option<f64>,
    #[arg(long, default_value_t = 8.0)]
    pub groove_half_width: f64,
    /// Number of annotated cross-sections.
    #[arg(long, default_value_t = 5)]
    pub annotated: usize,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct SphereArgs {
    #[arg(long)]
    pub r: f64,
    #[arg(long, default_value_t = 2)]
    pub margin: usize,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct CellsArgs {
    /// Volume size as nx,ny,nz.
    #[arg(long, value_delimiter = ',', default_values_t = [48, 24, 24])]
    pub dims: Vec<usize>,
    #[arg(long, default_value_t = 4)]
    pub size: usize,
    #[arg(long, default_value_t = 8)]
    pub pitch: usize,
    #[arg(long, default_value_t = 1)]
    pub shift: usize,
    #[arg(long, default_value_t = 16)]
    pub frames: usize,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Working directory for session state and outputs.
    #[arg(long)]
    pub session: PathBuf,
    /// Raw stacks, one per frame, or one `%03d` pattern. Optional when the
    /// session already exists.
    #[arg(long, num_args = 1..)]
    pub stack: Vec<PathBuf>,
    #[arg(long)]
    pub frames: Option<usize>,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
}
