use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Crate-wide error. Each variant names the pipeline stage that failed.
#[derive(Debug, Error)]
pub enum Error {
    #[error("volume-io: {0}")]
    VolumeIo(#[from] crate::volume_io::VolumeIoError),
    #[error("masking: {0}")]
    Masking(#[from] crate::masking::MaskError),
    #[error("shells: {0}")]
    Shells(#[from] crate::shells::ShellError),
    #[error("peel: {0}")]
    Peel(#[from] crate::peel::PeelError),
    #[error("segment2d: {0}")]
    Segment(#[from] crate::segment2d::SegmentError),
    #[error("tracking: {0}")]
    Tracking(#[from] crate::tracking::TrackError),
    #[error("quantify: {0}")]
    Quantify(#[from] crate::quantify::QuantifyError),
}

impl Error {
    /// Name of the stage the error originated from.
    pub fn module(&self) -> &'static str {
        match self {
            Error::VolumeIo(_) => "volume-io",
            Error::Masking(_) => "masking",
            Error::Shells(_) => "shells",
            Error::Peel(_) => "peel",
            Error::Segment(_) => "segment2d",
            Error::Tracking(_) => "tracking",
            Error::Quantify(_) => "quantify",
        }
    }
}
