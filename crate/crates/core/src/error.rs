use std::path::PathBuf;

/// Errors raised by the raster algebra, augmentation and dataset layers.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: {left:?} vs {right:?}")]
    Dimension {
        left: (usize, usize, usize),
        right: (usize, usize, usize),
    },
    #[error("buffer length {actual} does not match {width}x{height}x{channels}")]
    BufferLength {
        width: usize,
        height: usize,
        channels: usize,
        actual: usize,
    },
    #[error("value {value} at index {index} outside [{lo}, {hi}]")]
    Range {
        index: usize,
        value: f64,
        lo: f64,
        hi: f64,
    },
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("failed to read {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
    #[error("failed to write {path}: {source}")]
    Write {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
    #[error("unsupported pixel format in {path}: {detail}")]
    Format { path: PathBuf, detail: String },
    #[error("manifest error: {0}")]
    Manifest(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
