use thiserror::Error;

use crate::bitstream::StreamError;
use crate::video_io::VideoIoError;

/// Errors produced by the library.
#[derive(Debug, Error)]
#[non_exhaustive]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// The plane cannot hold a single SDE block.
    #[error("unusable geometry: {width}x{height} plane is smaller than one {beta}x{beta} block")]
    UnusableGeometry { width: usize, height: usize, beta: usize },

    #[error("geometry mismatch: {0}")]
    GeometryMismatch(String),

    #[error("invalid plane: {0}")]
    InvalidPlane(String),

    #[error("signal of length {len} is too short for prediction order {order}")]
    SignalTooShort { len: usize, order: usize },

    /// Zero-lag autocorrelation is not positive.
    #[error("degenerate signal: zero-lag autocorrelation {0} is not positive")]
    DegenerateSignal(f64),

    /// Levinson recursion produced a reflection coefficient outside (-1, 1).
    #[error("unstable predictor: reflection coefficient r_{index} = {value}")]
    UnstableFilter { index: usize, value: f64 },

    #[error("reflection coefficient {0} is outside (-1, 1)")]
    ReflectionOutOfRange(f64),

    #[error("invalid spectrum: {0}")]
    InvalidSpectrum(String),

    #[error(transparent)]
    Video(#[from] VideoIoError),

    #[error(transparent)]
    Stream(#[from] StreamError),
}

pub type Result<T> = std::result::Result<T, Error>;
