use alloc::string::String;

use crate::session::ChannelKind;

/// Errors raised by the core computations.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("task duration {0} s outside [60, 180] s")]
    DurationOutOfRange(f64),

    #[error("unknown channel kind `{0}`")]
    UnknownChannel(String),

    #[error("required channel {0:?} missing")]
    MissingChannel(ChannelKind),

    #[error("band edge {edge_hz} Hz at or above Nyquist {nyquist_hz} Hz")]
    BandEdgeAboveNyquist { edge_hz: f64, nyquist_hz: f64 },

    #[error("segment of {segment} samples longer than input of {len}")]
    SegmentTooLong { segment: usize, len: usize },

    #[error("empty input")]
    EmptyInput,

    #[error("no in-band spectral power")]
    DegenerateSpectrum,

    #[error("no motion power in the reference band")]
    NoMotion,

    #[error("window {window}: {source}")]
    AtWindow {
        window: usize,
        #[source]
        source: alloc::boxed::Box<Error>,
    },

    #[error("non-finite feature value")]
    NonFiniteFeature,

    #[error("all timestamps identical")]
    IdenticalTimestamps,

    #[error("corrupt stream on {channel:?} at seq {seq}")]
    CorruptStream { channel: ChannelKind, seq: u64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn at_window(self, window: usize) -> Self {
        Error::AtWindow {
            window,
            source: alloc::boxed::Box::new(self),
        }
    }
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
