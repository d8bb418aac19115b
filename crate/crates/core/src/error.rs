use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An occupation number outside `0..=cutoff` for its mode.
    #[error("occupation {occupation} at site `{site}` exceeds cutoff {cutoff}")]
    Cutoff {
        site: String,
        occupation: usize,
        cutoff: usize,
    },

    /// The tensor-product dimension of a layout is above the configured limit.
    #[error("Hilbert space dimension {dim} exceeds limit {limit}")]
    DimensionLimit { dim: u128, limit: usize },

    #[error("superposition has no nonzero coefficient")]
    DegenerateState,

    #[error("layout error: {0}")]
    Layout(String),

    #[error("measurement basis is not orthonormal: |<{i}|{j}> - delta| = {deviation:.3e}")]
    Basis { i: usize, j: usize, deviation: f64 },

    #[error("residual probability {0:.3e} lies outside the measurement basis")]
    IncompleteBasis(f64),

    #[error("state does not factorize across the requested split (residual {0:.3e})")]
    Entangled(f64),

    #[error("protocol error: {0}")]
    Protocol(String),
}

impl Error {
    /// True for the two errors caused by truncation: a cutoff violation or a
    /// dimension overflow.
    pub fn is_cutoff(&self) -> bool {
        matches!(self, Error::Cutoff { .. } | Error::DimensionLimit { .. })
    }

    pub(crate) fn layout(msg: impl Into<String>) -> Self {
        Error::Layout(msg.into())
    }

    pub(crate) fn protocol(msg: impl Into<String>) -> Self {
        Error::Protocol(msg.into())
    }
}
