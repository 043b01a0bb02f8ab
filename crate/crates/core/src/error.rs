use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("electrode targets {first} and {second} snap to the same boundary node {node}")]
    ElectrodeCollision { first: usize, second: usize, node: usize },

    #[error("anomaly {index} is not strictly inside the domain: {reason}")]
    AnomalyOutsideDomain { index: usize, reason: String },

    #[error("non-positive conductivity {value} on triangle {triangle}")]
    NonPositiveConductivity { triangle: usize, value: f64 },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("factorization failed at pivot {pivot}")]
    Factorization { pivot: usize },

    #[error("singular value decomposition lost accuracy (recomposition error {error:e})")]
    InaccurateSvd { error: f64 },

    #[error("load vector is not compatible with the Neumann problem (sum {sum})")]
    IncompatibleLoad { sum: f64 },

    #[error("difference data matrix is identically zero")]
    ZeroData,

    #[error("sensitivity column of pixel {pixel} has zero norm for drive {drive}")]
    ZeroColumn { pixel: usize, drive: usize },

    #[error("all weights are zero")]
    ZeroWeights,

    #[error("non-positive weight {value} at pixel {pixel}")]
    NonPositiveWeight { pixel: usize, value: f64 },

    #[error("matrix is empty or identically zero")]
    EmptyMatrix,

    #[error("pixel {0} does not exist in the grid")]
    PixelOutOfRange(usize),

    #[error("non-finite value at index {0}")]
    NonFinite(usize),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name, reason: reason.into() }
    }
}
