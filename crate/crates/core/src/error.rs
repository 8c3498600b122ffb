use thiserror::Error;

/// Errors surfaced by library operations.
#[derive(Debug, Error)]
pub enum Error {
    /// Direction of a zero-length vector was requested.
    #[error("degenerate direction: the two points coincide")]
    DegenerateDirection,

    /// A world-space query point lies outside the voxel grid.
    #[error("point ({x}, {y}, {z}) mm is outside the volume grid")]
    OutOfBounds { x: f64, y: f64, z: f64 },

    /// The clamp range of a normalization collapsed to a single value.
    #[error("clamp range [{floor}, {max}] HU is empty; cannot normalize")]
    ConstantVolume { floor: f64, max: f64 },

    /// A keypoint-normalized loss was requested with zero keypoints.
    #[error("loss is undefined for zero keypoints")]
    ZeroKeypoints,

    /// Paired inputs differ in length.
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    /// Scene generation could not place all needles within the retry budget.
    #[error("could not place needle {needle} after {retries} retries")]
    PlacementInfeasible { needle: usize, retries: usize },

    /// The exact solver guard rejected an instance too large to enumerate.
    #[error("brute-force solver guard: min({m}, {n}) exceeds {max}")]
    TooLarge { m: usize, n: usize, max: usize },

    /// Merging was requested while over budget but no pair qualifies.
    #[error("{over} paths over budget but no duplicate pair within the merge radius")]
    NoDuplicatesFound { over: usize },

    /// Volume header references an unknown sample encoding.
    #[error("unsupported volume dtype {0:?} (expected \"f32\" or \"i16\")")]
    UnsupportedDtype(String),

    /// Raw payload size disagrees with the header dimensions.
    #[error("raw volume data has {actual} samples, header implies {expected}")]
    DataSizeMismatch { expected: usize, actual: usize },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
