use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("view {0} is not part of the rig")]
    UnknownView(u32),
    #[error("point is not in front of view {view_id} (camera depth {depth})")]
    BehindCamera { view_id: u32, depth: f64 },
    #[error("fewer than the required visible keypoints")]
    InsufficientKeypoints,
    #[error("keypoints give a non-positive pixel height ({0})")]
    NonPositiveHeight(f64),
    #[error("pixel height must be positive, got {0}")]
    DegenerateHeight(f64),
    #[error("invalid rig: {0}")]
    InvalidRig(String),

    #[error("embedding dimensions differ ({0} vs {1})")]
    DimensionMismatch(usize, usize),
    #[error("embedding has zero or non-finite norm")]
    ZeroNormEmbedding,
    #[error("cost matrix entry ({row}, {col}) is not finite")]
    NonFiniteCost { row: usize, col: usize },
    #[error("cost matrix data has {len} entries, expected {rows}x{cols}")]
    CostShape { rows: usize, cols: usize, len: usize },

    #[error("frame {frame} does not come after frame {previous}")]
    NonMonotoneFrame { previous: u64, frame: u64 },
    #[error("invalid tracker configuration: {0}")]
    InvalidTrackerConfig(String),

    #[error("no ground-truth records left to score")]
    EmptyGroundTruth,
    #[error("duplicate record for frame {frame}, id {id}")]
    DuplicateRecord { frame: u64, id: u64 },

    #[error("invalid scene configuration: {0}")]
    ConfigInvalid(String),
}
