use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("no last coordinate: point set has dimension 0")]
    NoLastCoordinate,
    #[error("cannot drop a nonzero last coordinate")]
    NonzeroLastCoordinate,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("separation hypothesis violated: A is not contained in C at x#{index}")]
    SeparationViolated { index: usize },
    #[error("value at x#{index} is not on the grid")]
    OffGrid { index: usize },
    #[error("grid must be strictly increasing")]
    UnsortedGrid,
    #[error("value at x#{index} lies outside [0, 1]")]
    OutsideUnitInterval { index: usize },
    #[error("bracket violated at {x}: lower value exceeds upper value")]
    BracketViolated { x: String },
    #[error("invariant breach at level {level}, x={x}: U={upper} > L={lower}")]
    InvariantBreach {
        level: usize,
        x: String,
        upper: String,
        lower: String,
    },
    #[error("sign precondition violated: need y_n > 0 and y'_n < 0")]
    SignPrecondition,
    #[error("scale ladder must start at 1, be strictly increasing and positive")]
    InvalidLadder,
    #[error("feature map is not total on Y: {0}")]
    PhiNotTotal(String),
    #[error("not normalized: g({x}, origin) must be 0")]
    NotNormalized { x: String },
    #[error("base point y0({x}) is not in Y")]
    BasePointMissing { x: String },
    #[error("oracle requires exact arithmetic")]
    RequiresExact,
    #[error("no linear dominator exists for: {}", .0.join(", "))]
    Infeasible(Vec<String>),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
