use thiserror::Error;

/// Reasons a raw domain description is rejected. Indices are 1-based, as in
/// the spec files users write.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SpecError {
    #[error("no blocks given")]
    NoBlocks,
    #[error("block {block} is empty")]
    EmptyBlock { block: usize },
    #[error("exponent omega_{coord} = {value} is odd")]
    OddExponent { coord: usize, value: u32 },
    #[error("exponent omega_{coord} = {value} is below 2")]
    ExponentTooSmall { coord: usize, value: u32 },
    #[error("outer exponent m_{block} = {value} is below 1")]
    OuterExponentTooSmall { block: usize, value: u32 },
    #[error("{blocks} blocks but {ms} outer exponents")]
    BlockCountMismatch { blocks: usize, ms: usize },
    #[error("d = {declared} but the blocks hold {actual} coordinates")]
    DimensionMismatch { declared: usize, actual: usize },
    #[error("dimension must be at least 2, got {0}")]
    DimensionTooSmall(usize),
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error("malformed spec file: {0}")]
    SpecFormat(String),
    #[error("coordinate index {index} out of range for d = {d}")]
    IndexOutOfRange { index: usize, d: usize },
    #[error("scale must be positive, got {0}")]
    NonPositiveScale(String),
    #[error("invalid scale {0:?}")]
    InvalidScale(String),
    #[error("brute-force oracle limited to t <= {cap}, got {t}")]
    OracleCap { t: f64, cap: f64 },
    #[error("direction has |xi_{axis}|/|xi| = {ratio:.4} below the cone threshold {eps0:.4}")]
    OutsideCone { axis: usize, ratio: f64, eps0: f64 },
    #[error("zero direction vector")]
    ZeroDirection,
    #[error("cap depth {delta} too large: {reason}")]
    CapTooLarge { delta: f64, reason: String },
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("{0}")]
    Convergence(String),
}

pub type Result<T> = std::result::Result<T, Error>;
