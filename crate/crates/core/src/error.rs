use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty input")]
    EmptyInput,

    #[error("downsampling factor {factor} does not divide record length {len}")]
    NotDivisible { len: usize, factor: usize },

    #[error("downsampling factor must be positive")]
    ZeroFactor,

    #[error("window of {width} bins does not fit a record of {len} bins")]
    WindowTooLong { width: usize, len: usize },

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("excitation set is empty")]
    EmptyExcitation,

    #[error("excited bin {bin} outside [0, {max}]")]
    BinOutOfRange { bin: usize, max: usize },

    #[error("sparse multisine requires an even slow record length, got M = {0}")]
    OddSlowLength(usize),

    #[error("sparse set collision: bins {a} and {b} share slow bin {residue}")]
    SparseCollision { a: usize, b: usize, residue: usize },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("frequency response evaluated on a pole (|den| = {magnitude:e} at omega = {omega} rad/s)")]
    PoleOnUnitCircle { omega: f64, magnitude: f64 },

    #[error("invalid LPM configuration: {0}")]
    InvalidConfig(String),

    #[error("regressor rank deficient at bin {bin}: sigma_min/sigma_max = {ratio:e} (roughness margin {margin:e})")]
    RankDeficient { bin: usize, ratio: f64, margin: f64 },

    #[error("no residual degrees of freedom: 2nw+1 = {equations}, parameters = {parameters}")]
    NoDegreesOfFreedom { equations: usize, parameters: usize },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}
