use thiserror::Error;

pub type Result<T> = std::result::Result<T, CmvError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CmvError {
    #[error("coefficient {value} is not inside the open unit disk (|a| = {modulus})")]
    Modulus { value: String, modulus: f64 },
    #[error("frequency {0} is outside (0, 1)")]
    FrequencyRange(f64),
    #[error("support mismatch: {0}")]
    Support(String),
    #[error("invalid size: {0}")]
    Size(String),
    #[error("boundary coefficient must be unimodular, got modulus {0}")]
    NotUnimodular(f64),
    #[error("rho({index}) = {rho:e} vanishes numerically")]
    DegenerateRho { index: i64, rho: f64 },
    #[error("banded system is numerically singular at pivot {0}")]
    Singular(usize),
    #[error("index outside the usable window: {0}")]
    Window(String),
    #[error("matrix entries overflow (log scale {0})")]
    Overflow(f64),
    #[error("initial condition has |eta0|^2 + |eta1|^2 = {0}, expected 2")]
    Normalization(f64),
    #[error("not enough data: {0}")]
    InsufficientData(String),
    #[error("spectral parameter {0} is not inside the open unit disk")]
    Disk(String),
    #[error("depth must be positive (got {0})")]
    Depth(usize),
    #[error("fractional-linear map has a pole: {0}")]
    Pole(String),
    #[error("solution horizon {horizon} too short to reach the requested scale")]
    Horizon { horizon: usize },
    #[error("no left-half convention reproduces the decaying solution (defects {0:?})")]
    Convention(Vec<f64>),
    #[error("degenerate Green's function denominator |F+ - M-| = {0:e}")]
    Degenerate(f64),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("eigen-decomposition failed: {0}")]
    Eigen(String),
}
