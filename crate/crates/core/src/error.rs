use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("modulus mismatch: {left} vs {right}")]
    ModulusMismatch { left: u8, right: u8 },

    #[error("invalid qudit dimension {0} (need 2 <= d <= 255)")]
    InvalidModulus(u32),

    #[error("invalid lattice size {size}: {reason}")]
    InvalidLatticeSize { size: usize, reason: String },

    #[error("syndrome total charge is {0}, expected 0 on the torus")]
    ChargeNotNeutral(u8),

    #[error("exact enumeration needs {needed} terms, bound is {bound}")]
    EnumerationTooLarge { needed: u128, bound: u128 },

    #[error("degenerate distribution: {0}")]
    DegenerateDistribution(String),

    #[error(
        "degenerate cell ({x}, {y}) at level {level}: every candidate error has zero probability"
    )]
    DegenerateCell { x: usize, y: usize, level: usize },

    #[error("invalid probability {0}")]
    InvalidProbability(f64),

    #[error("distribution not normalized (sum = {0})")]
    NotNormalized(f64),

    #[error("cell basis validation failed: {0}")]
    BasisValidation(String),

    #[error("threshold fit failed: {0}")]
    FitFailure(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl Error {
    /// Stable variant name for machine-readable error records.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::LengthMismatch { .. } => "length_mismatch",
            Error::ModulusMismatch { .. } => "modulus_mismatch",
            Error::InvalidModulus(_) => "invalid_modulus",
            Error::InvalidLatticeSize { .. } => "invalid_lattice_size",
            Error::ChargeNotNeutral(_) => "charge_not_neutral",
            Error::EnumerationTooLarge { .. } => "enumeration_too_large",
            Error::DegenerateDistribution(_) => "degenerate_distribution",
            Error::DegenerateCell { .. } => "degenerate_cell",
            Error::InvalidProbability(_) => "invalid_probability",
            Error::NotNormalized(_) => "not_normalized",
            Error::BasisValidation(_) => "basis_validation",
            Error::FitFailure(_) => "fit_failure",
            Error::InvalidConfig(_) => "invalid_config",
            Error::Io(_) => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
