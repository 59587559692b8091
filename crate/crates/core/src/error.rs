use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Every failure the library can report.
///
/// The `Display` form always starts with the variant name so that the CLI can
/// surface it verbatim on standard error.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("DimensionMismatch: {0}")]
    DimensionMismatch(String),

    #[error("NonPositiveKappa: kappa[{index}] = {value}")]
    NonPositiveKappa { index: usize, value: f64 },

    #[error("NotPositiveSemidefinite: most negative eigenvalue {min_eigenvalue}")]
    NotPositiveSemidefinite { min_eigenvalue: f64 },

    #[error("NonFinite: {0}")]
    NonFinite(String),

    #[error("NotOnSimplex: {0}")]
    NotOnSimplex(String),

    #[error("InvalidDispersal: {0}")]
    InvalidDispersal(String),

    #[error("NoUniqueStationary: rate matrix has rank deficiency {rank_deficiency}")]
    NoUniqueStationary { rank_deficiency: usize },

    #[error("NoStationaryDistribution: stochastic growth rate {growth_rate} <= 0")]
    NoStationaryDistribution { growth_rate: f64 },

    #[error("DegenerateNoise: alpha . Sigma alpha = 0, no Gamma stationary law")]
    DegenerateNoise,

    #[error("DegenerateStrategy: strategy has zero kappa-norm")]
    DegenerateStrategy,

    #[error("InvalidConfig: {0}")]
    InvalidConfig(String),

    #[error("NonPositiveInitial: initial abundance {value}")]
    NonPositiveInitial { value: f64 },

    #[error("UnstableStep: component {component} at t = {time} (reduce dt)")]
    UnstableStep { time: f64, component: usize },

    #[error("BurnInTooLong: burn-in {burn_in} >= horizon {horizon}")]
    BurnInTooLong { burn_in: f64, horizon: f64 },

    #[error("ComparisonStepTooLarge: dt = {dt} exceeds bound {bound}")]
    ComparisonStepTooLarge { dt: f64, bound: f64 },

    #[error("IndexOutOfRange: patch {index} not in 0..{n}")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("NonpersistentStrategy: stochastic growth rate {growth_rate} <= 0")]
    NonpersistentStrategy { growth_rate: f64 },

    #[error("SigmaNotPositiveDefinite: smallest eigenvalue {min_eigenvalue}")]
    SigmaNotPositiveDefinite { min_eigenvalue: f64 },

    #[error("NoPersistentStrategy: no vertex or uniform strategy has positive growth rate")]
    NoPersistentStrategy,

    #[error("NoViablePatch: all mu_i <= 0")]
    NoViablePatch,

    #[error("InvalidSweep: {0}")]
    InvalidSweep(String),

    #[error("ParseError: {0}")]
    ParseError(String),

    #[error("Io: {0}")]
    Io(String),
}

impl Error {
    /// Variant name, e.g. `"NotPositiveSemidefinite"`.
    pub fn name(&self) -> &'static str {
        match self {
            Error::DimensionMismatch(_) => "DimensionMismatch",
            Error::NonPositiveKappa { .. } => "NonPositiveKappa",
            Error::NotPositiveSemidefinite { .. } => "NotPositiveSemidefinite",
            Error::NonFinite(_) => "NonFinite",
            Error::NotOnSimplex(_) => "NotOnSimplex",
            Error::InvalidDispersal(_) => "InvalidDispersal",
            Error::NoUniqueStationary { .. } => "NoUniqueStationary",
            Error::NoStationaryDistribution { .. } => "NoStationaryDistribution",
            Error::DegenerateNoise => "DegenerateNoise",
            Error::DegenerateStrategy => "DegenerateStrategy",
            Error::InvalidConfig(_) => "InvalidConfig",
            Error::NonPositiveInitial { .. } => "NonPositiveInitial",
            Error::UnstableStep { .. } => "UnstableStep",
            Error::BurnInTooLong { .. } => "BurnInTooLong",
            Error::ComparisonStepTooLarge { .. } => "ComparisonStepTooLarge",
            Error::IndexOutOfRange { .. } => "IndexOutOfRange",
            Error::NonpersistentStrategy { .. } => "NonpersistentStrategy",
            Error::SigmaNotPositiveDefinite { .. } => "SigmaNotPositiveDefinite",
            Error::NoPersistentStrategy => "NoPersistentStrategy",
            Error::NoViablePatch => "NoViablePatch",
            Error::InvalidSweep(_) => "InvalidSweep",
            Error::ParseError(_) => "ParseError",
            Error::Io(_) => "Io",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}
