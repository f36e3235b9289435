use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("qubit count {0} outside supported range 1..=4")]
    QubitCount(usize),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("state is not normalized (norm^2 = {0})")]
    NotNormalized(f64),

    #[error("invalid density matrix: {0}")]
    InvalidDensity(String),

    #[error("invalid projector: {0}")]
    InvalidProjector(String),

    #[error("projector set is not a complete orthogonal resolution: {0}")]
    IncompleteProjectors(String),

    #[error("probability {0} lies outside [0, 1] beyond rounding tolerance")]
    ProbabilityOutOfRange(f64),

    #[error("probabilities do not sum to one (sum = {0})")]
    NotNormalizedProbabilities(f64),

    #[error("parameter {name} = {value} out of range")]
    ParameterOutOfRange { name: &'static str, value: f64 },

    #[error("invalid subsystem selection: {0}")]
    InvalidSubsystem(String),

    #[error("invalid preparation scheme: {0}")]
    InvalidScheme(String),

    #[error("no selected incidents for bases (a, b) = ({a}, {b}); E(a, b) is undefined")]
    EmptyCell { a: u8, b: u8 },

    #[error("every incident for bases (a, b) = ({a}, {b}) was discarded")]
    AllDiscarded { a: u8, b: u8 },

    #[error("invalid weights: {0}")]
    InvalidWeights(String),

    #[error("invalid hidden-variable model: {0}")]
    InvalidModel(String),

    #[error("response distributions are not point masses (lambda index {0})")]
    NondeterministicModel(usize),

    #[error("Charlie selects nothing: total selected mass is zero")]
    ZeroSelection,

    #[error("trial count must be at least 1")]
    NoTrials,
}

impl Error {
    /// Undefined-statistic errors, as opposed to bad input or internal faults.
    pub fn is_empty_cell(&self) -> bool {
        matches!(self, Error::EmptyCell { .. } | Error::AllDiscarded { .. } | Error::ZeroSelection)
    }

    /// Numerical invariant violations that indicate a logic bug rather than bad input.
    pub fn is_internal(&self) -> bool {
        matches!(self, Error::ProbabilityOutOfRange(_) | Error::NotNormalized(_))
    }

    /// Variant name, carried into error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::QubitCount(_) => "QubitCount",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::NotNormalized(_) => "NotNormalized",
            Error::InvalidDensity(_) => "InvalidDensity",
            Error::InvalidProjector(_) => "InvalidProjector",
            Error::IncompleteProjectors(_) => "IncompleteProjectors",
            Error::ProbabilityOutOfRange(_) => "ProbabilityOutOfRange",
            Error::NotNormalizedProbabilities(_) => "NotNormalizedProbabilities",
            Error::ParameterOutOfRange { .. } => "ParameterOutOfRange",
            Error::InvalidSubsystem(_) => "InvalidSubsystem",
            Error::InvalidScheme(_) => "InvalidScheme",
            Error::EmptyCell { .. } => "EmptyCell",
            Error::AllDiscarded { .. } => "AllDiscarded",
            Error::InvalidWeights(_) => "InvalidWeights",
            Error::InvalidModel(_) => "InvalidModel",
            Error::NondeterministicModel(_) => "NondeterministicModel",
            Error::ZeroSelection => "ZeroSelection",
            Error::NoTrials => "NoTrials",
        }
    }
}
