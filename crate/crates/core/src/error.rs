use thiserror::Error;

/// Errors raised when an input violates a state, measurement or protocol
/// invariant. Messages name the invariant that failed.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("operator is not Hermitian: max |M - M^dagger| = {deviation:.3e} exceeds 1e-10")]
    NotHermitian { deviation: f64 },

    #[error("state is not positive semidefinite: smallest eigenvalue {min_eigenvalue:.3e} is below -1e-10")]
    NotPositive { min_eigenvalue: f64 },

    #[error("state trace is {trace} but must be 1 within 1e-10")]
    BadTrace { trace: f64 },

    #[error("dimension {dim} exceeds the supported maximum {max}")]
    TooLarge { dim: usize, max: usize },

    #[error("dimension mismatch ({context}): expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid probability distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid subsystem selection: {0}")]
    InvalidSubsystems(String),

    #[error("{name} = {value} is outside its allowed range {range}")]
    OutOfRange {
        name: &'static str,
        value: f64,
        range: &'static str,
    },

    #[error("state is not pure: purity {purity} differs from 1 by more than 1e-9")]
    NotPure { purity: f64 },

    #[error("basis vectors are not orthonormal: max |G - I| = {deviation:.3e} exceeds 1e-9")]
    NotOrthonormal { deviation: f64 },

    #[error(
        "POVM elements do not sum to the identity: max deviation {deviation:.3e} exceeds 1e-8"
    )]
    IncompletePovm { deviation: f64 },

    #[error("POVM on a {dim}-dimensional space needs at least {dim} outcomes, got {outcomes}")]
    TooFewOutcomes { dim: usize, outcomes: usize },

    #[error("correction is not unitary: max |U^dagger U - I| = {deviation:.3e}")]
    NotUnitary { deviation: f64 },

    #[error("no correction defined for announcement `{symbol}` in basis {basis}")]
    MissingCorrection { basis: String, symbol: String },

    #[error("invalid strategy: {0}")]
    InvalidStrategy(String),

    #[error("invalid hidden-variable model: {0}")]
    InvalidModel(String),

    #[error("work budget {budget} exceeds the memory entropy {entropy}")]
    BudgetExceedsEntropy { budget: f64, entropy: f64 },

    #[error("illegal block transition from {from} to {to}")]
    IllegalTransition {
        from: &'static str,
        to: &'static str,
    },

    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
