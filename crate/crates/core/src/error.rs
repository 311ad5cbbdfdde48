use thiserror::Error;

/// Errors raised by the library.
///
/// Variants separate malformed input (bad dimensions, non-normalized data)
/// from mathematically negative outcomes such as [`Error::NotMajorized`],
/// which callers frequently want to branch on.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("empty input")]
    Empty,

    #[error("entry {index} is not finite")]
    NonFinite { index: usize },

    #[error("entry {index} is negative ({value:e})")]
    NegativeEntry { index: usize, value: f64 },

    #[error("entries sum to {sum}, expected 1")]
    NotNormalized { sum: f64 },

    #[error("entry {index} is zero but full support is required")]
    ZeroEntry { index: usize },

    #[error("matrix is not column-stochastic: {0}")]
    NotStochastic(String),

    #[error("matrix is not doubly stochastic (max row-sum deviation {deviation:e})")]
    NotDoublyStochastic { deviation: f64 },

    #[error("map does not preserve the Gibbs state (residual {residual:e})")]
    NotGibbsPreserving { residual: f64 },

    #[error("source does not majorize target: partial-sum violation at k = {violated_k}")]
    NotMajorized { violated_k: usize },

    #[error("source pair does not d-majorize target pair (curve gap {gap:e} at x = {at_x})")]
    NotDMajorized { at_x: f64, gap: f64 },

    #[error("support condition violated: {0}")]
    SupportViolation(String),

    #[error("invalid parameter {name} = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("input is rank deficient")]
    RankDeficient,

    #[error("sorted vectors are equal; the condition needs p\u{2193} \u{2260} p'\u{2193}")]
    EqualSortedVectors,

    #[error("free energy undefined at beta = 0")]
    UndefinedFreeEnergy,

    #[error("unitary does not conserve energy (commutator norm {norm:e})")]
    EnergyConservation { norm: f64 },

    #[error("linear program infeasible (best residual {residual:e})")]
    LpInfeasible { residual: f64 },

    #[error("matrix is not Hermitian (deviation {deviation:e})")]
    NotHermitian { deviation: f64 },

    #[error("matrix is not positive semidefinite (min eigenvalue {min_eigenvalue:e})")]
    NotPositive { min_eigenvalue: f64 },

    #[error("trace {trace} out of range for a density matrix")]
    BadTrace { trace: f64 },

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("channel is not trace non-increasing (excess {excess:e})")]
    NotTraceNonincreasing { excess: f64 },

    #[error("problem too large: {0}")]
    TooLarge(String),

    #[error("Markov chain is reducible")]
    ReducibleChain,

    #[error("{0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
