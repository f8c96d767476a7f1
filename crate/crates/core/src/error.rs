use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    // step laws
    #[error("non-positive probability at support point {0:?}")]
    NonPositiveProbability(Vec<i64>),
    #[error("probabilities sum to {0}, not 1")]
    ProbabilitySumMismatch(f64),
    #[error("step law has empty support")]
    EmptySupport,
    #[error("support point {0:?} listed twice")]
    DuplicateSupportVector(Vec<i64>),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("projection of the support onto the direction is not integer valued")]
    NonLatticeProjection,
    #[error("target mean lies outside the interior of the support's convex hull")]
    TargetOutsideHull,
    #[error("tilt solver did not converge after {0} iterations")]
    NoConvergence(usize),

    // bridges
    #[error("endpoint {0:?} is unreachable in the requested number of steps")]
    UnreachableEndpoint(Vec<i64>),
    #[error("dynamic-programming tables need {needed} states, budget is {budget}")]
    TableBudgetExceeded { needed: u64, budget: u64 },
    #[error("path has {got} steps, expected {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("knot times must be strictly increasing")]
    NonMonotoneTime,
    #[error("path is not pinned at the endpoint")]
    UnpinnedEndpoint,
    #[error("time outside [0, 1] or s > t: s = {s}, t = {t}")]
    OutOfRange { s: f64, t: f64 },
    #[error("some step has non-positive component along the drift direction")]
    DriftViolation,
    #[error("pinning-time computation exceeded its budget ({0})")]
    CapExceeded(String),
    #[error("no k with positive probability of hitting the pinning point")]
    NoPinningPossible,
    #[error("law must have zero mean for this operation (mean = {0})")]
    NonzeroMean(f64),
    #[error("law has zero variance in the requested direction")]
    ZeroVariance,
    #[error("invalid length: {0}")]
    InvalidLength(String),

    // percolation
    #[error("vertex {0:?} is outside the truncated slab")]
    VertexOutsideSlab(Vec<i64>),
    #[error("invalid slab: {0}")]
    InvalidSlab(String),
    #[error("endpoints are not h-connected")]
    NotHConnected,
    #[error("no accepted sample after {0} attempts")]
    AttemptBudgetExhausted(u64),
    #[error("enumeration over {edges} edges exceeds the budget of {budget}")]
    EnumerationBudgetExceeded { edges: usize, budget: usize },
    #[error("estimated connection probability is zero at n = {0}")]
    InsufficientAcceptances(i64),

    // analysis
    #[error("time {0} is not on the recorded grid")]
    TimeNotOnGrid(f64),
    #[error("time grids differ")]
    GridMismatch,
    #[error("too few samples: have {have}, need {need}")]
    TooFewSamples { have: u64, need: u64 },
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),

    // plumbing
    #[error("parse error: {0}")]
    Parse(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("missing run manifest in {0}")]
    MissingManifest(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Whether the error means a computational budget ran out.
    pub fn is_budget(&self) -> bool {
        matches!(
            self,
            Error::TableBudgetExceeded { .. }
                | Error::CapExceeded(_)
                | Error::AttemptBudgetExhausted(_)
                | Error::EnumerationBudgetExceeded { .. }
                | Error::InsufficientAcceptances(_)
        )
    }

    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_) | Error::Parse(_))
    }
}
