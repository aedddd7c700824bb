use thiserror::Error;

/// Every failure the library can report.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("transition row ({s},{a}) sums to {sum}")]
    RowSumViolation { s: usize, a: usize, sum: f64 },
    #[error("reward at ({s},{a}) is {value}, outside [0, rmax]")]
    RewardOutOfRange { s: usize, a: usize, value: f64 },
    #[error("gamma {0} is outside (0,1)")]
    GammaOutOfRange(f64),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("value iteration did not converge within {0} iterations")]
    NonConvergence(usize),
    #[error("policy row for state {0} is not a probability distribution")]
    PolicyRowNotStochastic(usize),
    #[error("linear system is singular")]
    SingularSystem,
    #[error("kernel is not irreducible")]
    NotIrreducible,
    #[error("kernel is not irreducible at step {0}")]
    NotIrreducibleAt(u64),
    #[error("state {to} is unreachable from {from} under every policy")]
    Unreachable { from: usize, to: usize },
    #[error("instance too large: {0}")]
    InstanceTooLarge(String),
    #[error("negative temperature {0}")]
    NegativeLambda(f64),
    #[error("temperature {0} is below the gradient floor")]
    LambdaUnderflow(f64),
    #[error("invalid control value: {0}")]
    InvalidControl(String),
    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),
    #[error("logarithm domain error: n + n0 = {0} < 2")]
    LogDomain(u64),
    #[error("iterate escaped its range at step {0}")]
    IterateEscaped(u64),
    #[error("diagnostic window of {0} steps is too large")]
    WindowTooLarge(usize),
    #[error("stepsize at index {0} is not below one")]
    StepsizeTooLarge(u64),
    #[error("missing parameter {0}")]
    MissingParameter(String),
    #[error("recursion lemma preconditions unmet: {0}")]
    PreconditionUnmet(String),
    #[error("conditions violated: {}", .0.join(", "))]
    ConditionViolated(Vec<String>),
    #[error("truncation horizon {0} exceeds the allowed maximum")]
    HorizonOverflow(u64),
    #[error("checkpoint grid does not match the run: {0}")]
    GridMismatch(String),
    #[error("gap is required but infinite")]
    GapRequired,
    #[error("value {0} is not positive")]
    NonPositiveValue(f64),
    #[error("need at least {need} points, got {got}")]
    TooFewPoints { need: usize, got: usize },
    #[error("seed {seed} failed: {source}")]
    SeedFailed { seed: u64, source: Box<Error> },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("io error: {0}")]
    Io(String),
    #[error("parse error: {0}")]
    Parse(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
