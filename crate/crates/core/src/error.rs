use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension {0} is outside the supported range 1..=4")]
    Dimension(usize),

    #[error("order {value} is outside {range}")]
    Order { value: f64, range: &'static str },

    #[error("invalid grid: {0}")]
    Grid(String),

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("support violation: {0}")]
    Support(String),

    #[error("kernel budget exceeded: {evaluations} evaluations > {limit}")]
    Budget { evaluations: u128, limit: u128 },

    #[error("input has nonzero mean {0:e}; the Riesz potential requires zero-mean data")]
    NonZeroMean(f64),

    #[error("field is not in the range of the fractional gradient (transverse residual {0:e})")]
    NotAGradient(f64),

    #[error("identity check failed: {0}")]
    Identity(String),

    #[error("invalid minor index: {0}")]
    MinorIndex(String),

    #[error("complementary-value constraint violated: {0}")]
    Constraint(String),

    #[error("line search failed after {0} backtracks with increasing energy")]
    Divergence(usize),

    #[error("zero denominator in {0}")]
    ZeroDenominator(&'static str),

    #[error("unknown {kind} `{name}` (registered: {known})")]
    Unknown {
        kind: &'static str,
        name: String,
        known: String,
    },

    #[error("invalid parameter: {0}")]
    Param(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Param(msg.into())
    }
}
