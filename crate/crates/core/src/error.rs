use alloc::string::String;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("series is empty")]
    EmptySeries,
    #[error("invalid series: {0}")]
    InvalidSeries(String),
    #[error("standard deviation is zero")]
    SigmaZero,
    #[error("query time {t} outside [{lo}, {hi}]")]
    OutOfRange { t: f64, lo: f64, hi: f64 },
    #[error("method needs at least {need} knots, got {got}")]
    TooFewKnots { need: usize, got: usize },
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("input is constant")]
    DegenerateConstant,
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),
    #[error("series too short: need {need} samples, got {got}")]
    SeriesTooShort { need: usize, got: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("cohort has no members for {0}")]
    EmptyCohort(String),
    #[error("map is empty")]
    EmptyMap,
    #[error("expected {expected} channels, got {got}")]
    ChannelCountMismatch { expected: usize, got: usize },
    #[error("probability {0} outside (0, 1]")]
    InvalidProbability(f64),
    #[error("invalid label: {0}")]
    InvalidLabel(String),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },
    #[error("labels contain a single class only")]
    SingleClassOnly,
    #[error("all ensemble weights are zero")]
    AllZeroWeights,
    #[error("no values to aggregate")]
    Empty,
    #[error("window {window} larger than {h}x{w} image")]
    WindowTooLarge { window: usize, h: usize, w: usize },
    #[error("invalid cohort spec: {0}")]
    InvalidSpec(String),
}

pub type Result<T> = core::result::Result<T, Error>;
