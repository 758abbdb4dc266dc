use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("channel `{channel}`: sample times not strictly increasing at index {index}")]
    NonMonotonicTime { channel: String, index: usize },
    #[error("channel `{channel}`: non-finite sample at index {index}")]
    NonFinite { channel: String, index: usize },
    #[error("channel `{channel}` has fewer than 2 samples")]
    EmptyChannel { channel: String },
    #[error("duplicate channel `{channel}`")]
    DuplicateChannel { channel: String },
    #[error("track `{0}` has no channels")]
    NoChannels(String),
    #[error("track key field `{0}` is empty")]
    EmptyKeyField(&'static str),
    #[error("track id is empty")]
    EmptyTrackId,
    #[error("times and values differ in length ({times} vs {values})")]
    RaggedSeries { times: usize, values: usize },
    #[error("grid size {0} is smaller than 2")]
    GridTooSmall(usize),
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("series needs at least 2 points, got {0}")]
    SeriesTooShort(usize),
    #[error("DTW band excludes every complete warping path")]
    BandTooNarrow,
    #[error("calibration factor k = {0} outside [2, 10]")]
    KOutOfRange(f64),
    #[error("tracks share no monitored channels")]
    NoSharedChannels,
    #[error("tracks are of different type (spacecraft, antenna, comm type)")]
    TypeMismatch,
    #[error("need at least 2 similar and 2 dissimilar labeled pairs")]
    InsufficientLabels,
    #[error("knots do not cover the sample span [{first}, {last}]")]
    KnotSpan { first: f64, last: f64 },
    #[error("knots must be strictly increasing")]
    UnsortedKnots,
    #[error("least-squares system is singular")]
    SingularFit,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("track `{0}` not found")]
    TrackNotFound(String),
    #[error("training data contains a single class")]
    SingleClass,
    #[error("training set is empty")]
    EmptyTrainSet,
    #[error("too few examples: {0}")]
    TooFewExamples(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
