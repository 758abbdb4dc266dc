use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] trackdiff_core::Error),
    #[error("track `{0}` is already stored")]
    DuplicateTrackId(String),
    #[error("track `{0}` not found")]
    NotFound(String),
    #[error("archive corrupt at track `{track_id}`: {reason}")]
    CorruptArchive { track_id: String, reason: String },
    #[error("cannot open store at {path}: {reason}")]
    StoreOpen { path: PathBuf, reason: String },
    #[error("no manifest.json in {0}")]
    ManifestMissing(PathBuf),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
    #[error("no raw samples kept for track `{0}`")]
    RawUnavailable(String),
    #[error("{0}")]
    Invalid(String),
}

impl Error {
    /// Stable machine-readable code, used in HTTP error bodies.
    pub fn code(&self) -> &'static str {
        use trackdiff_core::Error as C;
        match self {
            Error::Core(C::TrackNotFound(_)) | Error::NotFound(_) => "track_not_found",
            Error::Core(C::NoSharedChannels) => "no_shared_channels",
            Error::Core(C::TypeMismatch) => "type_mismatch",
            Error::Core(C::KOutOfRange(_)) => "k_out_of_range",
            Error::Core(C::SingleClass | C::InsufficientLabels | C::TooFewExamples(_) | C::EmptyTrainSet) => {
                "insufficient_labels"
            }
            Error::Core(
                C::NonMonotonicTime { .. }
                | C::NonFinite { .. }
                | C::EmptyChannel { .. }
                | C::DuplicateChannel { .. }
                | C::NoChannels(_)
                | C::EmptyKeyField(_)
                | C::EmptyTrackId
                | C::RaggedSeries { .. },
            ) => "invalid_track",
            Error::Core(_) | Error::Invalid(_) => "invalid_argument",
            Error::DuplicateTrackId(_) => "duplicate_track_id",
            Error::CorruptArchive { .. } => "corrupt_archive",
            Error::StoreOpen { .. } => "store_open_failure",
            Error::ManifestMissing(_) => "manifest_missing",
            Error::RawUnavailable(_) => "raw_unavailable",
            Error::Io(_) => "io_failure",
            Error::Json(_) | Error::Csv(_) => "malformed_input",
        }
    }

    /// HTTP status used by the service.
    pub fn status(&self) -> u16 {
        match self.code() {
            "track_not_found" | "raw_unavailable" => 404,
            "duplicate_track_id" => 409,
            "corrupt_archive" | "store_open_failure" | "io_failure" => 500,
            _ => 400,
        }
    }
}
