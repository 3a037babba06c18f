use std::fmt;

/// Pipeline stage tags attached to propagated backend errors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Encode,
    Depth,
    Init,
    Placement,
    Generate,
    PasteBack,
    Segment,
    Foreground,
    Metrics,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Encode => "encode",
            Stage::Depth => "depth",
            Stage::Init => "init",
            Stage::Placement => "placement",
            Stage::Generate => "generate",
            Stage::PasteBack => "paste-back",
            Stage::Segment => "segment",
            Stage::Foreground => "foreground",
            Stage::Metrics => "metrics",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("backend `{id}` unavailable: {reason}")]
    BackendUnavailable { id: String, reason: String },

    #[error("inference failed in backend `{id}`: {message}")]
    Inference { id: String, message: String },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("empty mask: nothing to edit")]
    EmptyMask,

    #[error("[{stage}] {source}")]
    Staged {
        stage: Stage,
        #[source]
        source: Box<Error>,
    },

    #[error("plan step {step}: {message}")]
    Plan { step: usize, message: String },

    #[error("invalid reorder: {0}")]
    InvalidReorder(String),

    #[error("manifest {location}: {message}")]
    Manifest { location: String, message: String },

    #[error("asset not found: {0}")]
    AssetNotFound(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("image codec: {0}")]
    Codec(#[from] image::ImageError),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub fn at(self, stage: Stage) -> Self {
        match self {
            e @ Error::Staged { .. } => e,
            e => Error::Staged {
                stage,
                source: Box::new(e),
            },
        }
    }

    /// Strips stage tags.
    pub fn root(&self) -> &Error {
        match self {
            Error::Staged { source, .. } => source.root(),
            e => e,
        }
    }

    pub fn stage(&self) -> Option<Stage> {
        match self {
            Error::Staged { stage, .. } => Some(*stage),
            _ => None,
        }
    }

    /// Stable kebab-case name of the root variant.
    pub fn kind(&self) -> &'static str {
        match self.root() {
            Error::InvalidInput(_) => "invalid-input",
            Error::BackendUnavailable { .. } => "backend-unavailable",
            Error::Inference { .. } => "inference",
            Error::Contract(_) => "contract",
            Error::EmptyMask => "empty-mask",
            Error::Staged { .. } => unreachable!("root strips stage tags"),
            Error::Plan { .. } => "plan",
            Error::InvalidReorder(_) => "invalid-reorder",
            Error::Manifest { .. } => "manifest",
            Error::AssetNotFound(_) => "not-found",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
            Error::Codec(_) => "codec",
            Error::Json(_) => "json",
        }
    }

    /// True for failures caused by a backend rather than by the caller's input.
    pub fn is_backend(&self) -> bool {
        matches!(self.root(), Error::BackendUnavailable { .. } | Error::Inference { .. })
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
