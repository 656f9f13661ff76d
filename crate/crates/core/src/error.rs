use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("singular channel in cluster {cluster:?}")]
    SingularChannel { cluster: Vec<usize> },

    #[error("degenerate multiplier for user {user}: zero power price with positive water level")]
    DegenerateMultiplier { user: usize },

    #[error("state-space guard exceeded: {0}")]
    Guard(String),

    #[error("did not converge: {0}")]
    NoConvergence(String),

    #[error("slot {slot}: {source}")]
    AtSlot {
        slot: u64,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}

impl Error {
    /// Short machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Config(_) => "config",
            Error::Contract(_) => "contract",
            Error::SingularChannel { .. } => "singular_channel",
            Error::DegenerateMultiplier { .. } => "degenerate_multiplier",
            Error::Guard(_) => "guard",
            Error::NoConvergence(_) => "no_convergence",
            Error::AtSlot { source, .. } => source.kind(),
            Error::Io(_) => "io",
            Error::Json(_) => "json",
            Error::Toml(_) => "parse",
        }
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn at_slot(self, slot: u64) -> Self {
        match self {
            e @ Error::AtSlot { .. } => e,
            e => Error::AtSlot {
                slot,
                source: Box::new(e),
            },
        }
    }
}
