use thiserror::Error;

/// Errors produced anywhere in the pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("empty point set")]
    EmptyPointSet,
    #[error("normalize first")]
    NotNormalized,
    #[error("min distance zero between points {0} and {1}")]
    MinDistanceZero(usize, usize),
    #[error("invalid metric: {0}")]
    InvalidMetric(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("unknown point id {0}")]
    UnknownId(usize),
    #[error("graph disconnected")]
    Disconnected,
    #[error("input is not a tree: {0}")]
    NotATree(String),
    #[error("tree is not binary at node {0}")]
    NotBinary(usize),
    #[error("no admissible radius around {center} in [{lo}, {hi}]")]
    NoAdmissibleRadius { center: usize, lo: f64, hi: f64 },
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("crossing edge ({0}, {1}) touches a non-portal")]
    NonPortalCrossing(usize, usize),
    #[error("oracle budget exceeded: {0}")]
    OracleBudget(String),
    #[error("terminal pair ({0}, {1}) not connected")]
    TerminalDisconnected(usize, usize),
    #[error("malformed instance at {location}: {message}")]
    Malformed { location: String, message: String },
    #[error("terminal {0} refers to a Steiner point")]
    SteinerTerminal(usize),
    #[error("io: {0}")]
    Io(String),
    #[error("stage {stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn in_stage(self, stage: &'static str) -> Error {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// Innermost error, skipping stage tags.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            e => e,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
