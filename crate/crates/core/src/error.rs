use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Why no SSB power satisfies the user SINR requirement.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InfeasibleKind {
    /// Interference alone caps the user SINR below the requirement.
    InterferenceLimited,
    /// The required SSB power exceeds the per-AP budget.
    PowerLimited,
}

impl std::fmt::Display for InfeasibleKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            InfeasibleKind::InterferenceLimited => write!(f, "interference-limited"),
            InfeasibleKind::PowerLimited => write!(f, "power-limited"),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration `{key}`: {msg}")]
    Config { key: String, msg: String },

    #[error("config parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("infeasible: {0}")]
    Infeasible(InfeasibleKind),

    #[error("voxel {voxel} lies inside the nulled subspace of every illuminator")]
    DegenerateVoxel { voxel: usize },

    #[error("degenerate solution: {0}")]
    DegenerateSolution(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("not applicable: {0}")]
    NotApplicable(String),

    #[error("solver error: {0}")]
    Solver(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn config(key: &str, msg: impl Into<String>) -> Self {
        Error::Config {
            key: key.to_string(),
            msg: msg.into(),
        }
    }
}
