use std::fmt;
use std::path::PathBuf;

pub type Result<T, E = LabError> = std::result::Result<T, E>;

/// Pipeline stages in execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    Config,
    Mesh,
    Forward,
    Sense,
    Sfm,
    Recon,
    Metrics,
    Output,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Stage::Config => "config",
            Stage::Mesh => "mesh",
            Stage::Forward => "forward",
            Stage::Sense => "sense",
            Stage::Sfm => "sfm",
            Stage::Recon => "recon",
            Stage::Metrics => "metrics",
            Stage::Output => "output",
        };
        f.write_str(name)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum LabError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },

    #[error(transparent)]
    Core(#[from] eit_core::Error),

    #[error("{0}")]
    Config(String),

    #[error("{path}:{line}: {reason}")]
    Parse { path: PathBuf, line: usize, reason: String },

    #[error("value at pixel {0} is not finite")]
    NonFinite(usize),

    #[error("image encoding failed: {0}")]
    Image(String),

    #[error("[{stage}] {context}: {source}")]
    Stage { stage: Stage, context: String, source: Box<LabError> },
}

impl LabError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        LabError::Io { path: path.into(), source }
    }

    pub fn stage(&self) -> Option<Stage> {
        match self {
            LabError::Stage { stage, .. } => Some(*stage),
            _ => None,
        }
    }
}

/// Tags errors of a fallible step with its stage and a short context.
pub trait StageExt<T> {
    fn stage(self, stage: Stage, context: impl fmt::Display) -> Result<T>;
}

impl<T, E: Into<LabError>> StageExt<T> for std::result::Result<T, E> {
    fn stage(self, stage: Stage, context: impl fmt::Display) -> Result<T> {
        self.map_err(|e| LabError::Stage { stage, context: context.to_string(), source: Box::new(e.into()) })
    }
}
