use std::fmt;

/// Pipeline stage an error belongs to; each maps to its own exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Config,
    Generate,
    Sensitivity,
    Optimize,
    Sample,
    Diagnose,
    Artifacts,
}

impl Stage {
    pub fn exit_code(self) -> i32 {
        match self {
            Stage::Config => 10,
            Stage::Generate => 11,
            Stage::Sensitivity => 12,
            Stage::Optimize => 13,
            Stage::Sample => 14,
            Stage::Diagnose => 15,
            Stage::Artifacts => 16,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Stage::Config => "config",
            Stage::Generate => "generate",
            Stage::Sensitivity => "sensitivity",
            Stage::Optimize => "optimize",
            Stage::Sample => "sample",
            Stage::Diagnose => "diagnose",
            Stage::Artifacts => "artifacts",
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub struct CliError {
    pub stage: Stage,
    pub message: String,
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} stage failed: {}", self.stage.name(), self.message)
    }
}

impl CliError {
    pub fn new(stage: Stage, message: impl Into<String>) -> Self {
        Self {
            stage,
            message: message.into(),
        }
    }

    pub fn config(message: impl Into<String>) -> Self {
        Self::new(Stage::Config, message)
    }
}

/// Tags any displayable error with a stage.
pub trait StageExt<T> {
    fn stage(self, stage: Stage) -> Result<T, CliError>;
}

impl<T, E: fmt::Display> StageExt<T> for Result<T, E> {
    fn stage(self, stage: Stage) -> Result<T, CliError> {
        self.map_err(|e| CliError::new(stage, e.to_string()))
    }
}
