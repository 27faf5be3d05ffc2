//! Error taxonomy mapped onto process exit codes.
//!
//! Exit 0 means success. Exit 1 is a usage problem: bad flags or a broken
//! configuration file. Exit 2 means the input data could not be read or
//! parsed. Exit 3 is a failure in any stage past ingest, including a stage
//! invoked before the artifacts it consumes exist.

use std::fmt;

#[derive(Debug)]
pub enum CliError {
    /// Bad invocation or configuration.
    Usage(String),
    /// The input data could not be opened or parsed.
    Data(String),
    /// A pipeline stage downstream of ingest failed.
    Stage { stage: &'static str, message: String },
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self::Usage(message.into())
    }

    pub fn data(message: impl Into<String>) -> Self {
        Self::Data(message.into())
    }

    pub fn stage(stage: &'static str, message: impl fmt::Display) -> Self {
        Self::Stage { stage, message: message.to_string() }
    }

    /// A stage was invoked before the stage that produces its input.
    pub fn missing_artifact(stage: &'static str, path: &std::path::Path, producer: &str) -> Self {
        Self::Stage {
            stage,
            message: format!("{} not found; run `hotspot {producer}` first", path.display()),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) => 1,
            Self::Data(_) => 2,
            Self::Stage { .. } => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Usage(m) => write!(f, "error: {m}"),
            Self::Data(m) => write!(f, "error: {m}"),
            Self::Stage { stage, message } => write!(f, "error in stage {stage}: {message}"),
        }
    }
}

impl std::error::Error for CliError {}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_follow_the_error_class() {
        assert_eq!(CliError::usage("x").exit_code(), 1);
        assert_eq!(CliError::data("x").exit_code(), 2);
        assert_eq!(CliError::stage("cluster", "x").exit_code(), 3);
    }

    #[test]
    fn missing_artifact_names_the_producing_subcommand() {
        let e = CliError::missing_artifact("report", std::path::Path::new("out/labels.csv"), "cluster");
        assert_eq!(e.exit_code(), 3);
        assert!(e.to_string().contains("hotspot cluster"));
    }
}
