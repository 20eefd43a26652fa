use std::fmt::Display;

use dialclean_core::chunker::ChunkError;
use dialclean_core::detectors::DetectorError;
use dialclean_core::io::IoError;
use dialclean_core::markup::PreprocessError;
use dialclean_core::model::{ConfigError, ModelError};
use dialclean_core::pipeline::PipelineError;
use dialclean_core::quality::QualityError;
use dialclean_service::ServiceError;
use serde_json::json;

/// Exit status classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitKind {
    Usage = 1,
    Data = 2,
    Detector = 3,
}

#[derive(Debug)]
pub struct CliError {
    pub kind: ExitKind,
    /// Stable machine-readable name.
    pub code: &'static str,
    pub message: String,
}

impl CliError {
    pub fn new(kind: ExitKind, code: &'static str, message: impl Display) -> Self {
        Self {
            kind,
            code,
            message: message.to_string(),
        }
    }

    pub fn usage(message: impl Display) -> Self {
        Self::new(ExitKind::Usage, "usage", message)
    }

    pub fn data(code: &'static str, message: impl Display) -> Self {
        Self::new(ExitKind::Data, code, message)
    }

    pub fn exit_code(&self) -> i32 {
        self.kind as i32
    }

    /// The single-line JSON written to stderr.
    pub fn to_json(&self) -> String {
        json!({
            "error": {
                "code": self.code,
                "exit_code": self.exit_code(),
                "message": self.message,
            }
        })
        .to_string()
    }
}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        let code = match e {
            IoError::Io { .. } => "io",
            IoError::Parse { .. } => "parse",
        };
        CliError::data(code, e)
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        CliError::data("model", e)
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::new(ExitKind::Usage, "config", e)
    }
}

impl From<PreprocessError> for CliError {
    fn from(e: PreprocessError) -> Self {
        CliError::data("markup", e)
    }
}

impl From<ChunkError> for CliError {
    fn from(e: ChunkError) -> Self {
        CliError::data("chunk", e)
    }
}

impl From<QualityError> for CliError {
    fn from(e: QualityError) -> Self {
        CliError::data("quality", e)
    }
}

impl From<DetectorError> for CliError {
    fn from(e: DetectorError) -> Self {
        match e {
            DetectorError::InvalidSpec(_)
            | DetectorError::UnknownHeuristic(_)
            | DetectorError::GoldRequired(_) => CliError::new(ExitKind::Usage, "detector_spec", e),
            DetectorError::Lexicon { .. } => CliError::data("lexicon", e),
            _ => CliError::new(ExitKind::Detector, "detector", e),
        }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Detector { .. } => CliError::new(ExitKind::Detector, "detector", e),
            PipelineError::ScopeMismatch { .. } => {
                CliError::new(ExitKind::Usage, "detector_spec", e)
            }
            PipelineError::Chunk { .. } => CliError::data("chunk", e),
            PipelineError::Model(_) => CliError::data("model", e),
        }
    }
}

impl From<ServiceError> for CliError {
    fn from(e: ServiceError) -> Self {
        CliError::data("service", e)
    }
}
