//! Pipeline configuration: flags override the config file, which overrides
//! the defaults.

use std::path::PathBuf;

use clap::Args;
use dialclean_core::model::{ChunkAlignment, PipelineConfig};
use serde::Serialize;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum AlignmentArg {
    Turn,
    Token,
}

impl From<AlignmentArg> for ChunkAlignment {
    fn from(a: AlignmentArg) -> Self {
        match a {
            AlignmentArg::Turn => ChunkAlignment::Turn,
            AlignmentArg::Token => ChunkAlignment::Token,
        }
    }
}

#[derive(Debug, Clone, Default, Args, Serialize)]
pub struct ConfigArgs {
    /// TOML file with pipeline settings (keys as in the metadata sidecar).
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, value_name = "N")]
    pub chunk_target_tokens: Option<usize>,
    #[arg(long, global = true, value_name = "F")]
    pub chunk_overlap_fraction: Option<f64>,
    #[arg(long, global = true, value_enum)]
    pub chunk_alignment: Option<AlignmentArg>,
    #[arg(long, global = true, value_name = "F")]
    pub qualification_threshold: Option<f64>,
    #[arg(long, global = true, value_name = "N")]
    pub std_max_seq: Option<usize>,
    #[arg(long, global = true, value_name = "N")]
    pub mtd_max_seq: Option<usize>,
    #[arg(long, global = true, value_name = "N")]
    pub min_annotations_per_hit: Option<usize>,
    #[arg(long, global = true, value_name = "BOOL", num_args = 0..=1, default_missing_value = "true")]
    pub keep_uncertain_words: Option<bool>,
}

impl ConfigArgs {
    pub fn resolve(&self) -> Result<PipelineConfig, CliError> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
                toml::from_str::<PipelineConfig>(&text).map_err(|e| {
                    CliError::new(
                        crate::error::ExitKind::Usage,
                        "config",
                        format!("{}: {e}", path.display()),
                    )
                })?
            }
            None => PipelineConfig::default(),
        };
        if let Some(v) = self.chunk_target_tokens {
            cfg.chunk_target_tokens = v;
        }
        if let Some(v) = self.chunk_overlap_fraction {
            cfg.chunk_overlap_fraction = v;
        }
        if let Some(v) = self.chunk_alignment {
            cfg.chunk_alignment = v.into();
        }
        if let Some(v) = self.qualification_threshold {
            cfg.qualification_threshold = v;
        }
        if let Some(v) = self.std_max_seq {
            cfg.std_max_seq = v;
        }
        if let Some(v) = self.mtd_max_seq {
            cfg.mtd_max_seq = v;
        }
        if let Some(v) = self.min_annotations_per_hit {
            cfg.min_annotations_per_hit = v;
        }
        if let Some(v) = self.keep_uncertain_words {
            cfg.keep_uncertain_words = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}
