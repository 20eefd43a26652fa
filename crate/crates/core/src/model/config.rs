use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Where chunk boundaries may fall.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ChunkAlignment {
    /// Chunks never split a speaker turn.
    #[default]
    Turn,
    /// Chunks may start and end mid-turn.
    Token,
}

/// Constants shared by chunking, quality control and the pipelines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub chunk_target_tokens: usize,
    pub chunk_overlap_fraction: f64,
    pub chunk_alignment: ChunkAlignment,
    pub qualification_threshold: f64,
    pub std_max_seq: usize,
    pub mtd_max_seq: usize,
    pub min_annotations_per_hit: usize,
    /// Keep the words inside `((...))` uncertainty markers instead of
    /// dropping the whole group.
    pub keep_uncertain_words: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            chunk_target_tokens: 300,
            chunk_overlap_fraction: 0.5,
            chunk_alignment: ChunkAlignment::Turn,
            qualification_threshold: 0.3,
            std_max_seq: 64,
            mtd_max_seq: 512,
            min_annotations_per_hit: 2,
            keep_uncertain_words: false,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("{0} must be positive")]
    NotPositive(&'static str),
    #[error("chunk_overlap_fraction must be in (0, 1), got {0}")]
    Overlap(f64),
    #[error("qualification_threshold must be in [0, 1], got {0}")]
    Threshold(f64),
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        for (name, value) in [
            ("chunk_target_tokens", self.chunk_target_tokens),
            ("std_max_seq", self.std_max_seq),
            ("mtd_max_seq", self.mtd_max_seq),
            ("min_annotations_per_hit", self.min_annotations_per_hit),
        ] {
            if value == 0 {
                return Err(ConfigError::NotPositive(name));
            }
        }
        let f = self.chunk_overlap_fraction;
        if !(f > 0.0 && f < 1.0) {
            return Err(ConfigError::Overlap(f));
        }
        let t = self.qualification_threshold;
        if !(0.0..=1.0).contains(&t) {
            return Err(ConfigError::Threshold(t));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let cfg = PipelineConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.chunk_target_tokens, 300);
        assert_eq!(cfg.chunk_overlap_fraction, 0.5);
        assert_eq!(cfg.qualification_threshold, 0.3);
        assert_eq!(cfg.std_max_seq, 64);
        assert_eq!(cfg.mtd_max_seq, 512);
        assert_eq!(cfg.min_annotations_per_hit, 2);
    }

    #[test]
    fn invalid_values() {
        let mut cfg = PipelineConfig {
            chunk_overlap_fraction: 1.0,
            ..Default::default()
        };
        assert_eq!(cfg.validate(), Err(ConfigError::Overlap(1.0)));
        cfg.chunk_overlap_fraction = 0.5;
        cfg.qualification_threshold = 1.5;
        assert!(cfg.validate().is_err());
        cfg.qualification_threshold = 0.3;
        cfg.min_annotations_per_hit = 0;
        assert_eq!(
            cfg.validate(),
            Err(ConfigError::NotPositive("min_annotations_per_hit"))
        );
    }

    #[test]
    fn partial_json_uses_defaults() {
        let cfg: PipelineConfig = serde_json::from_str(r#"{"chunk_target_tokens":120}"#).unwrap();
        assert_eq!(cfg.chunk_target_tokens, 120);
        assert_eq!(cfg.mtd_max_seq, 512);
    }
}
