use std::collections::BTreeMap;
use std::sync::Arc;

use super::{Detector, DetectorError, DetectorInput, DetectorSpec, Labels};
use crate::model::LabelSet;

/// Replays gold labels for the tokens it is shown.
#[derive(Debug, Clone)]
pub struct OracleDetector {
    spec: DetectorSpec,
    gold: Arc<BTreeMap<String, LabelSet>>,
}

impl OracleDetector {
    pub fn new(spec: DetectorSpec, gold: Arc<BTreeMap<String, LabelSet>>) -> Self {
        Self { spec, gold }
    }
}

impl Detector for OracleDetector {
    fn spec(&self) -> &DetectorSpec {
        &self.spec
    }

    fn detect(&self, input: &DetectorInput) -> Result<Labels, DetectorError> {
        input.check_cost(self.spec.max_seq)?;
        let gold = self
            .gold
            .get(&input.conv_id)
            .ok_or_else(|| DetectorError::MissingGold {
                chunk_id: input.chunk_id.clone(),
                conv_id: input.conv_id.clone(),
            })?;
        Ok(input.ids.iter().map(|&id| gold.get(id)).collect())
    }
}
