use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::ExperimentConfig;
use super::regimes::TrainingRun;
use crate::params::Params;

/// Self-describing record of one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    /// Hash of every other field.
    pub id: String,
    pub config: ExperimentConfig,
    pub seed: u64,
    pub val_scores: Vec<f64>,
    pub selected_epoch: usize,
    pub language_probe_val_scores: Vec<f64>,
    pub language_probe_selected_epoch: usize,
    pub language_probe_test_f1: f64,
    /// Fingerprint of the encoder the run started from.
    pub initial_encoder: String,
    /// Fingerprint of the selected encoder.
    pub final_encoder: String,
    pub checkpoint_path: Option<String>,
}

impl RunManifest {
    pub fn new(run: &TrainingRun, initial_encoder: String, checkpoint_path: Option<String>) -> Self {
        let mut m = RunManifest {
            id: String::new(),
            config: run.config.clone(),
            seed: run.config.seed,
            val_scores: run.val_scores.clone(),
            selected_epoch: run.selected_epoch,
            language_probe_val_scores: run.language_probe.val_scores.clone(),
            language_probe_selected_epoch: run.language_probe.selected_epoch,
            language_probe_test_f1: run.language_probe.test_f1,
            initial_encoder,
            final_encoder: run.checkpoint.encoder.fingerprint(),
            checkpoint_path,
        };
        m.id = m.compute_id();
        m
    }

    fn compute_id(&self) -> String {
        let mut copy = self.clone();
        copy.id.clear();
        let json = serde_json::to_string(&copy).expect("manifest serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }

    /// True when `id` matches the content.
    pub fn verify(&self) -> bool {
        self.id == self.compute_id()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }
}
