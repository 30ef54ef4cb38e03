use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analysis::TsneConfig;
use crate::data::ConceptInventory;
use crate::encoder::{EncoderConfig, MlmConfig};
use crate::error::{Error, Result};
use crate::training::ExperimentConfig;

/// Where the task and LID corpora come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "kebab-case", deny_unknown_fields)]
pub enum CorpusSource {
    /// Generated synthetic language family.
    Synthetic {
        #[serde(default = "defaults::n_languages")]
        n_languages: usize,
        #[serde(default = "defaults::overlap")]
        overlap: f64,
        #[serde(default = "defaults::yes")]
        vary_word_order: bool,
        #[serde(default)]
        concepts: ConceptInventory,
        #[serde(default = "defaults::task_per_language")]
        task_per_language: usize,
        #[serde(default = "defaults::lid_per_language")]
        lid_per_language: usize,
        #[serde(default = "defaults::min_chars")]
        min_chars: usize,
    },
    /// Task corpus (CoNLL-U for token tagging, NLI TSV for pair inference),
    /// LID paragraphs and a vocabulary file.
    Files {
        task: PathBuf,
        lid: PathBuf,
        vocabulary: PathBuf,
        /// Language codes in id order.
        languages: Vec<String>,
        /// Task label names in id order; defaults to the universal tags or
        /// the inference labels.
        #[serde(default)]
        labels: Option<Vec<String>>,
        #[serde(default = "defaults::yes")]
        filter_unknown: bool,
        #[serde(default = "defaults::min_chars")]
        min_chars: usize,
    },
}

impl Default for CorpusSource {
    fn default() -> Self {
        CorpusSource::Synthetic {
            n_languages: defaults::n_languages(),
            overlap: defaults::overlap(),
            vary_word_order: true,
            concepts: ConceptInventory::default(),
            task_per_language: defaults::task_per_language(),
            lid_per_language: defaults::lid_per_language(),
            min_chars: defaults::min_chars(),
        }
    }
}

/// Masked-language-model pre-training, or a checkpoint to start from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PretrainConfig {
    /// Load this encoder instead of pre-training one.
    pub checkpoint: Option<PathBuf>,
    pub mask_rate: f64,
    pub steps: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        let mlm = MlmConfig::default();
        PretrainConfig {
            checkpoint: None,
            mask_rate: mlm.mask_rate,
            steps: 1500,
            batch_size: mlm.batch_size,
            learning_rate: mlm.learning_rate,
            seed: mlm.seed,
        }
    }
}

impl PretrainConfig {
    pub fn mlm(&self) -> MlmConfig {
        MlmConfig {
            mask_rate: self.mask_rate,
            steps: self.steps,
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    /// Points per (label, language) cell of the task test sample.
    pub task_quota: usize,
    /// Points per language of the LID test sample.
    pub lid_quota: usize,
    pub kmeans_runs: usize,
    /// Compute t-SNE projections of both samples.
    pub projections: bool,
    pub tsne: TsneConfig,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            task_quota: 10,
            lid_quota: 100,
            kmeans_runs: 10,
            projections: true,
            tsne: TsneConfig::default(),
        }
    }
}

/// Complete description of one pipeline run, read from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    /// Seed for corpus generation, splitting, pre-training and analysis.
    #[serde(default)]
    pub seed: u64,
    /// Checkpoints, manifests and bundles are written here when set.
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub corpus: CorpusSource,
    #[serde(default = "defaults::fractions")]
    pub split_fractions: [f64; 4],
    /// `vocab_size` is filled in from the corpus vocabulary.
    #[serde(default = "defaults::encoder")]
    pub encoder: EncoderConfig,
    #[serde(default)]
    pub pretrain: PretrainConfig,
    pub experiment: ExperimentConfig,
    #[serde(default)]
    pub analysis: AnalysisConfig,
}

mod defaults {
    use crate::encoder::EncoderConfig;

    pub fn n_languages() -> usize {
        8
    }
    pub fn overlap() -> f64 {
        0.9
    }
    pub fn yes() -> bool {
        true
    }
    pub fn task_per_language() -> usize {
        10000
    }
    pub fn lid_per_language() -> usize {
        200
    }
    pub fn min_chars() -> usize {
        100
    }
    pub fn fractions() -> [f64; 4] {
        [0.7, 0.1, 0.1, 0.1]
    }
    pub fn encoder() -> EncoderConfig {
        EncoderConfig {
            d_model: 16,
            d_ff: 64,
            ..EncoderConfig::default()
        }
    }
}

impl PipelineConfig {
    pub fn new(experiment: ExperimentConfig) -> Self {
        PipelineConfig {
            seed: 0,
            output_dir: None,
            corpus: CorpusSource::default(),
            split_fractions: defaults::fractions(),
            encoder: defaults::encoder(),
            pretrain: PretrainConfig::default(),
            experiment,
            analysis: AnalysisConfig::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let c: PipelineConfig = toml::from_str(text).map_err(|e| Error::invalid(format!("config: {e}")))?;
        c.experiment.validate()?;
        Ok(c)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    /// The configuration with every default spelled out.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("pipeline config serializes")
    }

    /// Checks that referenced input files exist.
    pub fn check_inputs(&self) -> Result<()> {
        let mut paths: Vec<&Path> = Vec::new();
        if let CorpusSource::Files { task, lid, vocabulary, .. } = &self.corpus {
            paths.extend([task.as_path(), lid.as_path(), vocabulary.as_path()]);
        }
        if let Some(p) = &self.pretrain.checkpoint {
            paths.push(p);
        }
        for p in paths {
            if !p.exists() {
                return Err(Error::io(
                    p,
                    std::io::Error::new(std::io::ErrorKind::NotFound, "input file does not exist"),
                ));
            }
        }
        Ok(())
    }
}
