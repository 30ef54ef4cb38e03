//! Training regimes, optimizer, epoch selection and hyperparameter search.

pub mod adam;
mod config;
mod manifest;
mod regimes;
mod search;

pub use adam::{adam_step, AdamState};
pub use config::{ExperimentConfig, Regime, SearchGrid, PRESETS};
pub use manifest::RunManifest;
pub use regimes::{
    evaluate, predict, retrain_language_probe, select_epoch, train, train_entropy_max, train_finetune,
    train_frozen_probe, train_grad_reversal, Corpora, PhaseKind, PhaseRecord, ProbeRun, Target, TrainingRun,
};
pub use search::{random_search, sample_configs, SearchResult};
