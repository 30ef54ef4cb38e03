//! Config-driven orchestration: corpora, pre-training, regime training,
//! language probing and analysis, collected into a versioned results bundle.

mod bundle;
mod config;
mod run;

pub use bundle::{
    compare_runs, export_plot_data, Delta, DeltaRow, DeltaTable, Metric, PlotColor, PlotDataset, ResultsBundle,
    TracedClusterReport, BUNDLE_SCHEMA_VERSION,
};
pub use config::{AnalysisConfig, CorpusSource, PipelineConfig, PretrainConfig};
pub use run::{analyze, prepare_data, pretrained_encoder, run_experiment, run_metrics, AnalysisOutput, PreparedData};
