//! Random hyperparameter search for gradient reversal, ranked by pivot
//! development F1.

use polyprobe::data::TaskKind;
use polyprobe::pipeline::{prepare_data, pretrained_encoder, CorpusSource, PipelineConfig};
use polyprobe::training::{random_search, ExperimentConfig, Regime, SearchGrid};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let base = ExperimentConfig {
        epochs: 1,
        ..ExperimentConfig::new(Regime::GradReversal { lambda: 0.1 }, TaskKind::TokenTag)
    };
    let mut config = PipelineConfig::new(base.clone());
    config.corpus = CorpusSource::Synthetic {
        n_languages: 3,
        overlap: 0.9,
        vary_word_order: true,
        concepts: Default::default(),
        task_per_language: 200,
        lid_per_language: 40,
        min_chars: 100,
    };
    config.pretrain.steps = 200;
    let data = prepare_data(&config)?;
    let encoder = pretrained_encoder(&config, &data)?;
    let results = random_search(&encoder, &data.corpora, &base, &SearchGrid::default(), 6, 0)?;
    for r in &results {
        let Regime::GradReversal { lambda } = r.config.regime else { unreachable!() };
        println!(
            "sample {} dev F1 {:.3} | init {:e} batch {} head lr {:e} encoder lr {:e} lambda {}",
            r.sample, r.dev_score, r.config.init_std, r.config.batch_size, r.config.head_lr, r.config.encoder_lr, lambda
        );
    }
    Ok(())
}
