//! Fits a language-identification probe on a frozen encoder, before and
//! after pre-training, next to a shuffled-label control.

use polyprobe::data::TaskKind;
use polyprobe::encoder::{EncoderConfig, EncoderModel};
use polyprobe::pipeline::{prepare_data, pretrained_encoder, CorpusSource, PipelineConfig};
use polyprobe::rng;
use polyprobe::training::{retrain_language_probe, ExperimentConfig, Regime};
use rand::seq::SliceRandom;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut config = PipelineConfig::new(ExperimentConfig::new(Regime::FrozenProbe, TaskKind::TokenTag));
    config.corpus = CorpusSource::Synthetic {
        n_languages: 4,
        overlap: 0.5,
        vary_word_order: true,
        concepts: Default::default(),
        task_per_language: 200,
        lid_per_language: 80,
        min_chars: 100,
    };
    config.pretrain.steps = 300;
    let data = prepare_data(&config)?;
    let lid = &data.corpora.lid;
    let k = data.corpora.n_languages;
    let probe = ExperimentConfig {
        epochs: 4,
        ..config.experiment.clone()
    };

    let encoder_config = EncoderConfig {
        vocab_size: data.vocabulary.len(),
        ..config.encoder.clone()
    };
    let random = EncoderModel::init(encoder_config, &mut rng::stream(config.seed, &[1]))?;
    let pretrained = pretrained_encoder(&config, &data)?;
    let mut shuffled = lid.clone();
    let mut langs: Vec<usize> = shuffled.train.iter().map(|e| e.language).collect();
    langs.shuffle(&mut rng::stream(config.seed, &[2]));
    for (e, l) in shuffled.train.iter_mut().zip(langs) {
        e.language = l;
    }

    println!("chance                 {:.3}", 1.0 / k as f64);
    println!("random encoder         {:.3}", retrain_language_probe(&random, lid, k, &probe)?.test_f1);
    println!("pre-trained encoder    {:.3}", retrain_language_probe(&pretrained, lid, k, &probe)?.test_f1);
    println!("shuffled-label control {:.3}", retrain_language_probe(&pretrained, &shuffled, k, &probe)?.test_f1);
    Ok(())
}
