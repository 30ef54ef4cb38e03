//! Pre-trains a small encoder with masked-token prediction and reports the
//! loss curve, then saves and reloads the checkpoint.

use polyprobe::checkpoint::Checkpoint;
use polyprobe::data::{generate_corpus, FamilyConfig, SyntheticLanguageSpec, TaskKind};
use polyprobe::encoder::{mlm_pretrain, EncoderConfig, EncoderModel, MlmConfig};
use polyprobe::params::Params;
use polyprobe::rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let specs = SyntheticLanguageSpec::family(&FamilyConfig {
        n_languages: 3,
        ..FamilyConfig::default()
    })?;
    let vocab = SyntheticLanguageSpec::vocabulary(&specs);
    let corpus = generate_corpus(&specs, 200, TaskKind::TokenTag, 1)?;
    let sequences: Vec<_> = corpus.into_iter().map(|e| e.sequence).collect();

    let config = EncoderConfig {
        d_model: 16,
        d_ff: 64,
        ..EncoderConfig::with_vocab(vocab.len())
    };
    let model = EncoderModel::init(config, &mut rng::stream(0, &[]))?;
    let mlm = MlmConfig {
        steps: 400,
        ..MlmConfig::default()
    };
    let run = mlm_pretrain(model, &sequences, &mlm)?;
    let mean = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len() as f64;
    for (i, chunk) in run.loss_curve.chunks(50).enumerate() {
        println!("steps {:4}-{:4}  masked-token loss {:.3}", i * 50, i * 50 + chunk.len(), mean(chunk));
    }

    let path = std::env::temp_dir().join("polyprobe-pretrained.json");
    Checkpoint::encoder_only(run.model.clone()).save(&path)?;
    let back = Checkpoint::load(&path)?;
    assert_eq!(back.encoder.fingerprint(), run.model.fingerprint());
    println!("saved {} (fingerprint {})", path.display(), run.model.fingerprint());
    Ok(())
}
