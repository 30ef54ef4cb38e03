//! Trains each fine-tuning regime from the same pre-trained encoder and
//! prints its task and language-identification scores.
//!
//! `cargo run --release --example train_regimes [frozen-probe|finetune|grad-reversal|entropy-max]`

use polyprobe::data::TaskKind;
use polyprobe::heads::LanguageTerm;
use polyprobe::pipeline::{prepare_data, pretrained_encoder, run_metrics, CorpusSource, PipelineConfig};
use polyprobe::training::{train, ExperimentConfig, PhaseKind, Regime};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let only = std::env::args().nth(1);
    let mut config = PipelineConfig::new(ExperimentConfig::new(Regime::FrozenProbe, TaskKind::TokenTag));
    config.corpus = CorpusSource::Synthetic {
        n_languages: 3,
        overlap: 0.9,
        vary_word_order: true,
        concepts: Default::default(),
        task_per_language: 400,
        lid_per_language: 60,
        min_chars: 100,
    };
    config.pretrain.steps = 300;
    let data = prepare_data(&config)?;
    let encoder = pretrained_encoder(&config, &data)?;

    let regimes = [
        Regime::FrozenProbe,
        Regime::Finetune,
        Regime::GradReversal { lambda: 0.1 },
        Regime::EntropyMax {
            w: 0.5,
            term: LanguageTerm::SumNegLog,
        },
    ];
    for regime in regimes {
        if only.as_deref().is_some_and(|o| o != regime.name()) {
            continue;
        }
        let experiment = ExperimentConfig {
            batch_size: 16,
            encoder_lr: 1e-3,
            epochs: 2,
            ..ExperimentConfig::new(regime, TaskKind::TokenTag)
        };
        let run = train(&encoder, &data.corpora, &experiment)?;
        let m = run_metrics(&run, &data)?;
        let joint_steps: usize = run
            .phases
            .iter()
            .filter(|p| p.kind == PhaseKind::Joint)
            .map(|p| p.steps.1 - p.steps.0)
            .sum();
        println!(
            "{:13} epoch {} | pivot val {:.3} | task F1 {:.3} (cross-lingual {:.3}) | LID on task data {:.3} | joint steps {}",
            regime.name(),
            run.selected_epoch,
            run.val_scores[run.selected_epoch],
            m["task_f1/overall"],
            m["task_f1/cross_lingual"],
            m["lid_f1/task_test"],
            joint_steps
        );
    }
    Ok(())
}
