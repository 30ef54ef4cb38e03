//! Runs the whole pipeline for a frozen probe and for plain fine-tuning,
//! prints the delta table and exports the LID projection coloured by
//! language.

use polyprobe::data::TaskKind;
use polyprobe::pipeline::{
    compare_runs, export_plot_data, run_experiment, CorpusSource, PipelineConfig, PlotColor, PlotDataset,
};
use polyprobe::training::{ExperimentConfig, Regime};

fn config(regime: Regime, out: &std::path::Path) -> PipelineConfig {
    let experiment = ExperimentConfig {
        batch_size: 16,
        encoder_lr: 1e-3,
        epochs: 2,
        ..ExperimentConfig::new(regime, TaskKind::TokenTag)
    };
    let mut c = PipelineConfig::new(experiment);
    c.output_dir = Some(out.join(regime.name()));
    c.corpus = CorpusSource::Synthetic {
        n_languages: 3,
        overlap: 0.9,
        vary_word_order: true,
        concepts: Default::default(),
        task_per_language: 300,
        lid_per_language: 40,
        min_chars: 100,
    };
    c.pretrain.steps = 200;
    c.analysis.tsne.iterations = 300;
    c.analysis.tsne.perplexity = 10.0;
    c
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::temp_dir().join("polyprobe-pipeline");
    let frozen = run_experiment(&config(Regime::FrozenProbe, &out))?;
    let finetuned = run_experiment(&config(Regime::Finetune, &out))?;
    println!("{}", frozen.summary());
    println!("{}", finetuned.summary());
    println!("{}", compare_runs(&[frozen, finetuned.clone()])?.to_text());
    let csv = out.join("lid-languages.csv");
    let rows = export_plot_data(&finetuned, PlotColor::Languages, PlotDataset::Lid, &csv)?;
    println!("exported {rows} points to {}", csv.display());
    Ok(())
}
