//! Generates a small synthetic language family, prints a few sentences per
//! language and writes the corpus files to a temporary directory.

use polyprobe::data::{generate_corpus, FamilyConfig, SyntheticLanguageSpec, TaskKind};
use polyprobe::pipeline::{prepare_data, CorpusSource, PipelineConfig};
use polyprobe::training::{ExperimentConfig, Regime};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let specs = SyntheticLanguageSpec::family(&FamilyConfig {
        n_languages: 3,
        ..FamilyConfig::default()
    })?;
    let vocab = SyntheticLanguageSpec::vocabulary(&specs);
    let tags = SyntheticLanguageSpec::tag_set();
    let corpus = generate_corpus(&specs, 2, TaskKind::TokenTag, 7)?;
    for ex in &corpus {
        let words = vocab.decode(ex.sequence.tokens());
        let labels: Vec<&str> = ex.task_targets().iter().map(|&(_, t)| tags.name(t).unwrap()).collect();
        println!("[{}] {}", specs[ex.language].language, words.join(" "));
        println!("     {}", labels.join(" "));
    }

    let mut config = PipelineConfig::new(ExperimentConfig::new(Regime::FrozenProbe, TaskKind::TokenTag));
    config.corpus = CorpusSource::Synthetic {
        n_languages: 3,
        overlap: 0.5,
        vary_word_order: true,
        concepts: Default::default(),
        task_per_language: 50,
        lid_per_language: 20,
        min_chars: 100,
    };
    let data = prepare_data(&config)?;
    let dir = std::env::temp_dir().join("polyprobe-gen-corpus");
    std::fs::create_dir_all(&dir)?;
    for path in data.write_files(&dir, TaskKind::TokenTag)? {
        println!("wrote {}", path.display());
    }
    let c = &data.corpora;
    println!(
        "task split {}/{}/{}/{}, lid split {}/{}/{}/{}",
        c.task.train.len(),
        c.task.val.len(),
        c.task.dev.len(),
        c.task.test.len(),
        c.lid.train.len(),
        c.lid.val.len(),
        c.lid.dev.len(),
        c.lid.test.len()
    );
    Ok(())
}
