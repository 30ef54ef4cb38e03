use rand::seq::IndexedRandom;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Regime, SearchGrid};
use super::regimes::{evaluate, train, Corpora, Target};
use crate::encoder::EncoderModel;
use crate::error::{Error, Result};
use crate::rng::{self, streams};

/// One evaluated sample of the search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    /// Position in the sample sequence.
    pub sample: usize,
    pub config: ExperimentConfig,
    /// Pivot-language task macro F1 on the development split.
    pub dev_score: f64,
}

fn pick<T: Copy>(values: &[T], name: &str, rng: &mut rng::Rng) -> Result<T> {
    values
        .choose(rng)
        .copied()
        .ok_or_else(|| Error::invalid(format!("search grid for {name} is empty")))
}

/// Draws `n` configurations uniformly with replacement from the grid. Fields
/// the base regime does not use keep their base values.
pub fn sample_configs(base: &ExperimentConfig, grid: &SearchGrid, n: usize, seed: u64) -> Result<Vec<ExperimentConfig>> {
    if n < 1 {
        return Err(Error::invalid("random search needs at least one sample"));
    }
    (0..n)
        .map(|i| {
            let mut r = rng::stream(seed, &[streams::SEARCH, i as u64]);
            let mut c = base.clone();
            c.init_std = pick(&grid.init_std, "init_std", &mut r)?;
            c.batch_size = pick(&grid.batch_size, "batch_size", &mut r)?;
            c.head_lr = pick(&grid.head_lr, "head_lr", &mut r)?;
            if base.regime.trains_encoder() {
                c.encoder_lr = pick(&grid.encoder_lr, "encoder_lr", &mut r)?;
            }
            c.regime = match base.regime {
                Regime::GradReversal { .. } => Regime::GradReversal {
                    lambda: pick(&grid.lambda, "lambda", &mut r)?,
                },
                Regime::EntropyMax { term, .. } => Regime::EntropyMax {
                    w: pick(&grid.w, "w", &mut r)?,
                    term,
                },
                other => other,
            };
            c.validate()?;
            Ok(c)
        })
        .collect()
}

/// Trains every sampled configuration and ranks them by the task head's
/// development score, best first (earlier sample first on ties).
pub fn random_search(
    encoder: &EncoderModel,
    corpora: &Corpora,
    base: &ExperimentConfig,
    grid: &SearchGrid,
    n_samples: usize,
    seed: u64,
) -> Result<Vec<SearchResult>> {
    let dev: Vec<_> = corpora.task.dev.iter().filter(|e| e.language == base.pivot).cloned().collect();
    if dev.is_empty() {
        return Err(Error::invalid("pivot-language development data is empty"));
    }
    let mut results = Vec::with_capacity(n_samples);
    for (sample, config) in sample_configs(base, grid, n_samples, seed)?.into_iter().enumerate() {
        let run = train(encoder, corpora, &config)?;
        let head = run.checkpoint.task_head.as_ref().expect("task head trained");
        let dev_score = evaluate(&run.checkpoint.encoder, head, &dev, Target::Task, corpora.n_task_classes)?;
        results.push(SearchResult {
            sample,
            config,
            dev_score,
        });
    }
    results.sort_by(|a, b| b.dev_score.total_cmp(&a.dev_score).then(a.sample.cmp(&b.sample)));
    Ok(results)
}
