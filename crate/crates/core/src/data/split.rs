use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::LabeledExample;
use crate::error::{Error, Result};
use crate::rng::{self, streams};

/// Four-way split: training, validation (epoch selection), development
/// (hyperparameter search) and test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSplit {
    pub train: Vec<LabeledExample>,
    pub val: Vec<LabeledExample>,
    pub dev: Vec<LabeledExample>,
    pub test: Vec<LabeledExample>,
}

impl CorpusSplit {
    pub fn new(examples: &[LabeledExample], fractions: [f64; 4], seed: u64) -> Result<Self> {
        let mut parts = stratified_split(examples, &fractions, seed)?.into_iter();
        let mut next = || parts.next().expect("four parts");
        Ok(CorpusSplit {
            train: next(),
            val: next(),
            dev: next(),
            test: next(),
        })
    }

    pub fn parts(&self) -> [&[LabeledExample]; 4] {
        [&self.train, &self.val, &self.dev, &self.test]
    }
}

/// Largest-remainder apportionment of `n` items over `fractions`; equal
/// remainders go to the earlier part.
fn apportion(n: usize, fractions: &[f64]) -> Vec<usize> {
    let quotas: Vec<f64> = fractions.iter().map(|f| f * n as f64).collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..fractions.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().take(n.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    counts
}

/// Splits `examples` so every part preserves the per-language proportions.
///
/// Each language's examples are shuffled with a seeded stream and cut by
/// largest-remainder counts; within a part the input order is kept.
pub fn stratified_split(
    examples: &[LabeledExample],
    fractions: &[f64],
    seed: u64,
) -> Result<Vec<Vec<LabeledExample>>> {
    if fractions.is_empty() || fractions.iter().any(|&f| !(f > 0.0)) {
        return Err(Error::invalid("split fractions must be positive"));
    }
    let total: f64 = fractions.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(format!("split fractions sum to {total}, expected 1")));
    }

    let mut by_language: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, ex) in examples.iter().enumerate() {
        by_language.entry(ex.language).or_default().push(i);
    }
    let short: Vec<String> = by_language
        .iter()
        .filter(|(_, idx)| idx.len() < fractions.len())
        .map(|(l, idx)| format!("language {l} ({} examples)", idx.len()))
        .collect();
    if !short.is_empty() {
        return Err(Error::invalid(format!(
            "fewer examples than splits ({}) for {}",
            fractions.len(),
            short.join(", ")
        )));
    }

    let mut assignment = vec![0usize; examples.len()];
    for (&language, indices) in &by_language {
        let mut shuffled = indices.clone();
        shuffled.shuffle(&mut rng::stream(seed, &[streams::SPLIT, language as u64]));
        let counts = apportion(shuffled.len(), fractions);
        let mut cursor = 0;
        for (part, &c) in counts.iter().enumerate() {
            for &i in &shuffled[cursor..cursor + c] {
                assignment[i] = part;
            }
            cursor += c;
        }
    }

    let mut parts = vec![Vec::new(); fractions.len()];
    for (ex, &part) in examples.iter().zip(&assignment) {
        parts[part].push(ex.clone());
    }
    Ok(parts)
}

/// Keeps the examples whose language is in `keep`, preserving order.
pub fn filter_language(examples: &[LabeledExample], keep: &BTreeSet<usize>) -> Vec<LabeledExample> {
    examples
        .iter()
        .filter(|ex| keep.contains(&ex.language))
        .cloned()
        .collect()
}
