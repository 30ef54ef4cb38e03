use ndarray::{Array1, Array2};
use rand::seq::IndexedRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::model::EncoderModel;
use crate::data::{TokenSequence, Vocabulary, MASK};
use crate::error::{Error, Result};
use crate::heads::argmax;
use crate::nn;
use crate::params::Params;
use crate::rng::{self, streams, Rng};
use crate::training::adam::{adam_step, AdamState};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MlmConfig {
    pub mask_rate: f64,
    pub steps: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for MlmConfig {
    fn default() -> Self {
        MlmConfig {
            mask_rate: 0.15,
            steps: 3000,
            batch_size: 16,
            learning_rate: 1e-3,
            seed: 0,
        }
    }
}

/// Result of masked-token pre-training.
#[derive(Debug, Clone)]
pub struct MlmRun {
    pub model: EncoderModel,
    /// Mean masked-token cross-entropy of every step's minibatch.
    pub loss_curve: Vec<f64>,
}

/// Masked-token loss for one corrupted sequence. Adds parameter gradients
/// scaled by `scale` to `grads` and returns the summed loss.
fn masked_loss(
    model: &EncoderModel,
    input: &[u32],
    targets: &[(usize, u32)],
    scale: f64,
    dropout: Option<&mut Rng>,
    grads: &mut EncoderModel,
) -> Result<f64> {
    let (out, tape) = model.forward(input, dropout)?;
    let mut d_out = Array2::zeros(out.dim());
    let mut loss = 0.0;
    for &(pos, target) in targets {
        let h = out.row(pos);
        let logits = model.token_embedding.dot(&h) + &model.mlm_bias;
        let logp = nn::log_softmax(logits.view());
        loss -= logp[target as usize];
        let mut d_logits: Array1<f64> = logp.mapv(f64::exp);
        d_logits[target as usize] -= 1.0;
        d_logits *= scale;
        d_out.row_mut(pos).assign(&d_logits.dot(&model.token_embedding));
        for (v, &dl) in d_logits.iter().enumerate() {
            if dl != 0.0 {
                grads.token_embedding.row_mut(v).scaled_add(dl, &h);
            }
        }
        grads.mlm_bias += &d_logits;
    }
    model.backward(tape, &d_out, grads)?;
    Ok(loss)
}

/// Corrupts a sequence: each non-special token is selected with probability
/// `rate` (at least one is always selected), then replaced by the mask id 80%
/// of the time, by a random word 10% of the time, and left unchanged otherwise.
fn corrupt(tokens: &[u32], rate: f64, vocab_size: usize, rng: &mut Rng) -> (Vec<u32>, Vec<(usize, u32)>) {
    let candidates: Vec<usize> = (0..tokens.len()).filter(|&i| !Vocabulary::is_special(tokens[i])).collect();
    let mut chosen: Vec<usize> = candidates.iter().copied().filter(|_| rng.random::<f64>() < rate).collect();
    if chosen.is_empty() {
        if let Some(&i) = candidates.choose(rng) {
            chosen.push(i);
        }
    }
    let mut input = tokens.to_vec();
    let n_special = Vocabulary::n_special() as u32;
    for &i in &chosen {
        let r: f64 = rng.random();
        if r < 0.8 {
            input[i] = MASK;
        } else if r < 0.9 && vocab_size as u32 > n_special {
            input[i] = rng.random_range(n_special..vocab_size as u32);
        }
    }
    let targets = chosen.into_iter().map(|i| (i, tokens[i])).collect();
    (input, targets)
}

/// Pre-trains the encoder by masked-token prediction through an output
/// projection tied to the token embedding table.
pub fn mlm_pretrain(mut model: EncoderModel, corpus: &[TokenSequence], config: &MlmConfig) -> Result<MlmRun> {
    if !(config.mask_rate > 0.0 && config.mask_rate < 1.0) {
        return Err(Error::invalid(format!("mask rate must lie in (0, 1), got {}", config.mask_rate)));
    }
    let usable: Vec<&TokenSequence> = corpus
        .iter()
        .filter(|s| s.tokens().iter().any(|&t| !Vocabulary::is_special(t)))
        .collect();
    if usable.is_empty() {
        return Err(Error::invalid("pre-training corpus has no maskable tokens"));
    }
    if config.batch_size == 0 {
        return Err(Error::invalid("batch size must be at least 1"));
    }
    let mut adam = AdamState::new(&model);
    let mut grads = model.zeros_like();
    let mut loss_curve = Vec::with_capacity(config.steps);
    for step in 0..config.steps {
        let mut rng = rng::stream(config.seed, &[streams::MLM, step as u64]);
        grads.fill_zero();
        let mut batch = Vec::with_capacity(config.batch_size);
        for _ in 0..config.batch_size {
            let seq = usable[rng.random_range(0..usable.len())];
            batch.push(corrupt(seq.tokens(), config.mask_rate, model.config.vocab_size, &mut rng));
        }
        let n_targets: usize = batch.iter().map(|(_, t)| t.len()).sum();
        let scale = 1.0 / n_targets as f64;
        let mut loss = 0.0;
        for (input, targets) in &batch {
            loss += masked_loss(&model, input, targets, scale, Some(&mut rng), &mut grads)?;
        }
        let loss = loss * scale;
        if !loss.is_finite() {
            return Err(Error::Diverged(format!("masked-token loss became {loss} at step {step}")));
        }
        loss_curve.push(loss);
        adam_step(&mut model, &grads, &mut adam, config.learning_rate)
            .map_err(|e| Error::Diverged(format!("step {step}: {e}")))?;
    }
    Ok(MlmRun { model, loss_curve })
}

/// Fraction of non-special tokens recovered when each one is masked in turn
/// (dropout off).
pub fn masked_token_accuracy(model: &EncoderModel, sequences: &[TokenSequence]) -> Result<f64> {
    let (mut hits, mut total) = (0usize, 0usize);
    for seq in sequences {
        for (i, &t) in seq.tokens().iter().enumerate() {
            if Vocabulary::is_special(t) {
                continue;
            }
            let mut input = seq.tokens().to_vec();
            input[i] = MASK;
            let out = model.encode(&input)?;
            let logits = model.token_embedding.dot(&out.row(i)) + &model.mlm_bias;
            hits += usize::from(argmax(logits.view()) == t as usize);
            total += 1;
        }
    }
    if total == 0 {
        return Err(Error::invalid("no maskable tokens"));
    }
    Ok(hits as f64 / total as f64)
}

/// Mean masked-token loss over a fixed evaluation draw of masks.
pub fn mlm_eval_loss(model: &EncoderModel, sequences: &[TokenSequence], mask_rate: f64, seed: u64) -> Result<f64> {
    let mut rng = rng::stream(seed, &[streams::MLM, u64::MAX]);
    let mut scratch = model.zeros_like();
    let (mut loss, mut n) = (0.0, 0usize);
    for seq in sequences {
        if seq.tokens().iter().all(|&t| Vocabulary::is_special(t)) {
            continue;
        }
        let (input, targets) = corrupt(seq.tokens(), mask_rate, model.config.vocab_size, &mut rng);
        loss += masked_loss(model, &input, &targets, 0.0, None, &mut scratch)?;
        n += targets.len();
    }
    if n == 0 {
        return Err(Error::invalid("no maskable tokens"));
    }
    Ok(loss / n as f64)
}
