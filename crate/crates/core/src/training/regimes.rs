use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::adam::{adam_step, AdamState};
use super::config::{ExperimentConfig, Regime};
use crate::analysis::macro_f1;
use crate::checkpoint::Checkpoint;
use crate::data::{CorpusSplit, Granularity, LabeledExample};
use crate::encoder::EncoderModel;
use crate::error::{Error, Result};
use crate::heads::{argmax, cross_entropy_logits, language_term, language_term_logit_grad, ClassifierHead, LanguageTerm};
use crate::nn;
use crate::params::Params;
use crate::rng::{self, streams, Rng};

/// Task and language-identification data for one experiment.
#[derive(Debug, Clone)]
pub struct Corpora {
    pub task: CorpusSplit,
    pub lid: CorpusSplit,
    pub n_task_classes: usize,
    pub n_languages: usize,
}

/// Which labels of an example a head is trained on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    Task,
    Language(Granularity),
}

impl Target {
    pub fn of(self, ex: &LabeledExample) -> Vec<(usize, usize)> {
        match self {
            Target::Task => ex.task_targets(),
            Target::Language(g) => ex.language_targets(g),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhaseKind {
    /// Task head only, on frozen encoder features.
    TaskProbe,
    /// Encoder and task head together.
    Joint,
    /// Language head only, on frozen encoder features.
    LanguageProbe,
}

/// One epoch of one phase; `steps` index the trace that phase writes to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseRecord {
    pub kind: PhaseKind,
    pub epoch: usize,
    pub steps: (usize, usize),
}

/// A language head trained from scratch on a frozen encoder.
#[derive(Debug, Clone)]
pub struct ProbeRun {
    pub head: ClassifierHead,
    pub val_scores: Vec<f64>,
    pub selected_epoch: usize,
    /// Macro F1 on the held-out LID test split.
    pub test_f1: f64,
    pub loss_trace: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainingRun {
    pub config: ExperimentConfig,
    /// Pivot-language task validation macro F1 after each epoch.
    pub val_scores: Vec<f64>,
    pub selected_epoch: usize,
    /// Encoder and task head from the selected epoch, with the retrained
    /// language probe as language head.
    pub checkpoint: Checkpoint,
    /// Mean task loss of every encoder or task-head step.
    pub task_loss: Vec<f64>,
    /// Per-step language objective during joint steps: the adversary's
    /// cross-entropy under gradient reversal, the confusion term under
    /// entropy maximisation.
    pub language_loss: Vec<f64>,
    /// Mean cross-entropy of language-head steps taken during training.
    pub language_head_loss: Vec<f64>,
    pub phases: Vec<PhaseRecord>,
    pub language_probe: ProbeRun,
}

/// Index of the best score, earliest on ties.
pub fn select_epoch(scores: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &s) in scores.iter().enumerate() {
        if best.is_none_or(|b| s > scores[b]) {
            best = Some(i);
        }
    }
    best
}

/// Encoder rows at the target positions, one row per target.
struct Feature {
    rows: Array2<f64>,
    labels: Vec<usize>,
}

fn extract(encoder: &EncoderModel, examples: &[LabeledExample], target: Target) -> Result<Vec<Feature>> {
    let mut out = Vec::with_capacity(examples.len());
    for ex in examples {
        let t = target.of(ex);
        if t.is_empty() {
            continue;
        }
        let enc = encoder.encode(ex.sequence.tokens())?;
        let positions: Vec<usize> = t.iter().map(|&(p, _)| p).collect();
        out.push(Feature {
            rows: enc.select(Axis(0), &positions),
            labels: t.into_iter().map(|(_, c)| c).collect(),
        });
    }
    Ok(out)
}

fn score_features(head: &ClassifierHead, features: &[Feature], n_classes: usize) -> Result<f64> {
    let (mut preds, mut golds) = (Vec::new(), Vec::new());
    for f in features {
        let logits = head.logits_rows(&f.rows)?;
        preds.extend(logits.axis_iter(Axis(0)).map(argmax));
        golds.extend_from_slice(&f.labels);
    }
    macro_f1(&preds, &golds, n_classes)
}

/// Predicted and gold classes for every target of every example (dropout off).
pub fn predict(
    encoder: &EncoderModel,
    head: &ClassifierHead,
    examples: &[LabeledExample],
    target: Target,
) -> Result<(Vec<usize>, Vec<usize>)> {
    let features = extract(encoder, examples, target)?;
    let (mut preds, mut golds) = (Vec::new(), Vec::new());
    for f in &features {
        let logits = head.logits_rows(&f.rows)?;
        preds.extend(logits.axis_iter(Axis(0)).map(argmax));
        golds.extend_from_slice(&f.labels);
    }
    Ok((preds, golds))
}

/// Macro F1 of `head` on `examples`.
pub fn evaluate(
    encoder: &EncoderModel,
    head: &ClassifierHead,
    examples: &[LabeledExample],
    target: Target,
    n_classes: usize,
) -> Result<f64> {
    let (p, g) = predict(encoder, head, examples, target)?;
    macro_f1(&p, &g, n_classes)
}

fn output_mask(rows: usize, d: usize, rate: f64, rng: &mut Rng) -> Option<Array2<f64>> {
    (rate > 0.0).then(|| nn::dropout_mask(rows, d, rate, rng))
}

/// Softmax cross-entropy over rows. Adds `scale`-weighted head gradients to
/// `grads` and returns the summed loss with the `scale`-weighted gradient
/// with respect to `rows`.
fn head_rows_loss(
    head: &ClassifierHead,
    grads: &mut ClassifierHead,
    rows: &Array2<f64>,
    labels: &[usize],
    scale: f64,
) -> Result<(f64, Array2<f64>)> {
    let logits = head.logits_rows(rows)?;
    let mut d_logits = Array2::zeros(logits.dim());
    let mut loss = 0.0;
    for (i, &y) in labels.iter().enumerate() {
        let (l, g) = cross_entropy_logits(logits.row(i), y)?;
        loss += l;
        d_logits.row_mut(i).assign(&(g * scale));
    }
    grads.weight += &rows.t().dot(&d_logits);
    grads.bias += &d_logits.sum_axis(Axis(0));
    Ok((loss, d_logits.dot(&head.weight.t())))
}

struct HeadTrainer {
    lr: f64,
    batch_size: usize,
    dropout: f64,
    seed: u64,
    tag: u64,
}

impl HeadTrainer {
    /// One epoch of head-only training on frozen features. Returns the mean
    /// loss of every step.
    fn epoch(
        &self,
        head: &mut ClassifierHead,
        adam: &mut AdamState<ClassifierHead>,
        features: &[Feature],
        epoch: usize,
    ) -> Result<Vec<f64>> {
        let mut order: Vec<usize> = (0..features.len()).collect();
        order.shuffle(&mut rng::stream(self.seed, &[streams::PROBE, self.tag, epoch as u64]));
        let mut grads = head.clone();
        let mut trace = Vec::new();
        for (step, batch) in order.chunks(self.batch_size).enumerate() {
            grads.fill_zero();
            let n: usize = batch.iter().map(|&i| features[i].labels.len()).sum();
            let scale = 1.0 / n as f64;
            let mut loss = 0.0;
            for (k, &i) in batch.iter().enumerate() {
                let f = &features[i];
                let mut r = rng::stream(self.seed, &[streams::PROBE, self.tag, epoch as u64, step as u64, k as u64]);
                let mut rows = f.rows.clone();
                let mask = output_mask(rows.nrows(), rows.ncols(), self.dropout, &mut r);
                nn::apply_mask(&mut rows, &mask);
                loss += head_rows_loss(head, &mut grads, &rows, &f.labels, scale)?.0;
            }
            let loss = loss * scale;
            if !loss.is_finite() {
                return Err(Error::Diverged(format!("head loss became {loss} in epoch {epoch}")));
            }
            trace.push(loss);
            adam_step(head, &grads, adam, self.lr)?;
        }
        Ok(trace)
    }

    /// Trains a fresh head with best-epoch selection on validation features.
    #[allow(clippy::too_many_arguments)]
    fn fit(
        &self,
        mut head: ClassifierHead,
        train: &[Feature],
        val: &[Feature],
        n_classes: usize,
        epochs: usize,
    ) -> Result<(ClassifierHead, Vec<f64>, usize, Vec<f64>)> {
        let mut adam = AdamState::new(&head);
        let mut scores = Vec::with_capacity(epochs);
        let mut trace = Vec::new();
        let mut best = head.clone();
        for epoch in 0..epochs {
            trace.extend(self.epoch(&mut head, &mut adam, train, epoch)?);
            let s = score_features(&head, val, n_classes)?;
            if scores.iter().all(|&b| s > b) {
                best = head.clone();
            }
            scores.push(s);
        }
        let selected = select_epoch(&scores).expect("at least one epoch");
        Ok((best, scores, selected, trace))
    }
}

fn nonempty(name: &str, examples: &[LabeledExample]) -> Result<()> {
    if examples.is_empty() {
        return Err(Error::invalid(format!("{name} is empty")));
    }
    Ok(())
}

fn pivot_only(examples: &[LabeledExample], pivot: usize) -> Vec<LabeledExample> {
    examples.iter().filter(|e| e.language == pivot).cloned().collect()
}

const TASK_TAG: u64 = 0;
const LANGUAGE_TAG: u64 = 1;
const PHASE_TAG: u64 = 2;

/// Trains a fresh language head on a frozen encoder, selecting the epoch by
/// LID validation F1 and reporting F1 on the LID test split.
pub fn retrain_language_probe(
    encoder: &EncoderModel,
    lid: &CorpusSplit,
    n_languages: usize,
    config: &ExperimentConfig,
) -> Result<ProbeRun> {
    config.validate()?;
    nonempty("LID training data", &lid.train)?;
    nonempty("LID validation data", &lid.val)?;
    nonempty("LID test data", &lid.test)?;
    let target = Target::Language(config.granularity());
    let train = extract(encoder, &lid.train, target)?;
    let val = extract(encoder, &lid.val, target)?;
    let test = extract(encoder, &lid.test, target)?;
    let head = ClassifierHead::init(
        encoder.d_model(),
        n_languages,
        config.init_std,
        &mut rng::stream(config.seed, &[streams::INIT, LANGUAGE_TAG]),
    )?;
    let trainer = HeadTrainer {
        lr: config.head_lr,
        batch_size: config.batch_size,
        dropout: config.output_dropout,
        seed: config.seed,
        tag: LANGUAGE_TAG,
    };
    let (head, val_scores, selected_epoch, loss_trace) = trainer.fit(head, &train, &val, n_languages, config.epochs)?;
    let test_f1 = score_features(&head, &test, n_languages)?;
    Ok(ProbeRun {
        head,
        val_scores,
        selected_epoch,
        test_f1,
        loss_trace,
    })
}

fn check_corpora(corpora: &Corpora, config: &ExperimentConfig) -> Result<(Vec<LabeledExample>, Vec<LabeledExample>)> {
    config.validate()?;
    if config.pivot >= corpora.n_languages {
        return Err(Error::invalid(format!(
            "pivot language {} outside {} languages",
            config.pivot, corpora.n_languages
        )));
    }
    let train = pivot_only(&corpora.task.train, config.pivot);
    let val = pivot_only(&corpora.task.val, config.pivot);
    nonempty("pivot-language task training data", &train)?;
    nonempty("pivot-language task validation data", &val)?;
    nonempty("LID training data", &corpora.lid.train)?;
    Ok((train, val))
}

fn task_head_init(encoder: &EncoderModel, corpora: &Corpora, config: &ExperimentConfig) -> Result<ClassifierHead> {
    ClassifierHead::init(
        encoder.d_model(),
        corpora.n_task_classes,
        config.init_std,
        &mut rng::stream(config.seed, &[streams::INIT, TASK_TAG]),
    )
}

/// Trains the task head and a language probe on an unmodified encoder.
pub fn train_frozen_probe(encoder: &EncoderModel, corpora: &Corpora, config: &ExperimentConfig) -> Result<TrainingRun> {
    let (train, val) = check_corpora(corpora, config)?;
    let train_f = extract(encoder, &train, Target::Task)?;
    let val_f = extract(encoder, &val, Target::Task)?;
    let trainer = HeadTrainer {
        lr: config.head_lr,
        batch_size: config.batch_size,
        dropout: config.output_dropout,
        seed: config.seed,
        tag: TASK_TAG,
    };
    let head = task_head_init(encoder, corpora, config)?;
    let (task_head, val_scores, selected_epoch, task_loss) =
        trainer.fit(head, &train_f, &val_f, corpora.n_task_classes, config.epochs)?;
    let steps_per_epoch = task_loss.len() / config.epochs;
    let phases = (0..config.epochs)
        .map(|e| PhaseRecord {
            kind: PhaseKind::TaskProbe,
            epoch: e,
            steps: (e * steps_per_epoch, (e + 1) * steps_per_epoch),
        })
        .collect();
    let language_probe = retrain_language_probe(encoder, &corpora.lid, corpora.n_languages, config)?;
    Ok(TrainingRun {
        config: config.clone(),
        val_scores,
        selected_epoch,
        checkpoint: Checkpoint {
            encoder: encoder.clone(),
            task_head: Some(task_head),
            language_head: Some(language_probe.head.clone()),
        },
        task_loss,
        language_loss: Vec::new(),
        language_head_loss: Vec::new(),
        phases,
        language_probe,
    })
}

/// What the language side contributes to a joint step.
enum LanguageSide<'a> {
    None,
    /// Adversarial language head behind a gradient-reversal layer, fed its
    /// own LID minibatch.
    Reversal {
        lambda: f64,
        lid: &'a [LabeledExample],
        granularity: Granularity,
    },
    /// Frozen language head whose confusion term is added to the task loss.
    Confusion { w: f64, term: LanguageTerm },
}

/// Mutable state of a run that updates the encoder.
struct JointState {
    encoder: EncoderModel,
    task_head: ClassifierHead,
    language_head: ClassifierHead,
    adam_encoder: AdamState<EncoderModel>,
    adam_task: AdamState<ClassifierHead>,
    adam_language: AdamState<ClassifierHead>,
    task_loss: Vec<f64>,
    language_loss: Vec<f64>,
}

/// Rotating LID minibatch source for gradient reversal.
struct LidCursor {
    order: Vec<usize>,
    pos: usize,
    wraps: u64,
    seed: u64,
}

impl LidCursor {
    fn new(n: usize, seed: u64) -> Self {
        let mut c = LidCursor {
            order: (0..n).collect(),
            pos: 0,
            wraps: 0,
            seed,
        };
        c.reshuffle();
        c
    }

    fn reshuffle(&mut self) {
        self.order.sort_unstable();
        self.order.shuffle(&mut rng::stream(self.seed, &[streams::LID_ORDER, self.wraps]));
    }

    fn next(&mut self) -> usize {
        if self.pos == self.order.len() {
            self.wraps += 1;
            self.pos = 0;
            self.reshuffle();
        }
        self.pos += 1;
        self.order[self.pos - 1]
    }
}

impl JointState {
    fn new(encoder: &EncoderModel, task_head: ClassifierHead, language_head: ClassifierHead) -> Self {
        JointState {
            adam_encoder: AdamState::new(encoder),
            adam_task: AdamState::new(&task_head),
            adam_language: AdamState::new(&language_head),
            encoder: encoder.clone(),
            task_head,
            language_head,
            task_loss: Vec::new(),
            language_loss: Vec::new(),
        }
    }

    /// One epoch over the pivot task data updating encoder and task head.
    fn epoch(
        &mut self,
        train: &[LabeledExample],
        config: &ExperimentConfig,
        epoch: usize,
        side: &LanguageSide,
        cursor: &mut Option<LidCursor>,
    ) -> Result<()> {
        let d = self.encoder.d_model();
        let seed = config.seed;
        let mut order: Vec<usize> = (0..train.len()).collect();
        order.shuffle(&mut rng::stream(seed, &[streams::TASK_ORDER, epoch as u64]));
        let mut g_enc = self.encoder.zeros_like();
        let mut g_task = self.task_head.clone();
        let mut g_lang = self.language_head.clone();
        let w = match side {
            LanguageSide::Confusion { w, .. } => *w,
            _ => 0.0,
        };
        for (step, batch) in order.chunks(config.batch_size).enumerate() {
            g_enc.fill_zero();
            g_task.fill_zero();
            g_lang.fill_zero();
            let n: usize = batch.iter().map(|&i| train[i].task_targets().len()).sum();
            if n == 0 {
                continue;
            }
            let scale = 1.0 / n as f64;
            let task_scale = (1.0 - w) * scale;
            let (mut task_loss, mut lang_term) = (0.0, 0.0);
            for (k, &i) in batch.iter().enumerate() {
                let ex = &train[i];
                let targets = ex.task_targets();
                let mut r = rng::stream(seed, &[streams::TASK_DROPOUT, epoch as u64, step as u64, k as u64]);
                let (out, tape) = self.encoder.forward(ex.sequence.tokens(), Some(&mut r))?;
                let positions: Vec<usize> = targets.iter().map(|&(p, _)| p).collect();
                let labels: Vec<usize> = targets.iter().map(|&(_, c)| c).collect();
                let mask = output_mask(positions.len(), d, config.output_dropout, &mut r);
                let mut rows = out.select(Axis(0), &positions);
                nn::apply_mask(&mut rows, &mask);
                let (l, mut d_rows) = head_rows_loss(&self.task_head, &mut g_task, &rows, &labels, task_scale)?;
                task_loss += l;
                if let LanguageSide::Confusion { w, term } = side {
                    let logits = self.language_head.logits_rows(&rows)?;
                    let mut d_logits = Array2::zeros(logits.dim());
                    for (j, z) in logits.axis_iter(Axis(0)).enumerate() {
                        let p = nn::softmax(z);
                        lang_term += language_term(p.view(), *term);
                        if *w > 0.0 {
                            d_logits.row_mut(j).assign(&(language_term_logit_grad(p.view(), *term) * (w * scale)));
                        }
                    }
                    if *w > 0.0 {
                        d_rows += &d_logits.dot(&self.language_head.weight.t());
                    }
                }
                nn::apply_mask(&mut d_rows, &mask);
                let mut d_out = Array2::zeros(out.dim());
                for (j, &p) in positions.iter().enumerate() {
                    d_out.row_mut(p).assign(&d_rows.row(j));
                }
                self.encoder.backward(tape, &d_out, &mut g_enc)?;
            }
            if let (LanguageSide::Reversal { lambda, lid, granularity }, Some(cursor)) = (side, cursor.as_mut()) {
                let picks: Vec<usize> = (0..batch.len()).map(|_| cursor.next()).collect();
                let n_lid: usize = picks.iter().map(|&i| lid[i].language_targets(*granularity).len()).sum();
                let lid_scale = 1.0 / n_lid.max(1) as f64;
                for (k, &i) in picks.iter().enumerate() {
                    let ex = &lid[i];
                    let targets = ex.language_targets(*granularity);
                    if targets.is_empty() {
                        continue;
                    }
                    let mut r = rng::stream(seed, &[streams::LID_DROPOUT, epoch as u64, step as u64, k as u64]);
                    let (out, tape) = self.encoder.forward(ex.sequence.tokens(), Some(&mut r))?;
                    let positions: Vec<usize> = targets.iter().map(|&(p, _)| p).collect();
                    let labels: Vec<usize> = targets.iter().map(|&(_, c)| c).collect();
                    let mask = output_mask(positions.len(), d, config.output_dropout, &mut r);
                    let mut rows = out.select(Axis(0), &positions);
                    nn::apply_mask(&mut rows, &mask);
                    let (l, d_rows) = head_rows_loss(&self.language_head, &mut g_lang, &rows, &labels, lid_scale)?;
                    lang_term += l;
                    if *lambda > 0.0 {
                        // gradient reversal between encoder output and language head
                        let mut d_rows = d_rows.mapv(|g| -lambda * g);
                        nn::apply_mask(&mut d_rows, &mask);
                        let mut d_out = Array2::zeros(out.dim());
                        for (j, &p) in positions.iter().enumerate() {
                            d_out.row_mut(p).assign(&d_rows.row(j));
                        }
                        self.encoder.backward(tape, &d_out, &mut g_enc)?;
                    }
                }
                self.language_loss.push(lang_term * lid_scale);
                adam_step(&mut self.language_head, &g_lang, &mut self.adam_language, config.head_lr)?;
            } else if matches!(side, LanguageSide::Confusion { .. }) {
                self.language_loss.push(lang_term * scale);
            }
            let task_loss = task_loss * scale;
            if !task_loss.is_finite() {
                return Err(Error::Diverged(format!("task loss became {task_loss} in epoch {epoch}")));
            }
            self.task_loss.push(task_loss);
            adam_step(&mut self.encoder, &g_enc, &mut self.adam_encoder, config.encoder_lr)?;
            adam_step(&mut self.task_head, &g_task, &mut self.adam_task, config.head_lr)?;
        }
        Ok(())
    }
}

/// Snapshot of the encoder and task head at the best validation epoch.
struct Best {
    scores: Vec<f64>,
    encoder: Option<EncoderModel>,
    task_head: Option<ClassifierHead>,
}

impl Best {
    fn new() -> Self {
        Best {
            scores: Vec::new(),
            encoder: None,
            task_head: None,
        }
    }

    fn record(&mut self, state: &JointState, val: &[LabeledExample], n_classes: usize) -> Result<()> {
        let s = evaluate(&state.encoder, &state.task_head, val, Target::Task, n_classes)?;
        if self.scores.iter().all(|&b| s > b) {
            self.encoder = Some(state.encoder.clone());
            self.task_head = Some(state.task_head.clone());
        }
        self.scores.push(s);
        Ok(())
    }
}

fn finish(
    config: &ExperimentConfig,
    corpora: &Corpora,
    best: Best,
    state: JointState,
    language_head_loss: Vec<f64>,
    phases: Vec<PhaseRecord>,
) -> Result<TrainingRun> {
    let selected_epoch = select_epoch(&best.scores).expect("at least one epoch");
    let encoder = best.encoder.expect("snapshot taken");
    let language_probe = retrain_language_probe(&encoder, &corpora.lid, corpora.n_languages, config)?;
    Ok(TrainingRun {
        config: config.clone(),
        val_scores: best.scores,
        selected_epoch,
        checkpoint: Checkpoint {
            encoder,
            task_head: best.task_head,
            language_head: Some(language_probe.head.clone()),
        },
        task_loss: state.task_loss,
        language_loss: state.language_loss,
        language_head_loss,
        phases,
        language_probe,
    })
}

fn language_head_init(encoder: &EncoderModel, corpora: &Corpora, config: &ExperimentConfig) -> Result<ClassifierHead> {
    ClassifierHead::init(
        encoder.d_model(),
        corpora.n_languages,
        config.init_std,
        &mut rng::stream(config.seed, &[streams::INIT, PHASE_TAG]),
    )
}

fn joint_run(
    encoder: &EncoderModel,
    corpora: &Corpora,
    config: &ExperimentConfig,
    lambda: Option<f64>,
) -> Result<TrainingRun> {
    let (train, val) = check_corpora(corpora, config)?;
    let mut state = JointState::new(
        encoder,
        task_head_init(encoder, corpora, config)?,
        language_head_init(encoder, corpora, config)?,
    );
    let side = match lambda {
        Some(lambda) => LanguageSide::Reversal {
            lambda,
            lid: &corpora.lid.train,
            granularity: config.granularity(),
        },
        None => LanguageSide::None,
    };
    let mut cursor = lambda.map(|_| LidCursor::new(corpora.lid.train.len(), config.seed));
    let mut best = Best::new();
    let mut phases = Vec::new();
    for epoch in 0..config.epochs {
        let start = state.task_loss.len();
        state.epoch(&train, config, epoch, &side, &mut cursor)?;
        phases.push(PhaseRecord {
            kind: PhaseKind::Joint,
            epoch,
            steps: (start, state.task_loss.len()),
        });
        best.record(&state, &val, corpora.n_task_classes)?;
    }
    finish(config, corpora, best, state, Vec::new(), phases)
}

/// Fine-tunes encoder and task head on pivot-language data, then retrains a
/// fresh language head on the frozen result.
pub fn train_finetune(encoder: &EncoderModel, corpora: &Corpora, config: &ExperimentConfig) -> Result<TrainingRun> {
    if !matches!(config.regime, Regime::Finetune) {
        return Err(Error::invalid(format!("train_finetune called with regime {}", config.regime.name())));
    }
    joint_run(encoder, corpora, config, None)
}

/// Fine-tuning with an adversarial language head behind a gradient-reversal
/// layer. Each step sums the task loss on a task minibatch and the language
/// loss on an equally sized LID minibatch into one update.
pub fn train_grad_reversal(encoder: &EncoderModel, corpora: &Corpora, config: &ExperimentConfig) -> Result<TrainingRun> {
    let Regime::GradReversal { lambda } = config.regime else {
        return Err(Error::invalid(format!(
            "train_grad_reversal called with regime {}",
            config.regime.name()
        )));
    };
    joint_run(encoder, corpora, config, Some(lambda))
}

/// Alternates one epoch of language-head training on frozen LID features with
/// one epoch of encoder and task-head training on the combined loss
/// `(1 − w)·XE + w·language term`, for `config.epochs` pairs.
pub fn train_entropy_max(encoder: &EncoderModel, corpora: &Corpora, config: &ExperimentConfig) -> Result<TrainingRun> {
    let Regime::EntropyMax { w, term } = config.regime else {
        return Err(Error::invalid(format!(
            "train_entropy_max called with regime {}",
            config.regime.name()
        )));
    };
    let (train, val) = check_corpora(corpora, config)?;
    let mut state = JointState::new(
        encoder,
        task_head_init(encoder, corpora, config)?,
        language_head_init(encoder, corpora, config)?,
    );
    let trainer = HeadTrainer {
        lr: config.head_lr,
        batch_size: config.batch_size,
        dropout: config.output_dropout,
        seed: config.seed,
        tag: PHASE_TAG,
    };
    let target = Target::Language(config.granularity());
    let side = LanguageSide::Confusion { w, term };
    let mut best = Best::new();
    let mut phases = Vec::new();
    let mut language_head_loss = Vec::new();
    for epoch in 0..config.epochs {
        let features = extract(&state.encoder, &corpora.lid.train, target)?;
        let start = language_head_loss.len();
        language_head_loss.extend(trainer.epoch(
            &mut state.language_head,
            &mut state.adam_language,
            &features,
            epoch,
        )?);
        phases.push(PhaseRecord {
            kind: PhaseKind::LanguageProbe,
            epoch,
            steps: (start, language_head_loss.len()),
        });
        let start = state.task_loss.len();
        state.epoch(&train, config, epoch, &side, &mut None)?;
        phases.push(PhaseRecord {
            kind: PhaseKind::Joint,
            epoch,
            steps: (start, state.task_loss.len()),
        });
        best.record(&state, &val, corpora.n_task_classes)?;
    }
    finish(config, corpora, best, state, language_head_loss, phases)
}

/// Dispatches on the configured regime.
pub fn train(encoder: &EncoderModel, corpora: &Corpora, config: &ExperimentConfig) -> Result<TrainingRun> {
    match config.regime {
        Regime::FrozenProbe => train_frozen_probe(encoder, corpora, config),
        Regime::Finetune => train_finetune(encoder, corpora, config),
        Regime::GradReversal { .. } => train_grad_reversal(encoder, corpora, config),
        Regime::EntropyMax { .. } => train_entropy_max(encoder, corpora, config),
    }
}
