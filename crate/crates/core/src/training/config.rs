use serde::{Deserialize, Serialize};

use crate::data::{Granularity, TaskKind};
use crate::error::{Error, Result};
use crate::heads::LanguageTerm;

/// Training regime together with the hyperparameter only it uses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Regime {
    FrozenProbe,
    Finetune,
    GradReversal { lambda: f64 },
    EntropyMax { w: f64, term: LanguageTerm },
}

impl Regime {
    pub fn name(&self) -> &'static str {
        match self {
            Regime::FrozenProbe => "frozen-probe",
            Regime::Finetune => "finetune",
            Regime::GradReversal { .. } => "grad-reversal",
            Regime::EntropyMax { .. } => "entropy-max",
        }
    }

    pub fn trains_encoder(&self) -> bool {
        !matches!(self, Regime::FrozenProbe)
    }
}

/// Everything one training run depends on.
///
/// Serialized flat, e.g. `regime = "grad-reversal"` with `lambda = 0.1`;
/// `lambda` and `w` are accepted only for the regime that uses them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawExperimentConfig", into = "RawExperimentConfig")]
pub struct ExperimentConfig {
    pub regime: Regime,
    pub task: TaskKind,
    pub init_std: f64,
    pub batch_size: usize,
    pub head_lr: f64,
    /// Unused by the frozen probe.
    pub encoder_lr: f64,
    /// Training epochs; epoch pairs for entropy maximisation.
    pub epochs: usize,
    pub seed: u64,
    /// Language whose data trains and validates the task head.
    pub pivot: usize,
    /// Dropout on encoder outputs before either head.
    pub output_dropout: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawExperimentConfig {
    regime: String,
    task: TaskKind,
    #[serde(default = "defaults::init_std")]
    init_std: f64,
    #[serde(default = "defaults::batch_size")]
    batch_size: usize,
    #[serde(default = "defaults::head_lr")]
    head_lr: f64,
    #[serde(default = "defaults::encoder_lr")]
    encoder_lr: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    w: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    language_term: Option<LanguageTerm>,
    #[serde(default = "defaults::epochs")]
    epochs: usize,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    pivot: usize,
    #[serde(default = "defaults::output_dropout")]
    output_dropout: f64,
}

mod defaults {
    pub fn init_std() -> f64 {
        1e-2
    }
    pub fn batch_size() -> usize {
        32
    }
    pub fn head_lr() -> f64 {
        1e-2
    }
    pub fn encoder_lr() -> f64 {
        1e-4
    }
    pub fn epochs() -> usize {
        5
    }
    pub fn output_dropout() -> f64 {
        0.1
    }
}

impl TryFrom<RawExperimentConfig> for ExperimentConfig {
    type Error = Error;

    fn try_from(r: RawExperimentConfig) -> Result<Self> {
        let regime = match (r.regime.as_str(), r.lambda, r.w) {
            ("frozen-probe", None, None) => Regime::FrozenProbe,
            ("finetune", None, None) => Regime::Finetune,
            ("grad-reversal", Some(lambda), None) => Regime::GradReversal { lambda },
            ("entropy-max", None, Some(w)) => Regime::EntropyMax {
                w,
                term: r.language_term.unwrap_or_default(),
            },
            ("grad-reversal", None, _) => return Err(Error::invalid("grad-reversal requires lambda")),
            ("entropy-max", _, None) => return Err(Error::invalid("entropy-max requires w")),
            ("frozen-probe" | "finetune" | "grad-reversal" | "entropy-max", _, _) => {
                return Err(Error::invalid(format!(
                    "lambda is only valid for grad-reversal and w only for entropy-max (regime {})",
                    r.regime
                )))
            }
            (other, _, _) => return Err(Error::invalid(format!("unknown regime {other:?}"))),
        };
        if r.language_term.is_some() && !matches!(regime, Regime::EntropyMax { .. }) {
            return Err(Error::invalid("language_term is only valid for entropy-max"));
        }
        let c = ExperimentConfig {
            regime,
            task: r.task,
            init_std: r.init_std,
            batch_size: r.batch_size,
            head_lr: r.head_lr,
            encoder_lr: r.encoder_lr,
            epochs: r.epochs,
            seed: r.seed,
            pivot: r.pivot,
            output_dropout: r.output_dropout,
        };
        c.validate()?;
        Ok(c)
    }
}

impl From<ExperimentConfig> for RawExperimentConfig {
    fn from(c: ExperimentConfig) -> Self {
        let (lambda, w, language_term) = match c.regime {
            Regime::GradReversal { lambda } => (Some(lambda), None, None),
            Regime::EntropyMax { w, term } => (None, Some(w), Some(term)),
            _ => (None, None, None),
        };
        RawExperimentConfig {
            regime: c.regime.name().to_string(),
            task: c.task,
            init_std: c.init_std,
            batch_size: c.batch_size,
            head_lr: c.head_lr,
            encoder_lr: c.encoder_lr,
            lambda,
            w,
            language_term,
            epochs: c.epochs,
            seed: c.seed,
            pivot: c.pivot,
            output_dropout: c.output_dropout,
        }
    }
}

/// Names accepted by [`ExperimentConfig::preset`].
pub const PRESETS: [&str; 8] = [
    "udpos-frozen",
    "udpos-finetuned",
    "udpos-grad-rev",
    "udpos-ent-max",
    "xnli-frozen",
    "xnli-finetuned",
    "xnli-grad-rev",
    "xnli-ent-max",
];

impl ExperimentConfig {
    pub fn new(regime: Regime, task: TaskKind) -> Self {
        ExperimentConfig {
            regime,
            task,
            init_std: defaults::init_std(),
            batch_size: defaults::batch_size(),
            head_lr: defaults::head_lr(),
            encoder_lr: defaults::encoder_lr(),
            epochs: defaults::epochs(),
            seed: 0,
            pivot: 0,
            output_dropout: defaults::output_dropout(),
        }
    }

    /// The selected hyperparameters of the original study, by name
    /// (`udpos-*` for the token-tag task, `xnli-*` for pair inference).
    pub fn preset(name: &str) -> Result<Self> {
        use Regime::*;
        use TaskKind::*;
        let sum = LanguageTerm::SumNegLog;
        // (task, regime, init std, minibatch, encoder lr, head lr)
        let (task, regime, init_std, batch, enc_lr, head_lr) = match name {
            "udpos-frozen" => (TokenTag, FrozenProbe, 1e-1, 16, 0.0, 1e-3),
            "udpos-finetuned" => (TokenTag, Finetune, 1e-2, 64, 1e-4, 1e-1),
            "udpos-grad-rev" => (TokenTag, GradReversal { lambda: 0.1 }, 1e-3, 32, 1e-6, 1e-3),
            "udpos-ent-max" => (TokenTag, EntropyMax { w: 0.7, term: sum }, 1e-2, 32, 1e-6, 1e-2),
            "xnli-frozen" => (PairInference, FrozenProbe, 1e-2, 64, 0.0, 1e-2),
            "xnli-finetuned" => (PairInference, Finetune, 1e-3, 64, 1e-5, 1e-2),
            "xnli-grad-rev" => (PairInference, GradReversal { lambda: 0.1 }, 1e-3, 32, 1e-6, 1e-3),
            "xnli-ent-max" => (PairInference, EntropyMax { w: 0.1, term: sum }, 1e-1, 32, 1e-6, 1e-4),
            other => {
                return Err(Error::invalid(format!(
                    "unknown preset {other:?}; expected one of {}",
                    PRESETS.join(", ")
                )))
            }
        };
        Ok(ExperimentConfig {
            init_std,
            batch_size: batch,
            head_lr,
            encoder_lr: enc_lr,
            ..ExperimentConfig::new(regime, task)
        })
    }

    /// Task labels are per token for tagging and per text for inference;
    /// language labels follow the same granularity.
    pub fn granularity(&self) -> Granularity {
        match self.task {
            TaskKind::TokenTag => Granularity::Token,
            TaskKind::PairInference => Granularity::Text,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::invalid("epochs must be at least 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("minibatch size must be at least 1"));
        }
        if !(self.init_std > 0.0 && self.init_std.is_finite()) {
            return Err(Error::invalid(format!("init stddev must be positive, got {}", self.init_std)));
        }
        if !(self.head_lr > 0.0 && self.head_lr.is_finite()) {
            return Err(Error::invalid(format!("head learning rate must be positive, got {}", self.head_lr)));
        }
        if self.regime.trains_encoder() && !(self.encoder_lr > 0.0 && self.encoder_lr.is_finite()) {
            return Err(Error::invalid(format!(
                "encoder learning rate must be positive, got {}",
                self.encoder_lr
            )));
        }
        if !(0.0..1.0).contains(&self.output_dropout) {
            return Err(Error::invalid("output dropout must lie in [0, 1)"));
        }
        match self.regime {
            Regime::GradReversal { lambda } if !(lambda >= 0.0 && lambda.is_finite()) => {
                Err(Error::invalid(format!("lambda must be non-negative, got {lambda}")))
            }
            Regime::EntropyMax { w, .. } if !(0.0..=1.0).contains(&w) => {
                Err(Error::invalid(format!("w must lie in [0, 1], got {w}")))
            }
            _ => Ok(()),
        }
    }
}

/// Value sets sampled by the random search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchGrid {
    pub init_std: Vec<f64>,
    pub batch_size: Vec<usize>,
    pub head_lr: Vec<f64>,
    pub encoder_lr: Vec<f64>,
    pub lambda: Vec<f64>,
    pub w: Vec<f64>,
}

impl Default for SearchGrid {
    fn default() -> Self {
        SearchGrid {
            init_std: vec![1e-1, 1e-2, 1e-3],
            batch_size: vec![64, 32, 16],
            head_lr: vec![1e-1, 1e-2, 1e-3, 1e-4],
            encoder_lr: vec![1e-3, 1e-4, 1e-5, 1e-6],
            lambda: vec![0.1, 0.3, 0.5, 0.7],
            w: vec![0.1, 0.3, 0.5, 0.7],
        }
    }
}
