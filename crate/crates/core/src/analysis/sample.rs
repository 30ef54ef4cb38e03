use std::collections::BTreeMap;

use ndarray::Array2;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::{Granularity, LabeledExample, TaskLabels};
use crate::encoder::EncoderModel;
use crate::error::{Error, Result};
use crate::rng::{self, streams};

/// One candidate point: a token (or the pooled position of a text) of one example.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PointRef {
    pub example: usize,
    pub position: usize,
    pub label: Option<usize>,
    pub language: usize,
}

/// Cap on how many points each cell contributes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "cell", content = "quota")]
pub enum QuotaRule {
    /// Task data: at most `n` points per (label, language) pair.
    PerLabelLanguage(usize),
    /// LID data: at most `n` points per language.
    PerLanguage(usize),
}

/// Every labelled point of `examples` at the given granularity. Task labels
/// are attached when the examples carry them.
pub fn candidate_points(examples: &[LabeledExample], granularity: Granularity) -> Vec<PointRef> {
    let mut out = Vec::new();
    for (i, ex) in examples.iter().enumerate() {
        match (&ex.labels, granularity) {
            (TaskLabels::Tokens(_), _) | (TaskLabels::Text(_), _) => {
                for (position, label) in ex.task_targets() {
                    out.push(PointRef {
                        example: i,
                        position,
                        label: Some(label),
                        language: ex.language,
                    });
                }
            }
            (TaskLabels::None, g) => {
                for (position, language) in ex.language_targets(g) {
                    out.push(PointRef {
                        example: i,
                        position,
                        label: None,
                        language,
                    });
                }
            }
        }
    }
    out
}

/// Uniform sample without replacement inside each cell, capped by the quota.
/// Under-full cells contribute all their points. The result keeps input order.
pub fn plot_sample(points: &[PointRef], rule: QuotaRule, seed: u64) -> Vec<PointRef> {
    let mut cells: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
    for (i, p) in points.iter().enumerate() {
        let key = match rule {
            QuotaRule::PerLabelLanguage(_) => (p.label.map_or(0, |l| l + 1), p.language),
            QuotaRule::PerLanguage(_) => (0, p.language),
        };
        cells.entry(key).or_default().push(i);
    }
    let quota = match rule {
        QuotaRule::PerLabelLanguage(n) | QuotaRule::PerLanguage(n) => n,
    };
    let mut chosen = Vec::new();
    for ((a, b), mut members) in cells {
        members.shuffle(&mut rng::stream(seed, &[streams::SAMPLE, a as u64, b as u64]));
        members.truncate(quota);
        chosen.extend(members);
    }
    chosen.sort_unstable();
    chosen.into_iter().map(|i| points[i]).collect()
}

/// Points with their task-label and language annotations.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSample {
    /// One row per point.
    pub vectors: Array2<f64>,
    pub labels: Vec<Option<usize>>,
    pub languages: Vec<usize>,
    pub label_names: Vec<String>,
    pub language_names: Vec<String>,
}

/// Annotation a clustering report is computed against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Annotation {
    Label,
    Language,
}

impl EmbeddingSample {
    pub fn len(&self) -> usize {
        self.languages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.languages.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.vectors.nrows();
        if self.labels.len() != n || self.languages.len() != n {
            return Err(Error::Shape(format!(
                "{n} vectors with {} labels and {} languages",
                self.labels.len(),
                self.languages.len()
            )));
        }
        if self.labels.iter().flatten().any(|&l| l >= self.label_names.len())
            || self.languages.iter().any(|&l| l >= self.language_names.len())
        {
            return Err(Error::invalid("annotation outside its name table"));
        }
        Ok(())
    }

    /// Class index of every point for the annotation; errors if any point
    /// lacks a task label.
    pub fn annotation(&self, which: Annotation) -> Result<Vec<usize>> {
        match which {
            Annotation::Language => Ok(self.languages.clone()),
            Annotation::Label => self
                .labels
                .iter()
                .map(|l| l.ok_or_else(|| Error::invalid("sample point has no task label")))
                .collect(),
        }
    }

    /// Encodes the referenced points with a frozen encoder (dropout off).
    pub fn embed(
        encoder: &EncoderModel,
        examples: &[LabeledExample],
        points: &[PointRef],
        label_names: Vec<String>,
        language_names: Vec<String>,
    ) -> Result<Self> {
        let d = encoder.d_model();
        let mut vectors = Array2::zeros((points.len(), d));
        let mut cache: Option<(usize, Array2<f64>)> = None;
        for (row, p) in points.iter().enumerate() {
            let ex = examples
                .get(p.example)
                .ok_or_else(|| Error::invalid(format!("point refers to missing example {}", p.example)))?;
            if cache.as_ref().is_none_or(|(i, _)| *i != p.example) {
                cache = Some((p.example, encoder.encode(ex.sequence.tokens())?));
            }
            let enc = &cache.as_ref().expect("cached").1;
            vectors.row_mut(row).assign(&enc.row(p.position));
        }
        let sample = EmbeddingSample {
            vectors,
            labels: points.iter().map(|p| p.label).collect(),
            languages: points.iter().map(|p| p.language).collect(),
            label_names,
            language_names,
        };
        sample.validate()?;
        Ok(sample)
    }
}
