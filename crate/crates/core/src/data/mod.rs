//! Corpora: synthetic multilingual generation, loaders for the external text
//! formats, tokenization and language-stratified splitting.

mod formats;
mod split;
mod synthetic;
mod vocab;

pub use formats::{
    load_conllu, load_lid_paragraphs, load_nli_tsv, write_conllu, write_lid_tsv, write_nli_tsv,
    LoadOptions, NLI_LABELS,
};
pub use split::{filter_language, stratified_split, CorpusSplit};
pub use synthetic::{
    generate_corpus, generate_lid_corpus, ClauseOrder, ConceptInventory, FamilyConfig,
    SyntheticLanguageSpec, TaskKind, WordOrder, UNIVERSAL_TAGS,
};
pub use vocab::{LabelSet, Vocabulary, MASK, PAD, SEP, UNK};

use serde::{Deserialize, Serialize};

/// Default cap on sequence length, counted in vocabulary tokens.
pub const MAX_LEN: usize = 128;

/// A tokenized text, or a premise/hypothesis pair joined by [`SEP`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenSequence {
    tokens: Vec<u32>,
    pair_boundary: Option<usize>,
}

impl TokenSequence {
    /// A single text, truncated to its first `max_len` tokens.
    pub fn single(mut tokens: Vec<u32>, max_len: usize) -> Self {
        tokens.truncate(max_len);
        TokenSequence {
            tokens,
            pair_boundary: None,
        }
    }

    /// Joins `first` and `second` with a separator, trimming the longer side
    /// one token at a time until the whole sequence fits in `max_len`.
    ///
    /// Returns `None` when either side is empty or `max_len < 3`, since the
    /// separator must end up strictly inside the sequence.
    pub fn pair(mut first: Vec<u32>, mut second: Vec<u32>, max_len: usize) -> Option<Self> {
        if first.is_empty() || second.is_empty() || max_len < 3 {
            return None;
        }
        while first.len() + second.len() + 1 > max_len {
            if first.len() >= second.len() {
                first.pop();
            } else {
                second.pop();
            }
        }
        let boundary = first.len();
        first.push(SEP);
        first.extend(second);
        Some(TokenSequence {
            tokens: first,
            pair_boundary: Some(boundary),
        })
    }

    pub fn tokens(&self) -> &[u32] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn is_pair(&self) -> bool {
        self.pair_boundary.is_some()
    }

    /// Index of the separator token, for pairs.
    pub fn pair_boundary(&self) -> Option<usize> {
        self.pair_boundary
    }

    /// Positions that carry a label at token granularity (everything except
    /// the pair separator).
    pub fn labelled_positions(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.tokens.len()).filter(move |&i| Some(i) != self.pair_boundary)
    }

    /// The (first, second) halves of a pair, without the separator.
    pub fn halves(&self) -> Option<(&[u32], &[u32])> {
        self.pair_boundary
            .map(|b| (&self.tokens[..b], &self.tokens[b + 1..]))
    }
}

/// Task annotation attached to an example.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum TaskLabels {
    /// One label per labelled position (token-level task).
    Tokens(Vec<usize>),
    /// One label for the whole text or pair.
    Text(usize),
    /// Language-identification data carries no task label.
    None,
}

/// Whether a classifier predicts per token or per text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Granularity {
    Token,
    Text,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledExample {
    pub sequence: TokenSequence,
    pub labels: TaskLabels,
    pub language: usize,
}

impl LabeledExample {
    /// `(position, class)` pairs for the task head.
    pub fn task_targets(&self) -> Vec<(usize, usize)> {
        match &self.labels {
            TaskLabels::Tokens(tags) => self.sequence.labelled_positions().zip(tags.iter().copied()).collect(),
            TaskLabels::Text(label) => vec![(0, *label)],
            TaskLabels::None => Vec::new(),
        }
    }

    /// `(position, language)` pairs for the language head.
    pub fn language_targets(&self, granularity: Granularity) -> Vec<(usize, usize)> {
        match granularity {
            Granularity::Token => self
                .sequence
                .labelled_positions()
                .map(|p| (p, self.language))
                .collect(),
            Granularity::Text if self.sequence.is_empty() => Vec::new(),
            Granularity::Text => vec![(0, self.language)],
        }
    }

    /// Checks the per-token label count against the sequence.
    pub fn is_consistent(&self) -> bool {
        match &self.labels {
            TaskLabels::Tokens(tags) => tags.len() == self.sequence.labelled_positions().count(),
            _ => true,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pair_truncation_keeps_separator_inside() {
        let a: Vec<u32> = (10..110).collect();
        let b: Vec<u32> = (200..300).collect();
        let seq = TokenSequence::pair(a, b, MAX_LEN).unwrap();
        assert_eq!(seq.len(), 128);
        let boundary = seq.pair_boundary().unwrap();
        assert_eq!(seq.tokens()[boundary], SEP);
        assert!(boundary > 0 && boundary < seq.len() - 1);
        let (p, h) = seq.halves().unwrap();
        assert_eq!(p.len() + h.len(), 127);
        assert!(p.len().abs_diff(h.len()) <= 1);
    }

    #[test]
    fn pair_with_empty_side_is_rejected() {
        assert!(TokenSequence::pair(vec![], vec![5], 10).is_none());
        assert!(TokenSequence::pair(vec![5], vec![6], 2).is_none());
    }

    #[test]
    fn single_truncates() {
        let seq = TokenSequence::single((0..300).collect(), MAX_LEN);
        assert_eq!(seq.len(), 128);
        assert_eq!(seq.tokens()[127], 127);
    }

    #[test]
    fn targets_skip_separator() {
        let seq = TokenSequence::pair(vec![5, 6], vec![7], 10).unwrap();
        let ex = LabeledExample {
            sequence: seq,
            labels: TaskLabels::Tokens(vec![0, 1, 2]),
            language: 3,
        };
        assert!(ex.is_consistent());
        assert_eq!(ex.task_targets(), vec![(0, 0), (1, 1), (3, 2)]);
        assert_eq!(ex.language_targets(Granularity::Text), vec![(0, 3)]);
        assert_eq!(ex.language_targets(Granularity::Token).len(), 3);
    }
}
