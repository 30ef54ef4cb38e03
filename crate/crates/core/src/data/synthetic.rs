//! A family of toy languages that share a concept inventory and a tag set but
//! differ in surface vocabulary and word order.
//!
//! Tags are attached to concepts, never to surface forms, so a tagger trained
//! on one language can in principle transfer to the others. A configurable
//! fraction of content concepts shares one surface form across every language;
//! function words are always language-specific, which keeps the language of a
//! sentence recoverable from its tokens.

use std::collections::{BTreeMap, HashSet};

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::vocab::{LabelSet, Vocabulary};
use super::{LabeledExample, TaskLabels, TokenSequence, MAX_LEN};
use crate::error::{Error, Result};
use crate::rng::{self, streams, Rng};

/// Tag inventory shared by every synthetic language.
pub const UNIVERSAL_TAGS: [&str; 5] = ["NOUN", "VERB", "ADJ", "DET", "ADP"];

const NOUN: usize = 0;
const VERB: usize = 1;
const ADJ: usize = 2;
const DET: usize = 3;
const ADP: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TaskKind {
    TokenTag,
    PairInference,
}

/// Sizes of each concept class. Verbs and adjectives come in antonym pairs
/// `(2i, 2i + 1)`, so their counts must be even.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConceptInventory {
    pub nouns: usize,
    pub verbs: usize,
    pub adjectives: usize,
    pub determiners: usize,
    pub adpositions: usize,
}

impl Default for ConceptInventory {
    fn default() -> Self {
        ConceptInventory {
            nouns: 48,
            verbs: 16,
            adjectives: 16,
            determiners: 4,
            adpositions: 4,
        }
    }
}

impl ConceptInventory {
    /// Number of content concepts (nouns, verbs, adjectives).
    pub fn content(&self) -> usize {
        self.nouns + self.verbs + self.adjectives
    }

    pub fn function(&self) -> usize {
        self.determiners + self.adpositions
    }

    fn verb(&self, i: usize) -> usize {
        self.nouns + i
    }

    fn adjective(&self, i: usize) -> usize {
        self.nouns + self.verbs + i
    }

    /// Universal tag of a content concept.
    pub fn content_tag(&self, concept: usize) -> usize {
        if concept < self.nouns {
            NOUN
        } else if concept < self.nouns + self.verbs {
            VERB
        } else {
            ADJ
        }
    }

    pub fn function_tag(&self, concept: usize) -> usize {
        if concept < self.determiners {
            DET
        } else {
            ADP
        }
    }

    /// Antonym of a verb or adjective concept; nouns have none.
    pub fn antonym(&self, concept: usize) -> Option<usize> {
        if concept < self.nouns {
            return None;
        }
        let base = if concept < self.nouns + self.verbs {
            self.nouns
        } else {
            self.nouns + self.verbs
        };
        Some(base + ((concept - base) ^ 1))
    }

    fn validate(&self) -> Result<()> {
        if self.nouns < 2 || self.verbs < 2 || self.adjectives < 2 {
            return Err(Error::invalid("each content class needs at least 2 concepts"));
        }
        if self.verbs % 2 != 0 || self.adjectives % 2 != 0 {
            return Err(Error::invalid("verb and adjective counts must be even (antonym pairs)"));
        }
        if self.determiners == 0 || self.adpositions == 0 {
            return Err(Error::invalid("empty function-word class"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum ClauseOrder {
    Svo,
    Sov,
    Vso,
    Vos,
    Ovs,
    Osv,
}

impl ClauseOrder {
    const ALL: [ClauseOrder; 6] = [
        ClauseOrder::Svo,
        ClauseOrder::Sov,
        ClauseOrder::Vso,
        ClauseOrder::Vos,
        ClauseOrder::Ovs,
        ClauseOrder::Osv,
    ];

    /// Slot order as indices into `[subject, verb, object]`.
    fn slots(self) -> [usize; 3] {
        match self {
            ClauseOrder::Svo => [0, 1, 2],
            ClauseOrder::Sov => [0, 2, 1],
            ClauseOrder::Vso => [1, 0, 2],
            ClauseOrder::Vos => [1, 2, 0],
            ClauseOrder::Ovs => [2, 1, 0],
            ClauseOrder::Osv => [2, 0, 1],
        }
    }
}

/// Word-order rule used when realizing a concept-level clause.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WordOrder {
    pub clause: ClauseOrder,
    pub adjective_before_noun: bool,
    pub prepositions: bool,
}

impl Default for WordOrder {
    fn default() -> Self {
        WordOrder {
            clause: ClauseOrder::Svo,
            adjective_before_noun: true,
            prepositions: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticLanguageSpec {
    pub language: String,
    pub concepts: ConceptInventory,
    /// Surface form of each content concept.
    pub lexicon: Vec<String>,
    /// Surface form of each function concept (determiners, then adpositions).
    pub function_words: Vec<String>,
    pub word_order: WordOrder,
    pub tags: Vec<String>,
}

/// Parameters for [`SyntheticLanguageSpec::family`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyConfig {
    pub n_languages: usize,
    pub concepts: ConceptInventory,
    /// Fraction of content concepts whose surface form is shared by all languages.
    pub overlap: f64,
    /// When false every language uses the pivot's word order.
    pub vary_word_order: bool,
    pub seed: u64,
}

impl Default for FamilyConfig {
    fn default() -> Self {
        FamilyConfig {
            n_languages: 8,
            concepts: ConceptInventory::default(),
            overlap: 0.1,
            vary_word_order: true,
            seed: 0,
        }
    }
}

const CONSONANTS: &[u8] = b"bcdfghjklmnpqrstvwxz";
const VOWELS: &[u8] = b"aeiou";

struct FormGenerator<'a> {
    consonants: Vec<u8>,
    vowels: Vec<u8>,
    used: &'a mut HashSet<String>,
}

impl FormGenerator<'_> {
    fn fresh(&mut self, rng: &mut Rng) -> String {
        loop {
            let syllables = rng.random_range(2..=3);
            let mut form = String::new();
            for _ in 0..syllables {
                form.push(self.consonants[rng.random_range(0..self.consonants.len())] as char);
                form.push(self.vowels[rng.random_range(0..self.vowels.len())] as char);
            }
            if rng.random_bool(0.3) {
                form.push(self.consonants[rng.random_range(0..self.consonants.len())] as char);
            }
            if self.used.insert(form.clone()) {
                return form;
            }
        }
    }
}

impl SyntheticLanguageSpec {
    /// Builds `n_languages` languages over one concept inventory. Language 0
    /// (the pivot) always uses SVO order, prenominal adjectives and prepositions.
    pub fn family(config: &FamilyConfig) -> Result<Vec<SyntheticLanguageSpec>> {
        config.concepts.validate()?;
        if !(0.0..=1.0).contains(&config.overlap) {
            return Err(Error::invalid("overlap must lie in [0, 1]"));
        }
        let concepts = &config.concepts;
        let mut rng = rng::stream(config.seed, &[streams::LEXICON]);
        let mut used = HashSet::new();

        let n_shared = (config.overlap * concepts.content() as f64).round() as usize;
        let mut order: Vec<usize> = (0..concepts.content()).collect();
        order.shuffle(&mut rng);
        let mut shared: BTreeMap<usize, String> = BTreeMap::new();
        {
            let mut gen = FormGenerator {
                consonants: CONSONANTS.to_vec(),
                vowels: VOWELS.to_vec(),
                used: &mut used,
            };
            for &c in &order[..n_shared] {
                shared.insert(c, gen.fresh(&mut rng));
            }
        }

        let mut specs = Vec::with_capacity(config.n_languages);
        for l in 0..config.n_languages {
            let mut consonants = CONSONANTS.to_vec();
            consonants.shuffle(&mut rng);
            consonants.truncate(7);
            let mut vowels = VOWELS.to_vec();
            vowels.shuffle(&mut rng);
            vowels.truncate(3);
            let mut gen = FormGenerator {
                consonants,
                vowels,
                used: &mut used,
            };
            let lexicon = (0..concepts.content())
                .map(|c| shared.get(&c).cloned().unwrap_or_else(|| gen.fresh(&mut rng)))
                .collect();
            let function_words = (0..concepts.function()).map(|_| gen.fresh(&mut rng)).collect();
            let word_order = if l == 0 || !config.vary_word_order {
                WordOrder::default()
            } else {
                WordOrder {
                    clause: ClauseOrder::ALL[l % ClauseOrder::ALL.len()],
                    adjective_before_noun: l % 2 == 0,
                    prepositions: (l / 2) % 2 == 0,
                }
            };
            specs.push(SyntheticLanguageSpec {
                language: format!("l{l}"),
                concepts: concepts.clone(),
                lexicon,
                function_words,
                word_order,
                tags: UNIVERSAL_TAGS.iter().map(|s| s.to_string()).collect(),
            });
        }
        Ok(specs)
    }

    /// Vocabulary covering every surface form of every language, in a fixed order.
    pub fn vocabulary(specs: &[SyntheticLanguageSpec]) -> Vocabulary {
        Vocabulary::from_words(
            specs
                .iter()
                .flat_map(|s| s.lexicon.iter().chain(s.function_words.iter())),
        )
    }

    pub fn language_set(specs: &[SyntheticLanguageSpec]) -> LabelSet {
        LabelSet::new(specs.iter().map(|s| s.language.clone()))
    }

    pub fn tag_set() -> LabelSet {
        LabelSet::new(UNIVERSAL_TAGS)
    }

    fn validate(&self) -> Result<()> {
        if self.lexicon.is_empty() || self.function_words.is_empty() {
            return Err(Error::invalid(format!("language {}: empty lexicon", self.language)));
        }
        if self.lexicon.len() != self.concepts.content()
            || self.function_words.len() != self.concepts.function()
        {
            return Err(Error::invalid(format!(
                "language {}: lexicon size does not match concept inventory",
                self.language
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
struct NounPhrase {
    det: usize,
    adj: Option<usize>,
    noun: usize,
}

#[derive(Debug, Clone, PartialEq)]
struct Clause {
    subject: NounPhrase,
    verb: usize,
    object: NounPhrase,
    adjunct: Option<(usize, NounPhrase)>,
}

impl Clause {
    fn sample(c: &ConceptInventory, rng: &mut Rng) -> Self {
        let np = |rng: &mut Rng| NounPhrase {
            det: rng.random_range(0..c.determiners),
            adj: rng
                .random_bool(0.4)
                .then(|| c.adjective(rng.random_range(0..c.adjectives))),
            noun: rng.random_range(0..c.nouns),
        };
        let subject = np(rng);
        let verb = c.verb(rng.random_range(0..c.verbs));
        let object = np(rng);
        let adjunct = rng
            .random_bool(0.4)
            .then(|| (c.determiners + rng.random_range(0..c.adpositions), np(rng)));
        Clause {
            subject,
            verb,
            object,
            adjunct,
        }
    }

    /// Content concepts plus adposition markers, as a sorted multiset.
    fn concepts(&self) -> Vec<(bool, usize)> {
        let mut out = Vec::new();
        let mut np = |p: &NounPhrase| {
            out.push((true, p.noun));
            if let Some(a) = p.adj {
                out.push((true, a));
            }
        };
        np(&self.subject);
        np(&self.object);
        if let Some((_, p)) = &self.adjunct {
            np(p);
        }
        out.push((true, self.verb));
        if let Some((adp, _)) = &self.adjunct {
            out.push((false, *adp));
        }
        out.sort_unstable();
        out
    }
}

/// Words and tags of a realized clause.
fn realize(spec: &SyntheticLanguageSpec, clause: &Clause) -> Vec<(String, usize)> {
    let c = &spec.concepts;
    let content = |k: usize| (spec.lexicon[k].clone(), c.content_tag(k));
    let function = |k: usize| (spec.function_words[k].clone(), c.function_tag(k));
    let np = |p: &NounPhrase| {
        let mut out = vec![function(p.det)];
        match (p.adj, spec.word_order.adjective_before_noun) {
            (Some(a), true) => {
                out.push(content(a));
                out.push(content(p.noun));
            }
            (Some(a), false) => {
                out.push(content(p.noun));
                out.push(content(a));
            }
            (None, _) => out.push(content(p.noun)),
        }
        out
    };
    let parts = [np(&clause.subject), vec![content(clause.verb)], np(&clause.object)];
    let mut words: Vec<(String, usize)> = spec
        .word_order
        .clause
        .slots()
        .iter()
        .flat_map(|&s| parts[s].clone())
        .collect();
    if let Some((adp, p)) = &clause.adjunct {
        if spec.word_order.prepositions {
            words.push(function(*adp));
            words.extend(np(p));
        } else {
            words.extend(np(p));
            words.push(function(*adp));
        }
    }
    words
}

/// Entailment when the hypothesis' concepts are a sub-multiset of the
/// premise's, contradiction when it introduces the antonym of a premise
/// concept, neutral otherwise.
fn nli_label(c: &ConceptInventory, premise: &Clause, hypothesis: &Clause) -> usize {
    let p = premise.concepts();
    let h = hypothesis.concepts();
    let contradicts = h.iter().any(|&(content, k)| {
        content
            && !p.contains(&(true, k))
            && c.antonym(k).is_some_and(|a| p.contains(&(true, a)))
    });
    if contradicts {
        return 2;
    }
    let mut remaining = p.clone();
    let subset = h.iter().all(|x| match remaining.iter().position(|y| y == x) {
        Some(i) => {
            remaining.remove(i);
            true
        }
        None => false,
    });
    if subset {
        0
    } else {
        1
    }
}

fn perturb(c: &ConceptInventory, premise: &Clause, rng: &mut Rng) -> Clause {
    let mut h = premise.clone();
    // drop modifiers: the result is always a sub-multiset of the premise
    for np in [&mut h.subject, &mut h.object] {
        if np.adj.is_some() && rng.random_bool(0.5) {
            np.adj = None;
        }
    }
    if h.adjunct.is_some() && rng.random_bool(0.5) {
        h.adjunct = None;
    }
    match rng.random_range(0..3) {
        0 => {}
        1 => {
            let with_adj: Vec<usize> = [h.subject.adj.is_some(), h.object.adj.is_some()]
                .iter()
                .enumerate()
                .filter_map(|(i, &has)| has.then_some(i))
                .collect();
            if with_adj.is_empty() || rng.random_bool(0.6) {
                h.verb = c.antonym(h.verb).expect("verbs have antonyms");
            } else {
                let np = match with_adj[rng.random_range(0..with_adj.len())] {
                    0 => &mut h.subject,
                    _ => &mut h.object,
                };
                np.adj = np.adj.and_then(|a| c.antonym(a));
            }
        }
        _ => {
            let np = if rng.random_bool(0.5) {
                &mut h.subject
            } else {
                &mut h.object
            };
            if np.adj.is_none() && rng.random_bool(0.5) {
                np.adj = Some(c.adjective(rng.random_range(0..c.adjectives)));
            } else {
                let shift = rng.random_range(1..c.nouns);
                np.noun = (np.noun + shift) % c.nouns;
            }
        }
    }
    h
}

fn check_specs(specs: &[SyntheticLanguageSpec]) -> Result<()> {
    if specs.len() < 2 {
        return Err(Error::invalid("at least two languages are required"));
    }
    let mut seen = HashSet::new();
    for s in specs {
        s.validate()?;
        if !seen.insert(s.language.as_str()) {
            return Err(Error::invalid(format!("duplicate language id {}", s.language)));
        }
        if s.concepts != specs[0].concepts {
            return Err(Error::invalid("languages disagree on the concept inventory"));
        }
    }
    Ok(())
}

fn ids(vocab: &Vocabulary, words: impl IntoIterator<Item = String>) -> Vec<u32> {
    words
        .into_iter()
        .map(|w| vocab.id(&w).expect("synthetic form missing from vocabulary"))
        .collect()
}

/// Generates `n_per_language` examples per language, language by language.
/// Language `l` draws from its own stream, so its examples do not depend on
/// how many other languages are present.
pub fn generate_corpus(
    specs: &[SyntheticLanguageSpec],
    n_per_language: usize,
    task: TaskKind,
    seed: u64,
) -> Result<Vec<LabeledExample>> {
    check_specs(specs)?;
    if n_per_language == 0 {
        return Err(Error::invalid("n_per_language must be at least 1"));
    }
    let vocab = SyntheticLanguageSpec::vocabulary(specs);
    let concepts = &specs[0].concepts;
    let mut out = Vec::with_capacity(specs.len() * n_per_language);
    for (l, spec) in specs.iter().enumerate() {
        let mut rng = rng::stream(seed, &[streams::CORPUS, task as u64, l as u64]);
        for _ in 0..n_per_language {
            let clause = Clause::sample(concepts, &mut rng);
            let example = match task {
                TaskKind::TokenTag => {
                    let (words, tags): (Vec<_>, Vec<_>) = realize(spec, &clause).into_iter().unzip();
                    let sequence = TokenSequence::single(ids(&vocab, words), MAX_LEN);
                    let mut tags = tags;
                    tags.truncate(sequence.len());
                    LabeledExample {
                        sequence,
                        labels: TaskLabels::Tokens(tags),
                        language: l,
                    }
                }
                TaskKind::PairInference => {
                    let hypothesis = perturb(concepts, &clause, &mut rng);
                    let label = nli_label(concepts, &clause, &hypothesis);
                    let words = |c: &Clause| realize(spec, c).into_iter().map(|(w, _)| w);
                    let sequence = TokenSequence::pair(
                        ids(&vocab, words(&clause)),
                        ids(&vocab, words(&hypothesis)),
                        MAX_LEN,
                    )
                    .expect("realized clauses are never empty");
                    LabeledExample {
                        sequence,
                        labels: TaskLabels::Text(label),
                        language: l,
                    }
                }
            };
            out.push(example);
        }
    }
    Ok(out)
}

/// Generates language-identification paragraphs: sentences are appended
/// until the paragraph text reaches `min_chars` characters.
pub fn generate_lid_corpus(
    specs: &[SyntheticLanguageSpec],
    n_per_language: usize,
    min_chars: usize,
    seed: u64,
) -> Result<Vec<LabeledExample>> {
    check_specs(specs)?;
    if n_per_language == 0 {
        return Err(Error::invalid("n_per_language must be at least 1"));
    }
    let vocab = SyntheticLanguageSpec::vocabulary(specs);
    let concepts = &specs[0].concepts;
    let mut out = Vec::with_capacity(specs.len() * n_per_language);
    for (l, spec) in specs.iter().enumerate() {
        let mut rng = rng::stream(seed, &[streams::CORPUS, 99, l as u64]);
        for _ in 0..n_per_language {
            let mut words: Vec<String> = Vec::new();
            let mut chars = 0;
            while chars < min_chars.max(1) {
                for (w, _) in realize(spec, &Clause::sample(concepts, &mut rng)) {
                    chars += w.chars().count() + usize::from(!words.is_empty());
                    words.push(w);
                }
            }
            out.push(LabeledExample {
                sequence: TokenSequence::single(ids(&vocab, words), MAX_LEN),
                labels: TaskLabels::None,
                language: l,
            });
        }
    }
    Ok(out)
}
