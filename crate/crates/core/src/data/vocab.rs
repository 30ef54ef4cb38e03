use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const PAD: u32 = 0;
pub const UNK: u32 = 1;
pub const SEP: u32 = 2;
pub const MASK: u32 = 3;

const SPECIALS: [&str; 4] = ["[PAD]", "[UNK]", "[SEP]", "[MASK]"];

/// Whole-word vocabulary. Ids 0..4 are reserved for PAD, UNK, SEP and MASK.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, u32>,
}

impl Default for Vocabulary {
    fn default() -> Self {
        Self::new()
    }
}

impl From<Vec<String>> for Vocabulary {
    fn from(tokens: Vec<String>) -> Self {
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        Vocabulary { tokens, index }
    }
}

impl From<Vocabulary> for Vec<String> {
    fn from(v: Vocabulary) -> Self {
        v.tokens
    }
}

impl Vocabulary {
    /// A vocabulary holding only the reserved tokens.
    pub fn new() -> Self {
        SPECIALS.iter().map(|s| s.to_string()).collect::<Vec<_>>().into()
    }

    /// Builds a vocabulary from words in first-seen order.
    pub fn from_words<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut vocab = Self::new();
        for w in words {
            vocab.insert(w.as_ref());
        }
        vocab
    }

    /// Adds `word` if absent and returns its id.
    pub fn insert(&mut self, word: &str) -> u32 {
        if let Some(&id) = self.index.get(word) {
            return id;
        }
        let id = self.tokens.len() as u32;
        self.tokens.push(word.to_string());
        self.index.insert(word.to_string(), id);
        id
    }

    pub fn id(&self, word: &str) -> Option<u32> {
        self.index.get(word).copied()
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn is_special(id: u32) -> bool {
        (id as usize) < SPECIALS.len()
    }

    /// Number of reserved slots at the start of every vocabulary.
    pub fn n_special() -> usize {
        SPECIALS.len()
    }

    /// Maps each whitespace-separated word to its id (`None` when unknown).
    pub fn lookup_words<'a>(&self, words: impl IntoIterator<Item = &'a str>) -> Vec<Option<u32>> {
        words.into_iter().map(|w| self.id(w)).collect()
    }

    /// Renders ids back to words.
    pub fn decode(&self, ids: &[u32]) -> Vec<&str> {
        ids.iter().map(|&i| self.token(i).unwrap_or("[UNK]")).collect()
    }

    /// Reads a vocabulary file: one token per line, line number = id.
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let tokens: Vec<String> = text.lines().map(str::to_string).collect();
        for (i, s) in SPECIALS.iter().enumerate() {
            if tokens.get(i).map(String::as_str) != Some(*s) {
                return Err(Error::parse(path, i + 1, format!("expected reserved token {s}")));
            }
        }
        let vocab: Vocabulary = tokens.into();
        if vocab.index.len() != vocab.tokens.len() {
            return Err(Error::parse(path, 0, "duplicate token"));
        }
        Ok(vocab)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut text = self.tokens.join("\n");
        text.push('\n');
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

/// A closed, ordered set of class names (tags, NLI labels or languages).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct LabelSet {
    names: Vec<String>,
    index: HashMap<String, usize>,
}

impl From<Vec<String>> for LabelSet {
    fn from(names: Vec<String>) -> Self {
        let index = names.iter().enumerate().map(|(i, n)| (n.clone(), i)).collect();
        LabelSet { names, index }
    }
}

impl From<LabelSet> for Vec<String> {
    fn from(s: LabelSet) -> Self {
        s.names
    }
}

impl LabelSet {
    pub fn new<I, S>(names: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        names.into_iter().map(Into::into).collect::<Vec<_>>().into()
    }

    pub fn index(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn name(&self, i: usize) -> Option<&str> {
        self.names.get(i).map(String::as_str)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reserved_slots() {
        let v = Vocabulary::from_words(["a", "b", "a"]);
        assert_eq!(v.len(), 6);
        assert_eq!(v.id("[SEP]"), Some(SEP));
        assert_eq!(v.id("[MASK]"), Some(MASK));
        assert_eq!(v.id("a"), Some(4));
        assert!(Vocabulary::is_special(UNK));
        assert!(!Vocabulary::is_special(4));
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vocab.txt");
        let v = Vocabulary::from_words(["x", "y"]);
        v.write(&path).unwrap();
        assert_eq!(Vocabulary::read(&path).unwrap(), v);
    }

    #[test]
    fn missing_reserved_token_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vocab.txt");
        std::fs::write(&path, "[PAD]\nfoo\n").unwrap();
        assert!(Vocabulary::read(&path).is_err());
    }
}
