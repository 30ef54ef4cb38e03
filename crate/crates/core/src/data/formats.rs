//! Readers and writers for the three text formats: a CoNLL-U subset for
//! token tagging, a four-column TSV for premise/hypothesis pairs, and a
//! two-column TSV of language-identification paragraphs.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::vocab::{LabelSet, Vocabulary, UNK};
use super::{LabeledExample, TaskLabels, TokenSequence, MAX_LEN};
use crate::error::{Error, Result};

/// Closed label set of the pair-inference task, in id order.
pub const NLI_LABELS: [&str; 3] = ["entailment", "neutral", "contradiction"];

const NLI_HEADER: &str = "premise\thypothesis\tlabel\tlanguage";
const LID_HEADER: &str = "text\tlanguage";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoadOptions {
    pub max_len: usize,
    /// Omit any text containing a word missing from the vocabulary; when
    /// false such words map to `[UNK]`.
    pub filter_unknown: bool,
    /// Paragraphs shorter than this many characters are skipped.
    pub min_chars: usize,
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions {
            max_len: MAX_LEN,
            filter_unknown: true,
            min_chars: 100,
        }
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Ids for `words`, or `None` when a word is unknown and filtering is on.
fn encode_words<'a>(
    vocab: &Vocabulary,
    words: impl IntoIterator<Item = &'a str>,
    opts: &LoadOptions,
) -> Option<Vec<u32>> {
    let mut out = Vec::new();
    for id in vocab.lookup_words(words) {
        match id {
            Some(id) => out.push(id),
            None if opts.filter_unknown => return None,
            None => out.push(UNK),
        }
    }
    Some(out)
}

/// Language code from a UD-style file name: the stem up to the first `_`,
/// `-` or `.` (`en_ewt-ud-test.conllu` gives `en`).
fn language_from_filename(path: &Path) -> Option<String> {
    let name = path.file_name()?.to_str()?;
    let code = name.split(['_', '-', '.']).next()?;
    (!code.is_empty()).then(|| code.to_string())
}

fn resolve_language(path: &Path, line: usize, languages: &LabelSet, code: &str) -> Result<usize> {
    languages
        .index(code)
        .ok_or_else(|| Error::parse(path, line, format!("language {code:?} is not configured")))
}

/// Loads a CoNLL-U file (FORM and UPOS columns). The language of each
/// sentence comes from a `# lang = xx` comment, falling back to the file
/// name convention.
pub fn load_conllu(
    path: impl AsRef<Path>,
    vocab: &Vocabulary,
    tags: &LabelSet,
    languages: &LabelSet,
    opts: &LoadOptions,
) -> Result<Vec<LabeledExample>> {
    let path = path.as_ref();
    let text = read(path)?;
    let file_language = language_from_filename(path);

    struct Pending {
        words: Vec<String>,
        tags: Vec<usize>,
        language: Option<String>,
        first_line: usize,
    }
    let mut out = Vec::new();
    let mut current = Pending {
        words: Vec::new(),
        tags: Vec::new(),
        language: None,
        first_line: 1,
    };

    let flush = |p: &mut Pending, out: &mut Vec<LabeledExample>| -> Result<()> {
        if p.words.is_empty() {
            p.language = None;
            return Ok(());
        }
        let code = p
            .language
            .take()
            .or_else(|| file_language.clone())
            .ok_or_else(|| Error::parse(path, p.first_line, "sentence has no language"))?;
        let language = resolve_language(path, p.first_line, languages, &code)?;
        let words = std::mem::take(&mut p.words);
        let mut labels = std::mem::take(&mut p.tags);
        if let Some(ids) = encode_words(vocab, words.iter().map(String::as_str), opts) {
            let sequence = TokenSequence::single(ids, opts.max_len);
            labels.truncate(sequence.len());
            out.push(LabeledExample {
                sequence,
                labels: TaskLabels::Tokens(labels),
                language,
            });
        }
        Ok(())
    };

    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        if line.trim().is_empty() {
            flush(&mut current, &mut out)?;
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            if let Some((key, value)) = comment.split_once('=') {
                if matches!(key.trim(), "lang" | "language") {
                    current.language = Some(value.trim().to_string());
                }
            }
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 10 {
            return Err(Error::parse(
                path,
                lineno,
                format!("expected 10 tab-separated columns, found {}", cols.len()),
            ));
        }
        // multiword ranges (1-2) and empty nodes (1.1) carry no UPOS of their own
        if cols[0].contains(['-', '.']) {
            continue;
        }
        if current.words.is_empty() {
            current.first_line = lineno;
        }
        let tag = tags
            .index(cols[3])
            .ok_or_else(|| Error::parse(path, lineno, format!("unknown UPOS tag {:?}", cols[3])))?;
        current.words.push(cols[1].to_string());
        current.tags.push(tag);
    }
    flush(&mut current, &mut out)?;
    Ok(out)
}

fn split_row<'a>(path: &Path, lineno: usize, line: &'a str, n: usize, what: &str) -> Result<Vec<&'a str>> {
    let cols: Vec<&str> = line.split('\t').collect();
    if cols.len() < n {
        return Err(Error::parse(
            path,
            lineno,
            format!("missing column: expected {n} ({what}), found {}", cols.len()),
        ));
    }
    Ok(cols)
}

/// Loads premise/hypothesis pairs. Each side is whitespace-tokenized and the
/// two are joined by `[SEP]`, capped at `max_len` tokens in total.
pub fn load_nli_tsv(
    path: impl AsRef<Path>,
    vocab: &Vocabulary,
    languages: &LabelSet,
    opts: &LoadOptions,
) -> Result<Vec<LabeledExample>> {
    let path = path.as_ref();
    let text = read(path)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        if line.trim().is_empty() || (i == 0 && line == NLI_HEADER) {
            continue;
        }
        let cols = split_row(path, lineno, line, 4, "premise, hypothesis, label, language")?;
        let label = NLI_LABELS
            .iter()
            .position(|l| *l == cols[2].trim())
            .ok_or_else(|| Error::parse(path, lineno, format!("unknown label {:?}", cols[2])))?;
        let language = resolve_language(path, lineno, languages, cols[3].trim())?;
        let premise = encode_words(vocab, cols[0].split_whitespace(), opts);
        let hypothesis = encode_words(vocab, cols[1].split_whitespace(), opts);
        let (Some(premise), Some(hypothesis)) = (premise, hypothesis) else {
            continue;
        };
        let sequence = TokenSequence::pair(premise, hypothesis, opts.max_len)
            .ok_or_else(|| Error::parse(path, lineno, "empty premise or hypothesis"))?;
        out.push(LabeledExample {
            sequence,
            labels: TaskLabels::Text(label),
            language,
        });
    }
    Ok(out)
}

/// Loads language-identification paragraphs (`text<TAB>language`).
pub fn load_lid_paragraphs(
    path: impl AsRef<Path>,
    vocab: &Vocabulary,
    languages: &LabelSet,
    opts: &LoadOptions,
) -> Result<Vec<LabeledExample>> {
    let path = path.as_ref();
    let text = read(path)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        if line.trim().is_empty() || (i == 0 && line == LID_HEADER) {
            continue;
        }
        let cols = split_row(path, lineno, line, 2, "text, language")?;
        let language = resolve_language(path, lineno, languages, cols[1].trim())?;
        if cols[0].chars().count() < opts.min_chars {
            continue;
        }
        let Some(ids) = encode_words(vocab, cols[0].split_whitespace(), opts) else {
            continue;
        };
        out.push(LabeledExample {
            sequence: TokenSequence::single(ids, opts.max_len),
            labels: TaskLabels::None,
            language,
        });
    }
    Ok(out)
}

fn language_name<'a>(languages: &'a LabelSet, id: usize) -> Result<&'a str> {
    languages
        .name(id)
        .ok_or_else(|| Error::invalid(format!("language id {id} out of range")))
}

pub fn write_conllu(
    path: impl AsRef<Path>,
    examples: &[LabeledExample],
    vocab: &Vocabulary,
    tags: &LabelSet,
    languages: &LabelSet,
) -> Result<()> {
    let mut text = String::new();
    for (n, ex) in examples.iter().enumerate() {
        let TaskLabels::Tokens(labels) = &ex.labels else {
            return Err(Error::invalid("CoNLL-U output needs token-level labels"));
        };
        writeln!(text, "# sent_id = {}", n + 1).unwrap();
        writeln!(text, "# lang = {}", language_name(languages, ex.language)?).unwrap();
        for (i, (word, &tag)) in vocab.decode(ex.sequence.tokens()).iter().zip(labels).enumerate() {
            let tag = tags
                .name(tag)
                .ok_or_else(|| Error::invalid(format!("tag id {tag} out of range")))?;
            writeln!(text, "{}\t{word}\t_\t{tag}\t_\t_\t_\t_\t_\t_", i + 1).unwrap();
        }
        text.push('\n');
    }
    write(path.as_ref(), &text)
}

pub fn write_nli_tsv(
    path: impl AsRef<Path>,
    examples: &[LabeledExample],
    vocab: &Vocabulary,
    languages: &LabelSet,
) -> Result<()> {
    let mut text = format!("{NLI_HEADER}\n");
    for ex in examples {
        let (TaskLabels::Text(label), Some((premise, hypothesis))) = (&ex.labels, ex.sequence.halves())
        else {
            return Err(Error::invalid("NLI output needs labelled pairs"));
        };
        let label = NLI_LABELS
            .get(*label)
            .ok_or_else(|| Error::invalid(format!("NLI label id {label} out of range")))?;
        writeln!(
            text,
            "{}\t{}\t{label}\t{}",
            vocab.decode(premise).join(" "),
            vocab.decode(hypothesis).join(" "),
            language_name(languages, ex.language)?
        )
        .unwrap();
    }
    write(path.as_ref(), &text)
}

pub fn write_lid_tsv(
    path: impl AsRef<Path>,
    examples: &[LabeledExample],
    vocab: &Vocabulary,
    languages: &LabelSet,
) -> Result<()> {
    let mut text = format!("{LID_HEADER}\n");
    for ex in examples {
        writeln!(
            text,
            "{}\t{}",
            vocab.decode(ex.sequence.tokens()).join(" "),
            language_name(languages, ex.language)?
        )
        .unwrap();
    }
    write(path.as_ref(), &text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::SEP;

    fn fixture() -> (Vocabulary, LabelSet, LabelSet) {
        let words: Vec<String> = (0..300).map(|i| format!("w{i}")).collect();
        (
            Vocabulary::from_words(&words),
            LabelSet::new(["NOUN", "VERB"]),
            LabelSet::new(["en", "fr"]),
        )
    }

    fn conllu_line(i: usize, word: &str, tag: &str) -> String {
        format!("{i}\t{word}\t_\t{tag}\t_\t_\t_\t_\t_\t_\n")
    }

    #[test]
    fn conllu_two_sentences() {
        let (vocab, tags, langs) = fixture();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("en_test.conllu");
        let mut text = String::from("# sent_id = 1\n");
        text += &conllu_line(1, "w1", "NOUN");
        text += &conllu_line(2, "w2", "VERB");
        text += "\n# lang = fr\n";
        text += "1-2\tdu\t_\t_\t_\t_\t_\t_\t_\t_\n";
        text += &conllu_line(1, "w3", "VERB");
        fs::write(&path, text).unwrap();
        let out = load_conllu(&path, &vocab, &tags, &langs, &LoadOptions::default()).unwrap();
        assert_eq!(out.len(), 2);
        assert_eq!(out[0].language, 0);
        assert_eq!(out[1].language, 1);
        assert_eq!(out[0].labels, TaskLabels::Tokens(vec![0, 1]));
        assert_eq!(out[1].sequence.len(), 1);
    }

    #[test]
    fn conllu_truncates_long_sentences() {
        let (vocab, tags, langs) = fixture();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("en.conllu");
        let text: String = (0..200).map(|i| conllu_line(i + 1, &format!("w{i}"), "NOUN")).collect();
        fs::write(&path, text).unwrap();
        let out = load_conllu(&path, &vocab, &tags, &langs, &LoadOptions::default()).unwrap();
        assert_eq!(out[0].sequence.len(), 128);
        assert!(out[0].is_consistent());
        assert_eq!(out[0].sequence.tokens()[127], vocab.id("w127").unwrap());
    }

    #[test]
    fn conllu_unknown_token_omits_sentence() {
        let (vocab, tags, langs) = fixture();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("en.conllu");
        let text = conllu_line(1, "w1", "NOUN") + &conllu_line(2, "zzz", "NOUN") + "\n" + &conllu_line(1, "w2", "NOUN");
        fs::write(&path, text).unwrap();
        let out = load_conllu(&path, &vocab, &tags, &langs, &LoadOptions::default()).unwrap();
        assert_eq!(out.len(), 1);
        let keep = LoadOptions {
            filter_unknown: false,
            ..LoadOptions::default()
        };
        let out = load_conllu(&path, &vocab, &tags, &langs, &keep).unwrap();
        assert_eq!(out.len(), 2);
        assert_eq!(out[0].sequence.tokens()[1], UNK);
    }

    #[test]
    fn conllu_malformed_line_names_line_number() {
        let (vocab, tags, langs) = fixture();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("en.conllu");
        fs::write(&path, conllu_line(1, "w1", "NOUN") + "2\tw2\tNOUN\n").unwrap();
        let err = load_conllu(&path, &vocab, &tags, &langs, &LoadOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
    }

    #[test]
    fn conllu_empty_file() {
        let (vocab, tags, langs) = fixture();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("en.conllu");
        fs::write(&path, "").unwrap();
        assert!(load_conllu(&path, &vocab, &tags, &langs, &LoadOptions::default())
            .unwrap()
            .is_empty());
    }

    #[test]
    fn nli_combined_length_is_capped() {
        let (vocab, _, langs) = fixture();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("nli.tsv");
        let premise: Vec<String> = (0..100).map(|i| format!("w{i}")).collect();
        let hypothesis: Vec<String> = (100..200).map(|i| format!("w{i}")).collect();
        fs::write(
            &path,
            format!("{}\t{}\tentailment\ten\n", premise.join(" "), hypothesis.join(" ")),
        )
        .unwrap();
        let out = load_nli_tsv(&path, &vocab, &langs, &LoadOptions::default()).unwrap();
        assert_eq!(out[0].sequence.len(), 128);
        let b = out[0].sequence.pair_boundary().unwrap();
        assert_eq!(out[0].sequence.tokens()[b], SEP);
    }

    #[test]
    fn nli_labels() {
        let (vocab, _, langs) = fixture();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("nli.tsv");
        fs::write(
            &path,
            "w1 w2\tw3\tentailment\ten\nw1\tw4\tcontradiction\tfr\nw5\tw6 w7\tneutral\ten\n",
        )
        .unwrap();
        let out = load_nli_tsv(&path, &vocab, &langs, &LoadOptions::default()).unwrap();
        let labels: Vec<_> = out.iter().map(|e| e.labels.clone()).collect();
        assert_eq!(
            labels,
            vec![TaskLabels::Text(0), TaskLabels::Text(2), TaskLabels::Text(1)]
        );

        fs::write(&path, "w1\tw2\tmaybe\ten\n").unwrap();
        assert!(load_nli_tsv(&path, &vocab, &langs, &LoadOptions::default()).is_err());
        fs::write(&path, "w1\tw2\tneutral\n").unwrap();
        let err = load_nli_tsv(&path, &vocab, &langs, &LoadOptions::default()).unwrap_err();
        assert!(err.to_string().contains("missing column"));
    }

    #[test]
    fn lid_min_chars_boundary() {
        let (vocab, _, langs) = fixture();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("lid.tsv");
        let base = vec!["w1"; 32].join(" ");
        let p99 = format!("{base} w10");
        let p100 = format!("{base} w100");
        assert_eq!(p99.chars().count(), 99);
        assert_eq!(p100.chars().count(), 100);
        fs::write(&path, format!("{p99}\ten\n{p100}\tfr\n")).unwrap();
        let out = load_lid_paragraphs(&path, &vocab, &langs, &LoadOptions::default()).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].language, 1);
    }

    #[test]
    fn lid_counts_and_missing_column() {
        let (vocab, _, langs) = fixture();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("lid.tsv");
        let para = vec!["w1"; 40].join(" ");
        let text: String = ["en", "fr"]
            .iter()
            .flat_map(|l| (0..3).map(move |_| l))
            .map(|l| format!("{para}\t{l}\n"))
            .collect();
        fs::write(&path, text).unwrap();
        let out = load_lid_paragraphs(&path, &vocab, &langs, &LoadOptions::default()).unwrap();
        assert_eq!(out.len(), 6);

        fs::write(&path, format!("{para}\n")).unwrap();
        assert!(load_lid_paragraphs(&path, &vocab, &langs, &LoadOptions::default()).is_err());
    }
}
