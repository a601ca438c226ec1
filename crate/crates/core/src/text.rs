//! Tokenization, sentence splitting, stopwords and the reference-mark grammar.
//!
//! Every other module works on the word universes produced here. Tokens are
//! lowercased maximal runs of Unicode letters/digits; nothing else survives.
//! A reference mark is a trailing `[k]` on a sentence, where `k` is the
//! 1-based index of the supporting reference and `[0]` means "unsupported".

use std::collections::BTreeSet;
use std::fmt;
use std::ops::Range;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum TextError {
    #[error("reference mark [{mark}] exceeds the {max_ref} available references")]
    MarkOutOfRange { mark: usize, max_ref: usize },
    #[error("stopword list is empty")]
    EmptyStopwords,
    #[error("reading stopword list: {0}")]
    Io(String),
}

/// Lowercase word tokens of a piece of text.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TokenSeq(Vec<String>);

impl TokenSeq {
    pub fn new(tokens: Vec<String>) -> Self {
        debug_assert!(tokens
            .iter()
            .all(|t| !t.is_empty() && !t.chars().any(char::is_whitespace)));
        Self(tokens)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, String> {
        self.0.iter()
    }

    pub fn as_slice(&self) -> &[String] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<String> {
        self.0
    }

    /// Keeps at most the first `n` tokens.
    pub fn truncate(&mut self, n: usize) {
        self.0.truncate(n);
    }

    pub fn extend(&mut self, other: &TokenSeq) {
        self.0.extend(other.0.iter().cloned());
    }

    pub fn join(&self) -> String {
        self.0.join(" ")
    }
}

impl<'a> IntoIterator for &'a TokenSeq {
    type Item = &'a String;
    type IntoIter = std::slice::Iter<'a, String>;

    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric()
}

/// Byte ranges of every token in `text`, in order.
pub fn token_spans(text: &str) -> Vec<Range<usize>> {
    let mut spans = Vec::new();
    let mut start = None;
    for (i, c) in text.char_indices() {
        match (is_word_char(c), start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                spans.push(s..i);
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        spans.push(s..text.len());
    }
    spans
}

pub fn tokenize(text: &str) -> TokenSeq {
    TokenSeq(
        token_spans(text)
            .into_iter()
            .map(|r| text[r].to_lowercase())
            .collect(),
    )
}

const ABBREVIATIONS: &[&str] = &[
    "dr", "mr", "mrs", "ms", "prof", "sr", "jr", "st", "mt", "ft", "vs", "etc", "e.g", "i.e",
    "inc", "ltd", "co", "corp", "no", "nos", "vol", "pp", "fig", "gen", "gov", "rev", "sgt",
    "capt", "col", "lt", "cmdr", "adm", "hon", "approx", "est", "dept", "univ", "jan", "feb",
    "mar", "apr", "jun", "jul", "aug", "sep", "sept", "oct", "nov", "dec", "u.s", "u.k", "a.m",
    "p.m", "ca", "cf", "al",
];

fn is_abbreviation(word: &str) -> bool {
    let w = word
        .trim_start_matches(|c: char| !c.is_alphanumeric())
        .to_lowercase();
    if w.is_empty() {
        return false;
    }
    // Single initials ("J. Smith").
    if w.chars().count() == 1 && w.chars().all(char::is_alphabetic) {
        return true;
    }
    ABBREVIATIONS.contains(&w.as_str())
}

/// Length in bytes of a `[digits]` mark at the start of `s`, if any.
fn mark_len(s: &str) -> Option<usize> {
    let rest = s.strip_prefix('[')?;
    let digits = rest.chars().take_while(char::is_ascii_digit).count();
    if digits == 0 || !rest[digits..].starts_with(']') {
        return None;
    }
    Some(digits + 2)
}

/// Splits on `.`, `!` or `?` followed by whitespace or end of text.
///
/// Closing quotes/brackets and any trailing reference marks (`[3]`, also
/// `. [1] [2]`) stay with the sentence they follow. A period ending a word in
/// the fixed abbreviation list does not end a sentence.
pub fn split_sentences(text: &str) -> Vec<String> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut start = 0;
    let mut i = 0;
    while i < text.len() {
        let c = bytes[i];
        if !matches!(c, b'.' | b'!' | b'?') {
            i += text[i..].chars().next().map_or(1, char::len_utf8);
            continue;
        }
        let term = i;
        let mut end = i + 1;
        while end < text.len() && matches!(bytes[end], b'.' | b'!' | b'?') {
            end += 1;
        }
        while end < text.len() && matches!(bytes[end], b'"' | b'\'' | b')') {
            end += 1;
        }
        // Attach trailing marks, possibly separated by whitespace.
        loop {
            let ws = text[end..]
                .char_indices()
                .find(|(_, c)| !c.is_whitespace())
                .map_or(text.len() - end, |(k, _)| k);
            match mark_len(&text[end + ws..]) {
                Some(n) => end += ws + n,
                None => break,
            }
        }
        let at_boundary = end >= text.len()
            || text[end..].chars().next().is_some_and(char::is_whitespace);
        if !at_boundary {
            i = end.max(i + 1);
            continue;
        }
        if bytes[term] == b'.' && end == term + 1 {
            let word_start = text[start..term]
                .rfind(char::is_whitespace)
                .map_or(start, |k| start + k + 1);
            if is_abbreviation(&text[word_start..term]) {
                i = end;
                continue;
            }
        }
        let sentence = text[start..end].trim();
        if !sentence.is_empty() {
            out.push(sentence.to_string());
        }
        start = end;
        i = end;
    }
    let tail = text[start..].trim();
    if !tail.is_empty() {
        out.push(tail.to_string());
    }
    out
}

/// A sentence with its reference mark (0 = unsupported claim).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MarkedSentence {
    pub text: String,
    pub tokens: TokenSeq,
    pub mark: usize,
}

impl MarkedSentence {
    pub fn new(text: impl Into<String>, mark: usize) -> Self {
        let text = text.into();
        let tokens = tokenize(&text);
        Self { text, tokens, mark }
    }
}

impl fmt::Display for MarkedSentence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}[{}]", self.text, self.mark)
    }
}

/// Joins sentences with single spaces, each ending in its `[k]` mark.
pub fn serialize_marked(sentences: &[MarkedSentence]) -> String {
    sentences
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join(" ")
}

/// Splits `text` into sentences and strips each one's trailing marks.
///
/// When a sentence carries several trailing marks the first one is kept.
pub fn parse_marks(text: &str, max_ref: usize) -> Result<Vec<MarkedSentence>, TextError> {
    split_sentences(text)
        .into_iter()
        .map(|s| {
            let (body, marks) = strip_trailing_marks(&s);
            for &m in &marks {
                if m > max_ref {
                    return Err(TextError::MarkOutOfRange { mark: m, max_ref });
                }
            }
            Ok(MarkedSentence::new(body, marks.first().copied().unwrap_or(0)))
        })
        .collect()
}

fn strip_trailing_marks(sentence: &str) -> (String, Vec<usize>) {
    let mut body = sentence.trim_end();
    let mut marks = Vec::new();
    while body.ends_with(']') {
        let Some(open) = body.rfind('[') else { break };
        let inner = &body[open + 1..body.len() - 1];
        if inner.is_empty() || !inner.bytes().all(|b| b.is_ascii_digit()) {
            break;
        }
        // Absurdly long digit runs saturate and are caught by the range check.
        marks.push(inner.parse::<usize>().unwrap_or(usize::MAX));
        body = body[..open].trim_end();
    }
    marks.reverse();
    (body.to_string(), marks)
}

const EMBEDDED_STOPWORDS: &str = include_str!("stopwords_en.txt");

/// An immutable, versioned stopword list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StopwordSet {
    words: BTreeSet<String>,
    version: String,
}

impl StopwordSet {
    pub fn new(
        words: impl IntoIterator<Item = String>,
        version: impl Into<String>,
    ) -> Result<Self, TextError> {
        let words: BTreeSet<String> = words
            .into_iter()
            .map(|w| w.trim().to_lowercase())
            .filter(|w| !w.is_empty())
            .collect();
        if words.is_empty() {
            return Err(TextError::EmptyStopwords);
        }
        Ok(Self {
            words,
            version: version.into(),
        })
    }

    /// The embedded English list, version `v1`.
    pub fn english() -> Self {
        Self::parse(EMBEDDED_STOPWORDS, "v1").expect("embedded stopword list is non-empty")
    }

    /// One token per line; blank lines and `#` comments are ignored.
    pub fn parse(contents: &str, version: impl Into<String>) -> Result<Self, TextError> {
        Self::new(
            contents
                .lines()
                .filter(|l| !l.trim_start().starts_with('#'))
                .map(str::to_string),
            version,
        )
    }

    pub fn from_file(path: &Path, version: impl Into<String>) -> Result<Self, TextError> {
        let contents =
            std::fs::read_to_string(path).map_err(|e| TextError::Io(e.to_string()))?;
        Self::parse(&contents, version)
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.contains(word)
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> &BTreeSet<String> {
        &self.words
    }
}

pub type TermSet = BTreeSet<String>;

/// Distinct non-stopword tokens.
pub fn term_set(tokens: &TokenSeq, stop: &StopwordSet) -> TermSet {
    tokens
        .iter()
        .filter(|t| !stop.contains(t))
        .cloned()
        .collect()
}
