//! Dataset construction from Wiki-style pages and their cited references.
//!
//! The flow per page is: clean the page and its references, cut each cleaned
//! reference into sentence-aligned windows, keep the window with the highest
//! term recall (`P_ST`) against the sentences citing it, then fill in marks
//! for unmarked sentences and emit generation, retrieval and warm-up rows.

use std::collections::{BTreeMap, HashMap};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use regex::Regex;
use serde::{Deserialize, Serialize};
use std::sync::OnceLock;
use thiserror::Error;

use crate::text::{
    parse_marks, serialize_marked, split_sentences, term_set, token_spans, tokenize,
    MarkedSentence, StopwordSet, TermSet, TextError, TokenSeq,
};

#[derive(Debug, Error, PartialEq)]
pub enum CorpusError {
    #[error("sentence has no non-stopword terms")]
    DegenerateSentence,
    #[error("no passage of document {doc_id} can be scored")]
    NoValidPassage { doc_id: String },
    #[error("only {available} non-positive candidates in the ranking, need {needed}")]
    InsufficientCandidates { available: usize, needed: usize },
    #[error("record {id} has an empty title")]
    EmptyTitle { id: String },
    #[error("record {id}: {source}")]
    Marks { id: String, source: TextError },
}

/// Why a reference document was rejected during cleaning.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Rejection {
    TooShort,
    NonEnglish,
    EmptyAfterCleaning,
}

impl Rejection {
    pub fn as_str(self) -> &'static str {
        match self {
            Rejection::TooShort => "TooShort",
            Rejection::NonEnglish => "NonEnglish",
            Rejection::EmptyAfterCleaning => "EmptyAfterCleaning",
        }
    }
}

/// A Wiki page line as it appears in the input JSONL.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawWikiRecord {
    pub id: String,
    pub title: String,
    pub first_section: String,
    #[serde(default)]
    pub citations: Vec<String>,
}

/// A page whose first section has been cleaned and split into marked sentences.
#[derive(Debug, Clone, PartialEq)]
pub struct WikiRecord {
    pub id: String,
    pub title: String,
    pub first_section: String,
    pub sentences: Vec<MarkedSentence>,
    pub citations: Vec<String>,
}

impl WikiRecord {
    pub fn from_raw(raw: RawWikiRecord, cleaner: &WikiCleaner) -> Result<Self, CorpusError> {
        if raw.title.trim().is_empty() {
            return Err(CorpusError::EmptyTitle { id: raw.id });
        }
        let first_section = cleaner.clean(&raw.first_section);
        let sentences = parse_marks(&first_section, raw.citations.len()).map_err(|source| {
            CorpusError::Marks {
                id: raw.id.clone(),
                source,
            }
        })?;
        Ok(Self {
            id: raw.id,
            title: raw.title,
            first_section,
            sentences,
            citations: raw.citations,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceDoc {
    pub id: String,
    #[serde(default)]
    pub url: String,
    pub raw_text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cleaned_text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rejection: Option<Rejection>,
}

impl ReferenceDoc {
    pub fn new(id: impl Into<String>, raw_text: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            url: String::new(),
            raw_text: raw_text.into(),
            cleaned_text: None,
            rejection: None,
        }
    }

    /// Fills exactly one of `cleaned_text` / `rejection`.
    pub fn clean(&mut self, cleaner: &ReferenceCleaner) {
        match cleaner.clean(&self.raw_text) {
            Ok(text) => {
                self.cleaned_text = Some(text);
                self.rejection = None;
            }
            Err(r) => {
                self.cleaned_text = None;
                self.rejection = Some(r);
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Cleaning
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WikiCleaner {
    pub blacklist: Vec<String>,
}

impl Default for WikiCleaner {
    fn default() -> Self {
        Self {
            blacklist: vec!["You can help Wikipedia by expanding it".to_string()],
        }
    }
}

fn is_art_char(c: char) -> bool {
    matches!(
        c,
        '-' | '=' | '_' | '*' | '#' | '~' | '+' | '|' | '^' | '<' | '>' | '/' | '\\'
    )
}

fn is_box_char(c: char) -> bool {
    ('\u{2500}'..='\u{25FF}').contains(&c)
}

/// Removes `{{...}}` blocks, honoring nesting.
fn strip_templates(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut depth = 0usize;
    let mut rest = s;
    while !rest.is_empty() {
        if rest.starts_with("{{") {
            depth += 1;
            rest = &rest[2..];
        } else if depth > 0 && rest.starts_with("}}") {
            depth -= 1;
            rest = &rest[2..];
        } else {
            let c = rest.chars().next().unwrap();
            if depth == 0 {
                out.push(c);
            }
            rest = &rest[c.len_utf8()..];
        }
    }
    out
}

/// Drops `[[File:..]]`/`[[Image:..]]` links and unwraps `[[target|label]]`.
fn strip_links(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut rest = s;
    while let Some(open) = rest.find("[[") {
        out.push_str(&rest[..open]);
        let after = &rest[open + 2..];
        // Find the matching close, allowing nested links inside captions.
        let mut depth = 1usize;
        let mut i = 0;
        while i < after.len() && depth > 0 {
            if after[i..].starts_with("[[") {
                depth += 1;
                i += 2;
            } else if after[i..].starts_with("]]") {
                depth -= 1;
                i += 2;
            } else {
                i += 1;
                while i < after.len() && !after.is_char_boundary(i) {
                    i += 1;
                }
            }
        }
        let inner = if depth == 0 { &after[..i - 2] } else { after };
        let lower = inner.to_lowercase();
        if !(lower.starts_with("file:") || lower.starts_with("image:")) {
            let label = inner.rsplit('|').next().unwrap_or(inner);
            out.push_str(&strip_links(label));
        }
        rest = if depth == 0 { &after[i..] } else { "" };
    }
    out.push_str(rest);
    out
}

fn strip_symbols(s: &str) -> String {
    let chars: Vec<char> = s.chars().collect();
    let mut out = String::with_capacity(s.len());
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if is_art_char(c) {
            let run = chars[i..].iter().take_while(|&&c| is_art_char(c)).count();
            if run >= 3 {
                out.push(' ');
            } else {
                out.extend(&chars[i..i + run]);
            }
            i += run;
            continue;
        }
        if is_box_char(c) {
            out.push(' ');
        } else if c.is_control() {
            out.push(if c == '\n' { '\n' } else { ' ' });
        } else {
            out.push(c);
        }
        i += 1;
    }
    out
}

/// Collapses whitespace runs and removes spaces left before punctuation.
fn normalize_whitespace(s: &str) -> String {
    let collapsed = s.split_whitespace().collect::<Vec<_>>().join(" ");
    let mut out = String::with_capacity(collapsed.len());
    for c in collapsed.chars() {
        if matches!(c, '.' | ',' | ';' | ':' | '!' | '?') && out.ends_with(' ') {
            out.pop();
        }
        out.push(c);
    }
    out
}

impl WikiCleaner {
    pub fn clean(&self, raw: &str) -> String {
        let mut s = strip_templates(raw);
        s = strip_links(&s);
        s = strip_symbols(&s);
        for phrase in &self.blacklist {
            while let Some(pos) = s.find(phrase.as_str()) {
                let mut end = pos + phrase.len();
                if s[end..].starts_with('.') {
                    end += 1;
                }
                s.replace_range(pos..end, " ");
            }
        }
        normalize_whitespace(&s)
    }
}

/// Cleans with the default boilerplate blacklist.
pub fn clean_wiki(raw: &str) -> String {
    WikiCleaner::default().clean(raw)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceCleaner {
    pub min_words: usize,
    pub max_non_english_ratio: f64,
    pub max_sentence_tokens: usize,
    pub max_column_separators: usize,
}

impl Default for ReferenceCleaner {
    fn default() -> Self {
        Self {
            min_words: 16,
            max_non_english_ratio: 0.3,
            max_sentence_tokens: 256,
            max_column_separators: 3,
        }
    }
}

fn is_latin_letter(c: char) -> bool {
    if c.is_ascii_alphabetic() {
        return true;
    }
    if !c.is_alphabetic() {
        return false;
    }
    matches!(c,
        '\u{00C0}'..='\u{00D6}'
        | '\u{00D8}'..='\u{00F6}'
        | '\u{00F8}'..='\u{024F}'
        | '\u{0250}'..='\u{02AF}'
        | '\u{1E00}'..='\u{1EFF}'
        | '\u{2C60}'..='\u{2C7F}'
        | '\u{A720}'..='\u{A7FF}'
        | '\u{AB30}'..='\u{AB6F}'
        | '\u{FB00}'..='\u{FB06}')
}

/// A token is English-like when every character is a Latin letter or ASCII digit.
pub fn is_english_token(token: &str) -> bool {
    token.chars().all(|c| c.is_ascii_digit() || is_latin_letter(c))
}

fn markup_line_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^\s*(<[^<>]*>\s*)+$").unwrap())
}

fn url_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)\b(?:https?://|www\.)\S+").unwrap())
}

impl ReferenceCleaner {
    pub fn clean(&self, raw: &str) -> Result<String, Rejection> {
        let tokens = tokenize(raw);
        if tokens.len() < self.min_words {
            return Err(Rejection::TooShort);
        }
        let foreign = tokens.iter().filter(|t| !is_english_token(t)).count();
        if foreign as f64 / tokens.len() as f64 > self.max_non_english_ratio {
            return Err(Rejection::NonEnglish);
        }

        let mut kept: Vec<String> = Vec::new();
        for line in raw.lines() {
            if markup_line_re().is_match(line) {
                continue;
            }
            let separators = line.matches(['|', '\t']).count();
            if separators >= self.max_column_separators {
                continue;
            }
            let line = url_re().replace_all(line, " ");
            for sentence in split_sentences(&line) {
                let n = tokenize(&sentence).len();
                if n == 0 || n > self.max_sentence_tokens {
                    continue;
                }
                kept.push(sentence);
            }
        }
        let cleaned = normalize_whitespace(&kept.join(" "));
        let remaining = tokenize(&cleaned).len();
        if remaining == 0 {
            return Err(Rejection::EmptyAfterCleaning);
        }
        if remaining < self.min_words {
            return Err(Rejection::TooShort);
        }
        Ok(cleaned)
    }
}

pub fn clean_reference(raw: &str) -> Result<String, Rejection> {
    ReferenceCleaner::default().clean(raw)
}

// ---------------------------------------------------------------------------
// Term recall
// ---------------------------------------------------------------------------

/// `|((Q ∪ T) ∩ V) − S| / |T − S|`.
///
/// The query terms only ever add to the numerator, so the value can exceed 1.
pub fn compute_pst(
    query: &TermSet,
    sentence: &TermSet,
    reference: &TermSet,
    stop: &StopwordSet,
) -> Result<f64, CorpusError> {
    let denom = sentence.iter().filter(|t| !stop.contains(t)).count();
    if denom == 0 {
        return Err(CorpusError::DegenerateSentence);
    }
    let numer = query
        .union(sentence)
        .filter(|t| reference.contains(*t) && !stop.contains(t))
        .count();
    Ok(numer as f64 / denom as f64)
}

// ---------------------------------------------------------------------------
// Passage windows
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PassageCandidate {
    pub doc_id: String,
    /// First sentence index (inclusive).
    pub start: usize,
    /// Last sentence index (exclusive).
    pub end: usize,
    pub text: String,
    #[serde(skip)]
    pub tokens: TokenSeq,
    pub pst: f64,
}

impl PassageCandidate {
    /// Stable identifier `doc_id:start-end`.
    pub fn passage_id(&self) -> String {
        format!("{}:{}-{}", self.doc_id, self.start, self.end)
    }
}

/// Sentence-aligned windows over a cleaned document, one per start sentence.
///
/// Each window extends greedily while its token total stays within
/// `max_tokens`; a lone sentence longer than that is cut to `max_tokens`.
/// Uncleaned or rejected documents yield no windows.
pub fn window_passages(doc: &ReferenceDoc, max_tokens: usize) -> Vec<PassageCandidate> {
    let Some(text) = doc.cleaned_text.as_deref() else {
        return Vec::new();
    };
    let sentences = split_sentences(text);
    windows_over(&doc.id, &sentences, max_tokens)
}

pub fn windows_over(doc_id: &str, sentences: &[String], max_tokens: usize) -> Vec<PassageCandidate> {
    let toks: Vec<TokenSeq> = sentences.iter().map(|s| tokenize(s)).collect();
    let n = sentences.len();
    let mut out = Vec::with_capacity(n);
    for start in 0..n {
        let mut end = start;
        let mut total = 0usize;
        while end < n && total + toks[end].len() <= max_tokens {
            total += toks[end].len();
            end += 1;
        }
        if end == start {
            // Single over-long sentence: keep its first `max_tokens` tokens.
            let spans = token_spans(&sentences[start]);
            let cut = spans
                .get(max_tokens.saturating_sub(1))
                .map_or(sentences[start].len(), |r| r.end);
            let mut tokens = toks[start].clone();
            tokens.truncate(max_tokens);
            out.push(PassageCandidate {
                doc_id: doc_id.to_string(),
                start,
                end: start + 1,
                text: sentences[start][..cut].to_string(),
                tokens,
                pst: 0.0,
            });
            continue;
        }
        let mut tokens = TokenSeq::default();
        for t in &toks[start..end] {
            tokens.extend(t);
        }
        out.push(PassageCandidate {
            doc_id: doc_id.to_string(),
            start,
            end,
            text: sentences[start..end].join(" "),
            tokens,
            pst: 0.0,
        });
    }
    out
}

/// Picks the window with the highest `P_ST` against the citing sentences.
///
/// The sentence term set is the union over all citing sentences; ties go to
/// the earliest window.
pub fn select_supporting_passage(
    query: &str,
    citing_sentences: &[TokenSeq],
    doc: &ReferenceDoc,
    stop: &StopwordSet,
    max_tokens: usize,
) -> Result<PassageCandidate, CorpusError> {
    let no_passage = || CorpusError::NoValidPassage {
        doc_id: doc.id.clone(),
    };
    let q = term_set(&tokenize(query), stop);
    let mut t = TermSet::new();
    for s in citing_sentences {
        t.extend(term_set(s, stop));
    }
    if t.is_empty() {
        return Err(no_passage());
    }
    let mut best: Option<PassageCandidate> = None;
    for mut w in window_passages(doc, max_tokens) {
        let v = term_set(&w.tokens, stop);
        w.pst = compute_pst(&q, &t, &v, stop).map_err(|_| no_passage())?;
        if best.as_ref().map_or(true, |b| w.pst > b.pst) {
            best = Some(w);
        }
    }
    best.ok_or_else(no_passage)
}

/// Gives every unmarked sentence the 1-based index of its best-scoring
/// passage when that `P_ST` exceeds `rho`; otherwise it stays at 0.
///
/// Sentences that already carry a mark are returned unchanged. Ties go to the
/// lowest passage index.
pub fn assign_marks(
    query: &str,
    sentences: &[MarkedSentence],
    passages: &[PassageCandidate],
    rho: f64,
    stop: &StopwordSet,
) -> Vec<MarkedSentence> {
    let q = term_set(&tokenize(query), stop);
    let refs: Vec<TermSet> = passages.iter().map(|p| term_set(&p.tokens, stop)).collect();
    sentences
        .iter()
        .map(|s| {
            if s.mark != 0 {
                return s.clone();
            }
            let t = term_set(&s.tokens, stop);
            let mut best: Option<(usize, f64)> = None;
            for (k, v) in refs.iter().enumerate() {
                let Ok(p) = compute_pst(&q, &t, v, stop) else {
                    break;
                };
                if best.map_or(true, |(_, b)| p > b) {
                    best = Some((k, p));
                }
            }
            let mark = match best {
                Some((k, p)) if p > rho => k + 1,
                _ => 0,
            };
            MarkedSentence {
                mark,
                ..s.clone()
            }
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Retrieval rows
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalExample {
    pub query: String,
    pub positive_id: String,
    pub negative_ids: Vec<String>,
    /// 1-based ranks of the negatives in the positive-filtered ranking.
    pub negative_ranks: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NegativeSampling {
    /// Inclusive 1-based rank range to sample from.
    pub rank_range: (usize, usize),
    pub count: usize,
}

impl Default for NegativeSampling {
    fn default() -> Self {
        Self {
            rank_range: (30, 50),
            count: 4,
        }
    }
}

/// SplitMix64 step, used to derive independent per-record seeds.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Samples negatives uniformly from the configured rank range.
///
/// The positive (and repeated ids) are removed before ranks are counted. When
/// the range holds fewer than `count` candidates, all of them are taken and
/// the rest come from the deepest ranks above the range.
pub fn build_retrieval_example(
    query: &str,
    positive_id: &str,
    ranking: &[String],
    seed: u64,
    sampling: NegativeSampling,
) -> Result<RetrievalExample, CorpusError> {
    let mut seen = std::collections::HashSet::new();
    let filtered: Vec<&String> = ranking
        .iter()
        .filter(|id| id.as_str() != positive_id && seen.insert(id.as_str()))
        .collect();
    let needed = sampling.count;
    if filtered.len() < needed {
        return Err(CorpusError::InsufficientCandidates {
            available: filtered.len(),
            needed,
        });
    }
    let (lo, hi) = sampling.rank_range;
    let lo_idx = lo.saturating_sub(1).min(filtered.len());
    let hi_idx = hi.min(filtered.len());
    let window = lo_idx..hi_idx.max(lo_idx);

    let mut chosen: Vec<usize> = if window.len() >= needed {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rand::seq::index::sample(&mut rng, window.len(), needed)
            .into_iter()
            .map(|i| window.start + i)
            .collect()
    } else {
        let mut picks: Vec<usize> = window.clone().collect();
        picks.extend((0..window.start).rev().take(needed - picks.len()));
        picks
    };
    chosen.sort_unstable();
    Ok(RetrievalExample {
        query: query.to_string(),
        positive_id: positive_id.to_string(),
        negative_ids: chosen.iter().map(|&i| filtered[i].clone()).collect(),
        negative_ranks: chosen.iter().map(|&i| i + 1).collect(),
    })
}

// ---------------------------------------------------------------------------
// Generation rows
// ---------------------------------------------------------------------------

/// `[query] q [ref_i] v_i` for each reference, `i` 1-based.
pub fn format_fid_inputs<S: AsRef<str>>(query: &str, refs: &[S]) -> Vec<String> {
    refs.iter()
        .enumerate()
        .map(|(i, r)| format!("[query] {query} [ref_{}] {}", i + 1, r.as_ref()))
        .collect()
}

/// Inverse of [`format_fid_inputs`] for one string: `(query, index, reference)`.
pub fn parse_fid_input(input: &str) -> Option<(String, usize, String)> {
    let rest = input.strip_prefix("[query] ")?;
    let mut from = 0;
    while let Some(off) = rest[from..].find(" [ref_") {
        let at = from + off;
        let tail = &rest[at + 6..];
        let digits = tail.bytes().take_while(u8::is_ascii_digit).count();
        if digits > 0 && tail[digits..].starts_with("] ") {
            let index = tail[..digits].parse().ok()?;
            return Some((
                rest[..at].to_string(),
                index,
                tail[digits + 2..].to_string(),
            ));
        }
        from = at + 1;
    }
    None
}

/// A reference passage kept for a page, with its 1-based citation position.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectedRef {
    pub citation: usize,
    pub passage: PassageCandidate,
}

/// What happened to one citation of a page.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RefOutcome {
    Selected,
    Missing,
    Rejected(Rejection),
    NoValidPassage,
    BelowThreshold,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionConfig {
    pub rho: f64,
    pub max_passage_tokens: usize,
    pub max_refs: usize,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self {
            rho: 0.5,
            max_passage_tokens: 256,
            max_refs: 5,
        }
    }
}

/// Selects one supporting passage per citation and keeps those with `P_ST > rho`.
///
/// A citation no sentence points at is scored against the whole first section.
pub fn select_references(
    record: &WikiRecord,
    docs: &HashMap<String, ReferenceDoc>,
    cfg: &SelectionConfig,
    stop: &StopwordSet,
) -> (Vec<SelectedRef>, Vec<RefOutcome>) {
    let mut selected = Vec::new();
    let mut outcomes = Vec::with_capacity(record.citations.len());
    for (idx, doc_id) in record.citations.iter().enumerate() {
        let citation = idx + 1;
        let Some(doc) = docs.get(doc_id) else {
            outcomes.push(RefOutcome::Missing);
            continue;
        };
        if let Some(r) = doc.rejection {
            outcomes.push(RefOutcome::Rejected(r));
            continue;
        }
        let mut citing: Vec<TokenSeq> = record
            .sentences
            .iter()
            .filter(|s| s.mark == citation)
            .map(|s| s.tokens.clone())
            .collect();
        if citing.is_empty() {
            citing = record.sentences.iter().map(|s| s.tokens.clone()).collect();
        }
        match select_supporting_passage(&record.title, &citing, doc, stop, cfg.max_passage_tokens)
        {
            Ok(p) if p.pst > cfg.rho => {
                outcomes.push(RefOutcome::Selected);
                selected.push(SelectedRef {
                    citation,
                    passage: p,
                });
            }
            Ok(_) => outcomes.push(RefOutcome::BelowThreshold),
            Err(_) => outcomes.push(RefOutcome::NoValidPassage),
        }
    }
    (selected, outcomes)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationExample {
    pub id: String,
    pub query: String,
    pub refs: Vec<PassageCandidate>,
    pub target: Vec<MarkedSentence>,
    pub fid_inputs: Vec<String>,
}

/// Serialized form of a generation row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRow {
    pub id: String,
    pub query: String,
    pub refs: Vec<PassageCandidate>,
    pub target: String,
    pub fid_inputs: Vec<String>,
}

impl GenerationExample {
    pub fn to_row(&self) -> GenerationRow {
        GenerationRow {
            id: self.id.clone(),
            query: self.query.clone(),
            refs: self.refs.clone(),
            target: serialize_marked(&self.target),
            fid_inputs: self.fid_inputs.clone(),
        }
    }
}

/// Assembles a generation row from the kept references of a page.
///
/// At most `max_refs` references survive, in citation order. Existing marks
/// are renumbered to the surviving positions; marks whose reference did not
/// survive are reset to 0 and go through [`assign_marks`] like any other
/// unmarked sentence.
pub fn build_generation_example(
    record: &WikiRecord,
    selected: &[SelectedRef],
    cfg: &SelectionConfig,
    stop: &StopwordSet,
) -> GenerationExample {
    let mut kept: Vec<&SelectedRef> = selected.iter().collect();
    kept.sort_by_key(|s| s.citation);
    kept.truncate(cfg.max_refs);
    let renumber: BTreeMap<usize, usize> = kept
        .iter()
        .enumerate()
        .map(|(i, s)| (s.citation, i + 1))
        .collect();
    let remapped: Vec<MarkedSentence> = record
        .sentences
        .iter()
        .map(|s| MarkedSentence {
            mark: renumber.get(&s.mark).copied().unwrap_or(0),
            ..s.clone()
        })
        .collect();
    let refs: Vec<PassageCandidate> = kept.iter().map(|s| s.passage.clone()).collect();
    let target = assign_marks(&record.title, &remapped, &refs, cfg.rho, stop);
    let texts: Vec<&str> = refs.iter().map(|r| r.text.as_str()).collect();
    GenerationExample {
        id: record.id.clone(),
        query: record.title.clone(),
        fid_inputs: format_fid_inputs(&record.title, &texts),
        refs,
        target,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WarmupPair {
    pub query: String,
    pub ref_id: String,
    #[serde(rename = "ref")]
    pub reference: String,
    pub sentence: String,
}

/// One `(query, reference, sentence)` pair per target sentence with a non-zero mark.
pub fn build_warmup_pairs(example: &GenerationExample) -> Vec<WarmupPair> {
    example
        .target
        .iter()
        .filter(|s| s.mark != 0)
        .filter_map(|s| {
            let r = example.refs.get(s.mark - 1)?;
            Some(WarmupPair {
                query: example.query.clone(),
                ref_id: r.passage_id(),
                reference: r.text.clone(),
                sentence: s.text.clone(),
            })
        })
        .collect()
}
