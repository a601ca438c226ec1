//! Refer score and reference-mark relabeling over finished text.
//!
//! Both use the same per-sentence ratio: the share of the reference's
//! non-stopword terms that also occur in the sentence.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text::{term_set, MarkedSentence, StopwordSet, TermSet, TokenSeq};

#[derive(Debug, Error, PartialEq)]
pub enum CitationError {
    #[error("reference has no non-stopword terms")]
    DegenerateReference,
    #[error("sentence {sentence} has mark {mark} but only {refs} references exist")]
    MarkOutOfRange {
        sentence: usize,
        mark: usize,
        refs: usize,
    },
}

/// Generated sentences plus the references their marks point into (1-based).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CitedText {
    pub sentences: Vec<MarkedSentence>,
    pub refs: Vec<TokenSeq>,
}

impl CitedText {
    pub fn new(sentences: Vec<MarkedSentence>, refs: Vec<TokenSeq>) -> Result<Self, CitationError> {
        for (i, s) in sentences.iter().enumerate() {
            if s.mark > refs.len() {
                return Err(CitationError::MarkOutOfRange {
                    sentence: i,
                    mark: s.mark,
                    refs: refs.len(),
                });
            }
        }
        Ok(Self { sentences, refs })
    }

    pub fn marks(&self) -> Vec<usize> {
        self.sentences.iter().map(|s| s.mark).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferScoreReport {
    /// (sentence index, ratio) for every scored sentence.
    pub per_sentence: Vec<(usize, f64)>,
    pub mean: Option<f64>,
    pub n: usize,
}

fn ratio_of_sets(sentence: &TermSet, reference: &TermSet) -> Result<f64, CitationError> {
    if reference.is_empty() {
        return Err(CitationError::DegenerateReference);
    }
    let hit = reference.iter().filter(|t| sentence.contains(*t)).count();
    Ok(hit as f64 / reference.len() as f64)
}

/// `|(T ∩ V) − S| / |V − S|`.
pub fn overlap_ratio(
    sentence: &TokenSeq,
    reference: &TokenSeq,
    stop: &StopwordSet,
) -> Result<f64, CitationError> {
    ratio_of_sets(&term_set(sentence, stop), &term_set(reference, stop))
}

struct Prepared {
    sentences: Vec<TermSet>,
    refs: Vec<TermSet>,
}

impl Prepared {
    fn new(text: &CitedText, stop: &StopwordSet) -> Self {
        Self {
            sentences: text.sentences.iter().map(|s| term_set(&s.tokens, stop)).collect(),
            refs: text.refs.iter().map(|r| term_set(r, stop)).collect(),
        }
    }

    fn ratio(&self, sentence: usize, mark: usize) -> Option<f64> {
        ratio_of_sets(&self.sentences[sentence], &self.refs[mark - 1]).ok()
    }
}

/// Mean ratio over sentences with a non-zero mark. Sentences whose marked
/// reference is all stopwords are not counted.
pub fn refer_score(text: &CitedText, stop: &StopwordSet) -> ReferScoreReport {
    let prep = Prepared::new(text, stop);
    let mut per_sentence = Vec::new();
    for (i, s) in text.sentences.iter().enumerate() {
        if s.mark == 0 {
            continue;
        }
        match prep.ratio(i, s.mark) {
            Some(r) => per_sentence.push((i, r)),
            None => log::debug!("sentence {i} cites a degenerate reference; not scored"),
        }
    }
    let n = per_sentence.len();
    let mean = (n > 0).then(|| per_sentence.iter().map(|p| p.1).sum::<f64>() / n as f64);
    ReferScoreReport { per_sentence, mean, n }
}

/// Moves every non-zero mark to the reference with the largest ratio.
///
/// Ties keep the current mark when it is among the best, otherwise the lowest
/// reference id wins. Zero marks and sentences citing a degenerate reference
/// are left alone.
pub fn red_relabel(text: &CitedText, stop: &StopwordSet) -> CitedText {
    let prep = Prepared::new(text, stop);
    let mut out = text.clone();
    for (i, s) in out.sentences.iter_mut().enumerate() {
        if s.mark == 0 {
            continue;
        }
        let Some(current) = prep.ratio(i, s.mark) else {
            log::debug!("sentence {i} cites a degenerate reference; mark kept");
            continue;
        };
        // Ascending scan with a strict comparison gives the lowest id among
        // refs that beat the current one.
        let mut best = (s.mark, current);
        for k in 1..=text.refs.len() {
            if let Some(r) = prep.ratio(i, k) {
                if r > best.1 {
                    best = (k, r);
                }
            }
        }
        s.mark = best.0;
    }
    out
}
