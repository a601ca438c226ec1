//! Retrieval metrics (recall at k, P@1, MRR, MAP) and n-gram generation
//! metrics (BLEU, ROUGE-L).

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text::TokenSeq;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("no relevance judgments for queries: {0:?}")]
    MissingQrels(Vec<String>),
    #[error("candidate is empty")]
    EmptyCandidate,
    #[error("no references given")]
    NoReferences,
    #[error("max_n must be at least 1")]
    InvalidOrder,
}

pub type QrelSet = BTreeMap<String, BTreeSet<String>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub metrics: BTreeMap<String, f64>,
    pub queries: usize,
}

pub const DEFAULT_CUTOFFS: [usize; 4] = [1, 5, 10, 20];

/// Macro-averaged metrics over every query in `runs`.
///
/// Queries with an empty relevance set count as missing.
pub fn retrieval_metrics(
    runs: &BTreeMap<String, Vec<String>>,
    qrels: &QrelSet,
    cutoffs: &[usize],
) -> Result<MetricReport, EvalError> {
    let missing: Vec<String> = runs
        .keys()
        .filter(|q| qrels.get(*q).map_or(true, BTreeSet::is_empty))
        .cloned()
        .collect();
    if !missing.is_empty() {
        return Err(EvalError::MissingQrels(missing));
    }

    let mut sums: BTreeMap<String, f64> = BTreeMap::new();
    for k in cutoffs {
        sums.insert(format!("R@{k}"), 0.0);
    }
    for key in ["P@1", "MRR", "MAP"] {
        sums.insert(key.to_string(), 0.0);
    }

    for (q, ranked) in runs {
        let relevant = &qrels[q];
        let mut seen = BTreeSet::new();
        let hits: Vec<bool> = ranked
            .iter()
            .map(|d| seen.insert(d.as_str()) && relevant.contains(d))
            .collect();
        for k in cutoffs {
            let found = hits.iter().take(*k).filter(|&&h| h).count();
            *sums.get_mut(&format!("R@{k}")).unwrap() += found as f64 / relevant.len() as f64;
        }
        if hits.first() == Some(&true) {
            *sums.get_mut("P@1").unwrap() += 1.0;
        }
        if let Some(pos) = hits.iter().position(|&h| h) {
            *sums.get_mut("MRR").unwrap() += 1.0 / (pos + 1) as f64;
        }
        let mut found = 0usize;
        let mut ap = 0.0;
        for (i, &h) in hits.iter().enumerate() {
            if h {
                found += 1;
                ap += found as f64 / (i + 1) as f64;
            }
        }
        *sums.get_mut("MAP").unwrap() += ap / relevant.len() as f64;
    }

    let n = runs.len();
    let metrics = sums
        .into_iter()
        .map(|(k, v)| (k, if n == 0 { 0.0 } else { v / n as f64 }))
        .collect();
    Ok(MetricReport { metrics, queries: n })
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *counts.entry(w).or_insert(0) += 1;
        }
    }
    counts
}

/// Clipped matches and candidate total for n-grams of order `n`.
fn clipped(candidate: &[String], references: &[&[String]], n: usize) -> (usize, usize) {
    let cand = ngram_counts(candidate, n);
    let mut max_ref: HashMap<&[String], usize> = HashMap::new();
    for r in references {
        for (g, c) in ngram_counts(r, n) {
            let e = max_ref.entry(g).or_insert(0);
            *e = (*e).max(c);
        }
    }
    let matched = cand
        .iter()
        .map(|(g, &c)| c.min(max_ref.get(g).copied().unwrap_or(0)))
        .sum();
    (matched, candidate.len().saturating_sub(n - 1))
}

/// Reference length closest to `len`; the shorter one wins ties.
fn closest_ref_len(len: usize, references: &[&[String]]) -> usize {
    references
        .iter()
        .map(|r| r.len())
        .min_by_key(|&r| (r.abs_diff(len), r))
        .unwrap_or(0)
}

#[derive(Debug, Clone, Default)]
struct BleuStats {
    matched: Vec<usize>,
    total: Vec<usize>,
    cand_len: usize,
    ref_len: usize,
}

impl BleuStats {
    fn new(max_n: usize) -> Self {
        Self {
            matched: vec![0; max_n],
            total: vec![0; max_n],
            ..Default::default()
        }
    }

    fn add(&mut self, candidate: &[String], references: &[&[String]]) {
        for n in 1..=self.matched.len() {
            let (m, t) = clipped(candidate, references, n);
            self.matched[n - 1] += m;
            self.total[n - 1] += t;
        }
        self.cand_len += candidate.len();
        self.ref_len += closest_ref_len(candidate.len(), references);
    }

    fn score(&self) -> f64 {
        let max_n = self.matched.len();
        let mut log_sum = 0.0;
        for n in 0..max_n {
            let (m, t) = if n == 0 {
                (self.matched[0] as f64, self.total[0] as f64)
            } else {
                (self.matched[n] as f64 + 1.0, self.total[n] as f64 + 1.0)
            };
            if m == 0.0 || t == 0.0 {
                return 0.0;
            }
            log_sum += (m / t).ln();
        }
        let bp = if self.cand_len >= self.ref_len {
            1.0
        } else {
            (1.0 - self.ref_len as f64 / self.cand_len as f64).exp()
        };
        bp * (log_sum / max_n as f64).exp()
    }
}

fn check_order(max_n: usize) -> Result<(), EvalError> {
    if max_n == 0 {
        return Err(EvalError::InvalidOrder);
    }
    Ok(())
}

/// Sentence BLEU with brevity penalty; orders 2 and up are add-one smoothed.
pub fn bleu(candidate: &TokenSeq, references: &[TokenSeq], max_n: usize) -> Result<f64, EvalError> {
    check_order(max_n)?;
    if candidate.is_empty() {
        return Err(EvalError::EmptyCandidate);
    }
    if references.is_empty() {
        return Err(EvalError::NoReferences);
    }
    let refs: Vec<&[String]> = references.iter().map(TokenSeq::as_slice).collect();
    let mut stats = BleuStats::new(max_n);
    stats.add(candidate.as_slice(), &refs);
    Ok(stats.score())
}

/// Corpus BLEU: n-gram counts and lengths are pooled before combining.
pub fn corpus_bleu(pairs: &[(TokenSeq, Vec<TokenSeq>)], max_n: usize) -> Result<f64, EvalError> {
    check_order(max_n)?;
    let mut stats = BleuStats::new(max_n);
    for (cand, references) in pairs {
        if cand.is_empty() {
            return Err(EvalError::EmptyCandidate);
        }
        if references.is_empty() {
            return Err(EvalError::NoReferences);
        }
        let refs: Vec<&[String]> = references.iter().map(TokenSeq::as_slice).collect();
        stats.add(cand.as_slice(), &refs);
    }
    if stats.cand_len == 0 {
        return Err(EvalError::EmptyCandidate);
    }
    Ok(stats.score())
}

pub fn lcs_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y {
                prev[j] + 1
            } else {
                cur[j].max(prev[j + 1])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RougeScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// LCS-based precision, recall and balanced F. Empty inputs score zero.
pub fn rouge_l(candidate: &TokenSeq, reference: &TokenSeq) -> RougeScore {
    let lcs = lcs_len(candidate.as_slice(), reference.as_slice()) as f64;
    if lcs == 0.0 {
        return RougeScore {
            precision: 0.0,
            recall: 0.0,
            f1: 0.0,
        };
    }
    let precision = lcs / candidate.len() as f64;
    let recall = lcs / reference.len() as f64;
    RougeScore {
        precision,
        recall,
        f1: 2.0 * precision * recall / (precision + recall),
    }
}

/// BLEU-1, BLEU-4 (corpus level) and mean ROUGE-L over candidate/target pairs.
pub fn generation_metrics(pairs: &[(TokenSeq, TokenSeq)]) -> Result<MetricReport, EvalError> {
    let mut metrics = BTreeMap::new();
    if pairs.is_empty() {
        return Ok(MetricReport { metrics, queries: 0 });
    }
    let corpus: Vec<(TokenSeq, Vec<TokenSeq>)> =
        pairs.iter().map(|(c, t)| (c.clone(), vec![t.clone()])).collect();
    metrics.insert("BLEU-1".to_string(), corpus_bleu(&corpus, 1)?);
    metrics.insert("BLEU-4".to_string(), corpus_bleu(&corpus, 4)?);
    let n = pairs.len() as f64;
    let (mut p, mut r, mut f) = (0.0, 0.0, 0.0);
    for (c, t) in pairs {
        let s = rouge_l(c, t);
        p += s.precision;
        r += s.recall;
        f += s.f1;
    }
    metrics.insert("ROUGE-L-P".to_string(), p / n);
    metrics.insert("ROUGE-L-R".to_string(), r / n);
    metrics.insert("ROUGE-L-F".to_string(), f / n);
    Ok(MetricReport {
        metrics,
        queries: pairs.len(),
    })
}
