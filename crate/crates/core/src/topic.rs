//! Topic distance between retrieved documents and the consistency/diversity
//! filter built on it.
//!
//! A document's signature is the set of vocabulary ids whose pooled weight
//! exceeds `mu`. The distance `|a △ b| / (|a| + |b|)` is 0 for identical
//! signatures and 1 for disjoint ones.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sparse::SparseVector;

#[derive(Debug, Error, PartialEq)]
pub enum TopicError {
    #[error("signatures were binarized with different thresholds ({0} vs {1})")]
    MuMismatch(f64, f64),
    #[error("invalid filter bounds lower={lower}, upper={upper}")]
    InvalidBounds { lower: f64, upper: f64 },
    #[error("threshold must be non-negative, got {0}")]
    NegativeMu(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinarySignature {
    /// Ascending ids with weight strictly above `mu`.
    pub active: Vec<u32>,
    pub mu: f64,
}

pub fn binarize(v: &SparseVector, mu: f64) -> BinarySignature {
    BinarySignature {
        active: v.iter().filter(|&(_, w)| w > mu).map(|(j, _)| j).collect(),
        mu,
    }
}

fn symmetric_difference(a: &[u32], b: &[u32]) -> usize {
    let (mut i, mut k, mut shared) = (0, 0, 0);
    while i < a.len() && k < b.len() {
        match a[i].cmp(&b[k]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => k += 1,
            std::cmp::Ordering::Equal => {
                shared += 1;
                i += 1;
                k += 1;
            }
        }
    }
    a.len() + b.len() - 2 * shared
}

/// `|a △ b| / (|a| + |b|)`; two empty signatures are at distance 0.
pub fn topic_distance(a: &BinarySignature, b: &BinarySignature) -> Result<f64, TopicError> {
    if a.mu.to_bits() != b.mu.to_bits() {
        return Err(TopicError::MuMismatch(a.mu, b.mu));
    }
    let total = a.active.len() + b.active.len();
    if total == 0 {
        log::debug!("topic distance between two empty signatures treated as 0");
        return Ok(0.0);
    }
    Ok(symmetric_difference(&a.active, &b.active) as f64 / total as f64)
}

/// How the binarization threshold is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MuSpec {
    Absolute(f64),
    /// Fraction of the largest weight seen across the hit set.
    RelativeToMax(f64),
}

impl Default for MuSpec {
    fn default() -> Self {
        MuSpec::RelativeToMax(0.25)
    }
}

impl MuSpec {
    pub fn resolve<'a>(self, vectors: impl IntoIterator<Item = &'a SparseVector>) -> f64 {
        match self {
            MuSpec::Absolute(mu) => mu,
            MuSpec::RelativeToMax(frac) => {
                frac * vectors.into_iter().map(SparseVector::max_weight).fold(0.0, f64::max)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterConfig {
    pub mu: MuSpec,
    pub upper: f64,
    pub lower: f64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            mu: MuSpec::default(),
            upper: 0.9,
            lower: 0.1,
        }
    }
}

impl FilterConfig {
    pub fn validate(self) -> Result<Self, TopicError> {
        if !(0.0 <= self.lower && self.lower < self.upper && self.upper <= 1.0) {
            return Err(TopicError::InvalidBounds {
                lower: self.lower,
                upper: self.upper,
            });
        }
        let (MuSpec::Absolute(mu) | MuSpec::RelativeToMax(mu)) = self.mu;
        if mu < 0.0 {
            return Err(TopicError::NegativeMu(mu));
        }
        Ok(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropReason {
    /// Too far from the top-ranked document.
    Irrelevant,
    /// Too close to an earlier kept document.
    Redundant,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FilterOutcome {
    /// Indices into the input, in rank order.
    pub kept: Vec<usize>,
    pub dropped: Vec<(usize, DropReason)>,
}

/// Two passes over signatures in rank order.
///
/// First every document farther than `upper` from the top hit is dropped as
/// irrelevant. Then, scanning the survivors, a document closer than `lower`
/// to any already-kept document is dropped as redundant. The top hit is
/// always kept; nothing is reordered.
pub fn consistency_filter(
    signatures: &[BinarySignature],
    upper: f64,
    lower: f64,
) -> Result<FilterOutcome, TopicError> {
    let mut out = FilterOutcome::default();
    let Some(top) = signatures.first() else {
        return Ok(out);
    };
    let mut survivors = vec![0];
    for (i, s) in signatures.iter().enumerate().skip(1) {
        if topic_distance(top, s)? > upper {
            out.dropped.push((i, DropReason::Irrelevant));
        } else {
            survivors.push(i);
        }
    }
    for &i in &survivors {
        let mut redundant = false;
        for &j in &out.kept {
            if topic_distance(&signatures[i], &signatures[j])? < lower {
                redundant = true;
                break;
            }
        }
        if redundant {
            out.dropped.push((i, DropReason::Redundant));
        } else {
            out.kept.push(i);
        }
    }
    out.dropped.sort_by_key(|d| d.0);
    Ok(out)
}

/// Resolves `mu` over the hit vectors, binarizes, and filters.
pub fn rerank_vectors(vectors: &[&SparseVector], cfg: &FilterConfig) -> Result<FilterOutcome, TopicError> {
    let cfg = cfg.validate()?;
    let mu = cfg.mu.resolve(vectors.iter().copied());
    let sigs: Vec<BinarySignature> = vectors.iter().map(|v| binarize(v, mu)).collect();
    consistency_filter(&sigs, cfg.upper, cfg.lower)
}
