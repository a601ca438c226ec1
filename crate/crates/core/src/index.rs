//! Exact inverted-index search over sparse vectors, plus BM25.
//!
//! Documents get dense ids in insertion order; ties in score are broken by
//! that id. Scoring is document-at-a-time over the query's posting lists with
//! a bounded heap, and the per-document sum is accumulated in ascending term
//! order so results match a brute-force [`dot_score`](crate::sparse::dot_score)
//! bit for bit.
//!
//! The same structure serves two modes: pooled weights for sparse dot
//! product, and raw term frequencies for BM25.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap, HashMap, HashSet};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::sparse::{SparseError, SparseVector, Vocabulary};
use crate::text::TokenSeq;

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &[u8; 8] = b"FORGEIDX";

#[derive(Debug, Error, PartialEq)]
pub enum IndexError {
    #[error("document id {0:?} appears more than once")]
    DuplicateDocId(String),
    #[error("index stores {found:?}, operation needs {expected:?}")]
    WrongIndexMode { expected: IndexMode, found: IndexMode },
    #[error("index format version {found}, this build reads version {expected}")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("corrupt index file: {0}")]
    CorruptFile(String),
    #[error("invalid BM25 parameters k1={k1}, b={b}")]
    InvalidParams { k1: f64, b: f64 },
    #[error("io: {0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IndexMode {
    /// Pooled sparse weights, scored by dot product.
    Weighted,
    /// Raw term counts, scored by BM25.
    TermFrequency,
}

impl IndexMode {
    fn flag(self) -> u8 {
        match self {
            IndexMode::Weighted => 0,
            IndexMode::TermFrequency => 1,
        }
    }

    fn from_flag(flag: u8) -> Option<Self> {
        match flag {
            0 => Some(IndexMode::Weighted),
            1 => Some(IndexMode::TermFrequency),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Self { k1: 0.9, b: 0.4 }
    }
}

impl Bm25Params {
    pub fn validate(self) -> Result<Self, IndexError> {
        if self.k1 >= 0.0 && (0.0..=1.0).contains(&self.b) {
            Ok(self)
        } else {
            Err(IndexError::InvalidParams { k1: self.k1, b: self.b })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchHit {
    pub doc_id: String,
    #[serde(skip)]
    pub doc: u32,
    pub score: f64,
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IndexStats {
    pub mode: IndexMode,
    pub format_version: u32,
    pub num_docs: usize,
    pub num_terms: usize,
    pub num_postings: usize,
    pub avg_len: f64,
    pub vocab_hash: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InvertedIndex {
    mode: IndexMode,
    vocab_hash: [u8; 32],
    doc_names: Vec<String>,
    doc_lens: Vec<f64>,
    avg_len: f64,
    postings: Vec<Vec<(u32, f64)>>,
}

type Shard = BTreeMap<u32, Vec<(u32, f64)>>;

/// Builds an index over `docs`, sharded across `threads` workers.
///
/// Shards are merged in document order, so the layout does not depend on the
/// thread count. Document length is the sum of stored weights (the token
/// count in term-frequency mode).
pub fn build_index(
    docs: &[(String, SparseVector)],
    mode: IndexMode,
    vocab_hash: [u8; 32],
    threads: usize,
) -> Result<InvertedIndex, IndexError> {
    let mut seen = HashSet::with_capacity(docs.len());
    for (name, _) in docs {
        if !seen.insert(name.as_str()) {
            return Err(IndexError::DuplicateDocId(name.clone()));
        }
    }
    let threads = threads.max(1);
    let chunk = docs.len().div_ceil(threads).max(1);
    let build_shard = |(ci, part): (usize, &[(String, SparseVector)])| -> Shard {
        let mut shard = Shard::new();
        for (k, (_, v)) in part.iter().enumerate() {
            let doc = (ci * chunk + k) as u32;
            for (term, w) in v.iter() {
                shard.entry(term).or_default().push((doc, w));
            }
        }
        shard
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| IndexError::Io(e.to_string()))?;
    let shards: Vec<Shard> =
        pool.install(|| docs.par_chunks(chunk).enumerate().map(build_shard).collect());

    let num_terms = docs
        .iter()
        .filter_map(|(_, v)| v.entries().last().map(|e| e.0 as usize + 1))
        .max()
        .unwrap_or(0);
    let mut postings: Vec<Vec<(u32, f64)>> = vec![Vec::new(); num_terms];
    for shard in shards {
        for (term, list) in shard {
            postings[term as usize].extend(list);
        }
    }
    let doc_lens: Vec<f64> = docs
        .iter()
        .map(|(_, v)| v.iter().map(|e| e.1).sum())
        .collect();
    let avg_len = if docs.is_empty() {
        0.0
    } else {
        doc_lens.iter().sum::<f64>() / docs.len() as f64
    };
    Ok(InvertedIndex {
        mode,
        vocab_hash,
        doc_names: docs.iter().map(|(n, _)| n.clone()).collect(),
        doc_lens,
        avg_len,
        postings,
    })
}

/// Term counts of `tokens` as a vector over `vocab`, allocating ids as needed.
pub fn term_frequencies(tokens: &TokenSeq, vocab: &mut Vocabulary) -> Result<SparseVector, SparseError> {
    let mut counts: BTreeMap<u32, f64> = BTreeMap::new();
    for t in tokens {
        *counts.entry(vocab.get_or_insert(t)?).or_insert(0.0) += 1.0;
    }
    SparseVector::from_entries(counts)
}

/// Distinct known term ids of a query, ascending; unknown tokens are dropped.
pub fn query_terms(tokens: &TokenSeq, vocab: &Vocabulary) -> Vec<u32> {
    let mut ids: Vec<u32> = tokens.iter().filter_map(|t| vocab.id(t)).collect();
    ids.sort_unstable();
    ids.dedup();
    ids
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Candidate {
    score: f64,
    doc: u32,
}

impl Eq for Candidate {}

impl Ord for Candidate {
    /// Greater means worse: lower score, then higher doc id.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .score
            .total_cmp(&self.score)
            .then(self.doc.cmp(&other.doc))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

struct TopK {
    k: usize,
    heap: BinaryHeap<Candidate>,
}

impl TopK {
    fn new(k: usize) -> Self {
        Self {
            k,
            heap: BinaryHeap::with_capacity(k + 1),
        }
    }

    fn offer(&mut self, c: Candidate) {
        if self.heap.len() < self.k {
            self.heap.push(c);
        } else if let Some(worst) = self.heap.peek() {
            if c < *worst {
                self.heap.pop();
                self.heap.push(c);
            }
        }
    }

    fn into_sorted(self) -> Vec<Candidate> {
        self.heap.into_sorted_vec()
    }
}

impl InvertedIndex {
    pub fn mode(&self) -> IndexMode {
        self.mode
    }

    pub fn num_docs(&self) -> usize {
        self.doc_names.len()
    }

    pub fn avg_len(&self) -> f64 {
        self.avg_len
    }

    pub fn vocab_hash(&self) -> [u8; 32] {
        self.vocab_hash
    }

    pub fn doc_name(&self, doc: u32) -> Option<&str> {
        self.doc_names.get(doc as usize).map(String::as_str)
    }

    pub fn doc_names(&self) -> &[String] {
        &self.doc_names
    }

    pub fn doc_len(&self, doc: u32) -> f64 {
        self.doc_lens[doc as usize]
    }

    pub fn postings(&self, term: u32) -> &[(u32, f64)] {
        self.postings.get(term as usize).map_or(&[], Vec::as_slice)
    }

    pub fn doc_freq(&self, term: u32) -> usize {
        self.postings(term).len()
    }

    pub fn num_terms(&self) -> usize {
        self.postings.len()
    }

    /// Rebuilds every document's stored vector from the postings.
    pub fn doc_vectors(&self) -> Vec<SparseVector> {
        let mut rows: Vec<Vec<(u32, f64)>> = vec![Vec::new(); self.num_docs()];
        for (term, list) in self.postings.iter().enumerate() {
            for &(doc, w) in list {
                rows[doc as usize].push((term as u32, w));
            }
        }
        rows.into_iter()
            .map(|r| SparseVector::from_entries(r).expect("postings hold positive unique weights"))
            .collect()
    }

    pub fn stats(&self) -> IndexStats {
        IndexStats {
            mode: self.mode,
            format_version: FORMAT_VERSION,
            num_docs: self.num_docs(),
            num_terms: self.postings.iter().filter(|p| !p.is_empty()).count(),
            num_postings: self.postings.iter().map(Vec::len).sum(),
            avg_len: self.avg_len,
            vocab_hash: self.vocab_hash.iter().map(|b| format!("{b:02x}")).collect(),
        }
    }

    /// Document-at-a-time merge of the given `(term, query weight)` cursors.
    fn daat(
        &self,
        terms: &[(u32, f64)],
        k: usize,
        contribution: impl Fn(f64, f64, u32) -> f64,
    ) -> Vec<SearchHit> {
        if k == 0 {
            return Vec::new();
        }
        let lists: Vec<(u32, f64, &[(u32, f64)])> = terms
            .iter()
            .map(|&(t, qw)| (t, qw, self.postings(t)))
            .filter(|(_, _, l)| !l.is_empty())
            .collect();
        let mut pos = vec![0usize; lists.len()];
        let mut top = TopK::new(k);
        loop {
            let current = lists
                .iter()
                .zip(&pos)
                .filter_map(|((_, _, l), &p)| l.get(p).map(|e| e.0))
                .min();
            let Some(doc) = current else { break };
            let mut score = 0.0;
            for (c, (_, qw, list)) in lists.iter().enumerate() {
                if let Some(&(d, w)) = list.get(pos[c]) {
                    if d == doc {
                        score += contribution(*qw, w, doc);
                        pos[c] += 1;
                    }
                }
            }
            top.offer(Candidate { score, doc });
        }
        top.into_sorted()
            .into_iter()
            .enumerate()
            .map(|(i, c)| SearchHit {
                doc_id: self.doc_names[c.doc as usize].clone(),
                doc: c.doc,
                score: c.score,
                rank: i + 1,
            })
            .collect()
    }

    /// Top-`k` documents by sparse dot product with `q`.
    pub fn search(&self, q: &SparseVector, k: usize) -> Result<Vec<SearchHit>, IndexError> {
        if self.mode != IndexMode::Weighted {
            return Err(IndexError::WrongIndexMode {
                expected: IndexMode::Weighted,
                found: self.mode,
            });
        }
        Ok(self.daat(q.entries(), k, |qw, dw, _| qw * dw))
    }

    pub fn bm25_idf(&self, term: u32) -> f64 {
        let n = self.num_docs() as f64;
        let df = self.doc_freq(term) as f64;
        (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
    }

    /// Top-`k` documents by BM25 over the distinct `terms` of a query.
    pub fn search_bm25(
        &self,
        terms: &[u32],
        k: usize,
        params: Bm25Params,
    ) -> Result<Vec<SearchHit>, IndexError> {
        if self.mode != IndexMode::TermFrequency {
            return Err(IndexError::WrongIndexMode {
                expected: IndexMode::TermFrequency,
                found: self.mode,
            });
        }
        let params = params.validate()?;
        let mut unique: Vec<u32> = terms.to_vec();
        unique.sort_unstable();
        unique.dedup();
        let weighted: Vec<(u32, f64)> = unique.iter().map(|&t| (t, self.bm25_idf(t))).collect();
        let avg = self.avg_len;
        let lens = &self.doc_lens;
        let hits = self.daat(&weighted, k, |idf, tf, doc| {
            let norm = 1.0 - params.b + params.b * lens[doc as usize] / avg;
            idf * tf / (tf + params.k1 * norm)
        });
        Ok(hits)
    }

    // -----------------------------------------------------------------------
    // Persistence
    // -----------------------------------------------------------------------

    /// Magic, version, mode flag, vocabulary hash, document table, average
    /// length, length-prefixed posting lists, then a SHA-256 of everything
    /// before it. All integers little-endian.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.push(self.mode.flag());
        out.extend_from_slice(&self.vocab_hash);
        out.extend_from_slice(&(self.doc_names.len() as u64).to_le_bytes());
        for (name, len) in self.doc_names.iter().zip(&self.doc_lens) {
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.extend_from_slice(&len.to_bits().to_le_bytes());
        }
        out.extend_from_slice(&self.avg_len.to_bits().to_le_bytes());
        out.extend_from_slice(&(self.postings.len() as u64).to_le_bytes());
        for list in &self.postings {
            out.extend_from_slice(&(list.len() as u32).to_le_bytes());
            for &(doc, w) in list {
                out.extend_from_slice(&doc.to_le_bytes());
                out.extend_from_slice(&w.to_bits().to_le_bytes());
            }
        }
        let digest = Sha256::digest(&out);
        out.extend_from_slice(&digest);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, IndexError> {
        let corrupt = |m: &str| IndexError::CorruptFile(m.to_string());
        if bytes.len() < MAGIC.len() + 4 || &bytes[..MAGIC.len()] != MAGIC {
            return Err(corrupt("bad magic bytes"));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
        if version != FORMAT_VERSION {
            return Err(IndexError::VersionMismatch {
                found: version,
                expected: FORMAT_VERSION,
            });
        }
        if bytes.len() < 12 + 32 {
            return Err(corrupt("file too short"));
        }
        let (body, digest) = bytes.split_at(bytes.len() - 32);
        if Sha256::digest(body).as_slice() != digest {
            return Err(corrupt("checksum mismatch"));
        }
        let mut r = Reader { buf: body, pos: 12 };
        let mode = IndexMode::from_flag(r.u8()?).ok_or_else(|| corrupt("unknown mode flag"))?;
        let vocab_hash: [u8; 32] = r.take(32)?.try_into().unwrap();
        let n_docs = r.u64()? as usize;
        let mut doc_names = Vec::with_capacity(n_docs.min(1 << 20));
        let mut doc_lens = Vec::with_capacity(n_docs.min(1 << 20));
        let mut names = HashMap::new();
        for i in 0..n_docs {
            let len = r.u32()? as usize;
            let name = String::from_utf8(r.take(len)?.to_vec())
                .map_err(|_| corrupt("document name is not UTF-8"))?;
            if names.insert(name.clone(), i).is_some() {
                return Err(corrupt("duplicate document name"));
            }
            doc_names.push(name);
            doc_lens.push(r.f64()?);
        }
        let avg_len = r.f64()?;
        let n_terms = r.u64()? as usize;
        let mut postings = Vec::with_capacity(n_terms.min(1 << 24));
        for _ in 0..n_terms {
            let len = r.u32()? as usize;
            let mut list = Vec::with_capacity(len.min(n_docs));
            let mut prev: Option<u32> = None;
            for _ in 0..len {
                let doc = r.u32()?;
                let w = r.f64()?;
                if doc as usize >= n_docs || prev.is_some_and(|p| p >= doc) {
                    return Err(corrupt("posting list out of order or out of range"));
                }
                if !(w.is_finite() && w > 0.0) {
                    return Err(corrupt("non-positive posting weight"));
                }
                prev = Some(doc);
                list.push((doc, w));
            }
            postings.push(list);
        }
        if r.pos != body.len() {
            return Err(corrupt("trailing bytes"));
        }
        Ok(Self {
            mode,
            vocab_hash,
            doc_names,
            doc_lens,
            avg_len,
            postings,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), IndexError> {
        std::fs::write(path, self.to_bytes()).map_err(|e| IndexError::Io(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, IndexError> {
        let bytes = std::fs::read(path).map_err(|e| IndexError::Io(e.to_string()))?;
        Self::from_bytes(&bytes)
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], IndexError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| IndexError::CorruptFile("unexpected end of file".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, IndexError> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32, IndexError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, IndexError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, IndexError> {
        Ok(f64::from_bits(self.u64()?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::tokenize;

    fn sv(e: &[(u32, f64)]) -> SparseVector {
        SparseVector::from_entries(e.iter().copied()).unwrap()
    }

    fn weighted(docs: &[(&str, &[(u32, f64)])]) -> InvertedIndex {
        let docs: Vec<(String, SparseVector)> =
            docs.iter().map(|(n, e)| (n.to_string(), sv(e))).collect();
        build_index(&docs, IndexMode::Weighted, [0; 32], 1).unwrap()
    }

    fn tf_index(texts: &[&str]) -> (InvertedIndex, Vocabulary) {
        let mut vocab = Vocabulary::new();
        let docs: Vec<(String, SparseVector)> = texts
            .iter()
            .enumerate()
            .map(|(i, t)| (format!("d{}", i + 1), term_frequencies(&tokenize(t), &mut vocab).unwrap()))
            .collect();
        let idx = build_index(&docs, IndexMode::TermFrequency, vocab.hash(), 1).unwrap();
        (idx, vocab)
    }

    #[test]
    fn build_examples() {
        let idx = weighted(&[("a", &[(0, 2.0), (1, 1.0)]), ("b", &[(2, 3.0)])]);
        let hits = idx.search(&sv(&[(2, 0.5)]), 10).unwrap();
        assert_eq!(hits.len(), 1);
        assert_eq!((hits[0].doc_id.as_str(), hits[0].score, hits[0].rank), ("b", 1.5, 1));

        let empty = build_index(&[], IndexMode::Weighted, [0; 32], 4).unwrap();
        assert_eq!(empty.num_docs(), 0);
        assert!(empty.search(&sv(&[(0, 1.0)]), 5).unwrap().is_empty());

        let dup = vec![("x".to_string(), sv(&[(0, 1.0)])), ("x".to_string(), sv(&[(1, 1.0)]))];
        assert_eq!(
            build_index(&dup, IndexMode::Weighted, [0; 32], 1),
            Err(IndexError::DuplicateDocId("x".into()))
        );
    }

    #[test]
    fn search_examples() {
        let idx = weighted(&[("d1", &[(0, 2.0)]), ("d2", &[(0, 1.0)])]);
        let hits = idx.search(&sv(&[(0, 1.0)]), 5).unwrap();
        let got: Vec<_> = hits.iter().map(|h| (h.doc_id.as_str(), h.score)).collect();
        assert_eq!(got, vec![("d1", 2.0), ("d2", 1.0)]);

        assert!(idx.search(&sv(&[(7, 1.0)]), 5).unwrap().is_empty());

        let idx = weighted(&[("d1", &[(0, 1.0)]), ("d2", &[(0, 1.0)]), ("d3", &[(0, 1.0)])]);
        let hits = idx.search(&sv(&[(0, 1.0)]), 2).unwrap();
        let got: Vec<_> = hits.iter().map(|h| (h.doc_id.as_str(), h.rank)).collect();
        assert_eq!(got, vec![("d1", 1), ("d2", 2)]);
    }

    #[test]
    fn bm25_examples() {
        let (idx, vocab) = tf_index(&["apple pie", "banana pie"]);
        let hits = idx
            .search_bm25(&query_terms(&tokenize("apple"), &vocab), 5, Bm25Params::default())
            .unwrap();
        assert_eq!(hits.len(), 1);
        assert_eq!(hits[0].doc_id, "d1");

        let none = query_terms(&tokenize("zebra quartz"), &vocab);
        assert!(idx.search_bm25(&none, 5, Bm25Params::default()).unwrap().is_empty());

        let (idx, vocab) = tf_index(&["cat dog", "cat cat mouse", "bird"]);
        let hits = idx
            .search_bm25(&query_terms(&tokenize("cat"), &vocab), 5, Bm25Params::default())
            .unwrap();
        assert_eq!(hits.len(), 2);
        assert_eq!(hits[0].doc_id, "d2");
        assert!((hits[0].score - 0.30519716184788026).abs() < 1e-9);
        assert!((hits[1].score - 0.24737033118196614).abs() < 1e-9);

        assert!(matches!(
            idx.search(&sv(&[(0, 1.0)]), 3),
            Err(IndexError::WrongIndexMode { .. })
        ));
        let w = weighted(&[("a", &[(0, 1.0)])]);
        assert!(matches!(
            w.search_bm25(&[0], 3, Bm25Params::default()),
            Err(IndexError::WrongIndexMode { .. })
        ));
    }

    #[test]
    fn persistence_round_trip_and_errors() {
        let idx = weighted(&[("a", &[(0, 2.0), (3, 0.25)]), ("b", &[(3, 3.0)])]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("idx.bin");
        idx.save(&path).unwrap();
        let loaded = InvertedIndex::load(&path).unwrap();
        assert_eq!(loaded, idx);
        let q = sv(&[(3, 1.0)]);
        assert_eq!(loaded.search(&q, 5).unwrap(), idx.search(&q, 5).unwrap());

        let bytes = idx.to_bytes();
        assert!(matches!(
            InvertedIndex::from_bytes(&bytes[..bytes.len() - 5]),
            Err(IndexError::CorruptFile(_))
        ));
        let mut flipped = bytes.clone();
        flipped[20] ^= 1;
        assert!(matches!(InvertedIndex::from_bytes(&flipped), Err(IndexError::CorruptFile(_))));

        let mut old = bytes.clone();
        old[8..12].copy_from_slice(&0u32.to_le_bytes());
        assert_eq!(
            InvertedIndex::from_bytes(&old),
            Err(IndexError::VersionMismatch { found: 0, expected: FORMAT_VERSION })
        );
        assert!(matches!(InvertedIndex::from_bytes(b"nope"), Err(IndexError::CorruptFile(_))));
    }

    #[test]
    fn doc_vectors_invert_postings() {
        let idx = weighted(&[("a", &[(0, 2.0), (3, 0.25)]), ("b", &[]), ("c", &[(3, 3.0)])]);
        let v = idx.doc_vectors();
        assert_eq!(v[0], sv(&[(0, 2.0), (3, 0.25)]));
        assert!(v[1].is_empty());
        assert_eq!(idx.stats().num_postings, 3);
    }
}
