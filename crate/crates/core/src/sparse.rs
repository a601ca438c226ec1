//! Sparse lexical representations and the retriever training objective.
//!
//! A text of `n` tokens is described by `n` importance rows over the
//! vocabulary. Its sparse vector is the column-wise max of
//! `log(1 + relu(w))`; documents are scored by dot product. Training combines
//! a softmax ranking loss with a light L1 penalty on queries and a heavier
//! FLOPS penalty on documents.
//!
//! Neural importance rows can be imported from JSONL; without a model the
//! idf-based surrogate in [`encode_surrogate`] stands in. The surrogate is
//! not SPLADE, it only makes the rest of the pipeline executable.

use std::collections::{BTreeMap, HashMap};
use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::text::TokenSeq;

#[derive(Debug, Error, PartialEq)]
pub enum SparseError {
    #[error("importance matrix has no rows")]
    EmptyInput,
    #[error("batch is empty")]
    EmptyBatch,
    #[error("item {0} has no negatives")]
    NoNegatives(usize),
    #[error("token {0:?} is not in the frozen vocabulary")]
    UnknownToken(String),
    #[error("duplicate vocabulary entry {0:?}")]
    DuplicateToken(String),
    #[error("weight {weight} for id {id} is not a positive finite number")]
    InvalidWeight { id: u32, weight: f64 },
    #[error("id {id} appears twice")]
    DuplicateId { id: u32 },
    #[error("id {id} is outside the vocabulary of size {dim}")]
    IdOutOfRange { id: u32, dim: usize },
    #[error("line {line}: {message}")]
    SchemaError { line: usize, message: String },
    #[error("io: {0}")]
    Io(String),
}

// ---------------------------------------------------------------------------
// Vocabulary
// ---------------------------------------------------------------------------

/// Bijective token ↔ dense id map.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Vocabulary {
    ids: HashMap<String, u32>,
    tokens: Vec<String>,
    frozen: bool,
}

impl Vocabulary {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_tokens<I, S>(tokens: I) -> Result<Self, SparseError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut v = Self::new();
        for t in tokens {
            let t = t.into();
            if v.ids.contains_key(&t) {
                return Err(SparseError::DuplicateToken(t));
            }
            v.insert_new(t);
        }
        Ok(v)
    }

    /// Token-per-line file; the line number is the id. Loaded vocabularies are frozen.
    pub fn from_file(path: &Path) -> Result<Self, SparseError> {
        let text = std::fs::read_to_string(path).map_err(|e| SparseError::Io(e.to_string()))?;
        let mut v = Self::from_tokens(text.lines())?;
        v.freeze();
        Ok(v)
    }

    pub fn write_file(&self, path: &Path) -> Result<(), SparseError> {
        let mut out = String::new();
        for t in &self.tokens {
            out.push_str(t);
            out.push('\n');
        }
        std::fs::write(path, out).map_err(|e| SparseError::Io(e.to_string()))
    }

    fn insert_new(&mut self, token: String) -> u32 {
        let id = self.tokens.len() as u32;
        self.ids.insert(token.clone(), id);
        self.tokens.push(token);
        id
    }

    /// Id of `token`, allocating one unless the vocabulary is frozen.
    pub fn get_or_insert(&mut self, token: &str) -> Result<u32, SparseError> {
        if let Some(&id) = self.ids.get(token) {
            return Ok(id);
        }
        if self.frozen {
            return Err(SparseError::UnknownToken(token.to_string()));
        }
        Ok(self.insert_new(token.to_string()))
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.ids.get(token).copied()
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn freeze(&mut self) {
        self.frozen = true;
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// SHA-256 over the newline-joined tokens in id order.
    pub fn hash(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        for t in &self.tokens {
            h.update(t.as_bytes());
            h.update(b"\n");
        }
        h.finalize().into()
    }
}

// ---------------------------------------------------------------------------
// Vectors and matrices
// ---------------------------------------------------------------------------

/// Strictly positive weights keyed by vocabulary id, ascending by id.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SparseVector {
    entries: Vec<(u32, f64)>,
}

impl SparseVector {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_entries(entries: impl IntoIterator<Item = (u32, f64)>) -> Result<Self, SparseError> {
        let mut entries: Vec<(u32, f64)> = entries.into_iter().collect();
        for &(id, weight) in &entries {
            if !(weight.is_finite() && weight > 0.0) {
                return Err(SparseError::InvalidWeight { id, weight });
            }
        }
        entries.sort_by_key(|e| e.0);
        if let Some(w) = entries.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(SparseError::DuplicateId { id: w[0].0 });
        }
        Ok(Self { entries })
    }

    /// Keeps the strictly positive coordinates of a dense vector.
    pub fn from_dense(values: &[f64]) -> Self {
        Self {
            entries: values
                .iter()
                .enumerate()
                .filter(|(_, &v)| v > 0.0)
                .map(|(i, &v)| (i as u32, v))
                .collect(),
        }
    }

    pub fn to_dense(&self, dim: usize) -> Vec<f64> {
        let mut out = vec![0.0; dim];
        for &(id, w) in &self.entries {
            out[id as usize] = w;
        }
        out
    }

    pub fn entries(&self) -> &[(u32, f64)] {
        &self.entries
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.entries.iter().copied()
    }

    pub fn get(&self, id: u32) -> f64 {
        self.entries
            .binary_search_by_key(&id, |e| e.0)
            .map_or(0.0, |i| self.entries[i].1)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn max_weight(&self) -> f64 {
        self.entries.iter().map(|e| e.1).fold(0.0, f64::max)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        assert!(factor > 0.0);
        Self {
            entries: self.entries.iter().map(|&(i, w)| (i, w * factor)).collect(),
        }
    }
}

/// Per-token importance rows over a vocabulary of size `dim`; entries are signed.
#[derive(Debug, Clone, PartialEq)]
pub struct ImportanceMatrix {
    dim: usize,
    rows: Vec<Vec<(u32, f64)>>,
}

impl ImportanceMatrix {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            rows: Vec::new(),
        }
    }

    pub fn push_row(&mut self, row: Vec<(u32, f64)>) -> Result<(), SparseError> {
        if let Some(&(id, _)) = row.iter().find(|e| e.0 as usize >= self.dim) {
            return Err(SparseError::IdOutOfRange { id, dim: self.dim });
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn from_dense_rows(rows: &[Vec<f64>]) -> Self {
        let dim = rows.first().map_or(0, Vec::len);
        Self {
            dim,
            rows: rows
                .iter()
                .map(|r| r.iter().enumerate().map(|(j, &w)| (j as u32, w)).collect())
                .collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rows(&self) -> &[Vec<(u32, f64)>] {
        &self.rows
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }
}

/// `s_j = max_i log(1 + relu(w_ij))`, zeros dropped.
pub fn pool_sparse(m: &ImportanceMatrix) -> Result<SparseVector, SparseError> {
    if m.rows.is_empty() {
        return Err(SparseError::EmptyInput);
    }
    let mut best: BTreeMap<u32, f64> = BTreeMap::new();
    for row in &m.rows {
        for &(j, w) in row {
            if w > 0.0 {
                let v = w.ln_1p();
                let slot = best.entry(j).or_insert(0.0);
                if v > *slot {
                    *slot = v;
                }
            }
        }
    }
    Ok(SparseVector {
        entries: best.into_iter().filter(|e| e.1 > 0.0).collect(),
    })
}

/// Sum of products over shared ids, accumulated in ascending id order.
pub fn dot_score(q: &SparseVector, d: &SparseVector) -> f64 {
    let (a, b) = (&q.entries, &d.entries);
    let (mut i, mut k) = (0, 0);
    let mut sum = 0.0;
    while i < a.len() && k < b.len() {
        match a[i].0.cmp(&b[k].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => k += 1,
            std::cmp::Ordering::Equal => {
                sum += a[i].1 * b[k].1;
                i += 1;
                k += 1;
            }
        }
    }
    sum
}

fn max_shift(pos: f64, negs: &[f64]) -> f64 {
    negs.iter().copied().fold(pos, f64::max)
}

/// Softmax probability of the positive among `{pos} ∪ negs`, max-shifted.
pub fn rank_probability(score_pos: f64, scores_neg: &[f64]) -> f64 {
    let m = max_shift(score_pos, scores_neg);
    let num = (score_pos - m).exp();
    let den = num + scores_neg.iter().map(|s| (s - m).exp()).sum::<f64>();
    num / den
}

/// `-log rank_probability`, computed as log-sum-exp minus the positive score.
pub fn rank_nll(score_pos: f64, scores_neg: &[f64]) -> f64 {
    let m = max_shift(score_pos, scores_neg);
    let sum = (score_pos - m).exp() + scores_neg.iter().map(|s| (s - m).exp()).sum::<f64>();
    m + sum.ln() - score_pos
}

pub fn l1_norm(v: &SparseVector) -> f64 {
    v.entries.iter().map(|e| e.1.abs()).sum()
}

/// Mean L1 norm over a batch; 0 for an empty batch.
pub fn l1_batch(batch: &[&SparseVector]) -> f64 {
    if batch.is_empty() {
        return 0.0;
    }
    batch.iter().map(|v| l1_norm(v)).sum::<f64>() / batch.len() as f64
}

/// `Σ_j (mean_d s_j)²` over the batch.
pub fn flops_reg(batch: &[&SparseVector]) -> Result<f64, SparseError> {
    if batch.is_empty() {
        return Err(SparseError::EmptyBatch);
    }
    let n = batch.len() as f64;
    let mut sums: BTreeMap<u32, f64> = BTreeMap::new();
    for v in batch {
        for &(j, w) in &v.entries {
            *sums.entry(j).or_insert(0.0) += w;
        }
    }
    Ok(sums.values().map(|s| (s / n) * (s / n)).sum())
}

// ---------------------------------------------------------------------------
// Loss
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub lambda_q: f64,
    pub lambda_d: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            lambda_q: 5e-4,
            lambda_d: 5e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub rank: f64,
    pub l1_query: f64,
    pub flops_doc: f64,
    pub total: f64,
    pub lambda_q: f64,
    pub lambda_d: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossItem {
    pub query: SparseVector,
    pub positive: SparseVector,
    pub negatives: Vec<SparseVector>,
}

/// Appends every other item's positive to each item's negatives.
pub fn with_in_batch_negatives(items: &[LossItem]) -> Vec<LossItem> {
    items
        .iter()
        .enumerate()
        .map(|(i, it)| {
            let mut out = it.clone();
            out.negatives.extend(
                items
                    .iter()
                    .enumerate()
                    .filter(|(k, _)| *k != i)
                    .map(|(_, o)| o.positive.clone()),
            );
            out
        })
        .collect()
}

/// Mean ranking NLL plus the query L1 and document FLOPS penalties.
///
/// The FLOPS term runs over every document vector listed in the batch
/// (positives then negatives, item by item).
pub fn loss_breakdown(items: &[LossItem], weights: LossWeights) -> Result<LossBreakdown, SparseError> {
    if items.is_empty() {
        return Err(SparseError::EmptyBatch);
    }
    let mut rank = 0.0;
    for (i, it) in items.iter().enumerate() {
        if it.negatives.is_empty() {
            return Err(SparseError::NoNegatives(i));
        }
        let pos = dot_score(&it.query, &it.positive);
        let negs: Vec<f64> = it.negatives.iter().map(|d| dot_score(&it.query, d)).collect();
        rank += rank_nll(pos, &negs);
    }
    rank /= items.len() as f64;
    let queries: Vec<&SparseVector> = items.iter().map(|it| &it.query).collect();
    let docs: Vec<&SparseVector> = items
        .iter()
        .flat_map(|it| std::iter::once(&it.positive).chain(it.negatives.iter()))
        .collect();
    let l1_query = l1_batch(&queries);
    let flops_doc = flops_reg(&docs)?;
    Ok(LossBreakdown {
        rank,
        l1_query,
        flops_doc,
        total: rank + weights.lambda_q * l1_query + weights.lambda_d * flops_doc,
        lambda_q: weights.lambda_q,
        lambda_d: weights.lambda_d,
    })
}

// ---------------------------------------------------------------------------
// Surrogate importance and imported importance
// ---------------------------------------------------------------------------

/// Document frequencies and lengths of a corpus, keyed by token.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CorpusStats {
    pub num_docs: usize,
    pub avg_len: f64,
    pub doc_freq: HashMap<String, usize>,
}

impl CorpusStats {
    pub fn from_docs<'a>(docs: impl IntoIterator<Item = &'a TokenSeq>) -> Self {
        let mut stats = Self::default();
        let mut total = 0usize;
        for d in docs {
            stats.num_docs += 1;
            total += d.len();
            let mut seen = std::collections::HashSet::new();
            for t in d {
                if seen.insert(t.as_str()) {
                    *stats.doc_freq.entry(t.clone()).or_insert(0) += 1;
                }
            }
        }
        if stats.num_docs > 0 {
            stats.avg_len = total as f64 / stats.num_docs as f64;
        }
        stats
    }

    /// `ln(1 + (N − df + 0.5) / (df + 0.5))`, never negative.
    pub fn idf(&self, token: &str) -> f64 {
        let df = self.doc_freq.get(token).copied().unwrap_or(0) as f64;
        let n = self.num_docs as f64;
        (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
    }
}

fn surrogate_rows(
    tokens: &TokenSeq,
    stats: &CorpusStats,
    mut id_of: impl FnMut(&str) -> Result<u32, SparseError>,
) -> Result<Vec<Vec<(u32, f64)>>, SparseError> {
    let mut tf: HashMap<&str, usize> = HashMap::new();
    for t in tokens {
        *tf.entry(t.as_str()).or_insert(0) += 1;
    }
    tokens
        .iter()
        .map(|t| {
            let id = id_of(t)?;
            let f = tf[t.as_str()] as f64;
            Ok(vec![(id, stats.idf(t) * f / (f + 1.0))])
        })
        .collect()
}

/// Row `i` carries `idf(t_i) · tf/(tf+1)` on token `t_i`'s own id.
///
/// Unknown tokens get fresh ids unless `vocab` is frozen.
pub fn encode_surrogate(
    tokens: &TokenSeq,
    stats: &CorpusStats,
    vocab: &mut Vocabulary,
) -> Result<ImportanceMatrix, SparseError> {
    let rows = surrogate_rows(tokens, stats, |t| vocab.get_or_insert(t))?;
    Ok(ImportanceMatrix {
        dim: vocab.len(),
        rows,
    })
}

/// Same as [`encode_surrogate`] against a shared vocabulary; unknown tokens are errors.
pub fn encode_surrogate_frozen(
    tokens: &TokenSeq,
    stats: &CorpusStats,
    vocab: &Vocabulary,
) -> Result<ImportanceMatrix, SparseError> {
    let rows = surrogate_rows(tokens, stats, |t| {
        vocab.id(t).ok_or_else(|| SparseError::UnknownToken(t.to_string()))
    })?;
    Ok(ImportanceMatrix {
        dim: vocab.len(),
        rows,
    })
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ImportanceLine {
    row: usize,
    entries: Vec<(u32, f64)>,
}

/// Reads `{"row": int, "entries": [[id, value], ...]}` lines.
///
/// The matrix has `max(row) + 1` rows; rows never mentioned are all-zero.
pub fn import_importance(reader: impl BufRead, dim: usize) -> Result<ImportanceMatrix, SparseError> {
    let mut rows: Vec<BTreeMap<u32, f64>> = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line_no = n + 1;
        let line = line.map_err(|e| SparseError::Io(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let schema = |message: String| SparseError::SchemaError {
            line: line_no,
            message,
        };
        let parsed: ImportanceLine =
            serde_json::from_str(&line).map_err(|e| schema(e.to_string()))?;
        if rows.len() <= parsed.row {
            rows.resize_with(parsed.row + 1, BTreeMap::new);
        }
        for (id, value) in parsed.entries {
            if id as usize >= dim {
                return Err(schema(format!("id {id} is outside the vocabulary of size {dim}")));
            }
            if !value.is_finite() {
                return Err(schema(format!("value for id {id} is not finite")));
            }
            if rows[parsed.row].insert(id, value).is_some() {
                return Err(schema(format!("row {} lists id {id} twice", parsed.row)));
            }
        }
    }
    Ok(ImportanceMatrix {
        dim,
        rows: rows.into_iter().map(|r| r.into_iter().collect()).collect(),
    })
}

pub fn import_importance_file(path: &Path, dim: usize) -> Result<ImportanceMatrix, SparseError> {
    let f = std::fs::File::open(path).map_err(|e| SparseError::Io(e.to_string()))?;
    import_importance(std::io::BufReader::new(f), dim)
}

// ---------------------------------------------------------------------------
// Toy linear encoder
// ---------------------------------------------------------------------------

/// `w_i = Eᵀ W h_i + b` with trainable `W` (dim×dim) and `b` (|D|), fixed `E`.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyEncoderParams {
    pub dim: usize,
    pub vocab_size: usize,
    /// Row-major `W[a][c]`.
    pub w: Vec<f64>,
    pub b: Vec<f64>,
    /// Row-major `E[a][j]`, dim × |D|.
    pub e: Vec<f64>,
}

/// Token feature rows `h_i` (each of length `dim`) of one text.
pub type ToyText = Vec<Vec<f64>>;

#[derive(Debug, Clone, PartialEq)]
pub struct ToyItem {
    pub query: usize,
    pub positive: usize,
    pub negatives: Vec<usize>,
}

/// Texts are encoded once and referenced by index from the items.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyBatch {
    pub texts: Vec<ToyText>,
    pub items: Vec<ToyItem>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToyGradients {
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

impl ToyEncoderParams {
    /// Dense importance rows, one per token.
    pub fn importances(&self, text: &ToyText) -> Vec<Vec<f64>> {
        let (dim, vs) = (self.dim, self.vocab_size);
        text.iter()
            .map(|h| {
                // u = W h
                let u: Vec<f64> = (0..dim)
                    .map(|a| (0..dim).map(|c| self.w[a * dim + c] * h[c]).sum())
                    .collect();
                (0..vs)
                    .map(|j| (0..dim).map(|a| self.e[a * vs + j] * u[a]).sum::<f64>() + self.b[j])
                    .collect()
            })
            .collect()
    }

    pub fn encode(&self, text: &ToyText) -> Result<SparseVector, SparseError> {
        pool_sparse(&ImportanceMatrix::from_dense_rows(&self.importances(text)))
    }
}

fn toy_items(params: &ToyEncoderParams, batch: &ToyBatch) -> Result<Vec<LossItem>, SparseError> {
    let vecs: Vec<SparseVector> = batch
        .texts
        .iter()
        .map(|t| params.encode(t))
        .collect::<Result<_, _>>()?;
    Ok(batch
        .items
        .iter()
        .map(|it| LossItem {
            query: vecs[it.query].clone(),
            positive: vecs[it.positive].clone(),
            negatives: it.negatives.iter().map(|&n| vecs[n].clone()).collect(),
        })
        .collect())
}

pub fn toy_loss(
    params: &ToyEncoderParams,
    batch: &ToyBatch,
    weights: LossWeights,
) -> Result<LossBreakdown, SparseError> {
    loss_breakdown(&toy_items(params, batch)?, weights)
}

/// Analytic gradient of [`toy_loss`] with respect to `W` and `b`.
///
/// The pooling max sends gradient to the first row attaining it; entries with
/// `w ≤ 0` pass none.
pub fn toy_encoder_grad(
    params: &ToyEncoderParams,
    batch: &ToyBatch,
    weights: LossWeights,
) -> Result<(LossBreakdown, ToyGradients), SparseError> {
    let loss = toy_loss(params, batch, weights)?;
    let (dim, vs) = (params.dim, params.vocab_size);
    let imps: Vec<Vec<Vec<f64>>> = batch.texts.iter().map(|t| params.importances(t)).collect();
    let pooled: Vec<Vec<f64>> = batch
        .texts
        .iter()
        .map(|t| params.encode(t).map(|v| v.to_dense(vs)))
        .collect::<Result<_, _>>()?;

    // dL/ds per text.
    let mut gs = vec![vec![0.0; vs]; batch.texts.len()];
    let bsz = batch.items.len() as f64;
    for it in &batch.items {
        let q = &pooled[it.query];
        let docs: Vec<usize> = std::iter::once(it.positive).chain(it.negatives.iter().copied()).collect();
        let scores: Vec<f64> = docs
            .iter()
            .map(|&d| (0..vs).map(|j| q[j] * pooled[d][j]).sum())
            .collect();
        let m = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = scores.iter().map(|s| (s - m).exp()).collect();
        let z: f64 = exps.iter().sum();
        for (k, &d) in docs.iter().enumerate() {
            let coef = (exps[k] / z - if k == 0 { 1.0 } else { 0.0 }) / bsz;
            for j in 0..vs {
                gs[it.query][j] += coef * pooled[d][j];
                gs[d][j] += coef * q[j];
            }
        }
        for j in 0..vs {
            if q[j] > 0.0 {
                gs[it.query][j] += weights.lambda_q / bsz;
            }
        }
    }
    let doc_occurrences: Vec<usize> = batch
        .items
        .iter()
        .flat_map(|it| std::iter::once(it.positive).chain(it.negatives.iter().copied()))
        .collect();
    let n_docs = doc_occurrences.len() as f64;
    let mut mean = vec![0.0; vs];
    for &d in &doc_occurrences {
        for j in 0..vs {
            mean[j] += pooled[d][j] / n_docs;
        }
    }
    for &d in &doc_occurrences {
        for j in 0..vs {
            gs[d][j] += weights.lambda_d * 2.0 * mean[j] / n_docs;
        }
    }

    let mut grad_w = vec![0.0; dim * dim];
    let mut grad_b = vec![0.0; vs];
    for (t, text) in batch.texts.iter().enumerate() {
        let rows = &imps[t];
        for j in 0..vs {
            let mut arg: Option<usize> = None;
            for (i, row) in rows.iter().enumerate() {
                if row[j] > 0.0 && arg.map_or(true, |a| row[j] > rows[a][j]) {
                    arg = Some(i);
                }
            }
            let Some(i) = arg else { continue };
            let gw = gs[t][j] / (1.0 + rows[i][j]);
            grad_b[j] += gw;
            for a in 0..dim {
                let ea = params.e[a * vs + j] * gw;
                for c in 0..dim {
                    grad_w[a * dim + c] += ea * text[i][c];
                }
            }
        }
    }
    Ok((loss, ToyGradients { w: grad_w, b: grad_b }))
}
