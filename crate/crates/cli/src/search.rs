//! Index building, search, retrieval and topic reranking.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use forge_core::corpus::{window_passages, ReferenceCleaner, ReferenceDoc};
use forge_core::index::{
    build_index, query_terms, term_frequencies, IndexMode, IndexStats, InvertedIndex, SearchHit,
};
use forge_core::sparse::{
    encode_surrogate, encode_surrogate_frozen, pool_sparse, CorpusStats, SparseVector, Vocabulary};
use forge_core::topic::{rerank_vectors, DropReason};
use forge_core::{tokenize, TokenSeq};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::jsonl::{self, Header};

pub const INDEX_FILE: &str = "index.bin";
pub const VOCAB_FILE: &str = "vocab.txt";
pub const META_FILE: &str = "meta.json";

/// A passage to index: text, a precomputed sparse vector, or both.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PassageRow {
    pub id: String,
    #[serde(default)]
    pub text: Option<String>,
    #[serde(default)]
    pub vector: Option<SparseVector>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QueryRow {
    pub query_id: String,
    #[serde(default)]
    pub query: String,
    #[serde(default)]
    pub vector: Option<SparseVector>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hit {
    pub doc_id: String,
    pub score: f64,
    pub rank: usize,
}

impl From<SearchHit> for Hit {
    fn from(h: SearchHit) -> Self {
        Self {
            doc_id: h.doc_id,
            score: h.score,
            rank: h.rank,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroppedHit {
    #[serde(flatten)]
    pub hit: Hit,
    pub reason: DropReason,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HitsRow {
    pub query_id: String,
    pub hits: Vec<Hit>,
    #[serde(default)]
    pub dropped: Vec<DroppedHit>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Meta {
    #[serde(rename = "_header")]
    header: Header,
    mode: IndexMode,
    num_docs: usize,
    num_terms: usize,
}

/// Passages from raw reference documents: cleaned, then windowed. Repeated
/// document ids keep their first occurrence.
pub fn passages_from_refs(refs: Vec<ReferenceDoc>, max_tokens: usize) -> Vec<PassageRow> {
    let cleaner = ReferenceCleaner::default();
    let mut seen = std::collections::HashSet::new();
    let unique: Vec<ReferenceDoc> = refs.into_iter().filter(|d| seen.insert(d.id.clone())).collect();
    let windows: Vec<Vec<PassageRow>> = unique
        .into_par_iter()
        .map(|mut d| {
            d.clean(&cleaner);
            window_passages(&d, max_tokens)
                .into_iter()
                .map(|w| PassageRow {
                    id: w.passage_id(),
                    text: Some(w.text),
                    vector: None,
                })
                .collect()
        })
        .collect();
    windows.into_iter().flatten().collect()
}

pub struct LoadedIndex {
    pub index: InvertedIndex,
    pub vocab: Vocabulary,
    query_stats: CorpusStats,
}

impl LoadedIndex {
    pub fn build(passages: &[PassageRow], mode: IndexMode, threads: usize) -> Result<Self> {
        let mut vocab = Vocabulary::new();
        let vectors: Vec<(String, SparseVector)> = match mode {
            IndexMode::TermFrequency => passages
                .iter()
                .map(|p| {
                    let text = p
                        .text
                        .as_deref()
                        .with_context(|| format!("passage {} has no text", p.id))?;
                    Ok((p.id.clone(), term_frequencies(&tokenize(text), &mut vocab)?))
                })
                .collect::<Result<_>>()?,
            IndexMode::Weighted => {
                let tokens: Vec<Option<TokenSeq>> = passages
                    .iter()
                    .map(|p| p.text.as_deref().map(tokenize))
                    .collect();
                let stats = CorpusStats::from_docs(tokens.iter().flatten());
                passages
                    .iter()
                    .zip(&tokens)
                    .map(|(p, toks)| {
                        let v = match (&p.vector, toks) {
                            (Some(v), _) => v.clone(),
                            (None, Some(t)) if !t.is_empty() => {
                                pool_sparse(&encode_surrogate(t, &stats, &mut vocab)?)?
                            }
                            (None, _) => SparseVector::new(),
                        };
                        Ok((p.id.clone(), v))
                    })
                    .collect::<Result<_>>()?
            }
        };
        vocab.freeze();
        let index = build_index(&vectors, mode, vocab.hash(), threads)?;
        Ok(Self::from_parts(index, vocab))
    }

    pub fn save(&self, dir: &Path, cfg: &PipelineConfig) -> Result<()> {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        self.index.save(&dir.join(INDEX_FILE))?;
        self.vocab.write_file(&dir.join(VOCAB_FILE))?;
        let meta = Meta {
            header: Header::new("index", cfg),
            mode: self.index.mode(),
            num_docs: self.index.num_docs(),
            num_terms: self.index.num_terms(),
        };
        let mut text = serde_json::to_string_pretty(&meta)?;
        text.push('\n');
        std::fs::write(dir.join(META_FILE), text)?;
        Ok(())
    }

    pub fn load(dir: &Path, cfg: &PipelineConfig, force: bool) -> Result<Self> {
        let meta_path = dir.join(META_FILE);
        if let Some(h) = jsonl::read_report_header(&meta_path)? {
            h.check(cfg, &meta_path, force)?;
        }
        let index = InvertedIndex::load(&dir.join(INDEX_FILE))
            .with_context(|| format!("loading index from {}", dir.display()))?;
        let vocab = Vocabulary::from_file(&dir.join(VOCAB_FILE))?;
        if vocab.hash() != index.vocab_hash() {
            bail!("{} does not match the vocabulary the index was built with", VOCAB_FILE);
        }
        Ok(Self::from_parts(index, vocab))
    }

    /// Document frequencies for query encoding come from posting list lengths.
    fn from_parts(index: InvertedIndex, vocab: Vocabulary) -> Self {
        let mut doc_freq = HashMap::new();
        for id in 0..vocab.len() as u32 {
            let df = index.doc_freq(id);
            if let (true, Some(token)) = (df > 0, vocab.token(id)) {
                doc_freq.insert(token.to_string(), df);
            }
        }
        let query_stats = CorpusStats {
            num_docs: index.num_docs(),
            avg_len: index.avg_len(),
            doc_freq,
        };
        Self {
            index,
            vocab,
            query_stats,
        }
    }

    /// Surrogate query vector; tokens outside the vocabulary are dropped.
    fn encode_query(&self, tokens: &TokenSeq) -> Result<SparseVector> {
        let known = TokenSeq::new(
            tokens
                .iter()
                .filter(|t| self.vocab.id(t).is_some())
                .cloned()
                .collect(),
        );
        if known.is_empty() {
            return Ok(SparseVector::new());
        }
        Ok(pool_sparse(&encode_surrogate_frozen(&known, &self.query_stats, &self.vocab)?)?)
    }

    pub fn search(&self, q: &QueryRow, k: usize, cfg: &PipelineConfig) -> Result<Vec<SearchHit>> {
        let tokens = tokenize(&q.query);
        Ok(match self.index.mode() {
            IndexMode::TermFrequency => {
                self.index
                    .search_bm25(&query_terms(&tokens, &self.vocab), k, cfg.bm25()?)?
            }
            IndexMode::Weighted => {
                let v = match &q.vector {
                    Some(v) => v.clone(),
                    None => self.encode_query(&tokens)?,
                };
                self.index.search(&v, k)?
            }
        })
    }

    /// Importance vectors used for topic signatures, one per document.
    ///
    /// Term-frequency indexes use the pooled surrogate weight
    /// `ln(1 + idf · tf / (tf + 1))`.
    pub fn importance_vectors(&self) -> Vec<SparseVector> {
        let vectors = self.index.doc_vectors();
        match self.index.mode() {
            IndexMode::Weighted => vectors,
            IndexMode::TermFrequency => vectors
                .iter()
                .map(|v| {
                    SparseVector::from_entries(v.iter().map(|(t, tf)| {
                        (t, (self.index.bm25_idf(t) * tf / (tf + 1.0)).ln_1p())
                    }))
                    .expect("positive finite weights")
                })
                .collect(),
        }
    }

    pub fn stats(&self) -> IndexStats {
        self.index.stats()
    }
}

/// Applies the topic filter to each row's hits, moving dropped ones aside.
pub fn rerank_rows(
    rows: Vec<HitsRow>,
    loaded: &LoadedIndex,
    cfg: &PipelineConfig,
) -> Result<Vec<HitsRow>> {
    let vectors = loaded.importance_vectors();
    let by_name: HashMap<&str, usize> = loaded
        .index
        .doc_names()
        .iter()
        .enumerate()
        .map(|(i, n)| (n.as_str(), i))
        .collect();
    let filter = cfg.filter();
    rows.into_par_iter()
        .map(|mut row| {
            if row.hits.is_empty() {
                return Ok(row);
            }
            let hit_vectors: Vec<&SparseVector> = row
                .hits
                .iter()
                .map(|h| {
                    by_name
                        .get(h.doc_id.as_str())
                        .map(|&i| &vectors[i])
                        .with_context(|| format!("hit {} is not in the index", h.doc_id))
                })
                .collect::<Result<_>>()?;
            let outcome = rerank_vectors(&hit_vectors, &filter)?;
            let mut reasons: HashMap<usize, DropReason> = outcome.dropped.into_iter().collect();
            let hits = std::mem::take(&mut row.hits);
            for (i, hit) in hits.into_iter().enumerate() {
                match reasons.remove(&i) {
                    Some(reason) => row.dropped.push(DroppedHit { hit, reason }),
                    None => row.hits.push(hit),
                }
            }
            row.dropped.sort_by_key(|d| d.hit.rank);
            Ok(row)
        })
        .collect()
}

pub fn retrieve(
    loaded: &LoadedIndex,
    queries: &[QueryRow],
    k: usize,
    rerank: bool,
    cfg: &PipelineConfig,
) -> Result<Vec<HitsRow>> {
    let rows: Vec<HitsRow> = queries
        .par_iter()
        .map(|q| {
            Ok(HitsRow {
                query_id: q.query_id.clone(),
                hits: loaded.search(q, k, cfg)?.into_iter().map(Hit::from).collect(),
                dropped: Vec::new(),
            })
        })
        .collect::<Result<_>>()?;
    if rerank {
        rerank_rows(rows, loaded, cfg)
    } else {
        Ok(rows)
    }
}

pub enum IndexSource {
    Passages(PathBuf),
    Refs(PathBuf),
}

pub fn build_command(
    source: &IndexSource,
    mode: IndexMode,
    out: &Path,
    cfg: &PipelineConfig,
    threads: usize,
) -> Result<IndexStats> {
    let passages = match source {
        IndexSource::Passages(p) => jsonl::read::<PassageRow>(p)?.rows,
        IndexSource::Refs(p) => {
            passages_from_refs(jsonl::read::<ReferenceDoc>(p)?.rows, cfg.max_passage_tokens)
        }
    };
    let loaded = LoadedIndex::build(&passages, mode, threads)?;
    loaded.save(out, cfg)?;
    Ok(loaded.stats())
}
