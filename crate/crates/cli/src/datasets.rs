//! The dataset build: clean, select passages, mark targets, mine negatives.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use anyhow::{Context, Result};
use forge_core::corpus::{
    build_generation_example, build_retrieval_example, build_warmup_pairs, derive_seed,
    select_references, window_passages, CorpusError, GenerationExample, GenerationRow,
    PassageCandidate, RawWikiRecord, RefOutcome, ReferenceCleaner, ReferenceDoc,
    RetrievalExample, WarmupPair, WikiCleaner, WikiRecord,
};
use forge_core::index::{build_index, query_terms, term_frequencies, IndexMode, InvertedIndex};
use forge_core::sparse::{SparseVector, Vocabulary};
use forge_core::text::TextError;
use forge_core::tokenize;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::PipelineConfig;
use crate::jsonl::{self, Header};

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Tally {
    pub input: usize,
    pub kept: usize,
    pub rejected: BTreeMap<String, usize>,
}

impl Tally {
    fn reject(&mut self, reason: &str) {
        *self.rejected.entry(reason.to_string()).or_insert(0) += 1;
    }

    /// `kept` plus every rejection equals `input`.
    pub fn balanced(&self) -> bool {
        self.kept + self.rejected.values().sum::<usize>() == self.input
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct DatasetReport {
    pub wiki: Tally,
    pub refs: Tally,
    pub citations: BTreeMap<String, usize>,
    pub passages_indexed: usize,
    pub generation_rows: usize,
    pub retrieval: Tally,
    pub warmup_rows: usize,
}

pub struct DatasetOutput {
    pub generation: Vec<GenerationRow>,
    pub retrieval: Vec<RetrievalExample>,
    pub warmup: Vec<WarmupPair>,
    pub report: DatasetReport,
}

fn outcome_name(o: RefOutcome) -> String {
    match o {
        RefOutcome::Rejected(r) => format!("Rejected{}", r.as_str()),
        other => format!("{other:?}"),
    }
}

fn wiki_error_name(e: &CorpusError) -> &'static str {
    match e {
        CorpusError::EmptyTitle { .. } => "EmptyTitle",
        CorpusError::Marks {
            source: TextError::MarkOutOfRange { .. },
            ..
        } => "MarkOutOfRange",
        _ => "Invalid",
    }
}

/// Cleans references, keeping the first occurrence of each id.
fn clean_refs(raw: Vec<ReferenceDoc>, tally: &mut Tally) -> Vec<ReferenceDoc> {
    let cleaner = ReferenceCleaner::default();
    tally.input = raw.len();
    let mut seen = std::collections::HashSet::new();
    let unique: Vec<ReferenceDoc> = raw
        .into_iter()
        .filter(|d| {
            let fresh = seen.insert(d.id.clone());
            if !fresh {
                log::warn!("duplicate reference id {}; keeping the first", d.id);
            }
            fresh
        })
        .collect();
    let duplicates = tally.input - unique.len();
    if duplicates > 0 {
        tally.rejected.insert("DuplicateId".into(), duplicates);
    }
    let cleaned: Vec<ReferenceDoc> = unique
        .into_par_iter()
        .map(|mut d| {
            d.clean(&cleaner);
            d
        })
        .collect();
    for d in &cleaned {
        match d.rejection {
            Some(r) => tally.reject(r.as_str()),
            None => tally.kept += 1,
        }
    }
    cleaned
}

/// BM25 index over every window of every accepted reference.
struct PassagePool {
    index: InvertedIndex,
    vocab: Vocabulary,
}

impl PassagePool {
    fn build(docs: &[ReferenceDoc], max_tokens: usize, threads: usize) -> Result<Self> {
        let windows: Vec<Vec<PassageCandidate>> = docs
            .par_iter()
            .map(|d| window_passages(d, max_tokens))
            .collect();
        let mut vocab = Vocabulary::new();
        let mut vectors: Vec<(String, SparseVector)> = Vec::new();
        for w in windows.iter().flatten() {
            if w.tokens.is_empty() {
                continue;
            }
            vectors.push((w.passage_id(), term_frequencies(&w.tokens, &mut vocab)?));
        }
        vocab.freeze();
        let index = build_index(&vectors, IndexMode::TermFrequency, vocab.hash(), threads)?;
        Ok(Self { index, vocab })
    }

    fn ranking(&self, query: &str, k: usize, cfg: &PipelineConfig) -> Result<Vec<String>> {
        let terms = query_terms(&tokenize(query), &self.vocab);
        Ok(self
            .index
            .search_bm25(&terms, k, cfg.bm25()?)?
            .into_iter()
            .map(|h| h.doc_id)
            .collect())
    }
}

pub fn build_datasets(
    wiki: Vec<RawWikiRecord>,
    refs: Vec<ReferenceDoc>,
    cfg: &PipelineConfig,
    threads: usize,
) -> Result<DatasetOutput> {
    let stop = cfg.stopwords()?;
    let mut report = DatasetReport::default();

    let cleaned = clean_refs(refs, &mut report.refs);
    let pool = PassagePool::build(&cleaned, cfg.max_passage_tokens, threads)?;
    report.passages_indexed = pool.index.num_docs();
    let docs: HashMap<String, ReferenceDoc> =
        cleaned.into_iter().map(|d| (d.id.clone(), d)).collect();

    report.wiki.input = wiki.len();
    let wiki_cleaner = WikiCleaner::default();
    let selection = cfg.selection();
    let per_record: Vec<Result<(GenerationExample, Vec<RefOutcome>), CorpusError>> = wiki
        .into_par_iter()
        .map(|raw| {
            let record = WikiRecord::from_raw(raw, &wiki_cleaner)?;
            let (selected, outcomes) = select_references(&record, &docs, &selection, &stop);
            Ok((
                build_generation_example(&record, &selected, &selection, &stop),
                outcomes,
            ))
        })
        .collect();

    let mut examples = Vec::new();
    for r in per_record {
        match r {
            Ok((ex, outcomes)) => {
                report.wiki.kept += 1;
                for o in outcomes {
                    *report.citations.entry(outcome_name(o)).or_insert(0) += 1;
                }
                examples.push(ex);
            }
            Err(e) => {
                log::warn!("skipping wiki record: {e}");
                report.wiki.reject(wiki_error_name(&e));
            }
        }
    }

    // One retrieval row per kept reference; the stream id is the row's
    // position, so sampling does not depend on scheduling.
    let jobs: Vec<(&GenerationExample, &PassageCandidate)> = examples
        .iter()
        .flat_map(|ex| ex.refs.iter().map(move |p| (ex, p)))
        .collect();
    let depth = cfg.negatives_range[1] + 1;
    let sampling = cfg.sampling();
    let mined: Vec<Result<RetrievalExample>> = jobs
        .par_iter()
        .enumerate()
        .map(|(i, (ex, p))| {
            let ranking = pool.ranking(&ex.query, depth, cfg)?;
            let seed = derive_seed(cfg.seed, i as u64);
            build_retrieval_example(&ex.query, &p.passage_id(), &ranking, seed, sampling)
                .map_err(anyhow::Error::from)
        })
        .collect();
    report.retrieval.input = mined.len();
    let mut retrieval = Vec::new();
    for m in mined {
        match m {
            Ok(r) => {
                report.retrieval.kept += 1;
                retrieval.push(r);
            }
            Err(e) => match e.downcast_ref::<CorpusError>() {
                Some(CorpusError::InsufficientCandidates { .. }) => {
                    report.retrieval.reject("InsufficientCandidates")
                }
                _ => return Err(e),
            },
        }
    }

    let warmup: Vec<WarmupPair> = examples.iter().flat_map(build_warmup_pairs).collect();
    report.generation_rows = examples.len();
    report.warmup_rows = warmup.len();
    Ok(DatasetOutput {
        generation: examples.iter().map(GenerationExample::to_row).collect(),
        retrieval,
        warmup,
        report,
    })
}

pub const GENERATION_FILE: &str = "webbrain-g.jsonl";
pub const RETRIEVAL_FILE: &str = "webbrain-r.jsonl";
pub const WARMUP_FILE: &str = "warmup.jsonl";
pub const REPORT_FILE: &str = "report.json";

pub fn run(
    wiki_path: &Path,
    refs_path: &Path,
    out_dir: &Path,
    cfg: &PipelineConfig,
    threads: usize,
) -> Result<DatasetReport> {
    let wiki: Vec<RawWikiRecord> = jsonl::read(wiki_path)?.rows;
    let refs: Vec<ReferenceDoc> = jsonl::read(refs_path)?.rows;
    let out = build_datasets(wiki, refs, cfg, threads)?;
    std::fs::create_dir_all(out_dir)
        .with_context(|| format!("creating {}", out_dir.display()))?;
    jsonl::write(&out_dir.join(GENERATION_FILE), &Header::new("webbrain-g", cfg), &out.generation)?;
    jsonl::write(&out_dir.join(RETRIEVAL_FILE), &Header::new("webbrain-r", cfg), &out.retrieval)?;
    jsonl::write(&out_dir.join(WARMUP_FILE), &Header::new("warmup", cfg), &out.warmup)?;
    jsonl::write_report(&out_dir.join(REPORT_FILE), &Header::new("dataset-report", cfg), &out.report)?;
    Ok(out.report)
}
