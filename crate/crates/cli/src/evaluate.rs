//! File-level wrappers around the retrieval and generation metrics.

use std::collections::{BTreeMap, HashMap};

use anyhow::{bail, Result};
use forge_core::eval::{generation_metrics, retrieval_metrics, MetricReport, QrelSet, DEFAULT_CUTOFFS};
use forge_core::text::parse_marks;
use forge_core::{tokenize, TokenSeq};
use serde::{Deserialize, Serialize};

use crate::search::HitsRow;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunRow {
    pub query_id: String,
    pub ranked_ids: Vec<String>,
}

/// Either a plain run row or a row written by `retrieve`.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum AnyRun {
    Plain(RunRow),
    Hits(HitsRow),
}

impl AnyRun {
    fn into_pair(self) -> (String, Vec<String>) {
        match self {
            AnyRun::Plain(r) => (r.query_id, r.ranked_ids),
            AnyRun::Hits(h) => (h.query_id, h.hits.into_iter().map(|x| x.doc_id).collect()),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QrelRow {
    pub query_id: String,
    pub relevant_ids: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TextRow {
    pub id: String,
    #[serde(alias = "target")]
    pub text: String,
}

pub fn evaluate_retrieval(runs: Vec<AnyRun>, qrels: Vec<QrelRow>) -> Result<MetricReport> {
    let mut run_map = BTreeMap::new();
    for r in runs {
        let (q, ids) = r.into_pair();
        if run_map.insert(q.clone(), ids).is_some() {
            bail!("query {q} appears twice in the run");
        }
    }
    let mut qrel_set = QrelSet::new();
    for q in qrels {
        qrel_set.entry(q.query_id).or_default().extend(q.relevant_ids);
    }
    Ok(retrieval_metrics(&run_map, &qrel_set, &DEFAULT_CUTOFFS)?)
}

/// Tokens of a possibly marked text with the `[k]` marks removed.
pub fn unmarked_tokens(text: &str) -> TokenSeq {
    match parse_marks(text, usize::MAX) {
        Ok(sentences) => {
            let mut out = TokenSeq::default();
            for s in sentences {
                out.extend(&s.tokens);
            }
            out
        }
        Err(_) => tokenize(text),
    }
}

/// Pairs candidates with targets by id; every candidate needs a target.
pub fn evaluate_generation(candidates: Vec<TextRow>, targets: Vec<TextRow>) -> Result<MetricReport> {
    let targets: HashMap<String, String> = targets.into_iter().map(|t| (t.id, t.text)).collect();
    let mut missing = Vec::new();
    let mut pairs = Vec::new();
    for c in candidates {
        match targets.get(&c.id) {
            Some(t) => pairs.push((unmarked_tokens(&c.text), unmarked_tokens(t))),
            None => missing.push(c.id),
        }
    }
    if !missing.is_empty() {
        bail!("no target for candidates: {missing:?}");
    }
    if let Some(i) = pairs.iter().position(|(c, _)| c.is_empty()) {
        bail!("candidate {} is empty", i + 1);
    }
    Ok(generation_metrics(&pairs)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_run_scores_one() {
        let runs = vec![AnyRun::Plain(RunRow { query_id: "q".into(), ranked_ids: vec!["a".into()] })];
        let qrels = vec![QrelRow { query_id: "q".into(), relevant_ids: vec!["a".into()] }];
        let m = evaluate_retrieval(runs, qrels).unwrap();
        assert!(m.metrics.values().all(|&v| v == 1.0));
    }

    #[test]
    fn marks_do_not_count_as_tokens() {
        assert_eq!(unmarked_tokens("It rained.[2] Then it stopped.[0]").len(), 5);
        let c = vec![TextRow { id: "1".into(), text: "It rained.[2]".into() }];
        let t = vec![TextRow { id: "1".into(), text: "It rained.[1]".into() }];
        let m = evaluate_generation(c, t).unwrap();
        assert_eq!(m.metrics["ROUGE-L-F"], 1.0);
    }

    #[test]
    fn hits_rows_are_runs() {
        let line = r#"{"query_id":"q","hits":[{"doc_id":"a","score":1.0,"rank":1}],"dropped":[]}"#;
        let r: AnyRun = serde_json::from_str(line).unwrap();
        assert_eq!(r.into_pair().1, vec!["a".to_string()]);
    }
}
