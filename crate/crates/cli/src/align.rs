//! Refer-score reporting and mark relabeling for generated text.

use std::collections::HashMap;

use anyhow::{Context, Result};
use forge_core::citation::{red_relabel, refer_score, CitedText};
use forge_core::text::{parse_marks, serialize_marked};
use forge_core::{tokenize, StopwordSet};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Generated text with trailing `[k]` marks.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GeneratedRow {
    pub id: String,
    #[serde(alias = "target")]
    pub text: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RefEntry {
    Text(String),
    Passage { text: String },
}

impl RefEntry {
    fn text(&self) -> &str {
        match self {
            RefEntry::Text(t) | RefEntry::Passage { text: t } => t,
        }
    }
}

/// References for one generated row, in mark order. Generation dataset rows
/// have this shape.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RefsRow {
    pub id: String,
    pub refs: Vec<RefEntry>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ScoreSummary {
    pub mean: Option<f64>,
    /// Marked sentences that were scored.
    pub n: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct AlignReport {
    pub rows: usize,
    pub skipped: Vec<String>,
    /// Averages over every scored sentence in the file.
    pub before: ScoreSummary,
    pub after: ScoreSummary,
    pub relabeled_sentences: usize,
}

struct RowResult {
    relabeled: GeneratedRow,
    before: Vec<f64>,
    after: Vec<f64>,
    changed: usize,
}

fn align_row(row: &GeneratedRow, refs: &RefsRow, stop: &StopwordSet) -> Result<RowResult> {
    let sentences = parse_marks(&row.text, refs.refs.len())?;
    let text = CitedText::new(
        sentences,
        refs.refs.iter().map(|r| tokenize(r.text())).collect(),
    )?;
    let out = red_relabel(&text, stop);
    let changed = text
        .sentences
        .iter()
        .zip(&out.sentences)
        .filter(|(a, b)| a.mark != b.mark)
        .count();
    let ratios = |t: &CitedText| refer_score(t, stop).per_sentence.into_iter().map(|p| p.1).collect();
    Ok(RowResult {
        before: ratios(&text),
        after: ratios(&out),
        relabeled: GeneratedRow {
            id: row.id.clone(),
            text: serialize_marked(&out.sentences),
        },
        changed,
    })
}

fn summary(values: &[f64]) -> ScoreSummary {
    let n = values.len();
    ScoreSummary {
        mean: (n > 0).then(|| values.iter().sum::<f64>() / n as f64),
        n,
    }
}

/// Relabels each row against its references. Rows without references or with
/// out-of-range marks are skipped and listed in the report.
pub fn align(
    generated: &[GeneratedRow],
    refs: &[RefsRow],
    stop: &StopwordSet,
) -> (Vec<GeneratedRow>, AlignReport) {
    let by_id: HashMap<&str, &RefsRow> = refs.iter().map(|r| (r.id.as_str(), r)).collect();
    let results: Vec<Result<RowResult>> = generated
        .par_iter()
        .map(|row| {
            let r = by_id
                .get(row.id.as_str())
                .with_context(|| format!("no references for {}", row.id))?;
            align_row(row, r, stop).with_context(|| format!("row {}", row.id))
        })
        .collect();
    let mut report = AlignReport::default();
    let (mut before, mut after, mut rows) = (Vec::new(), Vec::new(), Vec::new());
    for (row, res) in generated.iter().zip(results) {
        match res {
            Ok(r) => {
                before.extend(r.before);
                after.extend(r.after);
                report.relabeled_sentences += r.changed;
                rows.push(r.relabeled);
            }
            Err(e) => {
                log::warn!("{e:#}");
                report.skipped.push(row.id.clone());
            }
        }
    }
    report.rows = rows.len();
    report.before = summary(&before);
    report.after = summary(&after);
    (rows, report)
}
