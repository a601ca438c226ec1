//! Pipeline configuration: a flat TOML file plus `key=value` overrides.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use forge_core::corpus::{NegativeSampling, SelectionConfig};
use forge_core::index::Bm25Params;
use forge_core::sparse::LossWeights;
use forge_core::topic::{FilterConfig, MuSpec};
use forge_core::StopwordSet;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MuMode {
    /// `mu` is a fraction of the largest weight in a query's hit set.
    Relative,
    Absolute,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub rho: f64,
    pub max_passage_tokens: usize,
    pub negatives_range: [usize; 2],
    pub num_negatives: usize,
    pub max_refs: usize,
    pub mu: f64,
    pub mu_mode: MuMode,
    pub upper: f64,
    pub lower: f64,
    pub bm25_k1: f64,
    pub bm25_b: f64,
    pub lambda_q: f64,
    pub lambda_d: f64,
    pub seed: u64,
    pub stopword_version: String,
    /// Optional stopword file replacing the embedded list.
    pub stopwords_file: Option<PathBuf>,
    pub top_k: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            rho: 0.5,
            max_passage_tokens: 256,
            negatives_range: [30, 50],
            num_negatives: 4,
            max_refs: 5,
            mu: 0.25,
            mu_mode: MuMode::Relative,
            upper: 0.9,
            lower: 0.1,
            bm25_k1: 0.9,
            bm25_b: 0.4,
            lambda_q: 5e-4,
            lambda_d: 5e-3,
            seed: 42,
            stopword_version: "v1".to_string(),
            stopwords_file: None,
            top_k: 20,
        }
    }
}

/// Parses an override value as TOML, falling back to a bare string.
fn override_value(raw: &str) -> toml::Value {
    let doc = format!("v = {raw}");
    match doc.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.to_string())),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

impl PipelineConfig {
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .with_context(|| format!("reading config {}", p.display()))?;
                text.parse::<toml::Table>()
                    .with_context(|| format!("parsing config {}", p.display()))?
            }
            None => toml::Table::new(),
        };
        for o in overrides {
            let Some((key, value)) = o.split_once('=') else {
                bail!("override `{o}` is not of the form key=value");
            };
            table.insert(key.trim().to_string(), override_value(value.trim()));
        }
        let cfg: Self = toml::Value::Table(table)
            .try_into()
            .context("invalid configuration")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0) {
            bail!("rho must be positive, got {}", self.rho);
        }
        if self.max_passage_tokens == 0 || self.max_refs == 0 || self.num_negatives == 0 {
            bail!("max_passage_tokens, max_refs and num_negatives must be positive");
        }
        let [lo, hi] = self.negatives_range;
        if lo == 0 || lo > hi {
            bail!("negatives_range must satisfy 1 <= lo <= hi, got [{lo}, {hi}]");
        }
        if self.lambda_q < 0.0 || self.lambda_d < 0.0 {
            bail!("loss weights must be non-negative");
        }
        self.bm25()?;
        self.filter().validate()?;
        Ok(())
    }

    /// First 16 hex digits of the SHA-256 of the JSON-serialized config.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))[..16].to_string()
    }

    pub fn stopwords(&self) -> Result<StopwordSet> {
        match &self.stopwords_file {
            Some(p) => StopwordSet::from_file(p, self.stopword_version.clone())
                .with_context(|| format!("loading stopwords from {}", p.display())),
            None if self.stopword_version == "v1" => Ok(StopwordSet::english()),
            None => bail!(
                "stopword version `{}` needs a stopwords_file",
                self.stopword_version
            ),
        }
    }

    pub fn selection(&self) -> SelectionConfig {
        SelectionConfig {
            rho: self.rho,
            max_passage_tokens: self.max_passage_tokens,
            max_refs: self.max_refs,
        }
    }

    pub fn sampling(&self) -> NegativeSampling {
        NegativeSampling {
            rank_range: (self.negatives_range[0], self.negatives_range[1]),
            count: self.num_negatives,
        }
    }

    pub fn bm25(&self) -> Result<Bm25Params> {
        Ok(Bm25Params {
            k1: self.bm25_k1,
            b: self.bm25_b,
        }
        .validate()?)
    }

    pub fn filter(&self) -> FilterConfig {
        FilterConfig {
            mu: match self.mu_mode {
                MuMode::Relative => MuSpec::RelativeToMax(self.mu),
                MuMode::Absolute => MuSpec::Absolute(self.mu),
            },
            upper: self.upper,
            lower: self.lower,
        }
    }

    pub fn loss_weights(&self) -> LossWeights {
        LossWeights {
            lambda_q: self.lambda_q,
            lambda_d: self.lambda_d,
        }
    }
}
