//! Central finite-difference check of the toy encoder gradients.
//!
//! The numeric side only evaluates [`toy_loss`]; it never touches the
//! analytic backward pass it is checking. Coordinates whose perturbation moves
//! an importance value that sits near a kink (`|w|` small, or two positive
//! rows nearly tied for the column max) are skipped.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::sparse::{
    toy_encoder_grad, toy_loss, LossWeights, SparseError, ToyBatch, ToyEncoderParams, ToyItem,
    ToyText,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GradCheckConfig {
    pub dim: usize,
    pub vocab_size: usize,
    pub batch: usize,
    pub tokens_per_text: usize,
    pub step: f64,
    pub kink_tol: f64,
    /// Lower bound on the relative-error denominator.
    pub denom_floor: f64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            dim: 4,
            vocab_size: 8,
            batch: 2,
            tokens_per_text: 3,
            step: 1e-5,
            kink_tol: 1e-3,
            denom_floor: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradCheckReport {
    pub seed: u64,
    pub max_rel_error: f64,
    pub checked: usize,
    pub skipped: usize,
}

/// A random instance: every item has one mined negative plus the other
/// items' positives as in-batch negatives.
pub fn random_instance(seed: u64, cfg: &GradCheckConfig) -> (ToyEncoderParams, ToyBatch) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut uniform = |n: usize| -> Vec<f64> { (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect() };
    let params = ToyEncoderParams {
        dim: cfg.dim,
        vocab_size: cfg.vocab_size,
        w: uniform(cfg.dim * cfg.dim),
        b: uniform(cfg.vocab_size),
        e: uniform(cfg.dim * cfg.vocab_size),
    };
    let mut texts: Vec<ToyText> = Vec::new();
    for _ in 0..cfg.batch * 3 {
        texts.push((0..cfg.tokens_per_text).map(|_| uniform(cfg.dim)).collect());
    }
    let items = (0..cfg.batch)
        .map(|i| {
            let mut negatives = vec![3 * i + 2];
            negatives.extend((0..cfg.batch).filter(|&k| k != i).map(|k| 3 * k + 1));
            ToyItem {
                query: 3 * i,
                positive: 3 * i + 1,
                negatives,
            }
        })
        .collect();
    (params, ToyBatch { texts, items })
}

/// Columns `(text, j)` with an importance value near a kink.
fn kinked_columns(params: &ToyEncoderParams, batch: &ToyBatch, tol: f64) -> Vec<Vec<bool>> {
    batch
        .texts
        .iter()
        .map(|t| {
            let rows = params.importances(t);
            (0..params.vocab_size)
                .map(|j| {
                    let mut col: Vec<f64> = rows.iter().map(|r| r[j]).collect();
                    if col.iter().any(|w| w.abs() < tol) {
                        return true;
                    }
                    col.retain(|&w| w > 0.0);
                    col.sort_by(|a, b| b.total_cmp(a));
                    col.len() >= 2 && col[0] - col[1] < tol
                })
                .collect()
        })
        .collect()
}

pub fn check_instance(
    params: &ToyEncoderParams,
    batch: &ToyBatch,
    weights: LossWeights,
    cfg: &GradCheckConfig,
    seed: u64,
) -> Result<GradCheckReport, SparseError> {
    let (_, grad) = toy_encoder_grad(params, batch, weights)?;
    let kinks = kinked_columns(params, batch, cfg.kink_tol);
    let any_kink = kinks.iter().flatten().any(|&k| k);
    let column_kinked = |j: usize| kinks.iter().any(|t| t[j]);

    let eval = |p: &ToyEncoderParams| toy_loss(p, batch, weights).map(|l| l.total);
    let mut report = GradCheckReport {
        seed,
        max_rel_error: 0.0,
        checked: 0,
        skipped: 0,
    };
    let compare = |analytic: f64, numeric: f64, report: &mut GradCheckReport| {
        let denom = analytic.abs().max(numeric.abs()).max(cfg.denom_floor);
        report.max_rel_error = report.max_rel_error.max((analytic - numeric).abs() / denom);
        report.checked += 1;
    };

    for idx in 0..params.w.len() {
        if any_kink {
            report.skipped += 1;
            continue;
        }
        let mut plus = params.clone();
        plus.w[idx] += cfg.step;
        let mut minus = params.clone();
        minus.w[idx] -= cfg.step;
        let numeric = (eval(&plus)? - eval(&minus)?) / (2.0 * cfg.step);
        compare(grad.w[idx], numeric, &mut report);
    }
    for j in 0..params.b.len() {
        if column_kinked(j) {
            report.skipped += 1;
            continue;
        }
        let mut plus = params.clone();
        plus.b[j] += cfg.step;
        let mut minus = params.clone();
        minus.b[j] -= cfg.step;
        let numeric = (eval(&plus)? - eval(&minus)?) / (2.0 * cfg.step);
        compare(grad.b[j], numeric, &mut report);
    }
    Ok(report)
}

/// Runs [`check_instance`] on `seeds` random instances.
pub fn run_suite(
    seeds: impl IntoIterator<Item = u64>,
    weights: LossWeights,
    cfg: &GradCheckConfig,
) -> Result<Vec<GradCheckReport>, SparseError> {
    seeds
        .into_iter()
        .map(|seed| {
            let (params, batch) = random_instance(seed, cfg);
            check_instance(&params, &batch, weights, cfg, seed)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn instance_shapes() {
        let cfg = GradCheckConfig::default();
        let (p, b) = random_instance(1, &cfg);
        assert_eq!(p.w.len(), 16);
        assert_eq!(p.b.len(), 8);
        assert_eq!(b.texts.len(), 6);
        assert_eq!(b.items[0].negatives, vec![2, 4]);
        assert_eq!(random_instance(1, &cfg), random_instance(1, &cfg));
    }

    #[test]
    fn few_seeds_agree() {
        let cfg = GradCheckConfig::default();
        let reports = run_suite(0..5, LossWeights::default(), &cfg).unwrap();
        for r in reports {
            assert!(r.max_rel_error < 1e-4, "{r:?}");
        }
    }

    #[test]
    fn detects_a_wrong_gradient() {
        // Sanity: the comparison is sensitive to a perturbed analytic value.
        let cfg = GradCheckConfig::default();
        let (p, b) = random_instance(3, &cfg);
        let (_, g) = toy_encoder_grad(&p, &b, LossWeights::default()).unwrap();
        let mut shifted = p.clone();
        shifted.b[0] += cfg.step;
        let mut back = p.clone();
        back.b[0] -= cfg.step;
        let w = LossWeights::default();
        let numeric = (toy_loss(&shifted, &b, w).unwrap().total - toy_loss(&back, &b, w).unwrap().total)
            / (2.0 * cfg.step);
        assert!(((g.b[0] * 1.01) - numeric).abs() > 1e-4 * numeric.abs() || numeric == 0.0);
    }
}
