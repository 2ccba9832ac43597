//! Automatic text-overlap metrics, bootstrap resampling, and length
//! statistics.
//!
//! All metrics share one tokenization convention — lowercase, split on runs
//! of non-alphanumeric characters — except chrF, which works on characters
//! with whitespace removed. The METEOR here is an exact-match variant: no
//! stemming or synonym matching, parameters alpha=0.9, beta=3, gamma=0.5.
//! Scores are always in [0, 1].

mod meteor;

pub use meteor::{align, Alignment};

use rand_core::SeedableRng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::gen_index;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("empty input")]
    Empty,
    #[error("sample size must be at least 1")]
    ZeroSampleSize,
    #[error("at least one resample required")]
    ZeroResamples,
}

/// Precision / recall / F for one candidate-reference pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreTriple {
    pub precision: f64,
    pub recall: f64,
    pub f: f64,
}

impl ScoreTriple {
    const ZERO: ScoreTriple = ScoreTriple { precision: 0.0, recall: 0.0, f: 0.0 };
}

/// Lowercases and splits on runs of non-alphanumeric characters.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

/// ROUGE-L: longest common subsequence over token sequences.
/// `P = LCS/|cand|`, `R = LCS/|ref|`, `F = 2PR/(P+R)`.
pub fn rouge_l(candidate: &str, reference: &str) -> ScoreTriple {
    let cand = tokenize(candidate);
    let reference = tokenize(reference);
    if cand.is_empty() || reference.is_empty() {
        return ScoreTriple::ZERO;
    }
    let lcs = lcs_length(&cand, &reference) as f64;
    let precision = lcs / cand.len() as f64;
    let recall = lcs / reference.len() as f64;
    let f = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    ScoreTriple { precision, recall, f }
}

fn lcs_length(a: &[String], b: &[String]) -> usize {
    // rolling single-row DP
    let mut row = vec![0usize; b.len() + 1];
    for token in a {
        let mut diag = 0;
        for (j, other) in b.iter().enumerate() {
            let up = row[j + 1];
            row[j + 1] = if token == other { diag + 1 } else { up.max(row[j]) };
            diag = up;
        }
    }
    row[b.len()]
}

/// chrF: character n-gram F-score with whitespace removed.
///
/// Precision and recall per order `n = 1..=max_n` (orders longer than the
/// shorter string are skipped), arithmetic mean over orders, then F_beta.
/// Both inputs empty scores 1, exactly one empty scores 0.
pub fn chrf(candidate: &str, reference: &str, max_n: usize, beta: f64) -> f64 {
    let cand: Vec<char> = candidate.chars().filter(|c| !c.is_whitespace()).collect();
    let reference: Vec<char> = reference.chars().filter(|c| !c.is_whitespace()).collect();
    match (cand.is_empty(), reference.is_empty()) {
        (true, true) => return 1.0,
        (true, false) | (false, true) => return 0.0,
        (false, false) => {}
    }
    let shorter = cand.len().min(reference.len());
    let mut precision_sum = 0.0;
    let mut recall_sum = 0.0;
    let mut orders = 0usize;
    for n in 1..=max_n.min(shorter) {
        let cand_grams = char_ngram_counts(&cand, n);
        let ref_grams = char_ngram_counts(&reference, n);
        let matched: usize = cand_grams
            .iter()
            .map(|(gram, c)| c.min(ref_grams.get(gram).unwrap_or(&0)))
            .sum();
        precision_sum += matched as f64 / (cand.len() - n + 1) as f64;
        recall_sum += matched as f64 / (reference.len() - n + 1) as f64;
        orders += 1;
    }
    let precision = precision_sum / orders as f64;
    let recall = recall_sum / orders as f64;
    if precision + recall == 0.0 {
        return 0.0;
    }
    let b2 = beta * beta;
    (1.0 + b2) * precision * recall / (b2 * precision + recall)
}

/// chrF with the fixed conventions used throughout: max order 6, beta 2.
pub fn chrf_default(candidate: &str, reference: &str) -> f64 {
    chrf(candidate, reference, 6, 2.0)
}

fn char_ngram_counts(chars: &[char], n: usize) -> std::collections::HashMap<&[char], usize> {
    let mut counts = std::collections::HashMap::new();
    for gram in chars.windows(n) {
        *counts.entry(gram).or_insert(0) += 1;
    }
    counts
}

const METEOR_ALPHA: f64 = 0.9;
const METEOR_BETA: f64 = 3.0;
const METEOR_GAMMA: f64 = 0.5;

/// METEOR, exact-match variant: unigram alignment maximizing matches then
/// minimizing chunks; `F_mean = PR / (alpha*P + (1-alpha)*R)`;
/// `penalty = gamma * (chunks/m)^beta`; score `= F_mean * (1 - penalty)`.
pub fn meteor_lite(candidate: &str, reference: &str) -> f64 {
    let cand = tokenize(candidate);
    let reference = tokenize(reference);
    if cand.is_empty() || reference.is_empty() {
        return 0.0;
    }
    let stats = align(&cand, &reference);
    if stats.matches == 0 {
        return 0.0;
    }
    let m = stats.matches as f64;
    let precision = m / cand.len() as f64;
    let recall = m / reference.len() as f64;
    let f_mean = precision * recall / (METEOR_ALPHA * precision + (1.0 - METEOR_ALPHA) * recall);
    let penalty = METEOR_GAMMA * (stats.chunks as f64 / m).powf(METEOR_BETA);
    f_mean * (1.0 - penalty)
}

/// Google BLEU: token n-grams for `n = 1..=max_n` pooled into one multiset
/// per side; `score = min(matched/|cand pool|, matched/|ref pool|)`.
pub fn gleu(candidate: &str, reference: &str, max_n: usize) -> f64 {
    let cand = tokenize(candidate);
    let reference = tokenize(reference);
    if cand.is_empty() || reference.is_empty() {
        return 0.0;
    }
    let cand_pool = pooled_ngram_counts(&cand, max_n);
    let ref_pool = pooled_ngram_counts(&reference, max_n);
    let cand_total: usize = cand_pool.values().sum();
    let ref_total: usize = ref_pool.values().sum();
    if cand_total == 0 || ref_total == 0 {
        return 0.0;
    }
    let matched: usize = cand_pool
        .iter()
        .map(|(gram, c)| c.min(ref_pool.get(gram).unwrap_or(&0)))
        .sum();
    let precision = matched as f64 / cand_total as f64;
    let recall = matched as f64 / ref_total as f64;
    precision.min(recall)
}

/// GLEU with the conventional max order of 4.
pub fn gleu_default(candidate: &str, reference: &str) -> f64 {
    gleu(candidate, reference, 4)
}

fn pooled_ngram_counts(tokens: &[String], max_n: usize) -> std::collections::HashMap<&[String], usize> {
    let mut counts = std::collections::HashMap::new();
    for n in 1..=max_n.min(tokens.len()) {
        for gram in tokens.windows(n) {
            *counts.entry(gram).or_insert(0) += 1;
        }
    }
    counts
}

/// Mean and spread of resampled means.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapSummary {
    pub mean: f64,
    pub std: f64,
    pub n_resamples: usize,
    pub sample_size: usize,
    pub seed: u64,
}

/// Draws `n_resamples` resamples of `sample_size` scores with replacement
/// (seeded) and summarizes the resample means by their mean and population
/// standard deviation.
pub fn bootstrap(
    scores: &[f64],
    n_resamples: usize,
    sample_size: usize,
    seed: u64,
) -> Result<BootstrapSummary, MetricsError> {
    if scores.is_empty() {
        return Err(MetricsError::Empty);
    }
    if sample_size == 0 {
        return Err(MetricsError::ZeroSampleSize);
    }
    if n_resamples == 0 {
        return Err(MetricsError::ZeroResamples);
    }
    let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
    // means and spread are computed relative to an anchor value; the shifted
    // forms are algebraically identical but keep constant inputs exactly at
    // zero variance
    let mut means = Vec::with_capacity(n_resamples);
    for _ in 0..n_resamples {
        let anchor = scores[gen_index(&mut rng, scores.len())];
        let mut acc = 0.0;
        for _ in 1..sample_size {
            acc += scores[gen_index(&mut rng, scores.len())] - anchor;
        }
        means.push(anchor + acc / sample_size as f64);
    }
    let anchor = means[0];
    let delta_mean = means.iter().map(|m| m - anchor).sum::<f64>() / means.len() as f64;
    let variance = means
        .iter()
        .map(|m| {
            let d = (m - anchor) - delta_mean;
            d * d
        })
        .sum::<f64>()
        / means.len() as f64;
    Ok(BootstrapSummary {
        mean: anchor + delta_mean,
        std: variance.sqrt(),
        n_resamples,
        sample_size,
        seed,
    })
}

/// First quartile, median, and third quartile of per-text token counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LengthQuartiles {
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
}

/// Quantiles by linear interpolation at rank `(n - 1) * q`.
pub fn length_quartiles<S: AsRef<str>>(
    texts: &[S],
    token_count: impl Fn(&str) -> usize,
) -> Result<LengthQuartiles, MetricsError> {
    if texts.is_empty() {
        return Err(MetricsError::Empty);
    }
    let mut counts: Vec<f64> = texts.iter().map(|t| token_count(t.as_ref()) as f64).collect();
    counts.sort_by(|a, b| a.partial_cmp(b).expect("counts are finite"));
    Ok(LengthQuartiles {
        q1: interpolated_quantile(&counts, 0.25),
        median: interpolated_quantile(&counts, 0.5),
        q3: interpolated_quantile(&counts, 0.75),
    })
}

fn interpolated_quantile(sorted: &[f64], q: f64) -> f64 {
    let rank = (sorted.len() - 1) as f64 * q;
    let lo = rank.floor() as usize;
    let frac = rank - lo as f64;
    if frac == 0.0 || lo + 1 == sorted.len() {
        sorted[lo]
    } else {
        sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
    }
}

/// One row of the per-pair score report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub pair_id: String,
    pub rouge_l_f: f64,
    pub chrf: f64,
    pub meteor: f64,
    pub gleu: f64,
}

impl ScoreRow {
    /// Scores `response` against `reference` under all four metrics.
    pub fn compute(pair_id: &str, response: &str, reference: &str) -> ScoreRow {
        ScoreRow {
            pair_id: pair_id.to_string(),
            rouge_l_f: rouge_l(response, reference).f,
            chrf: chrf_default(response, reference),
            meteor: meteor_lite(response, reference),
            gleu: gleu_default(response, reference),
        }
    }
}

/// Score report CSV: `pair_id,rouge_l_f,chrf,meteor,gleu`.
pub fn score_report_csv(rows: &[ScoreRow]) -> String {
    let mut out = String::from("pair_id,rouge_l_f,chrf,meteor,gleu\n");
    for row in rows {
        out.push_str(&format!(
            "{},{:.6},{:.6},{:.6},{:.6}\n",
            row.pair_id, row.rouge_l_f, row.chrf, row.meteor, row.gleu
        ));
    }
    out
}
