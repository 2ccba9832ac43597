//! LLM-as-judge scoring: correctness/completeness verdicts in a fixed
//! two-line grammar, head-to-head comparison with randomized presentation
//! order, aggregation to percentages, and Spearman rank validation against
//! human judgments.

use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::genpipe::{prompt_key, render, Provider, ProviderError, ProviderRequest, TemplateSet};

#[derive(Debug, Error)]
pub enum JudgeError {
    #[error("judge output unparseable after {attempts} attempts: `{raw}`")]
    Unparseable { attempts: usize, raw: String },
    #[error("judge provider failed: {0}")]
    Provider(#[from] ProviderError),
    #[error("no valid items to aggregate")]
    Empty,
    #[error("input lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("need at least 2 observations, got {0}")]
    TooFew(usize),
    #[error("undefined correlation: zero rank variance")]
    ZeroVariance,
    #[error("inputs must be finite")]
    NonFinite,
}

/// Per-sample verdict. The raw judge text is retained for audit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgeVerdict {
    pub pair_id: String,
    pub correct: bool,
    pub complete: bool,
    pub raw: String,
}

/// Builds the judge prompt, requests a verdict, and parses the two-line
/// grammar `CORRECT: yes|no` / `COMPLETE: yes|no` (case-insensitive, order
/// free). One retry on parse failure.
pub fn judge_pair(
    pair_id: &str,
    instruction: &str,
    reference: &str,
    response: &str,
    provider: &dyn Provider,
    templates: &TemplateSet,
) -> Result<JudgeVerdict, JudgeError> {
    let prompt = render(
        &templates.judge,
        &[("instruction", instruction), ("reference", reference), ("response", response)],
    );
    let request = ProviderRequest::new(prompt);
    let mut last_raw = String::new();
    for _ in 0..2 {
        let response = provider.complete(&request)?;
        last_raw = response.text.clone();
        if let Some((correct, complete)) = parse_verdict(&response.text) {
            return Ok(JudgeVerdict { pair_id: pair_id.to_string(), correct, complete, raw: last_raw });
        }
    }
    Err(JudgeError::Unparseable { attempts: 2, raw: last_raw })
}

fn parse_verdict(text: &str) -> Option<(bool, bool)> {
    let mut correct = None;
    let mut complete = None;
    for line in text.lines() {
        let line = line.trim();
        let lower = line.to_lowercase();
        if let Some(rest) = lower.strip_prefix("correct:") {
            correct = parse_yes_no(rest).or(correct);
        } else if let Some(rest) = lower.strip_prefix("complete:") {
            complete = parse_yes_no(rest).or(complete);
        }
    }
    Some((correct?, complete?))
}

fn parse_yes_no(rest: &str) -> Option<bool> {
    match rest.trim() {
        "yes" => Some(true),
        "no" => Some(false),
        _ => None,
    }
}

/// Which of the two compared responses was shown first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ResponseSide {
    A,
    B,
}

/// De-randomized comparison outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum H2hOutcome {
    A,
    B,
    #[serde(rename = "tie")]
    Tie,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadToHeadResult {
    pub pair_id: String,
    /// Presentation order used for this pair, logged for audit.
    pub shown_first: ResponseSide,
    pub outcome: H2hOutcome,
}

/// Stable per-pair seed derived from a base seed and the pair id.
pub fn derive_pair_seed(base: u64, pair_id: &str) -> u64 {
    base ^ prompt_key(pair_id)
}

/// Presents the two responses in seeded random order, asks the judge to pick
/// first/second/tie, and maps the answer back to A/B/tie.
#[allow(clippy::too_many_arguments)]
pub fn head_to_head(
    pair_id: &str,
    instruction: &str,
    reference: &str,
    response_a: &str,
    response_b: &str,
    provider: &dyn Provider,
    templates: &TemplateSet,
    seed: u64,
) -> Result<HeadToHeadResult, JudgeError> {
    let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
    let shown_first = if rng.next_u64() & 1 == 0 { ResponseSide::A } else { ResponseSide::B };
    let (first, second) = match shown_first {
        ResponseSide::A => (response_a, response_b),
        ResponseSide::B => (response_b, response_a),
    };
    let prompt = render(
        &templates.head_to_head,
        &[
            ("instruction", instruction),
            ("reference", reference),
            ("first", first),
            ("second", second),
        ],
    );
    let request = ProviderRequest::new(prompt);
    let mut last_raw = String::new();
    for _ in 0..2 {
        let response = provider.complete(&request)?;
        last_raw = response.text.clone();
        if let Some(winner) = parse_winner(&response.text) {
            let outcome = match (winner, shown_first) {
                (Winner::Tie, _) => H2hOutcome::Tie,
                (Winner::First, ResponseSide::A) | (Winner::Second, ResponseSide::B) => {
                    H2hOutcome::A
                }
                (Winner::First, ResponseSide::B) | (Winner::Second, ResponseSide::A) => {
                    H2hOutcome::B
                }
            };
            return Ok(HeadToHeadResult { pair_id: pair_id.to_string(), shown_first, outcome });
        }
    }
    Err(JudgeError::Unparseable { attempts: 2, raw: last_raw })
}

enum Winner {
    First,
    Second,
    Tie,
}

fn parse_winner(text: &str) -> Option<Winner> {
    for line in text.lines() {
        let lower = line.trim().to_lowercase();
        if let Some(rest) = lower.strip_prefix("winner:") {
            return match rest.trim() {
                "first" => Some(Winner::First),
                "second" => Some(Winner::Second),
                "tie" => Some(Winner::Tie),
                _ => None,
            };
        }
    }
    None
}

/// Correct/complete percentages over valid verdicts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JudgeAggregate {
    pub n_judged: usize,
    pub n_correct: usize,
    pub n_complete: usize,
    pub correct_pct: f64,
    pub complete_pct: f64,
}

pub fn aggregate(verdicts: &[JudgeVerdict]) -> Result<JudgeAggregate, JudgeError> {
    if verdicts.is_empty() {
        return Err(JudgeError::Empty);
    }
    let n = verdicts.len();
    let n_correct = verdicts.iter().filter(|v| v.correct).count();
    let n_complete = verdicts.iter().filter(|v| v.complete).count();
    Ok(JudgeAggregate {
        n_judged: n,
        n_correct,
        n_complete,
        correct_pct: 100.0 * n_correct as f64 / n as f64,
        complete_pct: 100.0 * n_complete as f64 / n as f64,
    })
}

/// Win/tie tallies. The counts are the exact (rational) form; the percentage
/// accessors divide only at the end, so `wins_a + wins_b + ties == total`
/// carries the exact "sums to 100%" identity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WinRates {
    pub wins_a: usize,
    pub wins_b: usize,
    pub ties: usize,
    pub total: usize,
}

impl WinRates {
    pub fn win_a_pct(&self) -> f64 {
        100.0 * self.wins_a as f64 / self.total as f64
    }
    pub fn win_b_pct(&self) -> f64 {
        100.0 * self.wins_b as f64 / self.total as f64
    }
    pub fn tie_pct(&self) -> f64 {
        100.0 * self.ties as f64 / self.total as f64
    }
}

pub fn win_rates(results: &[HeadToHeadResult]) -> Result<WinRates, JudgeError> {
    if results.is_empty() {
        return Err(JudgeError::Empty);
    }
    let wins_a = results.iter().filter(|r| r.outcome == H2hOutcome::A).count();
    let wins_b = results.iter().filter(|r| r.outcome == H2hOutcome::B).count();
    let ties = results.iter().filter(|r| r.outcome == H2hOutcome::Tie).count();
    Ok(WinRates { wins_a, wins_b, ties, total: results.len() })
}

/// Spearman rank correlation with average ranks for ties (the tie-safe form:
/// Pearson correlation of the rank vectors).
pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<f64, JudgeError> {
    if xs.len() != ys.len() {
        return Err(JudgeError::LengthMismatch(xs.len(), ys.len()));
    }
    if xs.len() < 2 {
        return Err(JudgeError::TooFew(xs.len()));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(JudgeError::NonFinite);
    }
    let rx = average_ranks(xs);
    let ry = average_ranks(ys);
    let n = rx.len() as f64;
    let mean_x = rx.iter().sum::<f64>() / n;
    let mean_y = ry.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var_x = 0.0;
    let mut var_y = 0.0;
    for (x, y) in rx.iter().zip(&ry) {
        let dx = x - mean_x;
        let dy = y - mean_y;
        cov += dx * dy;
        var_x += dx * dx;
        var_y += dy * dy;
    }
    if var_x == 0.0 || var_y == 0.0 {
        return Err(JudgeError::ZeroVariance);
    }
    Ok(cov / (var_x * var_y).sqrt())
}

/// 1-based ranks with tied values sharing the average of their rank range.
fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).expect("finite values"));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        // positions i..=j (0-based) share the mean of ranks i+1..=j+1
        let shared = (i + 1 + j + 1) as f64 / 2.0;
        for &idx in &order[i..=j] {
            ranks[idx] = shared;
        }
        i = j + 1;
    }
    ranks
}

/// Deterministic offline judges for desk-scale runs and tests.
pub enum MockJudge {
    /// Accept every response on both axes.
    AlwaysYes,
    /// Correct and complete exactly when the response text equals the
    /// reference text. Relies on the built-in judge template's section
    /// headers to locate both texts in the prompt.
    EchoMatch,
    /// Always prefer whichever response was shown first (an intentionally
    /// position-biased judge used to exercise the de-biasing).
    PickFirst,
    /// Always call a tie.
    AlwaysTie,
}

impl Provider for MockJudge {
    fn name(&self) -> &str {
        "mock-judge"
    }

    fn complete(&self, request: &ProviderRequest) -> Result<crate::genpipe::ProviderResponse, ProviderError> {
        let text = match self {
            MockJudge::AlwaysYes => "CORRECT: yes\nCOMPLETE: yes".to_string(),
            MockJudge::AlwaysTie => "WINNER: tie".to_string(),
            MockJudge::PickFirst => "WINNER: first".to_string(),
            MockJudge::EchoMatch => {
                let reference =
                    extract_section(&request.prompt, "Reference answer:", "Model response:");
                let response = extract_section(&request.prompt, "Model response:", "Judge the");
                let matched = match (reference, response) {
                    (Some(a), Some(b)) => a == b,
                    _ => false,
                };
                let verdict = if matched { "yes" } else { "no" };
                format!("CORRECT: {verdict}\nCOMPLETE: {verdict}")
            }
        };
        Ok(crate::genpipe::ProviderResponse::of_text(text))
    }
}

fn extract_section<'a>(prompt: &'a str, start: &str, end: &str) -> Option<&'a str> {
    let from = prompt.find(start)? + start.len();
    let until = prompt[from..].find(end)? + from;
    Some(prompt[from..until].trim())
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Fixed(&'static str);
    impl Provider for Fixed {
        fn name(&self) -> &str {
            "fixed"
        }
        fn complete(&self, _: &ProviderRequest) -> Result<crate::genpipe::ProviderResponse, ProviderError> {
            Ok(crate::genpipe::ProviderResponse::of_text(self.0))
        }
    }

    #[test]
    fn verdict_grammar_parses_case_insensitively() {
        let templates = TemplateSet::builtin();
        let v = judge_pair("x", "q", "ref", "resp", &Fixed("correct: YES\nComplete: no"), &templates)
            .unwrap();
        assert!(v.correct);
        assert!(!v.complete);
        assert_eq!(v.raw, "correct: YES\nComplete: no");
    }

    #[test]
    fn unparseable_after_retry_is_error() {
        let templates = TemplateSet::builtin();
        let err =
            judge_pair("x", "q", "ref", "resp", &Fixed("I think it is fine."), &templates).unwrap_err();
        assert!(matches!(err, JudgeError::Unparseable { attempts: 2, .. }));
    }

    #[test]
    fn echo_match_mock_agrees_on_identical_response() {
        let templates = TemplateSet::builtin();
        let v = judge_pair("x", "q", "same answer", "same answer", &MockJudge::EchoMatch, &templates)
            .unwrap();
        assert!(v.correct && v.complete);
        let v = judge_pair("x", "q", "reference", "different", &MockJudge::EchoMatch, &templates)
            .unwrap();
        assert!(!v.correct && !v.complete);
    }

    #[test]
    fn head_to_head_maps_order_back() {
        let templates = TemplateSet::builtin();
        // find seeds that show A first and B first
        let seed_a_first = (0..100)
            .find(|&s| {
                let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(s);
                rng.next_u64() & 1 == 0
            })
            .unwrap();
        let seed_b_first = (0..100)
            .find(|&s| {
                let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(s);
                rng.next_u64() & 1 == 1
            })
            .unwrap();

        let r = head_to_head("x", "q", "ref", "ra", "rb", &MockJudge::PickFirst, &templates, seed_a_first)
            .unwrap();
        assert_eq!(r.shown_first, ResponseSide::A);
        assert_eq!(r.outcome, H2hOutcome::A);

        let r = head_to_head("x", "q", "ref", "ra", "rb", &MockJudge::PickFirst, &templates, seed_b_first)
            .unwrap();
        assert_eq!(r.shown_first, ResponseSide::B);
        assert_eq!(r.outcome, H2hOutcome::B);

        let r = head_to_head("x", "q", "ref", "ra", "rb", &MockJudge::AlwaysTie, &templates, 0)
            .unwrap();
        assert_eq!(r.outcome, H2hOutcome::Tie);
    }

    #[test]
    fn aggregate_percentages() {
        let v = |correct, complete| JudgeVerdict {
            pair_id: "x".into(),
            correct,
            complete,
            raw: String::new(),
        };
        let agg = aggregate(&[v(true, true), v(true, false), v(false, false)]).unwrap();
        assert!((agg.correct_pct - 200.0 / 3.0).abs() < 1e-9);
        assert!((agg.complete_pct - 100.0 / 3.0).abs() < 1e-9);
        assert!(aggregate(&[]).is_err());
    }

    #[test]
    fn win_rate_counts() {
        let r = |outcome| HeadToHeadResult { pair_id: "x".into(), shown_first: ResponseSide::A, outcome };
        let rates =
            win_rates(&[r(H2hOutcome::A), r(H2hOutcome::B), r(H2hOutcome::Tie), r(H2hOutcome::A)])
                .unwrap();
        assert_eq!((rates.win_a_pct(), rates.win_b_pct(), rates.tie_pct()), (50.0, 25.0, 25.0));
        assert_eq!(rates.wins_a + rates.wins_b + rates.ties, rates.total);

        let all_tie =
            win_rates(&[r(H2hOutcome::Tie), r(H2hOutcome::Tie), r(H2hOutcome::Tie)]).unwrap();
        assert_eq!((all_tie.win_a_pct(), all_tie.win_b_pct(), all_tie.tie_pct()), (0.0, 0.0, 100.0));
    }

    #[test]
    fn spearman_monotone_extremes() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(spearman(&xs, &[10.0, 20.0, 30.0, 40.0]).unwrap(), 1.0);
        assert_eq!(spearman(&xs, &[9.0, 7.0, 5.0, 3.0]).unwrap(), -1.0);
    }

    #[test]
    #[allow(clippy::approx_constant)] // 0.318 is a data value, not 1/pi
    fn spearman_judge_validation_data() {
        // five-model correctness scores vs human ranks: d^2 sums to 38,
        // rho = 1 - 6*38/120 = -0.9
        let llm_correctness = [0.419, 0.383, 0.343, 0.318, 0.193];
        let human_rank = [2.309, 2.292, 3.259, 3.304, 3.688];
        let rho = spearman(&llm_correctness, &human_rank).unwrap();
        assert_eq!(rho, -0.9);
    }

    #[test]
    fn spearman_ties_use_average_ranks() {
        // xs has a tie; ranks (1.5, 1.5, 3); ys strictly increasing
        let rho = spearman(&[1.0, 1.0, 2.0], &[1.0, 2.0, 3.0]).unwrap();
        assert!((rho - 0.866_025_403_784_438_6).abs() < 1e-12);
    }

    #[test]
    fn spearman_error_paths() {
        assert!(matches!(spearman(&[1.0], &[1.0]), Err(JudgeError::TooFew(1))));
        assert!(matches!(spearman(&[1.0, 2.0], &[1.0]), Err(JudgeError::LengthMismatch(2, 1))));
        assert!(matches!(spearman(&[1.0, 1.0], &[1.0, 2.0]), Err(JudgeError::ZeroVariance)));
    }

    #[test]
    fn spearman_invariant_under_monotone_transform() {
        let xs = [0.3, 0.9, 0.1, 0.7];
        let ys = [2.0, 1.0, 4.0, 3.0];
        let base = spearman(&xs, &ys).unwrap();
        let squashed: Vec<f64> = xs.iter().map(|x| x.powi(3) * 10.0 + 1.0).collect();
        assert_eq!(spearman(&squashed, &ys).unwrap(), base);
    }
}
