//! `timer head2head` — pairwise preference between two response sets, with
//! seeded presentation-order randomization and the order logged per pair.

use std::path::Path;
use std::sync::Arc;

use serde::Serialize;
use timer_core::genpipe::{run_parallel_ordered, RateLimiter, TemplateSet};
use timer_core::judge::{derive_pair_seed, head_to_head, win_rates, WinRates};

use crate::config::require_file;
use crate::ioutil::{read_jsonl, read_pairs, ResponseRecord};
use crate::manifest::{input_ref, ArtifactWriter};
use crate::provider::make_judge_provider;
use crate::{CliError, CmdStatus, Ctx};

#[derive(Serialize)]
struct H2hSummary {
    rates: WinRates,
    win_a_pct: f64,
    win_b_pct: f64,
    tie_pct: f64,
    n_errors: usize,
    n_missing: usize,
    seed: u64,
}

pub fn run(
    ctx: &Ctx,
    pairs_path: &Path,
    responses_a: &Path,
    responses_b: &Path,
    mock_rule: Option<&str>,
) -> Result<CmdStatus, CliError> {
    require_file(pairs_path, "pairs file")?;
    require_file(responses_a, "responses A")?;
    require_file(responses_b, "responses B")?;
    let pairs = read_pairs(pairs_path)?;
    let a: Vec<ResponseRecord> = read_jsonl(responses_a)?;
    let b: Vec<ResponseRecord> = read_jsonl(responses_b)?;
    let index_a: std::collections::HashMap<&str, &str> =
        a.iter().map(|r| (r.pair_id.as_str(), r.response.as_str())).collect();
    let index_b: std::collections::HashMap<&str, &str> =
        b.iter().map(|r| (r.pair_id.as_str(), r.response.as_str())).collect();

    let mut joined = Vec::new();
    let mut missing = 0usize;
    for pair in &pairs {
        match (index_a.get(pair.pair_id.as_str()), index_b.get(pair.pair_id.as_str())) {
            (Some(ra), Some(rb)) => joined.push((pair, *ra, *rb)),
            _ => missing += 1,
        }
    }
    if joined.is_empty() {
        return Err(CliError::runtime("no pair has responses on both sides".to_string()));
    }

    let judge_config = &ctx.config.judge;
    // the default head-to-head mock intentionally picks whichever response
    // is shown first; the seeded order randomization is what keeps the
    // resulting rates unbiased
    let provider = make_judge_provider(
        &judge_config.provider,
        judge_config.endpoint.as_deref(),
        &judge_config.model,
        mock_rule.unwrap_or("pick-first"),
        ctx.force_mock,
    )?;
    let templates = TemplateSet::builtin();
    let limiter = Arc::new(RateLimiter::new(judge_config.rate_limit_per_min));
    let seed = ctx.config.seed();

    let results = run_parallel_ordered(&joined, judge_config.parallelism, |_, (pair, ra, rb)| {
        limiter.acquire();
        head_to_head(
            &pair.pair_id,
            &pair.question,
            &pair.answer,
            ra,
            rb,
            provider.as_ref(),
            &templates,
            derive_pair_seed(seed, &pair.pair_id),
        )
    });

    let mut outcomes = Vec::new();
    let mut errors = Vec::new();
    for ((pair, _, _), result) in joined.iter().zip(results) {
        match result {
            Ok(outcome) => outcomes.push(outcome),
            Err(e) => errors.push(serde_json::json!({
                "pair_id": pair.pair_id,
                "error": e.to_string(),
            })),
        }
    }
    outcomes.sort_by(|a, b| a.pair_id.cmp(&b.pair_id));
    let rates = win_rates(&outcomes).map_err(|e| CliError::runtime(e.to_string()))?;
    let summary = H2hSummary {
        rates,
        win_a_pct: rates.win_a_pct(),
        win_b_pct: rates.win_b_pct(),
        tie_pct: rates.tie_pct(),
        n_errors: errors.len(),
        n_missing: missing,
        seed,
    };

    let mut writer = ArtifactWriter::new(&ctx.out_dir, "head2head")?;
    let inputs = [input_ref(&ctx.out_dir, pairs_path), input_ref(&ctx.out_dir, responses_a), input_ref(&ctx.out_dir, responses_b)];
    writer.write("h2h.jsonl", &crate::ioutil::to_jsonl_bytes(&outcomes), &[seed], &inputs)?;
    if !errors.is_empty() {
        writer.write("h2h_errors.jsonl", &crate::ioutil::to_jsonl_bytes(&errors), &[seed], &inputs)?;
    }
    writer.write(
        "h2h_summary.json",
        serde_json::to_string_pretty(&summary).expect("summary serializes").as_bytes(),
        &[seed],
        &inputs,
    )?;
    writer.finish()?;
    eprintln!(
        "[head2head] {} comparisons: A {:.1}%, B {:.1}%, tie {:.1}%; {} error(s)",
        rates.total,
        summary.win_a_pct,
        summary.win_b_pct,
        summary.tie_pct,
        errors.len()
    );
    let issues = errors.len() + missing;
    if issues == 0 {
        Ok(CmdStatus::Clean)
    } else {
        Ok(CmdStatus::Partial { issues })
    }
}
