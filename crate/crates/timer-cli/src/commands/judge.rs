//! `timer judge` — correctness/completeness verdicts per pair. Unparseable
//! judge outputs are recorded and excluded from aggregates, with the count
//! reported.

use std::path::Path;
use std::sync::Arc;

use serde::Serialize;
use timer_core::genpipe::{run_parallel_ordered, RateLimiter, TemplateSet};
use timer_core::judge::{aggregate, judge_pair, JudgeAggregate};

use crate::config::require_file;
use crate::ioutil::{join_responses, read_jsonl, read_pairs, ResponseRecord};
use crate::manifest::{input_ref, ArtifactWriter};
use crate::provider::make_judge_provider;
use crate::{CliError, CmdStatus, Ctx};

#[derive(Serialize)]
struct JudgeSummary {
    aggregate: JudgeAggregate,
    n_errors: usize,
    n_missing_responses: usize,
}

pub fn run(
    ctx: &Ctx,
    pairs_path: &Path,
    responses_path: &Path,
    mock_rule: Option<&str>,
) -> Result<CmdStatus, CliError> {
    require_file(pairs_path, "pairs file")?;
    require_file(responses_path, "responses file")?;
    let pairs = read_pairs(pairs_path)?;
    let responses: Vec<ResponseRecord> = read_jsonl(responses_path)?;
    let (joined, missing) = join_responses(&pairs, &responses);
    if joined.is_empty() {
        return Err(CliError::runtime("no responses matched any pair_id".to_string()));
    }

    let judge_config = &ctx.config.judge;
    let provider = make_judge_provider(
        &judge_config.provider,
        judge_config.endpoint.as_deref(),
        &judge_config.model,
        mock_rule.unwrap_or(&judge_config.mock_rule),
        ctx.force_mock,
    )?;
    let templates = TemplateSet::builtin();
    let limiter = Arc::new(RateLimiter::new(judge_config.rate_limit_per_min));

    let results = run_parallel_ordered(&joined, judge_config.parallelism, |_, (pair, response)| {
        limiter.acquire();
        judge_pair(&pair.pair_id, &pair.question, &pair.answer, response, provider.as_ref(), &templates)
    });

    let mut verdicts = Vec::new();
    let mut errors = Vec::new();
    for ((pair, _), result) in joined.iter().zip(results) {
        match result {
            Ok(verdict) => verdicts.push(verdict),
            Err(e) => errors.push(serde_json::json!({
                "pair_id": pair.pair_id,
                "error": e.to_string(),
            })),
        }
    }
    // completed results merge in pair_id order
    verdicts.sort_by(|a, b| a.pair_id.cmp(&b.pair_id));
    let aggregate = aggregate(&verdicts).map_err(|e| CliError::runtime(e.to_string()))?;
    let summary = JudgeSummary {
        aggregate,
        n_errors: errors.len(),
        n_missing_responses: missing.len(),
    };

    let mut writer = ArtifactWriter::new(&ctx.out_dir, "judge")?;
    let inputs = [input_ref(&ctx.out_dir, pairs_path), input_ref(&ctx.out_dir, responses_path)];
    writer.write("verdicts.jsonl", &crate::ioutil::to_jsonl_bytes(&verdicts), &[], &inputs)?;
    if !errors.is_empty() {
        writer.write("judge_errors.jsonl", &crate::ioutil::to_jsonl_bytes(&errors), &[], &inputs)?;
    }
    writer.write(
        "judge_summary.json",
        serde_json::to_string_pretty(&summary).expect("summary serializes").as_bytes(),
        &[],
        &inputs,
    )?;
    writer.finish()?;
    eprintln!(
        "[judge] {} verdicts: correct {:.1}%, complete {:.1}%; {} error(s), {} missing response(s)",
        summary.aggregate.n_judged,
        summary.aggregate.correct_pct,
        summary.aggregate.complete_pct,
        summary.n_errors,
        summary.n_missing_responses
    );
    let issues = errors.len() + missing.len();
    if issues == 0 {
        Ok(CmdStatus::Clean)
    } else {
        Ok(CmdStatus::Partial { issues })
    }
}
