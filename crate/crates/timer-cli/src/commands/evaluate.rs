//! `timer evaluate` — automatic metric scores per pair plus bootstrap
//! summaries per metric. BERTScore is deliberately absent (it needs
//! token-level contextual embeddings); reports mark the column excluded.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;
use timer_core::metrics::{bootstrap, score_report_csv, BootstrapSummary, ScoreRow};

use crate::config::require_file;
use crate::ioutil::{join_responses, read_jsonl, read_pairs, ResponseRecord};
use crate::manifest::{input_ref, ArtifactWriter};
use crate::{CliError, CmdStatus, Ctx};

pub const EXCLUDED_METRICS: [&str; 1] = ["bertscore"];
pub const METRIC_NOTES: [&str; 2] = [
    "meteor is the exact-match variant: no stemming or synonym matching",
    "bertscore excluded: requires token-level contextual embeddings",
];

#[derive(Serialize)]
struct EvaluationSummary {
    n_scored: usize,
    n_missing_responses: usize,
    metrics: BTreeMap<String, BootstrapSummary>,
    excluded_metrics: Vec<String>,
    notes: Vec<String>,
}

pub fn run(ctx: &Ctx, pairs_path: &Path, responses_path: &Path) -> Result<CmdStatus, CliError> {
    require_file(pairs_path, "pairs file")?;
    require_file(responses_path, "responses file")?;
    let pairs = read_pairs(pairs_path)?;
    let responses: Vec<ResponseRecord> = read_jsonl(responses_path)?;
    let (joined, missing) = join_responses(&pairs, &responses);
    if joined.is_empty() {
        return Err(CliError::runtime("no responses matched any pair_id".to_string()));
    }

    let rows: Vec<ScoreRow> = joined
        .iter()
        .map(|(pair, response)| ScoreRow::compute(&pair.pair_id, response, &pair.answer))
        .collect();

    let eval = &ctx.config.evaluation;
    let seed = ctx.config.seed();
    type Column = fn(&ScoreRow) -> f64;
    let mut metrics = BTreeMap::new();
    let columns: [(&str, Column); 4] = [
        ("rouge_l_f", |r| r.rouge_l_f),
        ("chrf", |r| r.chrf),
        ("meteor", |r| r.meteor),
        ("gleu", |r| r.gleu),
    ];
    for (offset, (name, extract)) in columns.iter().enumerate() {
        let scores: Vec<f64> = rows.iter().map(extract).collect();
        let summary = bootstrap(
            &scores,
            eval.n_resamples,
            eval.sample_size,
            seed.wrapping_add(offset as u64),
        )
        .map_err(|e| CliError::runtime(format!("bootstrap over {name}: {e}")))?;
        metrics.insert(name.to_string(), summary);
    }

    let summary = EvaluationSummary {
        n_scored: rows.len(),
        n_missing_responses: missing.len(),
        metrics,
        excluded_metrics: EXCLUDED_METRICS.iter().map(|s| s.to_string()).collect(),
        notes: METRIC_NOTES.iter().map(|s| s.to_string()).collect(),
    };

    let mut writer = ArtifactWriter::new(&ctx.out_dir, "evaluate")?;
    let inputs = [input_ref(&ctx.out_dir, pairs_path), input_ref(&ctx.out_dir, responses_path)];
    writer.write("scores.csv", score_report_csv(&rows).as_bytes(), &[seed], &inputs)?;
    writer.write(
        "evaluation.json",
        serde_json::to_string_pretty(&summary).expect("summary serializes").as_bytes(),
        &[seed],
        &inputs,
    )?;
    if !missing.is_empty() {
        let lines: Vec<serde_json::Value> = missing
            .iter()
            .map(|id| serde_json::json!({"pair_id": id, "error": "missing response"}))
            .collect();
        writer.write("eval_errors.jsonl", &crate::ioutil::to_jsonl_bytes(&lines), &[], &inputs)?;
    }
    writer.finish()?;
    eprintln!(
        "[evaluate] scored {} pairs; {} missing response(s); bootstrap n={} k={}",
        rows.len(),
        missing.len(),
        eval.n_resamples,
        eval.sample_size
    );
    if missing.is_empty() {
        Ok(CmdStatus::Clean)
    } else {
        Ok(CmdStatus::Partial { issues: missing.len() })
    }
}
