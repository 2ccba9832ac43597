//! `timer chunk` — split timelines into token-budgeted context chunks.

use std::path::PathBuf;

use serde::Serialize;
use timer_core::timeline::{chunk_timeline, ContextChunk, PatientTimeline, WhitespaceEstimator};

use crate::config::require_file;
use crate::ioutil::{read_jsonl, to_jsonl_bytes};
use crate::manifest::{input_ref, ArtifactWriter};
use crate::{CliError, CmdStatus, Ctx};

#[derive(Serialize)]
struct ChunkError {
    patient_id: String,
    error: String,
}

pub fn run(ctx: &Ctx, timelines: Option<PathBuf>) -> Result<CmdStatus, CliError> {
    let input = timelines.unwrap_or_else(|| ctx.out_dir.join("timelines.jsonl"));
    require_file(&input, "timelines file")?;
    let timelines: Vec<PatientTimeline> = read_jsonl(&input)?;
    let budget = ctx.config.chunking.token_budget;
    let policy = ctx.config.chunking.oversized;

    let mut chunks: Vec<ContextChunk> = Vec::new();
    let mut errors: Vec<ChunkError> = Vec::new();
    for timeline in &timelines {
        match chunk_timeline(timeline, budget, &WhitespaceEstimator, policy) {
            Ok(mut patient_chunks) => chunks.append(&mut patient_chunks),
            Err(e) => errors.push(ChunkError {
                patient_id: timeline.patient_id.clone(),
                error: e.to_string(),
            }),
        }
    }

    let mut writer = ArtifactWriter::new(&ctx.out_dir, "chunk")?;
    let inputs = [input_ref(&ctx.out_dir, &input)];
    writer.write("chunks.jsonl", &to_jsonl_bytes(&chunks), &[], &inputs)?;
    if !errors.is_empty() {
        writer.write("chunk_errors.jsonl", &to_jsonl_bytes(&errors), &[], &inputs)?;
    }
    writer.finish()?;
    eprintln!(
        "[chunk] {} chunks from {} timelines at budget {budget}; {} error(s)",
        chunks.len(),
        timelines.len(),
        errors.len()
    );
    if errors.is_empty() {
        Ok(CmdStatus::Clean)
    } else {
        Ok(CmdStatus::Partial { issues: errors.len() })
    }
}
