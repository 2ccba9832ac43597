//! `timer generate` — instruction pairs from chunks through the configured
//! provider, with bounded parallelism, a shared rate limiter, and a full
//! audit trail. Per-chunk failures are recorded and the run continues.

use std::path::PathBuf;
use std::sync::Arc;

use serde::Serialize;
use timer_core::genpipe::{
    filter_multi_evidence, generate_pairs, run_parallel_ordered, Mode, RateLimiter,
    RejectedCandidate, TemplateSet,
};
use timer_core::timeline::ContextChunk;

use crate::config::require_file;
use crate::ioutil::read_jsonl;
use crate::manifest::{input_ref, ArtifactWriter};
use crate::provider::make_generation_provider;
use crate::{CliError, CmdStatus, Ctx};

#[derive(Serialize)]
struct AuditRecord {
    chunk_ref: String,
    raw_responses: Vec<String>,
    rejected: Vec<RejectedCandidate>,
    warnings: Vec<String>,
}

#[derive(Serialize)]
struct GenErrorRecord {
    chunk_ref: String,
    error: String,
}

pub fn run(
    ctx: &Ctx,
    chunks: Option<PathBuf>,
    mode: Option<Mode>,
    pairs_per_chunk: Option<usize>,
    min_evidence: Option<usize>,
) -> Result<CmdStatus, CliError> {
    let input = chunks.unwrap_or_else(|| ctx.out_dir.join("chunks.jsonl"));
    require_file(&input, "chunks file")?;
    let chunks: Vec<ContextChunk> = read_jsonl(&input)?;

    let gen_section = &ctx.config.generation;
    let mut config = gen_section.to_generation_config();
    if let Some(mode) = mode {
        config.mode = mode;
    }
    if let Some(pairs) = pairs_per_chunk {
        config.pairs_per_chunk = pairs;
    }
    config.validate().map_err(|e| CliError::Config(e.to_string()))?;
    let filter_k = min_evidence.unwrap_or_else(|| config.min_evidence());

    let templates = match &gen_section.templates {
        Some(dir) => TemplateSet::from_dir(dir)
            .map_err(|e| CliError::Config(format!("templates in {}: {e}", dir.display())))?,
        None => TemplateSet::builtin(),
    };
    let provider = make_generation_provider(
        &config.provider,
        gen_section.endpoint.as_deref(),
        &config.model,
        config.pairs_per_chunk,
        ctx.force_mock,
    )?;
    let limiter = Arc::new(RateLimiter::new(gen_section.rate_limit_per_min));

    let results = run_parallel_ordered(&chunks, gen_section.parallelism, |_, chunk| {
        limiter.acquire();
        generate_pairs(chunk, provider.as_ref(), &config, &templates)
    });

    let mut pairs = Vec::new();
    let mut audits = Vec::new();
    let mut errors = Vec::new();
    for (chunk, result) in chunks.iter().zip(results) {
        match result {
            Ok(generation) => {
                audits.push(AuditRecord {
                    chunk_ref: chunk.chunk_ref(),
                    raw_responses: generation.raw_responses,
                    rejected: generation.rejected,
                    warnings: generation.warnings,
                });
                pairs.extend(generation.pairs);
            }
            Err(e) => errors.push(GenErrorRecord {
                chunk_ref: chunk.chunk_ref(),
                error: e.to_string(),
            }),
        }
    }
    let before_filter = pairs.len();
    let pairs = filter_multi_evidence(pairs, filter_k);

    let mode_name = config.mode.as_str();
    let mut jsonl = String::new();
    for pair in &pairs {
        jsonl.push_str(&pair.to_jsonl_line());
        jsonl.push('\n');
    }

    let mut writer = ArtifactWriter::new(&ctx.out_dir, "generate")?;
    let inputs = [input_ref(&ctx.out_dir, &input)];
    writer.write(&format!("pairs_{mode_name}.jsonl"), jsonl.as_bytes(), &[], &inputs)?;
    writer.write(
        &format!("audit_{mode_name}.jsonl"),
        &crate::ioutil::to_jsonl_bytes(&audits),
        &[],
        &inputs,
    )?;
    if !errors.is_empty() {
        writer.write(
            &format!("gen_errors_{mode_name}.jsonl"),
            &crate::ioutil::to_jsonl_bytes(&errors),
            &[],
            &inputs,
        )?;
    }
    writer.finish()?;
    eprintln!(
        "[generate] {} chunks -> {} pairs ({} before the distinct-evidence filter k={filter_k}); {} chunk error(s)",
        chunks.len(),
        pairs.len(),
        before_filter,
        errors.len()
    );
    if errors.is_empty() {
        Ok(CmdStatus::Clean)
    } else {
        Ok(CmdStatus::Partial { issues: errors.len() })
    }
}
