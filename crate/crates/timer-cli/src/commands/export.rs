//! `timer export` — instruction-tuning JSONL from a sampled set, with its
//! metadata sidecar carried along.

use std::path::Path;

use timer_core::sampler::{tuning_jsonl, SampledSet, SetMetadata};

use crate::config::require_file;
use crate::ioutil::read_pairs;
use crate::manifest::{input_ref, ArtifactWriter};
use crate::{CliError, CmdStatus, Ctx};

pub fn run(ctx: &Ctx, input: &Path, output: &str) -> Result<CmdStatus, CliError> {
    require_file(input, "sampled set")?;
    let meta_path = {
        let mut name = input.file_name().unwrap_or_default().to_os_string();
        name.push(".meta.json");
        input.with_file_name(name)
    };
    require_file(&meta_path, "set metadata sidecar (produced by `timer sample`)")?;

    let pairs = read_pairs(input)?;
    if pairs.is_empty() {
        return Err(CliError::Config(format!("{}: set is empty", input.display())));
    }
    let raw_meta = std::fs::read_to_string(&meta_path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", meta_path.display())))?;
    let metadata: SetMetadata = serde_json::from_str(&raw_meta)
        .map_err(|e| CliError::Config(format!("corrupt metadata {}: {e}", meta_path.display())))?;

    let set = SampledSet {
        spec: metadata.spec,
        pairs,
        achieved: metadata.achieved.clone(),
        pool_id: metadata.pool_id.clone(),
        shortfall: metadata.shortfall,
        warnings: metadata.warnings.clone(),
    };

    let mut writer = ArtifactWriter::new(&ctx.out_dir, "export")?;
    let inputs = [input_ref(&ctx.out_dir, input), input_ref(&ctx.out_dir, &meta_path)];
    writer.write(output, tuning_jsonl(&set).as_bytes(), &[set.spec.seed], &inputs)?;
    writer.write(
        &format!("{output}.meta.json"),
        serde_json::to_string_pretty(&set.metadata())
            .expect("metadata serializes")
            .as_bytes(),
        &[set.spec.seed],
        &inputs,
    )?;
    writer.finish()?;
    eprintln!("[export] {} pairs -> {output}", set.pairs.len());
    Ok(CmdStatus::Clean)
}
