//! `timer sample` — distribution-controlled draws from a pair pool: a single
//! strategy set, or both benchmark variants (edge + uniform) with the
//! patient-disjointness guard against a tuning pool.

use std::path::PathBuf;

use timer_core::sampler::{
    assemble_benchmark, benchmark_jsonl, check_patient_disjoint, sample, BenchmarkConfig,
    SampleSpec, SampledSet, SamplerError, Strategy,
};

use crate::config::require_file;
use crate::ioutil::read_pairs;
use crate::manifest::{input_ref, ArtifactWriter};
use crate::{CliError, CmdStatus, Ctx};

fn map_sampler_error(e: SamplerError) -> CliError {
    match e {
        SamplerError::PatientOverlap { .. }
        | SamplerError::InvalidSpec(_)
        | SamplerError::NotBenchmarkPool { .. } => CliError::Config(e.to_string()),
        other => CliError::runtime(other.to_string()),
    }
}

pub fn run(
    ctx: &Ctx,
    pairs: Option<PathBuf>,
    benchmark_variants: bool,
    check_disjoint: Option<PathBuf>,
    edge_n: Option<usize>,
    uniform_n: Option<usize>,
) -> Result<CmdStatus, CliError> {
    let input = pairs.unwrap_or_else(|| ctx.out_dir.join("pairs_benchmark.jsonl"));
    require_file(&input, "pair pool")?;
    let pool = read_pairs(&input)?;
    let pool_id = input_ref(&ctx.out_dir, &input);
    let seed = ctx.config.seed();
    let sampling = &ctx.config.sampling;

    let tuning_pool = match &check_disjoint {
        Some(path) => {
            require_file(path, "tuning pool")?;
            Some(read_pairs(path)?)
        }
        None => None,
    };

    let mut writer = ArtifactWriter::new(&ctx.out_dir, "sample")?;
    let inputs: Vec<String> = std::iter::once(input_ref(&ctx.out_dir, &input))
        .chain(check_disjoint.iter().map(|p| input_ref(&ctx.out_dir, p)))
        .collect();

    let write_set = |writer: &mut ArtifactWriter,
                         name: &str,
                         body: String,
                         set: &SampledSet|
     -> Result<(), CliError> {
        writer.write(name, body.as_bytes(), &[set.spec.seed], &inputs)?;
        let meta = serde_json::to_string_pretty(&set.metadata()).expect("metadata serializes");
        writer.write(&format!("{name}.meta.json"), meta.as_bytes(), &[set.spec.seed], &inputs)?;
        for warning in &set.warnings {
            eprintln!("[sample] warning: {warning}");
        }
        Ok(())
    };

    if benchmark_variants {
        let config = BenchmarkConfig {
            edge_n: edge_n.unwrap_or(sampling.edge_n),
            uniform_n: uniform_n.unwrap_or(sampling.uniform_n),
            bins: sampling.bins,
            seed,
        };
        let variants = assemble_benchmark(&pool, &config, tuning_pool.as_deref())
            .map_err(map_sampler_error)?;
        write_set(
            &mut writer,
            "benchmark_edge.jsonl",
            benchmark_jsonl(&variants.edge, Strategy::Edge),
            &variants.edge,
        )?;
        write_set(
            &mut writer,
            "benchmark_uniform.jsonl",
            benchmark_jsonl(&variants.uniform, Strategy::Uniform),
            &variants.uniform,
        )?;
        writer.finish()?;
        eprintln!(
            "[sample] benchmark variants: edge {} pairs, uniform {} pairs",
            variants.edge.pairs.len(),
            variants.uniform.pairs.len()
        );
        return Ok(CmdStatus::Clean);
    }

    if let Some(tuning) = &tuning_pool {
        check_patient_disjoint(&pool, tuning).map_err(map_sampler_error)?;
    }
    let spec = SampleSpec {
        strategy: sampling.strategy,
        n: sampling.n,
        recency_threshold: sampling.recency_threshold,
        bins: sampling.bins,
        seed,
    };
    let set = sample(&pool, &spec, &pool_id).map_err(map_sampler_error)?;
    let mut jsonl = String::new();
    for pair in &set.pairs {
        jsonl.push_str(&pair.to_jsonl_line());
        jsonl.push('\n');
    }
    let name = format!("sampled_{}.jsonl", spec.strategy);
    write_set(&mut writer, &name, jsonl, &set)?;
    writer.finish()?;
    eprintln!(
        "[sample] {} of {} requested pairs under {} (seed {})",
        set.pairs.len(),
        spec.n,
        spec.strategy,
        spec.seed
    );
    Ok(CmdStatus::Clean)
}
