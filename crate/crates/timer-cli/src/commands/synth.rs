//! `timer synth` — deterministic synthetic cohort, emitted in the event
//! CSV or JSONL format.

use timer_core::synth::generate_cohort;
use timer_core::timeline::{events_to_csv, events_to_jsonl};

use crate::manifest::ArtifactWriter;
use crate::{CliError, CmdStatus, Ctx};

pub fn run(ctx: &Ctx, patients: Option<usize>, format: Option<&str>) -> Result<CmdStatus, CliError> {
    let seed = ctx.config.seed();
    let mut params = ctx.config.synth.to_params(seed);
    if let Some(n) = patients {
        params.n_patients = n;
    }
    let cohort = generate_cohort(&params).map_err(|e| CliError::Config(e.to_string()))?;
    let events: Vec<_> =
        cohort.iter().flat_map(|tl| tl.events()).cloned().collect();
    let format = format.or(ctx.config.input.format.as_deref()).unwrap_or("csv");
    let (name, body) = match format {
        "csv" => ("events.csv", events_to_csv(&events)),
        "jsonl" => ("events.jsonl", events_to_jsonl(&events)),
        other => {
            return Err(CliError::Config(format!(
                "unknown format `{other}` (expected csv or jsonl)"
            )))
        }
    };

    let mut writer = ArtifactWriter::new(&ctx.out_dir, "synth")?;
    let path = writer.write(name, body.as_bytes(), &[seed], &[])?;
    writer.finish()?;
    eprintln!(
        "[synth] {} patients, {} events -> {}",
        cohort.len(),
        events.len(),
        path.display()
    );
    Ok(CmdStatus::Clean)
}
