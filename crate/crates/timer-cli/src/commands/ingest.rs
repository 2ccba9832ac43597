//! `timer ingest` — parse an event stream and build per-patient timelines.
//! Malformed rows are recorded with their line numbers, not fatal.

use std::collections::HashMap;
use std::path::PathBuf;

use timer_core::timeline::{build_timeline, parse_events, ClinicalEvent, EventFormat};

use crate::config::require_file;
use crate::ioutil::to_jsonl_bytes;
use crate::manifest::{input_ref, ArtifactWriter};
use crate::{CliError, CmdStatus, Ctx};

pub fn run(ctx: &Ctx, input: Option<PathBuf>, format: Option<String>) -> Result<CmdStatus, CliError> {
    let input = input
        .or_else(|| ctx.config.input.events.clone())
        .ok_or_else(|| CliError::Config("no input: pass --input or set [input] events".into()))?;
    require_file(&input, "event file")?;
    let format = resolve_format(&input, format.or_else(|| ctx.config.input.format.clone()))?;

    let file = std::fs::File::open(&input)
        .map_err(|e| CliError::Config(format!("cannot open {}: {e}", input.display())))?;
    let parsed = parse_events(std::io::BufReader::new(file), format)
        .map_err(|e| CliError::runtime(format!("{}: {e}", input.display())))?;

    // group by patient, preserving first-appearance order and input order
    // within each patient
    let mut order: Vec<String> = Vec::new();
    let mut by_patient: HashMap<String, Vec<ClinicalEvent>> = HashMap::new();
    for event in parsed.events {
        if !by_patient.contains_key(&event.patient_id) {
            order.push(event.patient_id.clone());
        }
        by_patient.entry(event.patient_id.clone()).or_default().push(event);
    }
    let mut timelines = Vec::with_capacity(order.len());
    for patient in &order {
        let events = by_patient.remove(patient).expect("grouped above");
        let timeline = build_timeline(events)
            .map_err(|e| CliError::runtime(format!("patient {patient}: {e}")))?;
        timelines.push(timeline);
    }

    let mut writer = ArtifactWriter::new(&ctx.out_dir, "ingest")?;
    let inputs = [input_ref(&ctx.out_dir, &input)];
    writer.write("timelines.jsonl", &to_jsonl_bytes(&timelines), &[], &inputs)?;
    let n_errors = parsed.errors.len();
    if n_errors > 0 {
        writer.write("ingest_errors.jsonl", &to_jsonl_bytes(&parsed.errors), &[], &inputs)?;
    }
    writer.finish()?;
    eprintln!(
        "[ingest] {} timelines from {}; {} row error(s)",
        timelines.len(),
        input.display(),
        n_errors
    );
    if n_errors > 0 {
        Ok(CmdStatus::Partial { issues: n_errors })
    } else {
        Ok(CmdStatus::Clean)
    }
}

fn resolve_format(path: &std::path::Path, explicit: Option<String>) -> Result<EventFormat, CliError> {
    let name = match explicit {
        Some(name) => name,
        None => match path.extension().and_then(|e| e.to_str()) {
            Some("csv") => "csv".to_string(),
            Some("jsonl") | Some("ndjson") => "jsonl".to_string(),
            other => {
                return Err(CliError::Config(format!(
                    "cannot infer format from extension {other:?}; pass --format"
                )))
            }
        },
    };
    match name.as_str() {
        "csv" => Ok(EventFormat::Csv),
        "jsonl" => Ok(EventFormat::Jsonl),
        other => Err(CliError::Config(format!("unknown format `{other}` (expected csv or jsonl)"))),
    }
}
