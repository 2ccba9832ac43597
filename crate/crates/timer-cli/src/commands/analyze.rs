//! `timer analyze` — temporal distribution of a pair set: plot-ready
//! position histogram, tail-region fractions, and a shape label.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use timer_core::metrics::{length_quartiles, tokenize, LengthQuartiles};
use timer_core::temporal::{
    classify_distribution, positions_histogram, positions_jsonl_line, region_fractions,
    ClassifyConfig, DistributionLabel, RegionFractions,
};

use crate::config::require_file;
use crate::ioutil::read_jsonl;
use crate::manifest::{input_ref, ArtifactWriter};
use crate::{CliError, CmdStatus, Ctx};

/// Works for both the pair JSONL and the bare positions JSONL; extra fields
/// are ignored, and question/response lengths are reported when present.
#[derive(Deserialize)]
struct PositionsRecord {
    pair_id: String,
    positions: Vec<f64>,
    representative: f64,
    #[serde(default)]
    question: Option<String>,
    #[serde(default)]
    answer: Option<String>,
}

#[derive(Serialize)]
struct AnalysisReport {
    n_pairs: usize,
    n_positions: usize,
    bins: usize,
    regions: RegionFractions,
    label: DistributionLabel,
    thresholds: ClassifyConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    question_length_quartiles: Option<LengthQuartiles>,
    #[serde(skip_serializing_if = "Option::is_none")]
    answer_length_quartiles: Option<LengthQuartiles>,
}

fn quartiles_of(texts: Vec<&str>) -> Option<LengthQuartiles> {
    if texts.is_empty() {
        return None;
    }
    length_quartiles(&texts, |t| tokenize(t).len()).ok()
}

pub fn run(ctx: &Ctx, pairs: Option<PathBuf>) -> Result<CmdStatus, CliError> {
    let input = pairs.unwrap_or_else(|| ctx.out_dir.join("pairs_benchmark.jsonl"));
    require_file(&input, "pairs/positions file")?;
    let records: Vec<PositionsRecord> = read_jsonl(&input)?;
    if records.is_empty() {
        return Err(CliError::runtime(format!("{}: no records to analyze", input.display())));
    }
    let bins = ctx.config.sampling.bins;

    let positions_hist = positions_histogram(
        records.iter().flat_map(|r| r.positions.iter().copied()),
        bins,
    )
    .map_err(|e| CliError::Config(e.to_string()))?;
    let representatives: Vec<f64> = records.iter().map(|r| r.representative).collect();
    let rep_hist = positions_histogram(representatives.iter().copied(), bins)
        .map_err(|e| CliError::Config(e.to_string()))?;

    let regions =
        region_fractions(&representatives).map_err(|e| CliError::runtime(e.to_string()))?;
    let thresholds = ClassifyConfig::default();
    let label = classify_distribution(&rep_hist, &representatives, &thresholds)
        .map_err(|e| CliError::runtime(e.to_string()))?;

    let report = AnalysisReport {
        n_pairs: records.len(),
        n_positions: positions_hist.total as usize,
        bins,
        regions,
        label,
        thresholds,
        question_length_quartiles: quartiles_of(
            records.iter().filter_map(|r| r.question.as_deref()).collect(),
        ),
        answer_length_quartiles: quartiles_of(
            records.iter().filter_map(|r| r.answer.as_deref()).collect(),
        ),
    };

    // per-pair positions, re-exported in the bare positions format for audit
    let mut positions_jsonl = String::new();
    for record in &records {
        positions_jsonl.push_str(&positions_jsonl_line(
            &record.pair_id,
            &record.positions,
            record.representative,
        ));
        positions_jsonl.push('\n');
    }

    let mut writer = ArtifactWriter::new(&ctx.out_dir, "analyze")?;
    let inputs = [input_ref(&ctx.out_dir, &input)];
    writer.write("histogram.csv", positions_hist.to_csv().as_bytes(), &[], &inputs)?;
    writer.write("positions.jsonl", positions_jsonl.as_bytes(), &[], &inputs)?;
    writer.write(
        "analysis.json",
        serde_json::to_string_pretty(&report).expect("report serializes").as_bytes(),
        &[],
        &inputs,
    )?;
    writer.finish()?;
    eprintln!(
        "[analyze] {} pairs, {} evidence positions; label: {label}; >0.75 {:.1}%, >0.85 {:.1}%, >0.95 {:.1}%",
        report.n_pairs,
        report.n_positions,
        100.0 * regions.frac_last_quarter,
        100.0 * regions.frac_last_15,
        100.0 * regions.frac_last_5,
    );
    Ok(CmdStatus::Clean)
}
