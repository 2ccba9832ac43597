//! `timer report` — merge the evaluation, judge, head-to-head, and analysis
//! outputs in the run directory into one JSON report plus a human-readable
//! table. Evaluation output is required; the rest is folded in when present.

use serde_json::Value;

use crate::manifest::{input_ref, ArtifactWriter};
use crate::{CliError, CmdStatus, Ctx};

fn load_optional(ctx: &Ctx, name: &str) -> Result<Option<Value>, CliError> {
    let path = ctx.out_dir.join(name);
    if !path.is_file() {
        return Ok(None);
    }
    let raw = std::fs::read_to_string(&path)
        .map_err(|e| CliError::runtime(format!("cannot read {}: {e}", path.display())))?;
    let value = serde_json::from_str(&raw)
        .map_err(|e| CliError::runtime(format!("corrupt {}: {e}", path.display())))?;
    Ok(Some(value))
}

pub fn run(ctx: &Ctx) -> Result<CmdStatus, CliError> {
    let evaluation = load_optional(ctx, "evaluation.json")?.ok_or_else(|| {
        CliError::Config(format!(
            "missing inputs: {} has no evaluation.json (run `timer evaluate` first)",
            ctx.out_dir.display()
        ))
    })?;
    let judge = load_optional(ctx, "judge_summary.json")?;
    let h2h = load_optional(ctx, "h2h_summary.json")?;
    let analysis = load_optional(ctx, "analysis.json")?;

    let mut report = serde_json::Map::new();
    report.insert("evaluation".into(), evaluation.clone());
    if let Some(judge) = &judge {
        report.insert("judge".into(), judge.clone());
    }
    if let Some(h2h) = &h2h {
        report.insert("head_to_head".into(), h2h.clone());
    }
    if let Some(analysis) = &analysis {
        report.insert("analysis".into(), analysis.clone());
    }
    let report = Value::Object(report);

    let text = render_table(&evaluation, judge.as_ref(), h2h.as_ref(), analysis.as_ref());

    let mut writer = ArtifactWriter::new(&ctx.out_dir, "report")?;
    let mut inputs = vec![input_ref(&ctx.out_dir, &ctx.out_dir.join("evaluation.json"))];
    for name in ["judge_summary.json", "h2h_summary.json", "analysis.json"] {
        if ctx.out_dir.join(name).is_file() {
            inputs.push(input_ref(&ctx.out_dir, &ctx.out_dir.join(name)));
        }
    }
    writer.write(
        "report.json",
        serde_json::to_string_pretty(&report).expect("report serializes").as_bytes(),
        &[],
        &inputs,
    )?;
    writer.write("report.txt", text.as_bytes(), &[], &inputs)?;
    writer.finish()?;
    print!("{text}");
    Ok(CmdStatus::Clean)
}

fn get_f64(value: &Value, path: &[&str]) -> Option<f64> {
    let mut current = value;
    for key in path {
        current = current.get(key)?;
    }
    current.as_f64()
}

fn render_table(
    evaluation: &Value,
    judge: Option<&Value>,
    h2h: Option<&Value>,
    analysis: Option<&Value>,
) -> String {
    let mut out = String::new();
    let n_scored = get_f64(evaluation, &["n_scored"]).unwrap_or(0.0) as usize;
    out.push_str(&format!("== evaluation ({n_scored} pairs) ==\n"));
    out.push_str(&format!("{:<12}{:>10}{:>10}\n", "metric", "mean", "std"));
    for metric in ["rouge_l_f", "chrf", "meteor", "gleu"] {
        let mean = get_f64(evaluation, &["metrics", metric, "mean"]);
        let std = get_f64(evaluation, &["metrics", metric, "std"]);
        if let (Some(mean), Some(std)) = (mean, std) {
            out.push_str(&format!("{metric:<12}{mean:>10.4}{std:>10.4}\n"));
        }
    }
    if let Some(excluded) = evaluation.get("excluded_metrics").and_then(|v| v.as_array()) {
        for metric in excluded {
            if let Some(name) = metric.as_str() {
                out.push_str(&format!("{name:<12}{:>10}{:>10}\n", "n/a", "n/a"));
            }
        }
    }
    if let Some(notes) = evaluation.get("notes").and_then(|v| v.as_array()) {
        for note in notes {
            if let Some(note) = note.as_str() {
                out.push_str(&format!("note: {note}\n"));
            }
        }
    }

    if let Some(judge) = judge {
        let correct = get_f64(judge, &["aggregate", "correct_pct"]).unwrap_or(f64::NAN);
        let complete = get_f64(judge, &["aggregate", "complete_pct"]).unwrap_or(f64::NAN);
        let n = get_f64(judge, &["aggregate", "n_judged"]).unwrap_or(0.0) as usize;
        let errors = get_f64(judge, &["n_errors"]).unwrap_or(0.0) as usize;
        out.push_str("== judge ==\n");
        out.push_str(&format!(
            "correct {correct:.2}%  complete {complete:.2}%  (n={n}, verdict errors={errors})\n"
        ));
    }
    if let Some(h2h) = h2h {
        let a = get_f64(h2h, &["win_a_pct"]).unwrap_or(f64::NAN);
        let b = get_f64(h2h, &["win_b_pct"]).unwrap_or(f64::NAN);
        let tie = get_f64(h2h, &["tie_pct"]).unwrap_or(f64::NAN);
        let n = get_f64(h2h, &["rates", "total"]).unwrap_or(0.0) as usize;
        out.push_str("== head-to-head ==\n");
        out.push_str(&format!("A {a:.2}%  B {b:.2}%  tie {tie:.2}%  (n={n})\n"));
    }
    if let Some(analysis) = analysis {
        let label = analysis.get("label").and_then(|v| v.as_str()).unwrap_or("?");
        let quarter = get_f64(analysis, &["regions", "frac_last_quarter"]).unwrap_or(f64::NAN);
        let last15 = get_f64(analysis, &["regions", "frac_last_15"]).unwrap_or(f64::NAN);
        let last5 = get_f64(analysis, &["regions", "frac_last_5"]).unwrap_or(f64::NAN);
        out.push_str("== temporal analysis ==\n");
        out.push_str(&format!(
            "label: {label}; mass >0.75: {:.1}%, >0.85: {:.1}%, >0.95: {:.1}%\n",
            100.0 * quarter,
            100.0 * last15,
            100.0 * last5
        ));
    }
    out
}
