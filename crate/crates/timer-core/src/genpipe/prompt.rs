//! Prompt templates.
//!
//! Template text lives in versioned plain-text files under `templates/`,
//! compiled in as defaults and overridable from a directory at runtime.
//! Placeholders use `{{name}}` syntax; the generation template takes
//! `{{record}}`, `{{count}}`, and `{{mode_clause}}`.

use std::path::Path;

/// The five templates the pipeline renders.
#[derive(Debug, Clone)]
pub struct TemplateSet {
    pub generation: String,
    pub benchmark_clause: String,
    pub tuning_clause: String,
    pub judge: String,
    pub head_to_head: String,
}

impl Default for TemplateSet {
    fn default() -> Self {
        Self::builtin()
    }
}

impl TemplateSet {
    /// The templates shipped with the crate.
    pub fn builtin() -> Self {
        TemplateSet {
            generation: include_str!("../../templates/generate.txt").to_string(),
            benchmark_clause: include_str!("../../templates/benchmark_clause.txt").to_string(),
            tuning_clause: include_str!("../../templates/tuning_clause.txt").to_string(),
            judge: include_str!("../../templates/judge.txt").to_string(),
            head_to_head: include_str!("../../templates/head_to_head.txt").to_string(),
        }
    }

    /// Loads all five templates from a directory using the canonical file
    /// names (`generate.txt`, `benchmark_clause.txt`, `tuning_clause.txt`,
    /// `judge.txt`, `head_to_head.txt`).
    pub fn from_dir(dir: &Path) -> std::io::Result<Self> {
        let read = |name: &str| std::fs::read_to_string(dir.join(name));
        Ok(TemplateSet {
            generation: read("generate.txt")?,
            benchmark_clause: read("benchmark_clause.txt")?,
            tuning_clause: read("tuning_clause.txt")?,
            judge: read("judge.txt")?,
            head_to_head: read("head_to_head.txt")?,
        })
    }
}

/// Replaces each `{{name}}` placeholder with its value. Unknown placeholders
/// are left verbatim so template mistakes stay visible in the output.
pub fn render(template: &str, vars: &[(&str, &str)]) -> String {
    let mut out = template.to_string();
    for (name, value) in vars {
        out = out.replace(&format!("{{{{{name}}}}}"), value);
    }
    out
}
