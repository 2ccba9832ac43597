//! Run configuration: a sectioned TOML file with full command-line
//! overrides. Seeds are always explicit values (file, flag, or the fixed
//! default 0) — never the wall clock — so any run can be replayed.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use timer_core::genpipe::{GenerationConfig, Mode};
use timer_core::sampler::Strategy;
use timer_core::synth::{Clustering, SynthParams};
use timer_core::timeline::OversizedPolicy;

use crate::CliError;

/// Top-level configuration. Every field has a usable default; the CLI flags
/// override whatever the file set.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Base seed for every seeded stage.
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub input: InputConfig,
    #[serde(default)]
    pub chunking: ChunkingConfig,
    #[serde(default)]
    pub generation: GenSection,
    #[serde(default)]
    pub sampling: SamplingConfig,
    #[serde(default)]
    pub evaluation: EvaluationConfig,
    #[serde(default)]
    pub judge: JudgeConfig,
    #[serde(default)]
    pub synth: SynthConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputConfig {
    pub events: Option<PathBuf>,
    /// `csv` or `jsonl`; inferred from the extension when unset.
    pub format: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChunkingConfig {
    pub token_budget: usize,
    pub oversized: OversizedPolicy,
}

impl Default for ChunkingConfig {
    fn default() -> Self {
        ChunkingConfig { token_budget: 16_000, oversized: OversizedPolicy::Error }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenSection {
    pub provider: String,
    pub model: String,
    pub endpoint: Option<String>,
    pub mode: Mode,
    pub pairs_per_chunk: usize,
    pub max_retries: usize,
    pub min_evidence: usize,
    pub backoff_ms: u64,
    pub parallelism: usize,
    pub rate_limit_per_min: u32,
    #[serde(default)]
    pub decoding: std::collections::BTreeMap<String, String>,
    /// Directory of prompt template overrides.
    pub templates: Option<PathBuf>,
}

impl Default for GenSection {
    fn default() -> Self {
        GenSection {
            provider: "mock".into(),
            model: "mock".into(),
            endpoint: None,
            mode: Mode::Tuning,
            pairs_per_chunk: 5,
            max_retries: 2,
            min_evidence: 2,
            backoff_ms: 500,
            parallelism: 4,
            rate_limit_per_min: 0,
            decoding: Default::default(),
            templates: None,
        }
    }
}

impl GenSection {
    pub fn to_generation_config(&self) -> GenerationConfig {
        GenerationConfig {
            pairs_per_chunk: self.pairs_per_chunk,
            mode: self.mode,
            provider: self.provider.clone(),
            model: self.model.clone(),
            decoding: self.decoding.clone(),
            max_retries: self.max_retries,
            min_evidence_for_benchmark: self.min_evidence,
            backoff_ms: self.backoff_ms,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingConfig {
    pub strategy: Strategy,
    pub n: usize,
    pub bins: usize,
    pub recency_threshold: f64,
    pub edge_n: usize,
    pub uniform_n: usize,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        SamplingConfig {
            strategy: Strategy::Uniform,
            n: 248,
            bins: 10,
            recency_threshold: 0.75,
            edge_n: 402,
            uniform_n: 248,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluationConfig {
    pub n_resamples: usize,
    pub sample_size: usize,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        EvaluationConfig { n_resamples: 10_000, sample_size: 100 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JudgeConfig {
    pub provider: String,
    pub model: String,
    pub endpoint: Option<String>,
    /// Behavior of the mock judge: `echo-match`, `always-yes`, `pick-first`,
    /// or `always-tie`.
    pub mock_rule: String,
    pub parallelism: usize,
    pub rate_limit_per_min: u32,
}

impl Default for JudgeConfig {
    fn default() -> Self {
        JudgeConfig {
            provider: "mock".into(),
            model: "mock-judge".into(),
            endpoint: None,
            mock_rule: "echo-match".into(),
            parallelism: 4,
            rate_limit_per_min: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    pub n_patients: usize,
    pub visits_min: usize,
    pub visits_max: usize,
    pub span_min: i64,
    pub span_max: i64,
    pub events_min: usize,
    pub events_max: usize,
    pub clustering: Clustering,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_patients: 50,
            visits_min: 4,
            visits_max: 12,
            span_min: 180,
            span_max: 2000,
            events_min: 2,
            events_max: 6,
            clustering: Clustering::Uniform,
        }
    }
}

impl SynthConfig {
    pub fn to_params(&self, seed: u64) -> SynthParams {
        SynthParams {
            seed,
            n_patients: self.n_patients,
            visits_per_patient: (self.visits_min, self.visits_max),
            span_days: (self.span_min, self.span_max),
            events_per_visit: (self.events_min, self.events_max),
            clustering: self.clustering,
            ..SynthParams::default()
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: PathBuf::from("out") }
    }
}

impl RunConfig {
    /// Loads the TOML file, failing with a field-level message on anything
    /// malformed or unknown.
    pub fn load(path: &Path) -> Result<RunConfig, CliError> {
        let raw = std::fs::read_to_string(path).map_err(|e| {
            CliError::Config(format!("cannot read config {}: {e}", path.display()))
        })?;
        toml::from_str(&raw)
            .map_err(|e| CliError::Config(format!("invalid config {}: {e}", path.display())))
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }
}

/// Resolves an input path, failing with a config error when it is missing.
pub fn require_file(path: &Path, what: &str) -> Result<(), CliError> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::Config(format!("{what} not found: {}", path.display())))
    }
}
