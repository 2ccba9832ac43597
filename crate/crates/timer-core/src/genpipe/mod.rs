//! Instruction-pair generation: prompt building, provider calls with bounded
//! retries, response validation, and the multi-evidence filter.
//!
//! Every emitted pair is grounded: its evidence timestamps are visit dates of
//! the chunk it came from. Raw provider responses are kept verbatim for
//! audit, and `|validated| + |rejected|` always equals the number of parsed
//! candidates.

mod parse;
pub mod prompt;
pub mod provider;

pub use parse::{parse_generation_response, CandidatePair, ParsedCandidates, RejectedCandidate};
pub use prompt::{render, TemplateSet};
pub use provider::{
    prompt_key, run_parallel_ordered, MockProvider, Provider, ProviderError, ProviderRequest,
    ProviderResponse, ProviderUsage, RateLimiter,
};

use std::collections::BTreeMap;

use chrono::NaiveTime;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::temporal::{evidence_positions, TimeEvidence};
use crate::timeline::{serialize_xml, ContextChunk};

/// Whether a run feeds instruction tuning or the benchmark.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Tuning,
    Benchmark,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Tuning => "tuning",
            Mode::Benchmark => "benchmark",
        }
    }
}

/// One generated instruction–response pair with its time evidence.
#[derive(Debug, Clone, PartialEq)]
pub struct InstructionPair {
    pub pair_id: String,
    pub patient_id: String,
    pub chunk_ref: String,
    pub mode: Mode,
    pub question: String,
    pub answer: String,
    pub evidence: TimeEvidence,
}

impl InstructionPair {
    /// Evidence dates as `YYYY-MM-DD` strings.
    pub fn evidence_dates(&self) -> Vec<String> {
        self.evidence.timestamps.iter().map(|t| t.format("%Y-%m-%d").to_string()).collect()
    }

    /// Serializes to the pair JSONL line format.
    pub fn to_jsonl_line(&self) -> String {
        serde_json::to_string(&PairRecord::from(self)).expect("pair serializes")
    }

    /// Parses one pair JSONL line.
    pub fn from_jsonl_line(line: &str) -> Result<InstructionPair, GenError> {
        let record: PairRecord =
            serde_json::from_str(line).map_err(|e| GenError::BadPairRecord(e.to_string()))?;
        record.try_into()
    }
}

/// The pair JSONL wire format:
/// `{"pair_id","patient_id","chunk_ref","mode","question","answer",
///   "time_evidence":[…],"positions":[…],"representative":…}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairRecord {
    pub pair_id: String,
    pub patient_id: String,
    pub chunk_ref: String,
    pub mode: Mode,
    pub question: String,
    pub answer: String,
    pub time_evidence: Vec<String>,
    pub positions: Vec<f64>,
    pub representative: f64,
}

impl From<&InstructionPair> for PairRecord {
    fn from(pair: &InstructionPair) -> Self {
        PairRecord {
            pair_id: pair.pair_id.clone(),
            patient_id: pair.patient_id.clone(),
            chunk_ref: pair.chunk_ref.clone(),
            mode: pair.mode,
            question: pair.question.clone(),
            answer: pair.answer.clone(),
            time_evidence: pair.evidence_dates(),
            positions: pair.evidence.positions.clone(),
            representative: pair.evidence.representative,
        }
    }
}

impl TryFrom<PairRecord> for InstructionPair {
    type Error = GenError;

    fn try_from(record: PairRecord) -> Result<Self, GenError> {
        if record.time_evidence.len() != record.positions.len() {
            return Err(GenError::BadPairRecord(format!(
                "pair {}: {} evidence dates but {} positions",
                record.pair_id,
                record.time_evidence.len(),
                record.positions.len()
            )));
        }
        let timestamps = record
            .time_evidence
            .iter()
            .map(|d| {
                chrono::NaiveDate::parse_from_str(d, "%Y-%m-%d")
                    .map(|d| d.and_time(NaiveTime::MIN))
                    .map_err(|e| GenError::BadPairRecord(format!("bad evidence date `{d}`: {e}")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(InstructionPair {
            pair_id: record.pair_id,
            patient_id: record.patient_id,
            chunk_ref: record.chunk_ref,
            mode: record.mode,
            question: record.question,
            answer: record.answer,
            evidence: TimeEvidence {
                timestamps,
                positions: record.positions,
                representative: record.representative,
            },
        })
    }
}

/// Knobs for one generation run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GenerationConfig {
    pub pairs_per_chunk: usize,
    pub mode: Mode,
    pub provider: String,
    pub model: String,
    /// Opaque decoding options forwarded to the provider (temperature etc.).
    #[serde(default)]
    pub decoding: BTreeMap<String, String>,
    pub max_retries: usize,
    pub min_evidence_for_benchmark: usize,
    /// Base backoff between retried provider calls, doubled per attempt.
    pub backoff_ms: u64,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        GenerationConfig {
            pairs_per_chunk: 5,
            mode: Mode::Tuning,
            provider: "mock".into(),
            model: "mock".into(),
            decoding: BTreeMap::new(),
            max_retries: 2,
            min_evidence_for_benchmark: 2,
            backoff_ms: 500,
        }
    }
}

impl GenerationConfig {
    pub fn validate(&self) -> Result<(), GenError> {
        if self.pairs_per_chunk == 0 {
            return Err(GenError::InvalidConfig("pairs_per_chunk must be at least 1".into()));
        }
        if self.min_evidence_for_benchmark == 0 {
            return Err(GenError::InvalidConfig("min_evidence_for_benchmark must be at least 1".into()));
        }
        Ok(())
    }

    /// Distinct-evidence requirement implied by the mode.
    pub fn min_evidence(&self) -> usize {
        match self.mode {
            Mode::Benchmark => self.min_evidence_for_benchmark,
            Mode::Tuning => 1,
        }
    }
}

#[derive(Debug, Error)]
pub enum GenError {
    #[error("invalid generation config: {0}")]
    InvalidConfig(String),
    #[error("no JSON array in provider response (starts: `{snippet}`)")]
    NoJsonArray { snippet: String },
    #[error("provider failed after {attempts} attempts: {source}")]
    Provider {
        attempts: usize,
        #[source]
        source: ProviderError,
    },
    #[error("response unparseable after {attempts} attempts: {last}")]
    ParseExhausted { attempts: usize, last: String },
    #[error("malformed pair record: {0}")]
    BadPairRecord(String),
}

/// Renders the generation prompt: the XML record embedded verbatim, the pair
/// count, and the mode clause (benchmark mode adds the multi-visit
/// requirement).
pub fn build_generation_prompt(
    chunk_xml: &str,
    config: &GenerationConfig,
    templates: &TemplateSet,
) -> String {
    let clause = match config.mode {
        Mode::Benchmark => templates.benchmark_clause.trim_end(),
        Mode::Tuning => templates.tuning_clause.trim_end(),
    };
    render(
        &templates.generation,
        &[
            ("record", chunk_xml.trim_end()),
            ("count", &config.pairs_per_chunk.to_string()),
            ("mode_clause", clause),
        ],
    )
}

/// Everything produced for one chunk: validated pairs, per-candidate
/// rejections, warnings, and the raw response text of every attempt.
#[derive(Debug, Default)]
pub struct ChunkGeneration {
    pub pairs: Vec<InstructionPair>,
    pub rejected: Vec<RejectedCandidate>,
    pub warnings: Vec<String>,
    pub raw_responses: Vec<String>,
}

/// Calls the provider for one chunk, retrying the same prompt with
/// exponential backoff on transport or parse failure, then validates the
/// candidates into grounded pairs. Zero valid pairs is a warning, not an
/// error; exhausted retries are.
pub fn generate_pairs(
    chunk: &ContextChunk,
    provider: &dyn Provider,
    config: &GenerationConfig,
    templates: &TemplateSet,
) -> Result<ChunkGeneration, GenError> {
    config.validate()?;
    let prompt = build_generation_prompt(&serialize_xml(chunk), config, templates);
    let request = ProviderRequest { prompt, options: config.decoding.clone() };

    let mut out = ChunkGeneration::default();
    let attempts = config.max_retries + 1;
    let mut parsed = None;
    for attempt in 0..attempts {
        if attempt > 0 && config.backoff_ms > 0 {
            let factor = 1u64 << (attempt - 1).min(16);
            std::thread::sleep(std::time::Duration::from_millis(config.backoff_ms * factor));
        }
        let response = match provider.complete(&request) {
            Ok(response) => response,
            Err(err) => {
                if attempt + 1 == attempts {
                    return Err(GenError::Provider { attempts, source: err });
                }
                out.warnings.push(format!("attempt {}: provider error: {err}", attempt + 1));
                continue;
            }
        };
        out.raw_responses.push(response.text.clone());
        match parse_generation_response(&response.text, chunk) {
            Ok(candidates) => {
                parsed = Some(candidates);
                break;
            }
            Err(err) => {
                if attempt + 1 == attempts {
                    return Err(GenError::ParseExhausted { attempts, last: err.to_string() });
                }
                out.warnings.push(format!("attempt {}: {err}", attempt + 1));
            }
        }
    }
    let parsed = parsed.expect("loop either parsed or returned");

    out.rejected = parsed.rejected;
    for (seq, candidate) in parsed.candidates.into_iter().enumerate() {
        let timestamps: Vec<_> =
            candidate.evidence_dates.iter().map(|d| d.and_time(NaiveTime::MIN)).collect();
        let evidence = evidence_positions(&timestamps, chunk)
            .expect("validated evidence dates lie within the chunk");
        out.pairs.push(InstructionPair {
            pair_id: format!("{}#{}", chunk.chunk_ref(), seq),
            patient_id: chunk.patient_id.clone(),
            chunk_ref: chunk.chunk_ref(),
            mode: config.mode,
            question: candidate.question,
            answer: candidate.answer,
            evidence,
        });
    }
    if out.pairs.is_empty() {
        out.warnings.push("no valid pairs for this chunk".to_string());
    }
    Ok(out)
}

/// Keeps pairs with at least `k` distinct evidence timestamps.
pub fn filter_multi_evidence(pairs: Vec<InstructionPair>, k: usize) -> Vec<InstructionPair> {
    pairs.into_iter().filter(|p| p.evidence.distinct_timestamps() >= k).collect()
}
