//! Distribution-controlled sampling from a generated pair pool.
//!
//! Three strategies over the pair-level representative position:
//! recency draws uniformly from pairs past a threshold; edge draws uniformly
//! from the whole pool (the natural model-generated pool is already
//! edge-heavy); uniform stratifies `[0, 1]` into bins and round-robins one
//! draw per non-exhausted bin. All draws are seeded and without replacement,
//! so equal (pool, spec) inputs give identical sets.

use std::collections::BTreeSet;
use std::path::Path;

use rand_core::SeedableRng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::genpipe::{InstructionPair, Mode, PairRecord};
use crate::rng::{sample_indices, shuffle};
use crate::temporal::{positions_histogram, PositionHistogram};

#[derive(Debug, Error)]
pub enum SamplerError {
    #[error("invalid sample spec: {0}")]
    InvalidSpec(String),
    #[error("empty pool")]
    EmptyPool,
    #[error("no pairs qualify for recency sampling (threshold {threshold})")]
    NoQualifyingPairs { threshold: f64 },
    #[error("patient overlap: {}", ids.join(", "))]
    PatientOverlap { ids: Vec<String> },
    #[error("benchmark pool contains non-benchmark pairs (e.g. {pair_id})")]
    NotBenchmarkPool { pair_id: String },
    #[error("cannot export an empty set")]
    EmptySet,
    #[error("write failed for {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Sampling strategy over representative positions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Recency,
    Edge,
    Uniform,
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Strategy::Recency => "recency",
            Strategy::Edge => "edge",
            Strategy::Uniform => "uniform",
        })
    }
}

/// A target temporal distribution and set size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleSpec {
    pub strategy: Strategy,
    pub n: usize,
    pub recency_threshold: f64,
    pub bins: usize,
    pub seed: u64,
}

impl SampleSpec {
    pub fn new(strategy: Strategy, n: usize, seed: u64) -> Self {
        SampleSpec { strategy, n, recency_threshold: 0.75, bins: 10, seed }
    }

    pub fn validate(&self) -> Result<(), SamplerError> {
        if self.n == 0 {
            return Err(SamplerError::InvalidSpec("target size must be at least 1".into()));
        }
        if !(self.recency_threshold > 0.0 && self.recency_threshold < 1.0) {
            return Err(SamplerError::InvalidSpec(format!(
                "recency threshold must lie in (0, 1), got {}",
                self.recency_threshold
            )));
        }
        if self.bins < 2 {
            return Err(SamplerError::InvalidSpec("at least 2 bins required".into()));
        }
        Ok(())
    }
}

/// A set drawn under one spec, with its achieved histogram and provenance.
#[derive(Debug, Clone)]
pub struct SampledSet {
    pub spec: SampleSpec,
    pub pairs: Vec<InstructionPair>,
    pub achieved: PositionHistogram,
    pub pool_id: String,
    /// How far short of `spec.n` the draw fell.
    pub shortfall: usize,
    pub warnings: Vec<String>,
}

/// Sidecar metadata written next to every export.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SetMetadata {
    pub spec: SampleSpec,
    pub pool_id: String,
    pub achieved: PositionHistogram,
    pub shortfall: usize,
    pub warnings: Vec<String>,
}

impl SampledSet {
    pub fn metadata(&self) -> SetMetadata {
        SetMetadata {
            spec: self.spec,
            pool_id: self.pool_id.clone(),
            achieved: self.achieved.clone(),
            shortfall: self.shortfall,
            warnings: self.warnings.clone(),
        }
    }
}

/// Draws a set from the pool under the spec's strategy, without replacement.
pub fn sample(
    pool: &[InstructionPair],
    spec: &SampleSpec,
    pool_id: &str,
) -> Result<SampledSet, SamplerError> {
    spec.validate()?;
    if pool.is_empty() {
        return Err(SamplerError::EmptyPool);
    }
    let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(spec.seed);
    let mut warnings = Vec::new();

    let selected: Vec<usize> = match spec.strategy {
        Strategy::Recency => {
            let qualifying: Vec<usize> = (0..pool.len())
                .filter(|&i| pool[i].evidence.representative > spec.recency_threshold)
                .collect();
            if qualifying.is_empty() {
                return Err(SamplerError::NoQualifyingPairs { threshold: spec.recency_threshold });
            }
            if qualifying.len() < spec.n {
                warnings.push(format!(
                    "only {} of {} requested pairs qualify above threshold {}",
                    qualifying.len(),
                    spec.n,
                    spec.recency_threshold
                ));
                qualifying
            } else {
                sample_indices(&mut rng, qualifying.len(), spec.n)
                    .into_iter()
                    .map(|k| qualifying[k])
                    .collect()
            }
        }
        Strategy::Edge => {
            if pool.len() < spec.n {
                warnings.push(format!(
                    "pool holds {} pairs, fewer than the requested {}",
                    pool.len(),
                    spec.n
                ));
                (0..pool.len()).collect()
            } else {
                sample_indices(&mut rng, pool.len(), spec.n)
            }
        }
        Strategy::Uniform => {
            // bucket pool indices by representative, shuffle each bucket once,
            // then round-robin ascending over non-exhausted buckets
            let mut buckets: Vec<Vec<usize>> = vec![Vec::new(); spec.bins];
            let hist = positions_histogram(std::iter::empty(), spec.bins)
                .expect("bins validated above");
            for (i, pair) in pool.iter().enumerate() {
                buckets[hist.bin_index(pair.evidence.representative)].push(i);
            }
            for bucket in &mut buckets {
                shuffle(&mut rng, bucket);
            }
            let mut picked = Vec::with_capacity(spec.n);
            while picked.len() < spec.n {
                let mut advanced = false;
                for bucket in &mut buckets {
                    if picked.len() >= spec.n {
                        break;
                    }
                    if let Some(idx) = bucket.pop() {
                        picked.push(idx);
                        advanced = true;
                    }
                }
                if !advanced {
                    warnings.push(format!(
                        "pool exhausted at {} of {} requested pairs",
                        picked.len(),
                        spec.n
                    ));
                    break;
                }
            }
            picked
        }
    };

    // keep pool order in the output for stable exports
    let mut ordered = selected;
    ordered.sort_unstable();
    let pairs: Vec<InstructionPair> = ordered.into_iter().map(|i| pool[i].clone()).collect();
    let shortfall = spec.n.saturating_sub(pairs.len());
    let achieved =
        positions_histogram(pairs.iter().map(|p| p.evidence.representative), spec.bins)
            .expect("bins validated above");
    Ok(SampledSet { spec: *spec, pairs, achieved, pool_id: pool_id.to_string(), shortfall, warnings })
}

/// Fails with the sorted list of shared patient ids when the two pools are
/// not patient-disjoint.
pub fn check_patient_disjoint(
    benchmark_pool: &[InstructionPair],
    tuning_pool: &[InstructionPair],
) -> Result<(), SamplerError> {
    let bench: BTreeSet<&str> = benchmark_pool.iter().map(|p| p.patient_id.as_str()).collect();
    let tuning: BTreeSet<&str> = tuning_pool.iter().map(|p| p.patient_id.as_str()).collect();
    let overlap: Vec<String> = bench.intersection(&tuning).map(|s| s.to_string()).collect();
    if overlap.is_empty() {
        Ok(())
    } else {
        Err(SamplerError::PatientOverlap { ids: overlap })
    }
}

/// Sizes and seed for the two benchmark variants drawn from one pool.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BenchmarkConfig {
    pub edge_n: usize,
    pub uniform_n: usize,
    pub bins: usize,
    pub seed: u64,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        BenchmarkConfig { edge_n: 402, uniform_n: 248, bins: 10, seed: 0 }
    }
}

#[derive(Debug, Clone)]
pub struct BenchmarkVariants {
    pub edge: SampledSet,
    pub uniform: SampledSet,
}

/// Draws the Edge and Uniform benchmark variants from a multi-evidence
/// filtered, benchmark-mode pool. When `tuning_pool` is given, the pools
/// must be patient-disjoint.
pub fn assemble_benchmark(
    pool: &[InstructionPair],
    config: &BenchmarkConfig,
    tuning_pool: Option<&[InstructionPair]>,
) -> Result<BenchmarkVariants, SamplerError> {
    if pool.is_empty() {
        return Err(SamplerError::EmptyPool);
    }
    if let Some(bad) = pool.iter().find(|p| p.mode != Mode::Benchmark) {
        return Err(SamplerError::NotBenchmarkPool { pair_id: bad.pair_id.clone() });
    }
    if let Some(tuning) = tuning_pool {
        check_patient_disjoint(pool, tuning)?;
    }
    let edge_spec = SampleSpec {
        strategy: Strategy::Edge,
        n: config.edge_n,
        recency_threshold: 0.75,
        bins: config.bins,
        seed: config.seed,
    };
    let uniform_spec = SampleSpec {
        strategy: Strategy::Uniform,
        n: config.uniform_n,
        recency_threshold: 0.75,
        bins: config.bins,
        seed: config.seed.wrapping_add(1),
    };
    Ok(BenchmarkVariants {
        edge: sample(pool, &edge_spec, "benchmark-pool")?,
        uniform: sample(pool, &uniform_spec, "benchmark-pool")?,
    })
}

/// One instruction-tuning JSONL line: `{"instruction": Q, "output": A}`.
#[derive(Debug, Serialize, Deserialize)]
pub struct TuningRecord {
    pub instruction: String,
    pub output: String,
}

/// Renders the tuning JSONL for a set.
pub fn tuning_jsonl(set: &SampledSet) -> String {
    let mut out = String::new();
    for pair in &set.pairs {
        let record =
            TuningRecord { instruction: pair.question.clone(), output: pair.answer.clone() };
        out.push_str(&serde_json::to_string(&record).expect("record serializes"));
        out.push('\n');
    }
    out
}

/// Benchmark JSONL line: the pair record fields plus a trailing `variant`.
/// Fields are spelled out (not flattened) so the wire order is the pair
/// format's, with `variant` appended.
#[derive(Debug, Serialize, Deserialize)]
pub struct BenchmarkRecord {
    pub pair_id: String,
    pub patient_id: String,
    pub chunk_ref: String,
    pub mode: Mode,
    pub question: String,
    pub answer: String,
    pub time_evidence: Vec<String>,
    pub positions: Vec<f64>,
    pub representative: f64,
    pub variant: String,
}

impl BenchmarkRecord {
    fn new(pair: &InstructionPair, variant: Strategy) -> Self {
        let record = PairRecord::from(pair);
        BenchmarkRecord {
            pair_id: record.pair_id,
            patient_id: record.patient_id,
            chunk_ref: record.chunk_ref,
            mode: record.mode,
            question: record.question,
            answer: record.answer,
            time_evidence: record.time_evidence,
            positions: record.positions,
            representative: record.representative,
            variant: variant.to_string(),
        }
    }

    pub fn into_pair_record(self) -> PairRecord {
        PairRecord {
            pair_id: self.pair_id,
            patient_id: self.patient_id,
            chunk_ref: self.chunk_ref,
            mode: self.mode,
            question: self.question,
            answer: self.answer,
            time_evidence: self.time_evidence,
            positions: self.positions,
            representative: self.representative,
        }
    }
}

/// Renders the benchmark JSONL for a variant set.
pub fn benchmark_jsonl(set: &SampledSet, variant: Strategy) -> String {
    let mut out = String::new();
    for pair in &set.pairs {
        let record = BenchmarkRecord::new(pair, variant);
        out.push_str(&serde_json::to_string(&record).expect("record serializes"));
        out.push('\n');
    }
    out
}

/// Writes the instruction-tuning JSONL plus a `<path>.meta.json` sidecar
/// carrying the spec, seed, and achieved histogram. Re-exporting an
/// identical set yields byte-identical files.
pub fn export_tuning_set(set: &SampledSet, path: &Path) -> Result<(), SamplerError> {
    if set.pairs.is_empty() {
        return Err(SamplerError::EmptySet);
    }
    let io_err = |path: &Path| {
        let path = path.display().to_string();
        move |source: std::io::Error| SamplerError::Io { path, source }
    };
    crate::fsio::atomic_write(path, tuning_jsonl(set).as_bytes()).map_err(io_err(path))?;
    let meta_path = sidecar_path(path);
    let meta =
        serde_json::to_string_pretty(&set.metadata()).expect("metadata serializes");
    crate::fsio::atomic_write(&meta_path, meta.as_bytes()).map_err(io_err(&meta_path))?;
    Ok(())
}

/// Writes the benchmark JSONL for one variant plus its metadata sidecar.
pub fn export_benchmark_set(
    set: &SampledSet,
    variant: Strategy,
    path: &Path,
) -> Result<(), SamplerError> {
    if set.pairs.is_empty() {
        return Err(SamplerError::EmptySet);
    }
    let io_err = |path: &Path| {
        let path = path.display().to_string();
        move |source: std::io::Error| SamplerError::Io { path, source }
    };
    crate::fsio::atomic_write(path, benchmark_jsonl(set, variant).as_bytes())
        .map_err(io_err(path))?;
    let meta_path = sidecar_path(path);
    let meta = serde_json::to_string_pretty(&set.metadata()).expect("metadata serializes");
    crate::fsio::atomic_write(&meta_path, meta.as_bytes()).map_err(io_err(&meta_path))?;
    Ok(())
}

fn sidecar_path(path: &Path) -> std::path::PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".meta.json");
    path.with_file_name(name)
}
