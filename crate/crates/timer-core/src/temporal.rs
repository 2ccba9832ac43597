//! Normalized temporal positions and distribution analysis.
//!
//! An evidence timestamp `t` inside a chunk bounded by `t_min`/`t_max` maps
//! to `(t - t_min) / (t_max - t_min)` on epoch seconds, so positions are
//! comparable across records with different absolute time spans. Position
//! histograms, tail-region fractions, and shape classification
//! (recency / edge / uniform-like) build on that.

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::timeline::ContextChunk;

#[derive(Debug, Error)]
pub enum TemporalError {
    #[error("timestamp {t} outside chunk bounds [{t_min}, {t_max}]")]
    OutOfRange {
        t: NaiveDateTime,
        t_min: NaiveDateTime,
        t_max: NaiveDateTime,
    },
    #[error("{count} evidence timestamps outside chunk bounds: {offenders:?}")]
    EvidenceOutOfRange {
        count: usize,
        offenders: Vec<NaiveDateTime>,
    },
    #[error("empty input")]
    Empty,
    #[error("histogram needs at least 2 bins, got {0}")]
    TooFewBins(usize),
}

/// The evidence timestamps of one instruction–response pair, their
/// normalized positions, and the pair-level representative position
/// (arithmetic mean of the positions).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeEvidence {
    pub timestamps: Vec<NaiveDateTime>,
    pub positions: Vec<f64>,
    pub representative: f64,
}

impl TimeEvidence {
    /// Number of distinct timestamps, the quantity the multi-evidence
    /// filter counts.
    pub fn distinct_timestamps(&self) -> usize {
        let mut seen = self.timestamps.clone();
        seen.sort();
        seen.dedup();
        seen.len()
    }
}

/// Normalized position of `t` within `[t_min, t_max]`, computed on epoch
/// seconds. A degenerate span (`t_min == t_max`) maps to 0.5.
pub fn relative_position(
    t: NaiveDateTime,
    t_min: NaiveDateTime,
    t_max: NaiveDateTime,
) -> Result<f64, TemporalError> {
    if t < t_min || t > t_max {
        return Err(TemporalError::OutOfRange { t, t_min, t_max });
    }
    Ok(relative_position_epoch(
        t.and_utc().timestamp(),
        t_min.and_utc().timestamp(),
        t_max.and_utc().timestamp(),
    ))
}

/// Epoch-second form of [`relative_position`]. Callers must guarantee
/// `t_min <= t <= t_max`.
pub fn relative_position_epoch(t: i64, t_min: i64, t_max: i64) -> f64 {
    debug_assert!(t_min <= t && t <= t_max);
    if t_min == t_max {
        return 0.5;
    }
    (t - t_min) as f64 / (t_max - t_min) as f64
}

/// Positions every timestamp within the chunk and returns the evidence with
/// its representative (mean) position. Out-of-range timestamps are listed in
/// the error.
pub fn evidence_positions(
    timestamps: &[NaiveDateTime],
    chunk: &ContextChunk,
) -> Result<TimeEvidence, TemporalError> {
    if timestamps.is_empty() {
        return Err(TemporalError::Empty);
    }
    let offenders: Vec<NaiveDateTime> = timestamps
        .iter()
        .copied()
        .filter(|t| *t < chunk.t_min || *t > chunk.t_max)
        .collect();
    if !offenders.is_empty() {
        return Err(TemporalError::EvidenceOutOfRange { count: offenders.len(), offenders });
    }
    let positions: Vec<f64> = timestamps
        .iter()
        .map(|t| relative_position(*t, chunk.t_min, chunk.t_max).expect("range checked"))
        .collect();
    let representative = positions.iter().sum::<f64>() / positions.len() as f64;
    Ok(TimeEvidence { timestamps: timestamps.to_vec(), positions, representative })
}

/// Counts of positions over uniform bins on `[0, 1]`; position 1.0 falls in
/// the last bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositionHistogram {
    pub bin_count: usize,
    pub counts: Vec<u64>,
    pub total: u64,
}

impl PositionHistogram {
    pub fn bin_index(&self, position: f64) -> usize {
        bin_index(position, self.bin_count)
    }

    /// Lower and upper edge of bin `i`.
    pub fn bin_edges(&self, i: usize) -> (f64, f64) {
        let width = 1.0 / self.bin_count as f64;
        (i as f64 * width, (i + 1) as f64 * width)
    }

    /// Normalized bin masses (`count / total`); all zeros when empty.
    pub fn proportions(&self) -> Vec<f64> {
        self.counts
            .iter()
            .map(|&c| if self.total == 0 { 0.0 } else { c as f64 / self.total as f64 })
            .collect()
    }

    /// L1 distance between the normalized forms of two histograms.
    pub fn l1_distance(&self, other: &PositionHistogram) -> f64 {
        assert_eq!(self.bin_count, other.bin_count, "histograms must share bin count");
        self.proportions()
            .iter()
            .zip(other.proportions())
            .map(|(a, b)| (a - b).abs())
            .sum()
    }

    /// Plot-ready CSV: `bin_lo,bin_hi,count,density` where
    /// `density = count / total / bin_width` (zero for an empty histogram).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_lo,bin_hi,count,density\n");
        let width = 1.0 / self.bin_count as f64;
        for (i, &count) in self.counts.iter().enumerate() {
            let (lo, hi) = self.bin_edges(i);
            let density =
                if self.total == 0 { 0.0 } else { count as f64 / self.total as f64 / width };
            out.push_str(&format!("{lo},{hi},{count},{density}\n"));
        }
        out
    }
}

fn bin_index(position: f64, bins: usize) -> usize {
    let idx = (position * bins as f64).floor() as usize;
    idx.min(bins - 1)
}

/// Histograms all individual evidence positions (not representatives) into
/// `bins` uniform bins. Empty input yields an all-zero histogram.
pub fn histogram(
    evidences: &[TimeEvidence],
    bins: usize,
) -> Result<PositionHistogram, TemporalError> {
    positions_histogram(evidences.iter().flat_map(|e| e.positions.iter().copied()), bins)
}

/// Histogram over a plain position iterator; shared by evidence- and
/// representative-level views.
pub fn positions_histogram(
    positions: impl IntoIterator<Item = f64>,
    bins: usize,
) -> Result<PositionHistogram, TemporalError> {
    if bins < 2 {
        return Err(TemporalError::TooFewBins(bins));
    }
    let mut counts = vec![0u64; bins];
    let mut total = 0u64;
    for p in positions {
        counts[bin_index(p, bins)] += 1;
        total += 1;
    }
    Ok(PositionHistogram { bin_count: bins, counts, total })
}

/// Mass of representative positions strictly above 0.75 / 0.85 / 0.95 —
/// the last quarter, last 15%, and final 5% of the timeline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionFractions {
    pub frac_last_quarter: f64,
    pub frac_last_15: f64,
    pub frac_last_5: f64,
}

pub fn region_fractions(representatives: &[f64]) -> Result<RegionFractions, TemporalError> {
    if representatives.is_empty() {
        return Err(TemporalError::Empty);
    }
    let n = representatives.len() as f64;
    let frac_above = |threshold: f64| {
        representatives.iter().filter(|&&p| p > threshold).count() as f64 / n
    };
    Ok(RegionFractions {
        frac_last_quarter: frac_above(0.75),
        frac_last_15: frac_above(0.85),
        frac_last_5: frac_above(0.95),
    })
}

/// Distribution shape of an instruction set over the timeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DistributionLabel {
    Recency,
    Edge,
    UniformLike,
}

impl std::fmt::Display for DistributionLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Recency => "recency",
            Self::Edge => "edge",
            Self::UniformLike => "uniform-like",
        })
    }
}

/// Decision thresholds for [`classify_distribution`]. The defaults label a
/// set "recency" when at least half its mass sits past 0.75, and "edge" when
/// at least 40% sits in the outer 10% tails (double the 20% a uniform set
/// would put there).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifyConfig {
    pub recency_position: f64,
    pub recency_mass: f64,
    pub edge_tail: f64,
    pub edge_mass: f64,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        Self { recency_position: 0.75, recency_mass: 0.5, edge_tail: 0.1, edge_mass: 0.4 }
    }
}

/// Labels a distribution from its representative positions. The histogram is
/// passed alongside to guarantee the caller classified a non-empty set.
pub fn classify_distribution(
    hist: &PositionHistogram,
    representatives: &[f64],
    config: &ClassifyConfig,
) -> Result<DistributionLabel, TemporalError> {
    if hist.total == 0 || representatives.is_empty() {
        return Err(TemporalError::Empty);
    }
    let n = representatives.len() as f64;
    let recency_frac =
        representatives.iter().filter(|&&p| p > config.recency_position).count() as f64 / n;
    if recency_frac >= config.recency_mass {
        return Ok(DistributionLabel::Recency);
    }
    let edge_frac = representatives
        .iter()
        .filter(|&&p| p < config.edge_tail || p > 1.0 - config.edge_tail)
        .count() as f64
        / n;
    if edge_frac >= config.edge_mass {
        return Ok(DistributionLabel::Edge);
    }
    Ok(DistributionLabel::UniformLike)
}

/// One positions-file line: `{"pair_id":…,"positions":[…],"representative":…}`.
pub fn positions_jsonl_line(pair_id: &str, positions: &[f64], representative: f64) -> String {
    serde_json::json!({
        "pair_id": pair_id,
        "positions": positions,
        "representative": representative,
    })
    .to_string()
}
