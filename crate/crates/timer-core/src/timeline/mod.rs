//! Patient timelines: event ingestion, visit grouping, XML records, and
//! token-budgeted chunking.
//!
//! A timeline is an ordered sequence of visits, where a visit is the set of
//! events sharing one calendar date. Chunks are contiguous visit slices whose
//! XML serialization fits a token budget; chunk boundaries never split a
//! visit, so every evidence date stays resolvable within its chunk.

mod parse;
mod xml;

pub use parse::{
    events_to_csv, events_to_jsonl, parse_events, EventFormat, ParsedEvents, RowError,
};
pub use xml::{parse_xml_record, scan_visit_dates, serialize_xml, RecordEvent, RecordVisit, XmlRecord};

use chrono::{NaiveDate, NaiveDateTime, NaiveTime};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// The five structured event categories carried by a record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventType {
    Condition,
    Medication,
    Measurement,
    Procedure,
    Note,
}

impl EventType {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Condition => "condition",
            Self::Medication => "medication",
            Self::Measurement => "measurement",
            Self::Procedure => "procedure",
            Self::Note => "note",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "condition" => Some(Self::Condition),
            "medication" => Some(Self::Medication),
            "measurement" => Some(Self::Measurement),
            "procedure" => Some(Self::Procedure),
            "note" => Some(Self::Note),
            _ => None,
        }
    }
}

impl std::fmt::Display for EventType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One timestamped structured item or note in a patient record.
///
/// At least one of `code`, `value`, `text` is present; constructors and the
/// parsers enforce this. Date-only timestamps normalize to 00:00:00.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClinicalEvent {
    pub patient_id: String,
    pub timestamp: NaiveDateTime,
    pub event_type: EventType,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub code: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unit: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
}

impl ClinicalEvent {
    /// True when the event carries at least one payload field.
    pub fn has_payload(&self) -> bool {
        self.code.is_some() || self.value.is_some() || self.text.is_some()
    }

    pub fn date(&self) -> NaiveDate {
        self.timestamp.date()
    }
}

/// All events of one patient on one calendar date, in stable ingest order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Visit {
    pub date: NaiveDate,
    pub events: Vec<ClinicalEvent>,
}

/// An ordered, non-empty sequence of visits for a single patient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatientTimeline {
    pub patient_id: String,
    pub visits: Vec<Visit>,
}

impl PatientTimeline {
    /// Flattens the timeline back into its event list, visit order preserved.
    pub fn events(&self) -> impl Iterator<Item = &ClinicalEvent> {
        self.visits.iter().flat_map(|v| v.events.iter())
    }

    pub fn first_date(&self) -> NaiveDate {
        self.visits.first().expect("timeline is non-empty").date
    }

    pub fn last_date(&self) -> NaiveDate {
        self.visits.last().expect("timeline is non-empty").date
    }
}

/// A contiguous, token-budgeted slice of a patient timeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextChunk {
    pub patient_id: String,
    /// Position of this chunk within the patient's chunk sequence.
    pub index: usize,
    pub visits: Vec<Visit>,
    /// Date-time of the earliest visit in the slice.
    pub t_min: NaiveDateTime,
    /// Date-time of the latest visit in the slice.
    pub t_max: NaiveDateTime,
    pub token_estimate: usize,
    /// Set when note texts were truncated to fit an oversized visit.
    #[serde(default)]
    pub truncated: bool,
}

impl ContextChunk {
    /// Stable identifier of the form `<patient_id>:<index>`.
    pub fn chunk_ref(&self) -> String {
        format!("{}:{}", self.patient_id, self.index)
    }

    /// Visit dates formatted as `YYYY-MM-DD`, ascending.
    pub fn visit_date_strings(&self) -> Vec<String> {
        self.visits
            .iter()
            .map(|v| v.date.format("%Y-%m-%d").to_string())
            .collect()
    }

    pub fn contains_date(&self, date: NaiveDate) -> bool {
        self.visits.iter().any(|v| v.date == date)
    }
}

#[derive(Debug, Error)]
pub enum TimelineError {
    #[error("empty event list")]
    EmptyInput,
    #[error("multiple patients in one timeline: {0:?}")]
    MultiplePatients(Vec<String>),
    #[error("visit {date} alone exceeds the token budget ({estimate} > {budget})")]
    OversizedVisit {
        date: NaiveDate,
        estimate: usize,
        budget: usize,
    },
    #[error("token budget must be positive")]
    ZeroBudget,
    #[error("stream decode failure: {0}")]
    Decode(String),
    #[error("malformed XML record: {0}")]
    Xml(String),
}

/// Maps text to a non-negative token count. Estimates must be monotone under
/// concatenation: `estimate(a + b) >= max(estimate(a), estimate(b))`.
pub trait TokenEstimator {
    fn estimate(&self, text: &str) -> usize;
}

/// Default heuristic: `ceil(1.3 x whitespace-token count)`, computed in
/// integer arithmetic as `(n * 13 + 9) / 10`.
#[derive(Debug, Clone, Copy, Default)]
pub struct WhitespaceEstimator;

impl TokenEstimator for WhitespaceEstimator {
    fn estimate(&self, text: &str) -> usize {
        let n = text.split_whitespace().count();
        (n * 13).div_ceil(10)
    }
}

/// Token estimate of `text` under the default heuristic estimator.
pub fn estimate_tokens(text: &str) -> usize {
    WhitespaceEstimator.estimate(text)
}

/// What to do with a single visit whose serialization alone exceeds the budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum OversizedPolicy {
    /// Fail, naming the visit date.
    #[default]
    Error,
    /// Truncate the longest note texts until the visit fits, flagging the chunk.
    TruncateNotes,
}

fn midnight(date: NaiveDate) -> NaiveDateTime {
    date.and_time(NaiveTime::MIN)
}

/// Groups events by calendar date into visits and orders visits ascending.
///
/// Within a visit, events keep their input order. All events must share one
/// `patient_id` and the list must be non-empty.
pub fn build_timeline(events: Vec<ClinicalEvent>) -> Result<PatientTimeline, TimelineError> {
    if events.is_empty() {
        return Err(TimelineError::EmptyInput);
    }
    let patient_id = events[0].patient_id.clone();
    let mut others: Vec<String> = events
        .iter()
        .filter(|e| e.patient_id != patient_id)
        .map(|e| e.patient_id.clone())
        .collect();
    if !others.is_empty() {
        others.sort();
        others.dedup();
        let mut ids = vec![patient_id];
        ids.extend(others);
        return Err(TimelineError::MultiplePatients(ids));
    }

    let mut by_date: std::collections::BTreeMap<NaiveDate, Vec<ClinicalEvent>> =
        std::collections::BTreeMap::new();
    for event in events {
        by_date.entry(event.date()).or_default().push(event);
    }
    let visits = by_date
        .into_iter()
        .map(|(date, events)| Visit { date, events })
        .collect();
    Ok(PatientTimeline { patient_id, visits })
}

/// Splits a timeline into chunks by greedy left-to-right accumulation of
/// whole visits; a chunk closes when adding the next visit would push its
/// serialized token estimate past `token_budget`.
///
/// The chunks partition the visit sequence: concatenated in order they equal
/// the input. A visit that alone exceeds the budget is handled per `policy`.
pub fn chunk_timeline(
    timeline: &PatientTimeline,
    token_budget: usize,
    estimator: &dyn TokenEstimator,
    policy: OversizedPolicy,
) -> Result<Vec<ContextChunk>, TimelineError> {
    if token_budget == 0 {
        return Err(TimelineError::ZeroBudget);
    }
    let mut chunks: Vec<ContextChunk> = Vec::new();
    let mut current: Vec<Visit> = Vec::new();
    let mut current_truncated = false;

    let make_chunk = |visits: Vec<Visit>, index: usize, truncated: bool| -> ContextChunk {
        let t_min = midnight(visits.first().expect("chunk has visits").date);
        let t_max = midnight(visits.last().expect("chunk has visits").date);
        let mut chunk = ContextChunk {
            patient_id: timeline.patient_id.clone(),
            index,
            visits,
            t_min,
            t_max,
            token_estimate: 0,
            truncated,
        };
        chunk.token_estimate = estimator.estimate(&serialize_xml(&chunk));
        chunk
    };

    for visit in &timeline.visits {
        let mut candidate = current.clone();
        candidate.push(visit.clone());
        let cost = estimate_visits(&timeline.patient_id, &candidate, estimator);
        if cost <= token_budget {
            current = candidate;
            continue;
        }
        if !current.is_empty() {
            chunks.push(make_chunk(
                std::mem::take(&mut current),
                chunks.len(),
                std::mem::take(&mut current_truncated),
            ));
        }
        // The visit now starts a fresh chunk; it may still be oversized alone.
        let alone = estimate_visits(&timeline.patient_id, std::slice::from_ref(visit), estimator);
        if alone <= token_budget {
            current.push(visit.clone());
            continue;
        }
        match policy {
            OversizedPolicy::Error => {
                return Err(TimelineError::OversizedVisit {
                    date: visit.date,
                    estimate: alone,
                    budget: token_budget,
                });
            }
            OversizedPolicy::TruncateNotes => {
                let trimmed = truncate_visit_notes(
                    &timeline.patient_id,
                    visit.clone(),
                    token_budget,
                    estimator,
                )?;
                current.push(trimmed);
                current_truncated = true;
            }
        }
    }
    if !current.is_empty() {
        chunks.push(make_chunk(current, chunks.len(), current_truncated));
    }
    Ok(chunks)
}

fn estimate_visits(patient_id: &str, visits: &[Visit], estimator: &dyn TokenEstimator) -> usize {
    let probe = ContextChunk {
        patient_id: patient_id.to_string(),
        index: 0,
        visits: visits.to_vec(),
        t_min: midnight(visits[0].date),
        t_max: midnight(visits[visits.len() - 1].date),
        token_estimate: 0,
        truncated: false,
    };
    estimator.estimate(&serialize_xml(&probe))
}

/// Repeatedly halves the longest note text until the lone visit fits the
/// budget. Fails if the visit still exceeds the budget with all notes empty.
fn truncate_visit_notes(
    patient_id: &str,
    mut visit: Visit,
    token_budget: usize,
    estimator: &dyn TokenEstimator,
) -> Result<Visit, TimelineError> {
    loop {
        let estimate = estimate_visits(patient_id, std::slice::from_ref(&visit), estimator);
        if estimate <= token_budget {
            return Ok(visit);
        }
        let longest = visit
            .events
            .iter_mut()
            .filter(|e| e.text.as_deref().is_some_and(|t| !t.is_empty()))
            .max_by_key(|e| e.text.as_deref().map_or(0, |t| t.split_whitespace().count()));
        let Some(event) = longest else {
            return Err(TimelineError::OversizedVisit {
                date: visit.date,
                estimate,
                budget: token_budget,
            });
        };
        let text = event.text.take().unwrap_or_default();
        let tokens: Vec<&str> = text.split_whitespace().collect();
        let keep = tokens.len() / 2;
        if keep == 0 {
            event.text = None;
        } else {
            event.text = Some(tokens[..keep].join(" "));
        }
    }
}
