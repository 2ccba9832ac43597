//! Generation-response parsing and validation.
//!
//! Providers answer with prose-wrapped JSON more often than clean JSON, so
//! the parser extracts the first JSON array found anywhere in the text
//! (code fences and surrounding prose tolerated), then validates each
//! element: non-empty `question` and `answer`, at least one `time_evidence`
//! entry, and every evidence date matching a visit date of the chunk by
//! exact string equality.

use chrono::NaiveDate;
use serde::Serialize;

use crate::timeline::ContextChunk;

use super::GenError;

/// A structurally valid, grounded candidate pair.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidatePair {
    /// Element index within the returned JSON array.
    pub index: usize,
    pub question: String,
    pub answer: String,
    pub evidence_dates: Vec<NaiveDate>,
}

/// An element that failed validation, kept for the audit trail.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RejectedCandidate {
    pub index: usize,
    pub reason: String,
}

/// Outcome of parsing one raw response. Every array element lands in exactly
/// one of the two lists.
#[derive(Debug, Clone, Default)]
pub struct ParsedCandidates {
    pub candidates: Vec<CandidatePair>,
    pub rejected: Vec<RejectedCandidate>,
}

/// Parses a raw provider response against the chunk it was generated from.
pub fn parse_generation_response(
    raw: &str,
    chunk: &ContextChunk,
) -> Result<ParsedCandidates, GenError> {
    let array = extract_json_array(raw).ok_or_else(|| GenError::NoJsonArray {
        snippet: raw.chars().take(120).collect(),
    })?;
    let visit_dates = chunk.visit_date_strings();

    let mut out = ParsedCandidates::default();
    for (index, element) in array.into_iter().enumerate() {
        match validate_element(index, element, &visit_dates) {
            Ok(candidate) => out.candidates.push(candidate),
            Err(reason) => out.rejected.push(RejectedCandidate { index, reason }),
        }
    }
    Ok(out)
}

fn validate_element(
    index: usize,
    element: serde_json::Value,
    visit_dates: &[String],
) -> Result<CandidatePair, String> {
    let obj = element.as_object().ok_or("element is not an object")?;
    let field = |name: &str| -> Result<String, String> {
        let value = obj
            .get(name)
            .and_then(|v| v.as_str())
            .ok_or_else(|| format!("missing or non-string `{name}`"))?;
        if value.trim().is_empty() {
            return Err(format!("empty `{name}`"));
        }
        Ok(value.to_string())
    };
    let question = field("question")?;
    let answer = field("answer")?;
    let evidence = obj
        .get("time_evidence")
        .and_then(|v| v.as_array())
        .ok_or("missing `time_evidence` array")?;
    if evidence.is_empty() {
        return Err("empty `time_evidence`".to_string());
    }
    let mut evidence_dates = Vec::with_capacity(evidence.len());
    for entry in evidence {
        let s = entry.as_str().ok_or("time_evidence entries must be strings")?;
        if !visit_dates.iter().any(|d| d == s) {
            return Err(format!("evidence not in record: {s}"));
        }
        let date = NaiveDate::parse_from_str(s, "%Y-%m-%d")
            .map_err(|e| format!("evidence date `{s}` unparseable: {e}"))?;
        evidence_dates.push(date);
    }
    Ok(CandidatePair { index, question, answer, evidence_dates })
}

/// Finds the first substring that parses as a JSON array, scanning `[`
/// positions left to right; trailing content after the array is ignored.
fn extract_json_array(text: &str) -> Option<Vec<serde_json::Value>> {
    for (pos, _) in text.match_indices('[') {
        let mut stream =
            serde_json::Deserializer::from_str(&text[pos..]).into_iter::<serde_json::Value>();
        if let Some(Ok(serde_json::Value::Array(items))) = stream.next() {
            return Some(items);
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::timeline::{build_timeline, ClinicalEvent, EventType};
    use chrono::NaiveTime;

    fn chunk_with_dates(dates: &[&str]) -> ContextChunk {
        let events: Vec<ClinicalEvent> = dates
            .iter()
            .map(|d| ClinicalEvent {
                patient_id: "p1".into(),
                timestamp: NaiveDate::parse_from_str(d, "%Y-%m-%d").unwrap().and_time(NaiveTime::MIN),
                event_type: EventType::Note,
                code: None,
                value: None,
                unit: None,
                text: Some("note".into()),
            })
            .collect();
        let tl = build_timeline(events).unwrap();
        ContextChunk {
            patient_id: tl.patient_id.clone(),
            index: 0,
            t_min: tl.first_date().and_time(NaiveTime::MIN),
            t_max: tl.last_date().and_time(NaiveTime::MIN),
            visits: tl.visits,
            token_estimate: 0,
            truncated: false,
        }
    }

    #[test]
    fn fenced_json_is_extracted() {
        let chunk = chunk_with_dates(&["2020-01-05"]);
        let raw = "Sure, here you go:\n```json\n[{\"question\":\"q\",\"answer\":\"a\",\"time_evidence\":[\"2020-01-05\"]}]\n```";
        let parsed = parse_generation_response(raw, &chunk).unwrap();
        assert_eq!(parsed.candidates.len(), 1);
        assert!(parsed.rejected.is_empty());
        assert_eq!(parsed.candidates[0].question, "q");
    }

    #[test]
    fn multi_evidence_candidate_keeps_both_dates() {
        let chunk = chunk_with_dates(&["2020-01-05", "2021-03-02"]);
        let raw = r#"[{"question":"q","answer":"a","time_evidence":["2020-01-05","2021-03-02"]}]"#;
        let parsed = parse_generation_response(raw, &chunk).unwrap();
        assert_eq!(parsed.candidates[0].evidence_dates.len(), 2);
    }

    #[test]
    fn empty_answer_is_rejected() {
        let chunk = chunk_with_dates(&["2020-01-05"]);
        let raw = r#"[{"question":"q","answer":"","time_evidence":["2020-01-05"]}]"#;
        let parsed = parse_generation_response(raw, &chunk).unwrap();
        assert!(parsed.candidates.is_empty());
        assert_eq!(parsed.rejected.len(), 1);
        assert!(parsed.rejected[0].reason.contains("answer"));
    }

    #[test]
    fn out_of_record_evidence_is_rejected() {
        let chunk = chunk_with_dates(&["2020-01-05"]);
        let raw = r#"[{"question":"q","answer":"a","time_evidence":["2022-09-09"]}]"#;
        let parsed = parse_generation_response(raw, &chunk).unwrap();
        assert_eq!(parsed.rejected[0].reason, "evidence not in record: 2022-09-09");
    }

    #[test]
    fn non_canonical_date_string_is_not_matched() {
        // exact string equality: "2020-1-5" does not match "2020-01-05"
        let chunk = chunk_with_dates(&["2020-01-05"]);
        let raw = r#"[{"question":"q","answer":"a","time_evidence":["2020-1-5"]}]"#;
        let parsed = parse_generation_response(raw, &chunk).unwrap();
        assert!(parsed.rejected[0].reason.starts_with("evidence not in record"));
    }

    #[test]
    fn prose_without_array_is_parse_error() {
        let chunk = chunk_with_dates(&["2020-01-05"]);
        assert!(parse_generation_response("I cannot help with that.", &chunk).is_err());
    }

    #[test]
    fn audit_partition_is_complete() {
        let chunk = chunk_with_dates(&["2020-01-05"]);
        let raw = r#"[
            {"question":"q1","answer":"a1","time_evidence":["2020-01-05"]},
            {"question":"q2","answer":"a2","time_evidence":[]},
            {"question":"q3","time_evidence":["2020-01-05"]},
            "not an object"
        ]"#;
        let parsed = parse_generation_response(raw, &chunk).unwrap();
        assert_eq!(parsed.candidates.len() + parsed.rejected.len(), 4);
        assert_eq!(parsed.candidates.len(), 1);
    }

    #[test]
    fn first_json_array_wins_over_later_ones() {
        let chunk = chunk_with_dates(&["2020-01-05"]);
        let raw = r#"ignore [1, 2] then [{"question":"q","answer":"a","time_evidence":["2020-01-05"]}]"#;
        let parsed = parse_generation_response(raw, &chunk).unwrap();
        // the first array parses but its elements fail validation
        assert_eq!(parsed.candidates.len(), 0);
        assert_eq!(parsed.rejected.len(), 2);
    }
}
