//! Event-stream ingestion and emission.
//!
//! CSV columns (header required, this order):
//! `patient_id,timestamp,event_type,code,value,text`. The `value` field is a
//! decimal with an optional trailing unit (`"12.5"` or `"12.5 mg/dL"`). The
//! JSONL mirror carries one object per line with the same field names.
//! Malformed rows are recorded with their line number; input order is
//! preserved; only stream-level decode failures are fatal.

use std::io::Read;

use chrono::{NaiveDate, NaiveDateTime, NaiveTime};
use serde::Deserialize;

use super::{ClinicalEvent, EventType, TimelineError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventFormat {
    Csv,
    Jsonl,
}

/// A rejected input row: 1-based line number plus reason.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct RowError {
    pub line: u64,
    pub message: String,
}

/// Result of parsing one event stream: accepted events in input order plus
/// per-row errors for everything rejected.
#[derive(Debug, Default)]
pub struct ParsedEvents {
    pub events: Vec<ClinicalEvent>,
    pub errors: Vec<RowError>,
}

const CSV_HEADER: [&str; 6] = ["patient_id", "timestamp", "event_type", "code", "value", "text"];

/// Parses a UTF-8 event stream in the given format.
pub fn parse_events<R: Read>(reader: R, format: EventFormat) -> Result<ParsedEvents, TimelineError> {
    match format {
        EventFormat::Csv => parse_csv(reader),
        EventFormat::Jsonl => parse_jsonl(reader),
    }
}

fn parse_csv<R: Read>(mut reader: R) -> Result<ParsedEvents, TimelineError> {
    let mut raw = Vec::new();
    reader
        .read_to_end(&mut raw)
        .map_err(|e| TimelineError::Decode(format!("stream failure: {e}")))?;
    // an entirely empty stream is the vacuous case, not a header violation
    if raw.iter().all(|b| b.is_ascii_whitespace()) {
        return Ok(ParsedEvents::default());
    }
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(raw.as_slice());
    let headers = rdr
        .headers()
        .map_err(|e| TimelineError::Decode(format!("cannot read CSV header: {e}")))?
        .clone();
    if headers.iter().collect::<Vec<_>>() != CSV_HEADER {
        return Err(TimelineError::Decode(format!(
            "CSV header must be `{}`, got `{}`",
            CSV_HEADER.join(","),
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }

    let mut out = ParsedEvents::default();
    for (i, record) in rdr.records().enumerate() {
        let fallback_line = (i + 2) as u64; // header occupies line 1
        match record {
            Ok(rec) => {
                let line = rec.position().map_or(fallback_line, |p| p.line());
                let fields: Vec<&str> = rec.iter().collect();
                if fields.len() != CSV_HEADER.len() {
                    out.errors.push(RowError {
                        line,
                        message: format!("expected {} fields, got {}", CSV_HEADER.len(), fields.len()),
                    });
                    continue;
                }
                match event_from_fields(
                    fields[0], fields[1], fields[2], fields[3], fields[4], fields[5],
                ) {
                    Ok(event) => out.events.push(event),
                    Err(message) => out.errors.push(RowError { line, message }),
                }
            }
            Err(e) if e.is_io_error() => {
                return Err(TimelineError::Decode(format!("stream failure: {e}")));
            }
            Err(e) => {
                let line = e.position().map_or(fallback_line, |p| p.line());
                out.errors.push(RowError { line, message: e.to_string() });
            }
        }
    }
    Ok(out)
}

/// JSONL row shape; `value` may be a JSON number or a `"12.5 mg"` string.
#[derive(Deserialize)]
struct RawJsonEvent {
    patient_id: String,
    timestamp: String,
    event_type: String,
    #[serde(default)]
    code: Option<String>,
    #[serde(default)]
    value: Option<serde_json::Value>,
    #[serde(default)]
    text: Option<String>,
}

fn parse_jsonl<R: Read>(mut reader: R) -> Result<ParsedEvents, TimelineError> {
    let mut buf = String::new();
    reader
        .read_to_string(&mut buf)
        .map_err(|e| TimelineError::Decode(format!("stream is not valid UTF-8: {e}")))?;

    let mut out = ParsedEvents::default();
    for (i, raw_line) in buf.lines().enumerate() {
        let line = (i + 1) as u64;
        let trimmed = raw_line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let raw: RawJsonEvent = match serde_json::from_str(trimmed) {
            Ok(raw) => raw,
            Err(e) => {
                out.errors.push(RowError { line, message: format!("invalid JSON: {e}") });
                continue;
            }
        };
        let value_field = match raw.value {
            None | Some(serde_json::Value::Null) => String::new(),
            Some(serde_json::Value::Number(n)) => n.to_string(),
            Some(serde_json::Value::String(s)) => s,
            Some(other) => {
                out.errors.push(RowError {
                    line,
                    message: format!("value must be a number or string, got {other}"),
                });
                continue;
            }
        };
        match event_from_fields(
            &raw.patient_id,
            &raw.timestamp,
            &raw.event_type,
            raw.code.as_deref().unwrap_or(""),
            &value_field,
            raw.text.as_deref().unwrap_or(""),
        ) {
            Ok(event) => out.events.push(event),
            Err(message) => out.errors.push(RowError { line, message }),
        }
    }
    Ok(out)
}

fn event_from_fields(
    patient_id: &str,
    timestamp: &str,
    event_type: &str,
    code: &str,
    value: &str,
    text: &str,
) -> Result<ClinicalEvent, String> {
    if patient_id.is_empty() {
        return Err("empty patient_id".into());
    }
    let timestamp = parse_timestamp(timestamp).ok_or("invalid timestamp")?;
    let event_type = EventType::parse(event_type)
        .ok_or_else(|| format!("unknown event_type `{event_type}`"))?;
    let (value, unit) = parse_value_field(value)?;
    let event = ClinicalEvent {
        patient_id: patient_id.to_string(),
        timestamp,
        event_type,
        code: non_empty(code),
        value,
        unit,
        text: non_empty(text),
    };
    if !event.has_payload() {
        return Err("event carries no code, value, or text".into());
    }
    Ok(event)
}

fn non_empty(s: &str) -> Option<String> {
    if s.is_empty() { None } else { Some(s.to_string()) }
}

/// Accepts `YYYY-MM-DDTHH:MM:SS`, `YYYY-MM-DD HH:MM:SS`, or date-only
/// `YYYY-MM-DD` (normalized to 00:00:00).
pub fn parse_timestamp(s: &str) -> Option<NaiveDateTime> {
    let s = s.trim();
    NaiveDateTime::parse_from_str(s, "%Y-%m-%dT%H:%M:%S")
        .or_else(|_| NaiveDateTime::parse_from_str(s, "%Y-%m-%d %H:%M:%S"))
        .ok()
        .or_else(|| NaiveDate::parse_from_str(s, "%Y-%m-%d").ok().map(|d| d.and_time(NaiveTime::MIN)))
}

fn parse_value_field(raw: &str) -> Result<(Option<f64>, Option<String>), String> {
    let raw = raw.trim();
    if raw.is_empty() {
        return Ok((None, None));
    }
    let (num, unit) = match raw.split_once(char::is_whitespace) {
        Some((num, unit)) => (num, unit.trim()),
        None => (raw, ""),
    };
    let value: f64 = num.parse().map_err(|_| format!("invalid value `{raw}`"))?;
    if !value.is_finite() {
        return Err(format!("non-finite value `{raw}`"));
    }
    Ok((Some(value), non_empty(unit)))
}

fn format_timestamp(ts: &NaiveDateTime) -> String {
    if ts.time() == NaiveTime::MIN {
        ts.date().format("%Y-%m-%d").to_string()
    } else {
        ts.format("%Y-%m-%dT%H:%M:%S").to_string()
    }
}

fn format_value_field(event: &ClinicalEvent) -> String {
    match (event.value, event.unit.as_deref()) {
        (Some(v), Some(u)) => format!("{v} {u}"),
        (Some(v), None) => format!("{v}"),
        (None, _) => String::new(),
    }
}

/// Writes events to the CSV event format, header included.
pub fn events_to_csv(events: &[ClinicalEvent]) -> String {
    let mut wtr = csv::WriterBuilder::new().from_writer(Vec::new());
    wtr.write_record(CSV_HEADER).expect("in-memory write");
    for e in events {
        wtr.write_record([
            e.patient_id.as_str(),
            &format_timestamp(&e.timestamp),
            e.event_type.as_str(),
            e.code.as_deref().unwrap_or(""),
            &format_value_field(e),
            e.text.as_deref().unwrap_or(""),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(wtr.into_inner().expect("in-memory flush")).expect("csv output is UTF-8")
}

/// Writes events to the JSONL event format, one object per line.
pub fn events_to_jsonl(events: &[ClinicalEvent]) -> String {
    let mut out = String::new();
    for e in events {
        let mut obj = serde_json::Map::new();
        obj.insert("patient_id".into(), e.patient_id.clone().into());
        obj.insert("timestamp".into(), format_timestamp(&e.timestamp).into());
        obj.insert("event_type".into(), e.event_type.as_str().into());
        if let Some(code) = &e.code {
            obj.insert("code".into(), code.clone().into());
        }
        let value = format_value_field(e);
        if !value.is_empty() {
            obj.insert("value".into(), value.into());
        }
        if let Some(text) = &e.text {
            obj.insert("text".into(), text.clone().into());
        }
        out.push_str(&serde_json::Value::Object(obj).to_string());
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_happy_path() {
        let csv = "patient_id,timestamp,event_type,code,value,text\n\
                   p1,2020-01-05,condition,C34.90,,lung cancer dx\n";
        let parsed = parse_events(csv.as_bytes(), EventFormat::Csv).unwrap();
        assert!(parsed.errors.is_empty());
        assert_eq!(parsed.events.len(), 1);
        let e = &parsed.events[0];
        assert_eq!(e.patient_id, "p1");
        assert_eq!(e.event_type, EventType::Condition);
        assert_eq!(e.code.as_deref(), Some("C34.90"));
        assert_eq!(e.value, None);
        assert_eq!(e.text.as_deref(), Some("lung cancer dx"));
        assert_eq!(e.timestamp.date(), NaiveDate::from_ymd_opt(2020, 1, 5).unwrap());
    }

    #[test]
    fn csv_invalid_timestamp_records_line() {
        let csv = "patient_id,timestamp,event_type,code,value,text\n\
                   p1,2020-01-05,condition,C1,,ok\n\
                   p1,2020-13-40,condition,C2,,bad date\n";
        let parsed = parse_events(csv.as_bytes(), EventFormat::Csv).unwrap();
        assert_eq!(parsed.events.len(), 1);
        assert_eq!(parsed.errors.len(), 1);
        assert_eq!(parsed.errors[0].line, 3);
        assert!(parsed.errors[0].message.contains("invalid timestamp"));
    }

    #[test]
    fn csv_unknown_event_type_is_row_error() {
        let csv = "patient_id,timestamp,event_type,code,value,text\n\
                   p1,2020-01-05,surgery,C1,,x\n";
        let parsed = parse_events(csv.as_bytes(), EventFormat::Csv).unwrap();
        assert!(parsed.events.is_empty());
        assert!(parsed.errors[0].message.contains("unknown event_type"));
    }

    #[test]
    fn csv_empty_stream_is_empty_ok() {
        let parsed = parse_events(&b""[..], EventFormat::Csv).unwrap();
        assert!(parsed.events.is_empty() && parsed.errors.is_empty());
    }

    #[test]
    fn csv_header_only_yields_nothing() {
        let csv = "patient_id,timestamp,event_type,code,value,text\n";
        let parsed = parse_events(csv.as_bytes(), EventFormat::Csv).unwrap();
        assert!(parsed.events.is_empty());
        assert!(parsed.errors.is_empty());
    }

    #[test]
    fn csv_wrong_header_is_fatal() {
        let csv = "id,when,kind,code,value,text\np1,2020-01-05,note,,,x\n";
        assert!(matches!(
            parse_events(csv.as_bytes(), EventFormat::Csv),
            Err(TimelineError::Decode(_))
        ));
    }

    #[test]
    fn value_with_unit_parses() {
        let csv = "patient_id,timestamp,event_type,code,value,text\n\
                   p1,2020-01-05T08:30:00,measurement,BW,64.5 kg,\n";
        let parsed = parse_events(csv.as_bytes(), EventFormat::Csv).unwrap();
        let e = &parsed.events[0];
        assert_eq!(e.value, Some(64.5));
        assert_eq!(e.unit.as_deref(), Some("kg"));
    }

    #[test]
    fn payload_required() {
        let csv = "patient_id,timestamp,event_type,code,value,text\n\
                   p1,2020-01-05,note,,,\n";
        let parsed = parse_events(csv.as_bytes(), EventFormat::Csv).unwrap();
        assert!(parsed.events.is_empty());
        assert!(parsed.errors[0].message.contains("no code, value, or text"));
    }

    #[test]
    fn jsonl_happy_and_error_paths() {
        let jsonl = r#"{"patient_id":"p1","timestamp":"2020-01-05","event_type":"note","text":"hello"}
{"patient_id":"p1","timestamp":"2020-02-06","event_type":"measurement","code":"HR","value":72}
not json
{"patient_id":"p1","timestamp":"2020-03-07","event_type":"measurement","code":"BW","value":"64.5 kg"}
"#;
        let parsed = parse_events(jsonl.as_bytes(), EventFormat::Jsonl).unwrap();
        assert_eq!(parsed.events.len(), 3);
        assert_eq!(parsed.errors.len(), 1);
        assert_eq!(parsed.errors[0].line, 3);
        assert_eq!(parsed.events[1].value, Some(72.0));
        assert_eq!(parsed.events[2].unit.as_deref(), Some("kg"));
    }

    #[test]
    fn jsonl_empty_stream_is_empty_ok() {
        let parsed = parse_events(&b""[..], EventFormat::Jsonl).unwrap();
        assert!(parsed.events.is_empty() && parsed.errors.is_empty());
    }

    #[test]
    fn csv_round_trip() {
        let csv = "patient_id,timestamp,event_type,code,value,text\n\
                   p1,2020-01-05,condition,C34.90,,\"text, with comma\"\n\
                   p1,2020-01-05T08:30:00,measurement,BW,64.5 kg,\n";
        let parsed = parse_events(csv.as_bytes(), EventFormat::Csv).unwrap();
        let rewritten = events_to_csv(&parsed.events);
        let reparsed = parse_events(rewritten.as_bytes(), EventFormat::Csv).unwrap();
        assert_eq!(parsed.events, reparsed.events);
    }

    #[test]
    fn jsonl_round_trip() {
        let events = parse_events(
            "patient_id,timestamp,event_type,code,value,text\np1,2020-01-05,note,,,hi\n".as_bytes(),
            EventFormat::Csv,
        )
        .unwrap()
        .events;
        let jsonl = events_to_jsonl(&events);
        let reparsed = parse_events(jsonl.as_bytes(), EventFormat::Jsonl).unwrap();
        assert_eq!(events, reparsed.events);
    }
}
