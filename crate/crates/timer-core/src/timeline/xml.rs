//! The XML record format.
//!
//! Serialization is byte-deterministic: root `<patient id="...">`, one
//! `<visit date="YYYY-MM-DD">` child per visit ascending, one
//! `<event type="...">` child per event with optional `code`/`value`/`unit`
//! attributes and the free text as element text. Two-space indentation, LF
//! line endings, UTF-8, trailing newline. The parser here reads exactly this
//! record format back (it is not a general XML parser).

use chrono::NaiveDate;

use super::{ClinicalEvent, ContextChunk, EventType, TimelineError};

/// Structural view of a serialized record, used for round-trip checks and
/// for re-validating generated evidence against record content.
#[derive(Debug, Clone, PartialEq)]
pub struct XmlRecord {
    pub patient_id: String,
    pub visits: Vec<RecordVisit>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecordVisit {
    pub date: NaiveDate,
    pub events: Vec<RecordEvent>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecordEvent {
    pub event_type: EventType,
    pub code: Option<String>,
    pub value: Option<f64>,
    pub unit: Option<String>,
    pub text: Option<String>,
}

impl XmlRecord {
    /// Projects a chunk onto the XML-visible structure. Empty text fields
    /// normalize to absent, matching what serialization emits.
    pub fn from_chunk(chunk: &ContextChunk) -> Self {
        XmlRecord {
            patient_id: chunk.patient_id.clone(),
            visits: chunk
                .visits
                .iter()
                .map(|v| RecordVisit {
                    date: v.date,
                    events: v.events.iter().map(RecordEvent::from_event).collect(),
                })
                .collect(),
        }
    }
}

impl RecordEvent {
    fn from_event(e: &ClinicalEvent) -> Self {
        RecordEvent {
            event_type: e.event_type,
            code: e.code.clone().filter(|c| !c.is_empty()),
            value: e.value,
            unit: e.unit.clone().filter(|u| !u.is_empty()),
            text: e.text.clone().filter(|t| !t.is_empty()),
        }
    }
}

fn escape_into(out: &mut String, raw: &str) {
    for ch in raw.chars() {
        match ch {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            _ => out.push(ch),
        }
    }
}

fn unescape(raw: &str) -> Result<String, TimelineError> {
    let mut out = String::with_capacity(raw.len());
    let mut rest = raw;
    while let Some(pos) = rest.find('&') {
        out.push_str(&rest[..pos]);
        rest = &rest[pos..];
        let entity = ["&amp;", "&lt;", "&gt;", "&quot;", "&apos;"]
            .iter()
            .find(|e| rest.starts_with(**e));
        match entity {
            Some(&"&amp;") => out.push('&'),
            Some(&"&lt;") => out.push('<'),
            Some(&"&gt;") => out.push('>'),
            Some(&"&quot;") => out.push('"'),
            Some(&"&apos;") => out.push('\''),
            _ => return Err(TimelineError::Xml(format!("unknown entity near `{rest}`"))),
        }
        rest = &rest[entity.unwrap().len()..];
    }
    out.push_str(rest);
    Ok(out)
}

/// Serializes a chunk to the XML record format, byte-for-byte deterministic
/// for equal inputs.
pub fn serialize_xml(chunk: &ContextChunk) -> String {
    let mut out = String::new();
    out.push_str("<patient id=\"");
    escape_into(&mut out, &chunk.patient_id);
    out.push_str("\">\n");
    for visit in &chunk.visits {
        out.push_str("  <visit date=\"");
        out.push_str(&visit.date.format("%Y-%m-%d").to_string());
        out.push_str("\">\n");
        for event in &visit.events {
            out.push_str("    <event type=\"");
            out.push_str(event.event_type.as_str());
            out.push('"');
            if let Some(code) = event.code.as_deref().filter(|c| !c.is_empty()) {
                out.push_str(" code=\"");
                escape_into(&mut out, code);
                out.push('"');
            }
            if let Some(value) = event.value {
                out.push_str(&format!(" value=\"{value}\""));
            }
            if let Some(unit) = event.unit.as_deref().filter(|u| !u.is_empty()) {
                out.push_str(" unit=\"");
                escape_into(&mut out, unit);
                out.push('"');
            }
            match event.text.as_deref().filter(|t| !t.is_empty()) {
                Some(text) => {
                    out.push('>');
                    escape_into(&mut out, text);
                    out.push_str("</event>\n");
                }
                None => out.push_str("/>\n"),
            }
        }
        out.push_str("  </visit>\n");
    }
    out.push_str("</patient>\n");
    out
}

/// Parses a serialized record back into its structural view.
pub fn parse_xml_record(text: &str) -> Result<XmlRecord, TimelineError> {
    let mut lines = text.split('\n').peekable();
    let header = next_content_line(&mut lines)?;
    let patient_id = unescape(
        header
            .strip_prefix("<patient id=\"")
            .and_then(|r| r.strip_suffix("\">"))
            .ok_or_else(|| TimelineError::Xml(format!("bad patient element: `{header}`")))?,
    )?;

    let mut visits = Vec::new();
    loop {
        let line = next_content_line(&mut lines)?;
        if line == "</patient>" {
            break;
        }
        let date_str = line
            .strip_prefix("<visit date=\"")
            .and_then(|r| r.strip_suffix("\">"))
            .ok_or_else(|| TimelineError::Xml(format!("bad visit element: `{line}`")))?;
        let date = NaiveDate::parse_from_str(date_str, "%Y-%m-%d")
            .map_err(|e| TimelineError::Xml(format!("bad visit date `{date_str}`: {e}")))?;
        let mut events = Vec::new();
        loop {
            let line = next_event_line(&mut lines)?;
            if line == "</visit>" {
                break;
            }
            events.push(parse_event(&line)?);
        }
        visits.push(RecordVisit { date, events });
    }
    Ok(XmlRecord { patient_id, visits })
}

fn next_content_line<'a>(
    lines: &mut impl Iterator<Item = &'a str>,
) -> Result<String, TimelineError> {
    for line in lines {
        let trimmed = line.trim();
        if !trimmed.is_empty() {
            return Ok(trimmed.to_string());
        }
    }
    Err(TimelineError::Xml("unexpected end of record".into()))
}

/// Reads one event element; element text may span lines, so accumulate until
/// the closing tag when the element is neither self-closing nor closed inline.
fn next_event_line<'a>(
    lines: &mut impl Iterator<Item = &'a str>,
) -> Result<String, TimelineError> {
    let mut current = String::new();
    for line in lines {
        if current.is_empty() {
            let trimmed = line.trim_start();
            if trimmed.is_empty() {
                continue;
            }
            current.push_str(trimmed);
        } else {
            current.push('\n');
            current.push_str(line);
        }
        if current == "</visit>"
            || current.ends_with("/>")
            || current.ends_with("</event>")
        {
            return Ok(current);
        }
    }
    Err(TimelineError::Xml("unterminated event element".into()))
}

fn parse_event(line: &str) -> Result<RecordEvent, TimelineError> {
    let bad = |msg: &str| TimelineError::Xml(format!("{msg}: `{line}`"));
    let rest = line.strip_prefix("<event ").ok_or_else(|| bad("bad event element"))?;
    let (tag_end, text) = if let Some(stripped) = rest.strip_suffix("/>") {
        (stripped, None)
    } else {
        let close = rest.rfind("</event>").ok_or_else(|| bad("missing close tag"))?;
        let body = &rest[..close];
        let gt = body.find('>').ok_or_else(|| bad("missing `>`"))?;
        (&body[..gt], Some(unescape(&body[gt + 1..])?))
    };

    let mut event_type = None;
    let mut code = None;
    let mut value = None;
    let mut unit = None;
    let mut attrs = tag_end.trim();
    while !attrs.is_empty() {
        let eq = attrs.find("=\"").ok_or_else(|| bad("bad attribute"))?;
        let key = &attrs[..eq];
        let rest = &attrs[eq + 2..];
        let end = rest.find('"').ok_or_else(|| bad("unterminated attribute"))?;
        let raw = unescape(&rest[..end])?;
        match key {
            "type" => {
                event_type =
                    Some(EventType::parse(&raw).ok_or_else(|| bad("unknown event type"))?);
            }
            "code" => code = Some(raw),
            "value" => {
                value = Some(
                    raw.parse::<f64>()
                        .map_err(|e| bad(&format!("bad value attribute ({e})")))?,
                );
            }
            "unit" => unit = Some(raw),
            _ => return Err(bad("unknown attribute")),
        }
        attrs = rest[end + 1..].trim_start();
    }
    Ok(RecordEvent {
        event_type: event_type.ok_or_else(|| bad("event missing type"))?,
        code,
        value,
        unit,
        text,
    })
}

/// Scans serialized-record text for `<visit date="...">` dates, in order.
/// Used by offline providers that ground generated evidence in the prompt.
pub fn scan_visit_dates(text: &str) -> Vec<NaiveDate> {
    let mut dates = Vec::new();
    let mut rest = text;
    while let Some(pos) = rest.find("<visit date=\"") {
        rest = &rest[pos + "<visit date=\"".len()..];
        if let Some(end) = rest.find('"') {
            if let Ok(date) = NaiveDate::parse_from_str(&rest[..end], "%Y-%m-%d") {
                dates.push(date);
            }
            rest = &rest[end..];
        }
    }
    dates
}
