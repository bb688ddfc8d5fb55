//! Events, observation periods and the two wire codecs.
//!
//! The compact line codec writes one event per line as
//! `seq_no,case_id,activity`, percent-encoding `%`, `,`, CR and LF inside the
//! identifiers. The XES codec handles the single-event `<log>` fragments used
//! by stream sources: one trace carrying `concept:name`, holding exactly one
//! event with `concept:name` and (optionally) `time:timestamp`.

use std::collections::VecDeque;
use std::fmt::Write as _;

use percent_encoding::{percent_decode_str, utf8_percent_encode, AsciiSet};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const ID_ESCAPES: &AsciiSet = &AsciiSet::EMPTY
    .add(b'%')
    .add(b',')
    .add(b'\n')
    .add(b'\r');

/// One observation on the stream: activity `activity` executed for case
/// `case_id`, the `seq_no`-th event seen by the consumer.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Event {
    pub seq_no: u64,
    pub case_id: String,
    pub activity: String,
}

impl Event {
    pub fn new(seq_no: u64, case_id: impl Into<String>, activity: impl Into<String>) -> Self {
        Event {
            seq_no,
            case_id: case_id.into(),
            activity: activity.into(),
        }
    }
}

/// Encodes an event in the line codec, without the trailing newline.
pub fn encode_line(event: &Event) -> String {
    format!(
        "{},{},{}",
        event.seq_no,
        utf8_percent_encode(&event.case_id, ID_ESCAPES),
        utf8_percent_encode(&event.activity, ID_ESCAPES)
    )
}

/// Decodes one line of the line codec. A trailing `\n` or `\r\n` is tolerated.
pub fn decode_line(line: &str) -> Result<Event> {
    let line = line.trim_end_matches(['\n', '\r']);
    let mut parts = line.split(',');
    let (Some(seq), Some(case), Some(activity), None) =
        (parts.next(), parts.next(), parts.next(), parts.next())
    else {
        return Err(Error::decode(
            "line",
            format!("expected 3 comma-separated fields in {line:?}"),
        ));
    };
    let seq_no = seq
        .trim()
        .parse::<u64>()
        .map_err(|e| Error::decode("seq_no", format!("{seq:?}: {e}")))?;
    let case_id = decode_id("case_id", case)?;
    let activity = decode_id("activity", activity)?;
    Ok(Event {
        seq_no,
        case_id,
        activity,
    })
}

fn decode_id(field: &'static str, raw: &str) -> Result<String> {
    let text = percent_decode_str(raw)
        .decode_utf8()
        .map_err(|e| Error::decode(field, e.to_string()))?;
    if text.is_empty() {
        return Err(Error::decode(field, "empty identifier"));
    }
    Ok(text.into_owned())
}

/// Renders an event as a single-event XES fragment. The timestamp is derived
/// from `seq_no` (one second per event) since only the order matters.
pub fn encode_xes_fragment(event: &Event) -> String {
    let ts = chrono::DateTime::from_timestamp(event.seq_no as i64, 0)
        .unwrap_or_default()
        .format("%Y-%m-%dT%H:%M:%S%.3f%:z");
    let mut out = String::with_capacity(400);
    out.push_str(
        "<log openxes.version=\"1.0RC7\" xes.features=\"nested-attributes\" \
         xes.version=\"1.0\" xmlns=\"http://www.xes-standard.org/\">\n",
    );
    out.push_str("\t<trace>\n");
    let _ = writeln!(
        out,
        "\t\t<string key=\"concept:name\" value=\"{}\" />",
        escape_xml(&event.case_id)
    );
    out.push_str("\t\t<event>\n");
    let _ = writeln!(out, "\t\t\t<date key=\"time:timestamp\" value=\"{ts}\" />");
    let _ = writeln!(
        out,
        "\t\t\t<string key=\"concept:name\" value=\"{}\" />",
        escape_xml(&event.activity)
    );
    out.push_str("\t\t\t<string key=\"lifecycle:transition\" value=\"Task_Execution\" />\n");
    out.push_str("\t\t</event>\n");
    out.push_str("\t</trace>\n");
    out.push_str("</log>\n");
    out
}

fn escape_xml(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\n' => out.push_str("&#10;"),
            '\r' => out.push_str("&#13;"),
            c => out.push(c),
        }
    }
    out
}

/// Decodes a single-event XES fragment. The caller assigns `seq_no` by
/// arrival order; the fragment's timestamp is validated but not kept.
pub fn decode_xes_fragment(text: &str, seq_no: u64) -> Result<Event> {
    let doc = roxmltree::Document::parse(text).map_err(|e| Error::decode("xes", e.to_string()))?;
    let root = doc.root_element();
    if root.tag_name().name() != "log" {
        return Err(Error::decode(
            "xes",
            format!("root element is <{}>, expected <log>", root.tag_name().name()),
        ));
    }
    let mut traces = root.children().filter(|n| n.has_tag_name_local("trace"));
    let trace = traces
        .next()
        .ok_or_else(|| Error::decode("trace", "fragment holds no trace"))?;
    if traces.next().is_some() {
        return Err(Error::decode("trace", "fragment holds more than one trace"));
    }
    let case_id = string_attribute(trace, "concept:name")
        .ok_or_else(|| Error::decode("case_id", "trace has no concept:name"))?;

    let mut events = trace.children().filter(|n| n.has_tag_name_local("event"));
    let event = events
        .next()
        .ok_or_else(|| Error::decode("event", "empty trace"))?;
    if events.next().is_some() {
        return Err(Error::decode("event", "multi-event fragment"));
    }
    let activity = string_attribute(event, "concept:name")
        .ok_or_else(|| Error::decode("activity", "event has no concept:name"))?;
    if let Some(ts) = keyed_child(event, "date", "time:timestamp") {
        chrono::DateTime::parse_from_rfc3339(ts)
            .map_err(|e| Error::decode("time:timestamp", format!("{ts:?}: {e}")))?;
    }
    if case_id.is_empty() {
        return Err(Error::decode("case_id", "empty identifier"));
    }
    if activity.is_empty() {
        return Err(Error::decode("activity", "empty identifier"));
    }
    Ok(Event {
        seq_no,
        case_id: case_id.to_owned(),
        activity: activity.to_owned(),
    })
}

trait LocalName {
    fn has_tag_name_local(&self, name: &str) -> bool;
}

impl LocalName for roxmltree::Node<'_, '_> {
    fn has_tag_name_local(&self, name: &str) -> bool {
        self.is_element() && self.tag_name().name() == name
    }
}

fn keyed_child<'a>(node: roxmltree::Node<'a, '_>, tag: &str, key: &str) -> Option<&'a str> {
    node.children()
        .find(|n| n.has_tag_name_local(tag) && n.attribute("key") == Some(key))
        .and_then(|n| n.attribute("value"))
}

fn string_attribute<'a>(node: roxmltree::Node<'a, '_>, key: &str) -> Option<&'a str> {
    keyed_child(node, "string", key)
}

/// What to do with a full buffer before inserting another event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MemoryPolicy {
    /// Drop every retained event (periodic resets).
    Reset,
    /// Drop only the oldest event (sliding window).
    Shift,
}

/// A bounded, ordered slice of the stream that can be mined as a classical log.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationPeriod {
    events: VecDeque<Event>,
    capacity: usize,
}

impl ObservationPeriod {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::InvalidConfig(
                "observation period capacity must be at least 1".into(),
            ));
        }
        Ok(ObservationPeriod {
            events: VecDeque::with_capacity(capacity.min(1 << 16)),
            capacity,
        })
    }

    /// An observation period holding exactly `events`.
    pub fn from_events(events: Vec<Event>) -> Self {
        let capacity = events.len().max(1);
        ObservationPeriod {
            events: events.into(),
            capacity,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.events.len() >= self.capacity
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = &Event> + '_ {
        self.events.iter()
    }

    pub fn clear(&mut self) {
        self.events.clear();
    }

    /// Inserts `event`, first applying `policy` if the buffer is full.
    pub fn push_bounded(&mut self, event: Event, policy: MemoryPolicy) {
        if self.is_full() {
            match policy {
                MemoryPolicy::Reset => self.events.clear(),
                MemoryPolicy::Shift => {
                    while self.events.len() >= self.capacity {
                        self.events.pop_front();
                    }
                }
            }
        }
        self.events.push_back(event);
    }

    /// First and last `seq_no` of `case_id` within this period.
    pub fn case_time_scope(&self, case_id: &str) -> Result<(u64, u64)> {
        self.events
            .iter()
            .filter(|e| e.case_id == case_id)
            .fold(None, |acc: Option<(u64, u64)>, e| match acc {
                None => Some((e.seq_no, e.seq_no)),
                Some((lo, hi)) => Some((lo.min(e.seq_no), hi.max(e.seq_no))),
            })
            .ok_or_else(|| Error::CaseNotFound(case_id.to_owned()))
    }
}

impl<'a> IntoIterator for &'a ObservationPeriod {
    type Item = &'a Event;
    type IntoIter = std::collections::vec_deque::Iter<'a, Event>;

    fn into_iter(self) -> Self::IntoIter {
        self.events.iter()
    }
}
