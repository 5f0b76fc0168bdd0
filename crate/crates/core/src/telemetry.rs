//! UI interaction events: schema checks, an append-only NDJSON log and the
//! per-mode aggregates used to study how people used each interface.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TelemetryError {
    #[error("invalid event field `{field}`: {reason}")]
    Invalid { field: &'static str, reason: String },
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterfaceMode {
    Passive,
    Active,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Play,
    Replay,
    VisToggle,
    HoverStart,
    HoverEnd,
    Decision,
    Confidence,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    Hedge,
    Number,
    Density,
    Dotplot,
    None,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TelemetryEvent {
    pub session_id: String,
    pub interface_mode: InterfaceMode,
    pub kind: EventKind,
    pub target: Target,
    #[serde(default)]
    pub value: String,
    pub at_ms: i64,
}

impl TelemetryEvent {
    /// Field-level checks beyond what deserialization enforces.
    pub fn check(&self) -> Result<(), TelemetryError> {
        let invalid = |field, reason: String| Err(TelemetryError::Invalid { field, reason });
        if self.session_id.trim().is_empty() {
            return invalid("session_id", "must not be empty".into());
        }
        if self.at_ms < 0 {
            return invalid("at_ms", format!("{} is negative", self.at_ms));
        }
        match self.kind {
            EventKind::Decision if !matches!(self.value.as_str(), "salt" | "no_salt") => invalid(
                "value",
                format!("decision {:?} is not salt or no_salt", self.value),
            ),
            EventKind::Confidence if !self.value.parse::<u8>().is_ok_and(|c| c <= 100) => invalid(
                "value",
                format!("confidence {:?} is not an integer 0-100", self.value),
            ),
            EventKind::HoverStart | EventKind::HoverEnd if self.target == Target::None => {
                invalid("target", "hover events need a target".into())
            }
            _ => Ok(()),
        }
    }
}

const FIELDS: [&str; 6] = [
    "session_id",
    "interface_mode",
    "kind",
    "target",
    "value",
    "at_ms",
];

/// Parses and checks one JSON event, naming the first offending field.
pub fn parse_event(json: &str) -> Result<TelemetryEvent, TelemetryError> {
    let invalid = |field, reason: String| TelemetryError::Invalid { field, reason };
    let value: serde_json::Value =
        serde_json::from_str(json).map_err(|e| invalid("event", e.to_string()))?;
    let object = value
        .as_object()
        .ok_or_else(|| invalid("event", "expected a JSON object".into()))?;
    if let Some(extra) = object.keys().find(|k| !FIELDS.contains(&k.as_str())) {
        return Err(invalid("event", format!("unknown field `{extra}`")));
    }
    // Deserialize field by field so that errors carry the field name.
    fn field<T: serde::de::DeserializeOwned>(
        object: &serde_json::Map<String, serde_json::Value>,
        name: &'static str,
    ) -> Result<T, TelemetryError> {
        let raw = object
            .get(name)
            .cloned()
            .ok_or_else(|| TelemetryError::Invalid {
                field: name,
                reason: "missing".into(),
            })?;
        serde_json::from_value(raw).map_err(|e| TelemetryError::Invalid {
            field: name,
            reason: e.to_string(),
        })
    }
    let event = TelemetryEvent {
        session_id: field(object, "session_id")?,
        interface_mode: field(object, "interface_mode")?,
        kind: field(object, "kind")?,
        target: field(object, "target")?,
        value: if object.contains_key("value") {
            field(object, "value")?
        } else {
            String::new()
        },
        at_ms: field(object, "at_ms")?,
    };
    event.check()?;
    Ok(event)
}

/// Append-only event sink. Callers serialize access (one writer).
pub struct TelemetryLog<W: Write> {
    sink: W,
    lines: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Ack {
    pub sequence: usize,
}

impl<W: Write> TelemetryLog<W> {
    pub fn new(sink: W) -> Self {
        TelemetryLog { sink, lines: 0 }
    }

    /// Starts the sequence after `existing` lines already in the log.
    pub fn resume(sink: W, existing: usize) -> Self {
        TelemetryLog {
            sink,
            lines: existing,
        }
    }

    pub fn record_event(&mut self, event: &TelemetryEvent) -> Result<Ack, TelemetryError> {
        event.check()?;
        let mut line = serde_json::to_string(event).expect("event serializes");
        line.push('\n');
        self.sink.write_all(line.as_bytes())?;
        self.sink.flush()?;
        self.lines += 1;
        Ok(Ack {
            sequence: self.lines,
        })
    }

    pub fn into_inner(self) -> W {
        self.sink
    }
}

/// Reads an NDJSON log, skipping blank lines.
pub fn read_log<R: BufRead>(reader: R) -> Result<Vec<TelemetryEvent>, TelemetryError> {
    let mut events = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let event = parse_event(&line).map_err(|e| TelemetryError::Parse {
            line: i + 1,
            reason: e.to_string(),
        })?;
        events.push(event);
    }
    Ok(events)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DecisionCounts {
    pub salt: usize,
    pub no_salt: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ModeSummary {
    pub sessions: usize,
    /// Mean over sessions with at least one replay.
    pub replay_count_mean: f64,
    /// Mean over sessions with at least one toggle.
    pub vis_toggle_count_mean: f64,
    /// Mean matched hover duration per target.
    pub hover_duration_mean_s: BTreeMap<Target, f64>,
    pub decision_counts: DecisionCounts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TelemetrySummary {
    pub modes: BTreeMap<InterfaceMode, ModeSummary>,
    pub orphan_hover_ends: usize,
}

fn mean_of_nonzero(counts: &HashMap<&str, usize>) -> f64 {
    let active: Vec<usize> = counts.values().copied().filter(|&c| c > 0).collect();
    if active.is_empty() {
        0.0
    } else {
        active.iter().sum::<usize>() as f64 / active.len() as f64
    }
}

pub fn summarize_telemetry(events: &[TelemetryEvent]) -> TelemetrySummary {
    #[derive(Default)]
    struct Acc<'a> {
        sessions: HashSet<&'a str>,
        replays: HashMap<&'a str, usize>,
        toggles: HashMap<&'a str, usize>,
        open_hovers: HashMap<(&'a str, Target), Vec<i64>>,
        durations: BTreeMap<Target, (f64, usize)>,
        decisions: DecisionCounts,
    }

    let mut acc: BTreeMap<InterfaceMode, Acc> = BTreeMap::new();
    acc.insert(InterfaceMode::Passive, Acc::default());
    acc.insert(InterfaceMode::Active, Acc::default());
    let mut orphan_hover_ends = 0;

    for e in events {
        let a = acc.get_mut(&e.interface_mode).expect("both modes present");
        let session = e.session_id.as_str();
        a.sessions.insert(session);
        match e.kind {
            EventKind::Replay => *a.replays.entry(session).or_default() += 1,
            EventKind::VisToggle => *a.toggles.entry(session).or_default() += 1,
            EventKind::HoverStart => a
                .open_hovers
                .entry((session, e.target))
                .or_default()
                .push(e.at_ms),
            EventKind::HoverEnd => {
                let start = a
                    .open_hovers
                    .get_mut(&(session, e.target))
                    .and_then(|starts| starts.pop())
                    .filter(|start| *start <= e.at_ms);
                match start {
                    Some(start) => {
                        let slot = a.durations.entry(e.target).or_default();
                        slot.0 += (e.at_ms - start) as f64 / 1000.0;
                        slot.1 += 1;
                    }
                    None => orphan_hover_ends += 1,
                }
            }
            EventKind::Decision => match e.value.as_str() {
                "salt" => a.decisions.salt += 1,
                _ => a.decisions.no_salt += 1,
            },
            EventKind::Play | EventKind::Confidence => {}
        }
    }

    let modes = acc
        .into_iter()
        .map(|(mode, a)| {
            let summary = ModeSummary {
                sessions: a.sessions.len(),
                replay_count_mean: mean_of_nonzero(&a.replays),
                vis_toggle_count_mean: mean_of_nonzero(&a.toggles),
                hover_duration_mean_s: a
                    .durations
                    .into_iter()
                    .map(|(t, (sum, n))| (t, sum / n as f64))
                    .collect(),
                decision_counts: a.decisions,
            };
            (mode, summary)
        })
        .collect();
    TelemetrySummary {
        modes,
        orphan_hover_ends,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(
        session: &str,
        kind: EventKind,
        target: Target,
        value: &str,
        at_ms: i64,
    ) -> TelemetryEvent {
        TelemetryEvent {
            session_id: session.into(),
            interface_mode: InterfaceMode::Active,
            kind,
            target,
            value: value.into(),
            at_ms,
        }
    }

    #[test]
    fn decision_value_is_checked() {
        let bad = ev("s1", EventKind::Decision, Target::None, "maybe", 1);
        match bad.check() {
            Err(TelemetryError::Invalid { field, reason }) => {
                assert_eq!(field, "value");
                assert!(reason.contains("maybe"));
            }
            other => panic!("{other:?}"),
        }
        assert!(ev("s1", EventKind::Decision, Target::None, "salt", 1)
            .check()
            .is_ok());
        assert!(ev("s1", EventKind::Confidence, Target::None, "101", 1)
            .check()
            .is_err());
        assert!(ev("s1", EventKind::Confidence, Target::None, "80", 1)
            .check()
            .is_ok());
        assert!(ev("", EventKind::Play, Target::None, "", 1)
            .check()
            .is_err());
    }

    #[test]
    fn parse_names_bad_field() {
        let err = parse_event(r#"{"session_id":"a","interface_mode":"sideways","kind":"play","target":"none","at_ms":1}"#)
            .unwrap_err();
        assert!(
            matches!(
                err,
                TelemetryError::Invalid {
                    field: "interface_mode",
                    ..
                }
            ),
            "{err}"
        );
        let err = parse_event(
            r#"{"session_id":"a","interface_mode":"active","kind":"play","target":"none"}"#,
        )
        .unwrap_err();
        assert!(
            matches!(err, TelemetryError::Invalid { field: "at_ms", .. }),
            "{err}"
        );
    }

    #[test]
    fn log_appends_in_arrival_order() {
        let mut log = TelemetryLog::new(Vec::new());
        let a = log
            .record_event(&ev("s1", EventKind::Play, Target::None, "", 10))
            .unwrap();
        let b = log
            .record_event(&ev("s1", EventKind::Decision, Target::None, "no_salt", 20))
            .unwrap();
        assert_eq!((a.sequence, b.sequence), (1, 2));
        assert!(log
            .record_event(&ev("s1", EventKind::Decision, Target::None, "maybe", 30))
            .is_err());
        let bytes = log.into_inner();
        let events = read_log(bytes.as_slice()).unwrap();
        assert_eq!(events.len(), 2);
        assert_eq!(events[0].kind, EventKind::Play);
        assert_eq!(events[1].value, "no_salt");
    }

    #[test]
    fn empty_log_summarizes_to_zero() {
        let s = summarize_telemetry(&[]);
        assert_eq!(s.modes.len(), 2);
        for m in s.modes.values() {
            assert_eq!(*m, ModeSummary::default());
        }
        assert_eq!(s.orphan_hover_ends, 0);
    }

    #[test]
    fn toggle_mean_over_sessions() {
        let mut events = Vec::new();
        for i in 0..12 {
            events.push(ev("a", EventKind::VisToggle, Target::None, "", i));
        }
        for i in 0..11 {
            events.push(ev("b", EventKind::VisToggle, Target::None, "", i));
        }
        events.push(ev("c", EventKind::Play, Target::None, "", 0));
        let s = summarize_telemetry(&events);
        assert_eq!(s.modes[&InterfaceMode::Active].vis_toggle_count_mean, 11.5);
        assert_eq!(s.modes[&InterfaceMode::Active].sessions, 3);
    }

    #[test]
    fn hover_pairs_and_orphans() {
        let events = vec![
            ev("a", EventKind::HoverEnd, Target::Hedge, "", 5),
            ev("a", EventKind::HoverStart, Target::Density, "", 1_000),
            ev("a", EventKind::HoverEnd, Target::Density, "", 15_500),
        ];
        let s = summarize_telemetry(&events);
        assert_eq!(
            s.modes[&InterfaceMode::Active].hover_duration_mean_s[&Target::Density],
            14.5
        );
        assert_eq!(s.orphan_hover_ends, 1);
    }

    #[test]
    fn summary_is_idempotent_over_replayed_log() {
        let events = vec![
            ev("a", EventKind::Replay, Target::None, "", 1),
            ev("a", EventKind::Decision, Target::None, "salt", 2),
        ];
        let mut log = TelemetryLog::new(Vec::new());
        for e in &events {
            log.record_event(e).unwrap();
        }
        let replayed = read_log(log.into_inner().as_slice()).unwrap();
        assert_eq!(summarize_telemetry(&replayed), summarize_telemetry(&events));
        assert_eq!(
            summarize_telemetry(&replayed),
            summarize_telemetry(&replayed)
        );
    }
}
