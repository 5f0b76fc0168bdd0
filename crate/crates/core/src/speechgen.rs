//! SSML compilation and the sentence timing manifest.
//!
//! Hedges are spoken at 65% rate, numbers at 70% rate after a 200 ms pause,
//! both with pitch lowered 5%. Timings come from an offline model (150 words
//! per minute scaled by each span's rate) until real engine marks are merged
//! in with [`merge_tts_marks`].

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::textgen::{AnnotatedText, SpanKind};

pub const HEDGE_RATE: &str = "65%";
pub const NUMBER_RATE: &str = "70%";
pub const PITCH: &str = "-5%";
pub const NUMBER_BREAK: &str = "200ms";

const ALLOWED_ELEMENTS: [&str; 4] = ["speak", "s", "prosody", "break"];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TimingError {
    #[error("malformed marks: {0}")]
    Format(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SsmlDocument {
    pub markup: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimingEntry {
    pub sentence_index: usize,
    pub start_s: f64,
    pub end_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingManifest {
    pub entries: Vec<TimingEntry>,
}

impl TimingManifest {
    pub fn duration_s(&self) -> f64 {
        self.entries.last().map_or(0.0, |e| e.end_s)
    }

    /// Lists violated ordering invariants for a manifest over `sentences`
    /// sentences.
    pub fn violations(&self, sentences: usize) -> Vec<String> {
        let mut out = Vec::new();
        if self.entries.len() != sentences {
            out.push(format!(
                "manifest has {} entries for {sentences} sentences",
                self.entries.len()
            ));
        }
        if let Some(first) = self.entries.first() {
            if first.start_s != 0.0 {
                out.push(format!(
                    "first entry starts at {} instead of 0",
                    first.start_s
                ));
            }
        }
        for (pos, e) in self.entries.iter().enumerate() {
            if e.sentence_index != pos {
                out.push(format!(
                    "entry {pos} has sentence_index {}",
                    e.sentence_index
                ));
            }
            if !(e.start_s.is_finite() && e.end_s.is_finite()) || e.end_s <= e.start_s {
                out.push(format!(
                    "entry {pos} ends at {} which is not after its start {}",
                    e.end_s, e.start_s
                ));
            }
        }
        for (pos, pair) in self.entries.windows(2).enumerate() {
            if pair[1].start_s <= pair[0].start_s {
                out.push(format!(
                    "entry {} does not start after entry {pos}",
                    pos + 1
                ));
            }
            if pair[1].start_s < pair[0].end_s {
                out.push(format!("entry {} overlaps entry {pos}", pos + 1));
            }
        }
        out
    }
}

/// One engine-reported sentence start.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TtsMark {
    pub sentence_index: usize,
    pub time_s: f64,
}

/// Constants of the offline speech-timing model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimingModel {
    pub seconds_per_word: f64,
    pub hedge_rate: f64,
    pub number_rate: f64,
    pub number_break_s: f64,
    pub sentence_pause_s: f64,
}

impl Default for TimingModel {
    fn default() -> Self {
        TimingModel {
            seconds_per_word: 0.4,
            hedge_rate: 0.65,
            number_rate: 0.70,
            number_break_s: 0.2,
            sentence_pause_s: 0.35,
        }
    }
}

fn escape(text: &str, out: &mut String) {
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            _ => out.push(c),
        }
    }
}

/// Compiles annotated text into SSML. Sentences are separated by a single
/// space so that the markup's character data equals
/// [`AnnotatedText::plain_text`].
pub fn to_ssml(text: &AnnotatedText) -> SsmlDocument {
    let mut markup = String::from("<speak>");
    for (i, sentence) in text.sentences.iter().enumerate() {
        if i > 0 {
            markup.push(' ');
        }
        markup.push_str("<s>");
        for span in &sentence.spans {
            match span.kind {
                SpanKind::Plain => escape(&span.text, &mut markup),
                SpanKind::Hedge => {
                    markup.push_str(&format!(
                        "<prosody rate=\"{HEDGE_RATE}\" pitch=\"{PITCH}\">"
                    ));
                    escape(&span.text, &mut markup);
                    markup.push_str("</prosody>");
                }
                SpanKind::Number => {
                    markup.push_str(&format!(
                        "<break time=\"{NUMBER_BREAK}\"/><prosody rate=\"{NUMBER_RATE}\" pitch=\"{PITCH}\">"
                    ));
                    escape(&span.text, &mut markup);
                    markup.push_str("</prosody>");
                }
            }
        }
        markup.push_str("</s>");
    }
    markup.push_str("</speak>");
    SsmlDocument { markup }
}

/// Counts of the prosody treatments found in a document, plus its text
/// content with all markup removed.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SsmlCensus {
    pub sentences: usize,
    pub hedge_prosody: usize,
    pub number_prosody: usize,
    pub breaks_200ms: usize,
    pub stripped_text: String,
    pub problems: Vec<String>,
}

pub fn census(markup: &str) -> Result<SsmlCensus, String> {
    let doc = roxmltree::Document::parse(markup)
        .map_err(|e| format!("SSML is not well-formed XML: {e}"))?;
    let root = doc.root_element();
    let mut c = SsmlCensus::default();
    if root.tag_name().name() != "speak" {
        c.problems
            .push(format!("root element is <{}>", root.tag_name().name()));
    }
    for node in root.descendants() {
        if node.is_text() {
            c.stripped_text.push_str(node.text().unwrap_or_default());
            continue;
        }
        if !node.is_element() {
            continue;
        }
        let name = node.tag_name().name();
        if !ALLOWED_ELEMENTS.contains(&name) {
            c.problems.push(format!("unexpected element <{name}>"));
        }
        match name {
            "s" => c.sentences += 1,
            "break" => {
                if node.attribute("time") == Some(NUMBER_BREAK) {
                    c.breaks_200ms += 1;
                } else {
                    c.problems
                        .push(format!("break with time {:?}", node.attribute("time")));
                }
            }
            "prosody" => {
                if node.attribute("pitch") != Some(PITCH) {
                    c.problems.push(format!(
                        "prosody pitch {:?} instead of {PITCH}",
                        node.attribute("pitch")
                    ));
                }
                match node.attribute("rate") {
                    Some(HEDGE_RATE) => c.hedge_prosody += 1,
                    Some(NUMBER_RATE) => {
                        c.number_prosody += 1;
                        let preceded = node
                            .prev_sibling()
                            .is_some_and(|p| p.is_element() && p.tag_name().name() == "break");
                        if !preceded {
                            c.problems
                                .push("number prosody is not preceded by a break".into());
                        }
                    }
                    other => c.problems.push(format!("prosody rate {other:?}")),
                }
            }
            _ => {}
        }
    }
    Ok(c)
}

/// Checks an SSML document against the text it was compiled from.
pub fn ssml_violations(markup: &str, text: &AnnotatedText) -> Vec<String> {
    let c = match census(markup) {
        Ok(c) => c,
        Err(e) => return vec![e],
    };
    let mut out = c.problems.clone();
    let hedges = text.count(SpanKind::Hedge);
    let numbers = text.count(SpanKind::Number);
    if c.hedge_prosody != hedges {
        out.push(format!(
            "{} rate=\"{HEDGE_RATE}\" elements for {hedges} hedge spans",
            c.hedge_prosody
        ));
    }
    if c.number_prosody != numbers {
        out.push(format!(
            "{} rate=\"{NUMBER_RATE}\" elements for {numbers} number spans",
            c.number_prosody
        ));
    }
    if c.breaks_200ms != numbers {
        out.push(format!(
            "{} breaks for {numbers} number spans",
            c.breaks_200ms
        ));
    }
    if c.sentences != text.sentences.len() {
        out.push(format!(
            "{} <s> elements for {} sentences",
            c.sentences,
            text.sentences.len()
        ));
    }
    if c.stripped_text != text.plain_text() {
        out.push("SSML text content differs from the annotated text".into());
    }
    out
}

/// Whitespace-delimited tokens that contain a letter or digit. Bare
/// punctuation is not spoken as a word.
pub fn word_count(text: &str) -> usize {
    text.split_whitespace()
        .filter(|w| w.chars().any(char::is_alphanumeric))
        .count()
}

pub fn estimate_timings(text: &AnnotatedText) -> TimingManifest {
    estimate_timings_with(text, &TimingModel::default())
}

pub fn estimate_timings_with(text: &AnnotatedText, model: &TimingModel) -> TimingManifest {
    let mut entries = Vec::with_capacity(text.sentences.len());
    let mut start = 0.0;
    for sentence in &text.sentences {
        let duration: f64 = sentence
            .spans
            .iter()
            .map(|span| {
                let words = word_count(&span.text) as f64;
                match span.kind {
                    SpanKind::Plain => words * model.seconds_per_word,
                    SpanKind::Hedge => words * model.seconds_per_word / model.hedge_rate,
                    SpanKind::Number => {
                        model.number_break_s + words * model.seconds_per_word / model.number_rate
                    }
                }
            })
            .sum();
        let end = start + duration;
        entries.push(TimingEntry {
            sentence_index: sentence.index,
            start_s: start,
            end_s: end,
        });
        start = end + model.sentence_pause_s;
    }
    TimingManifest { entries }
}

/// Replaces estimated sentence starts with engine marks. Each sentence ends
/// where the next one starts; the last keeps its estimated duration.
pub fn merge_tts_marks(
    manifest: &TimingManifest,
    marks: &[TtsMark],
) -> Result<TimingManifest, TimingError> {
    if marks.is_empty() {
        return Ok(manifest.clone());
    }
    if marks.len() != manifest.entries.len() {
        return Err(TimingError::Format(format!(
            "{} marks for {} sentences",
            marks.len(),
            manifest.entries.len()
        )));
    }
    for (pos, (mark, entry)) in marks.iter().zip(&manifest.entries).enumerate() {
        if mark.sentence_index != entry.sentence_index {
            return Err(TimingError::Format(format!(
                "mark {pos} names sentence {} but sentence {} was expected (unsorted or duplicate)",
                mark.sentence_index, entry.sentence_index
            )));
        }
        if !mark.time_s.is_finite() || mark.time_s < 0.0 {
            return Err(TimingError::Format(format!(
                "mark {pos} has invalid time {}",
                mark.time_s
            )));
        }
        if pos > 0 && mark.time_s <= marks[pos - 1].time_s {
            return Err(TimingError::Format(format!(
                "mark {pos} at {}s does not follow {}s",
                mark.time_s,
                marks[pos - 1].time_s
            )));
        }
    }
    let entries = manifest
        .entries
        .iter()
        .enumerate()
        .map(|(pos, entry)| {
            let start_s = marks[pos].time_s;
            let end_s = match marks.get(pos + 1) {
                Some(next) => next.time_s,
                None => start_s + (entry.end_s - entry.start_s),
            };
            TimingEntry {
                sentence_index: entry.sentence_index,
                start_s,
                end_s,
            }
        })
        .collect();
    Ok(TimingManifest { entries })
}
