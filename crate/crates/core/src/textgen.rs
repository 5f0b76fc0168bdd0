//! Hedged forecast sentences built from [`SummaryStats`].
//!
//! Sentence wording lives in a TOML template file (see
//! `templates/default.toml`) so it can be changed without a rebuild.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::stats::{SkewMagnitude, SkewThresholds, SummaryStats};

pub const DEFAULT_TEMPLATES: &str = include_str!("../templates/default.toml");

#[derive(Debug, Error)]
pub enum TemplateError {
    #[error("cannot read template file {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("invalid template file: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("sentence {index}: {reason}")]
    Sentence { index: usize, reason: String },
    #[error("template file defines no sentences")]
    NoSentences,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpanKind {
    Plain,
    Hedge,
    Number,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Span {
    pub kind: SpanKind,
    pub text: String,
    /// Present on number spans only (°F).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
}

impl Span {
    pub fn plain(text: impl Into<String>) -> Self {
        Span {
            kind: SpanKind::Plain,
            text: text.into(),
            value: None,
        }
    }

    pub fn hedge(text: impl Into<String>) -> Self {
        Span {
            kind: SpanKind::Hedge,
            text: text.into(),
            value: None,
        }
    }

    pub fn number(value: f64) -> Self {
        Span {
            kind: SpanKind::Number,
            text: format_temperature(value),
            value: Some(value),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sentence {
    pub index: usize,
    pub spans: Vec<Span>,
}

impl Sentence {
    pub fn text(&self) -> String {
        self.spans.iter().map(|s| s.text.as_str()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatedText {
    pub sentences: Vec<Sentence>,
}

impl AnnotatedText {
    /// Sentences joined by a single space.
    pub fn plain_text(&self) -> String {
        self.sentences
            .iter()
            .map(Sentence::text)
            .collect::<Vec<_>>()
            .join(" ")
    }

    pub fn spans(&self) -> impl Iterator<Item = &Span> {
        self.sentences.iter().flat_map(|s| s.spans.iter())
    }

    pub fn count(&self, kind: SpanKind) -> usize {
        self.spans().filter(|s| s.kind == kind).count()
    }

    /// Lists violated invariants; empty when the text is well formed.
    pub fn violations(&self, lexicon: &[String]) -> Vec<String> {
        let mut out = Vec::new();
        for (pos, sentence) in self.sentences.iter().enumerate() {
            if sentence.index != pos {
                out.push(format!(
                    "sentence at position {pos} has index {}",
                    sentence.index
                ));
            }
            if !sentence.spans.iter().any(|s| s.kind == SpanKind::Hedge) {
                out.push(format!("sentence {} has no hedge", sentence.index));
            }
            for span in &sentence.spans {
                match span.kind {
                    SpanKind::Hedge if !lexicon.iter().any(|h| h == &span.text) => {
                        out.push(format!(
                            "sentence {} hedge {:?} is not in the lexicon",
                            sentence.index, span.text
                        ));
                    }
                    SpanKind::Number if span.value.is_none() => {
                        out.push(format!(
                            "sentence {} number span {:?} has no value",
                            sentence.index, span.text
                        ));
                    }
                    SpanKind::Plain | SpanKind::Hedge if span.value.is_some() => {
                        out.push(format!(
                            "sentence {} non-number span {:?} carries a value",
                            sentence.index, span.text
                        ));
                    }
                    _ => {}
                }
            }
        }
        out
    }
}

/// Rounds half up to a whole degree: `31.5` -> `"32°F"`.
pub fn format_temperature(v: f64) -> String {
    let rounded = (v + 0.5).floor() as i64;
    format!("{rounded}°F")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Stat {
    Mean,
    Q25,
    Q75,
    Min,
    Max,
}

impl Stat {
    fn value(self, stats: &SummaryStats) -> f64 {
        match self {
            Stat::Mean => stats.mean,
            Stat::Q25 => stats.q25,
            Stat::Q75 => stats.q75,
            Stat::Min => stats.min,
            Stat::Max => stats.max,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Piece {
    Plain(String),
    Hedge(String),
    HedgedMagnitude,
    Number(Stat),
    Magnitude,
    Direction,
}

#[derive(Debug, Clone, Deserialize)]
struct RawConfig {
    hedges: Vec<String>,
    #[serde(default)]
    skew: SkewThresholds,
    sentence: Vec<RawSentence>,
}

#[derive(Debug, Clone, Deserialize)]
struct RawSentence {
    template: String,
}

#[derive(Debug, Clone)]
struct CompiledSentence {
    pieces: Vec<Piece>,
    uses_skew: bool,
}

/// A parsed and checked template file.
#[derive(Debug, Clone)]
pub struct TemplateSet {
    hedges: Vec<String>,
    skew: SkewThresholds,
    sentences: Vec<CompiledSentence>,
}

impl Default for TemplateSet {
    fn default() -> Self {
        TemplateSet::from_toml(DEFAULT_TEMPLATES).expect("bundled templates are valid")
    }
}

impl TemplateSet {
    pub fn from_toml(text: &str) -> Result<Self, TemplateError> {
        let raw: RawConfig = toml::from_str(text)?;
        if raw.sentence.is_empty() {
            return Err(TemplateError::NoSentences);
        }
        let sentences = raw
            .sentence
            .iter()
            .enumerate()
            .map(|(index, s)| {
                compile(&s.template, &raw.hedges)
                    .map_err(|reason| TemplateError::Sentence { index, reason })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(TemplateSet {
            hedges: raw.hedges,
            skew: raw.skew,
            sentences,
        })
    }

    pub fn load(path: &Path) -> Result<Self, TemplateError> {
        let text = std::fs::read_to_string(path).map_err(|source| TemplateError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn skew_thresholds(&self) -> &SkewThresholds {
        &self.skew
    }

    /// Configured hedges plus the skew magnitude words, which are rendered
    /// as hedges.
    pub fn lexicon(&self) -> Vec<String> {
        let mut words = self.hedges.clone();
        for m in SkewMagnitude::ALL {
            if !words.iter().any(|w| w == m.as_str()) {
                words.push(m.as_str().to_string());
            }
        }
        words
    }
}

fn placeholder(name: &str) -> Result<Piece, String> {
    Ok(match name {
        "mean" => Piece::Number(Stat::Mean),
        "q25" => Piece::Number(Stat::Q25),
        "q75" => Piece::Number(Stat::Q75),
        "min" => Piece::Number(Stat::Min),
        "max" => Piece::Number(Stat::Max),
        "skew_magnitude" => Piece::Magnitude,
        "skew_direction" => Piece::Direction,
        other => return Err(format!("unknown placeholder {{{other}}}")),
    })
}

fn compile(template: &str, hedges: &[String]) -> Result<CompiledSentence, String> {
    let mut pieces = Vec::new();
    let mut plain = String::new();
    let mut rest = template;
    while let Some(pos) = rest.find(['[', '{', ']', '}']) {
        plain.push_str(&rest[..pos]);
        let open = rest.as_bytes()[pos];
        let close = match open {
            b'[' => ']',
            b'{' => '}',
            _ => return Err(format!("unbalanced {:?}", open as char)),
        };
        let body_start = pos + 1;
        let len = rest[body_start..]
            .find(close)
            .ok_or_else(|| format!("unclosed {:?}", open as char))?;
        let body = &rest[body_start..body_start + len];
        if !plain.is_empty() {
            pieces.push(Piece::Plain(std::mem::take(&mut plain)));
        }
        if open == b'{' {
            pieces.push(placeholder(body)?);
        } else if body == "{skew_magnitude}" {
            pieces.push(Piece::HedgedMagnitude);
        } else if body.contains(['{', '}', '[']) {
            return Err(format!("unsupported hedge body [{body}]"));
        } else if hedges.iter().any(|h| h == body) {
            pieces.push(Piece::Hedge(body.to_string()));
        } else {
            return Err(format!("hedge {body:?} is not in the hedge list"));
        }
        rest = &rest[body_start + len + 1..];
    }
    plain.push_str(rest);
    if !plain.is_empty() {
        pieces.push(Piece::Plain(plain));
    }
    if !pieces
        .iter()
        .any(|p| matches!(p, Piece::Hedge(_) | Piece::HedgedMagnitude))
    {
        return Err("every sentence needs at least one hedge".into());
    }
    let uses_skew = pieces.iter().any(|p| {
        matches!(
            p,
            Piece::Magnitude | Piece::HedgedMagnitude | Piece::Direction
        )
    });
    Ok(CompiledSentence { pieces, uses_skew })
}

/// Renders the configured sentences. Skew sentences are dropped when
/// `stats.degenerate` is set.
pub fn render_text(stats: &SummaryStats, templates: &TemplateSet) -> AnnotatedText {
    let mut sentences = Vec::new();
    for compiled in &templates.sentences {
        if compiled.uses_skew && stats.degenerate {
            continue;
        }
        let mut spans: Vec<Span> = Vec::new();
        for piece in &compiled.pieces {
            let span = match piece {
                Piece::Plain(t) => Span::plain(t.clone()),
                Piece::Hedge(t) => Span::hedge(t.clone()),
                Piece::HedgedMagnitude => Span::hedge(stats.skew_magnitude.as_str()),
                Piece::Magnitude => Span::plain(stats.skew_magnitude.as_str()),
                Piece::Direction => Span::plain(stats.skew_direction.as_str()),
                Piece::Number(stat) => Span::number(stat.value(stats)),
            };
            match spans.last_mut() {
                Some(last) if last.kind == SpanKind::Plain && span.kind == SpanKind::Plain => {
                    last.text.push_str(&span.text);
                }
                _ => spans.push(span),
            }
        }
        sentences.push(Sentence {
            index: sentences.len(),
            spans,
        });
    }
    AnnotatedText { sentences }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::SkewDirection;

    fn stats(magnitude: SkewMagnitude, direction: SkewDirection, degenerate: bool) -> SummaryStats {
        SummaryStats {
            mean: 32.0,
            q25: 30.0,
            q75: 34.0,
            min: 27.0,
            max: 37.0,
            skewness: 0.1,
            skew_magnitude: magnitude,
            skew_direction: direction,
            degenerate,
        }
    }

    fn kinds_and_text(s: &Sentence, kind: SpanKind) -> Vec<&str> {
        s.spans
            .iter()
            .filter(|sp| sp.kind == kind)
            .map(|sp| sp.text.as_str())
            .collect()
    }

    #[test]
    fn temperature_rounds_half_up() {
        assert_eq!(format_temperature(31.5), "32°F");
        assert_eq!(format_temperature(32.0), "32°F");
        assert_eq!(format_temperature(27.49), "27°F");
        assert_eq!(format_temperature(-0.4), "0°F");
        assert_eq!(format_temperature(-2.5), "-2°F");
    }

    #[test]
    fn default_rendering() {
        let text = render_text(
            &stats(SkewMagnitude::Slightly, SkewDirection::Higher, false),
            &TemplateSet::default(),
        );
        assert_eq!(text.sentences.len(), 4);
        let s1 = &text.sentences[0];
        assert_eq!(s1.text(), "Tonight's low will likely be around 32°F.");
        assert_eq!(kinds_and_text(s1, SpanKind::Number), vec!["32°F"]);
        assert_eq!(
            kinds_and_text(s1, SpanKind::Hedge),
            vec!["likely", "around"]
        );
        assert_eq!(
            text.sentences[1].text(),
            "Temperatures will most likely fall between 30°F and 34°F."
        );
        assert_eq!(
            kinds_and_text(&text.sentences[1], SpanKind::Hedge),
            vec!["most likely"]
        );
        assert_eq!(
            kinds_and_text(&text.sentences[2], SpanKind::Hedge),
            vec!["could", "possibly"]
        );
        assert_eq!(
            text.sentences[3].text(),
            "The forecast might be slightly skewed toward higher temperatures."
        );
    }

    #[test]
    fn degenerate_drops_skew_sentence() {
        let text = render_text(
            &stats(SkewMagnitude::Slightly, SkewDirection::Higher, true),
            &TemplateSet::default(),
        );
        assert_eq!(text.sentences.len(), 3);
        assert_eq!(text.sentences[2].index, 2);
    }

    #[test]
    fn significant_lower_skew_wording() {
        let text = render_text(
            &stats(SkewMagnitude::Significantly, SkewDirection::Lower, false),
            &TemplateSet::default(),
        );
        assert!(text.sentences[3]
            .text()
            .contains("significantly skewed toward lower temperatures"));
        assert_eq!(
            kinds_and_text(&text.sentences[3], SpanKind::Hedge),
            vec!["might", "significantly"]
        );
    }

    #[test]
    fn rendered_text_satisfies_invariants() {
        let templates = TemplateSet::default();
        let text = render_text(
            &stats(SkewMagnitude::Moderately, SkewDirection::Lower, false),
            &templates,
        );
        assert!(text.violations(&templates.lexicon()).is_empty());
        let numbers: Vec<f64> = text.spans().filter_map(|s| s.value).collect();
        assert_eq!(numbers, vec![32.0, 30.0, 34.0, 27.0, 37.0]);
    }

    #[test]
    fn violations_are_reported() {
        let mut text = render_text(
            &stats(SkewMagnitude::Slightly, SkewDirection::Higher, false),
            &TemplateSet::default(),
        );
        text.sentences[0].spans[1].text = "perhaps".into();
        text.sentences[1]
            .spans
            .retain(|s| s.kind != SpanKind::Hedge);
        let v = text.violations(&TemplateSet::default().lexicon());
        assert_eq!(v.len(), 2, "{v:?}");
    }

    #[test]
    fn template_errors() {
        let base = "hedges = [\"might\"]\n[[sentence]]\ntemplate = ";
        for bad in [
            "\"It [may] rain.\"",
            "\"It [might] hit {median}.\"",
            "\"It [might] rain {mean.\"",
            "\"No hedge {mean}.\"",
            "\"Stray ] bracket [might].\"",
        ] {
            let err = TemplateSet::from_toml(&format!("{base}{bad}"));
            assert!(
                matches!(err, Err(TemplateError::Sentence { index: 0, .. })),
                "{bad}"
            );
        }
        assert!(matches!(
            TemplateSet::from_toml("hedges = []\nsentence = []"),
            Err(TemplateError::NoSentences)
        ));
    }

    #[test]
    fn custom_templates_swap_wording() {
        let t = TemplateSet::from_toml(
            "hedges = [\"perhaps\"]\n[skew]\nmoderate = 0.2\nsignificant = 0.4\n\
             [[sentence]]\ntemplate = \"[perhaps] {min}\"",
        )
        .unwrap();
        assert_eq!(t.skew_thresholds().moderate, 0.2);
        let text = render_text(
            &stats(SkewMagnitude::Slightly, SkewDirection::Higher, true),
            &t,
        );
        assert_eq!(text.plain_text(), "perhaps 27°F");
    }
}
