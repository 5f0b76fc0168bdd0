//! The multimodal forecast bundle: assembly and invariant checking.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::interaction::{self, hedge_effect, BinPayload, HedgeEffect, IconArrayPayload};
use crate::speechgen::{self, SsmlDocument, TimingManifest, TimingModel};
use crate::stats::{self, StatsError, SummaryStats};
use crate::textgen::{render_text, AnnotatedText, SpanKind, TemplateSet};
use crate::trial_store::{TrialDataset, TrialError};
use crate::vizspec::{self, AxisDomain, DensitySpec, DotPlotSpec, VizError, GRID_POINTS};

pub const SCHEMA_VERSION: u32 = 1;
pub const HEDGE_COLOR: &str = "#757575";
/// Salt the roads at or below this temperature (°F).
pub const THRESHOLD_F: f64 = 32.0;

#[derive(Debug, Error)]
pub enum BundleError {
    #[error(transparent)]
    Trial(#[from] TrialError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Viz(#[from] VizError),
    #[error(transparent)]
    Interaction(#[from] interaction::InteractionError),
}

/// Everything the UI needs for one trial.
#[derive(Debug, Clone, Default)]
pub struct EngineConfig {
    pub templates: TemplateSet,
    pub timing: TimingModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Style {
    pub hedge_color: String,
    pub hedge_effect: HedgeEffect,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NumberSpanPayload {
    pub sentence_index: usize,
    pub span_index: usize,
    pub value: f64,
    pub bin_index: usize,
    pub occurrence: IconArrayPayload,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionTables {
    pub bins: Vec<BinPayload>,
    pub number_spans: Vec<NumberSpanPayload>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastBundle {
    pub schema_version: u32,
    pub trial_id: u64,
    pub threshold_f: f64,
    pub summary: SummaryStats,
    pub annotated_text: AnnotatedText,
    pub ssml: SsmlDocument,
    pub timing_manifest: TimingManifest,
    pub axis_domain: AxisDomain,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density_spec: Option<DensitySpec>,
    pub dotplot_spec: DotPlotSpec,
    pub interaction_tables: InteractionTables,
    pub style: Style,
}

impl ForecastBundle {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("bundle serializes")
    }
}

pub fn build_bundle(
    trial: &TrialDataset,
    config: &EngineConfig,
) -> Result<ForecastBundle, BundleError> {
    trial.check()?;
    let samples = &trial.samples;

    let summary = stats::summary_stats_with(samples, config.templates.skew_thresholds())?;
    let annotated_text = render_text(&summary, &config.templates);
    let ssml = speechgen::to_ssml(&annotated_text);
    let timing_manifest = speechgen::estimate_timings_with(&annotated_text, &config.timing);

    let axis_domain = vizspec::axis_domain(samples)?;
    let density_spec = match vizspec::kde_density(samples, &axis_domain) {
        Ok(spec) => Some(spec),
        Err(VizError::Degenerate) => None,
        Err(e) => return Err(e.into()),
    };
    let dotplot_spec = vizspec::quantile_dotplot(samples, &axis_domain)?;

    let mut number_spans = Vec::new();
    for sentence in &annotated_text.sentences {
        for (span_index, span) in sentence.spans.iter().enumerate() {
            let Some(value) = span.value.filter(|_| span.kind == SpanKind::Number) else {
                continue;
            };
            number_spans.push(NumberSpanPayload {
                sentence_index: sentence.index,
                span_index,
                value,
                bin_index: axis_domain.bin_of(value)?,
                occurrence: interaction::occurrence_payload(&dotplot_spec, value)?,
            });
        }
    }

    Ok(ForecastBundle {
        schema_version: SCHEMA_VERSION,
        trial_id: trial.trial_id,
        threshold_f: THRESHOLD_F,
        summary,
        annotated_text,
        ssml,
        timing_manifest,
        axis_domain,
        density_spec,
        interaction_tables: InteractionTables {
            bins: interaction::bin_payloads(&dotplot_spec),
            number_spans,
        },
        dotplot_spec,
        style: Style {
            hedge_color: HEDGE_COLOR.to_string(),
            hedge_effect: hedge_effect(),
        },
    })
}

/// One failed invariant. `invariant` is a stable dotted name.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub invariant: &'static str,
    pub detail: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "[{}] {}", self.invariant, self.detail)
    }
}

fn push_all(out: &mut Vec<Violation>, invariant: &'static str, details: Vec<String>) {
    out.extend(
        details
            .into_iter()
            .map(|detail| Violation { invariant, detail }),
    );
}

/// Parses bundle JSON and checks every invariant.
pub fn validate_json(json: &str, templates: &TemplateSet) -> Vec<Violation> {
    match serde_json::from_str::<ForecastBundle>(json) {
        Ok(bundle) => validate_bundle(&bundle, templates),
        Err(e) => vec![Violation {
            invariant: "schema",
            detail: e.to_string(),
        }],
    }
}

pub fn validate_bundle(bundle: &ForecastBundle, templates: &TemplateSet) -> Vec<Violation> {
    let mut out = Vec::new();
    let text = &bundle.annotated_text;
    let domain = &bundle.axis_domain;

    if bundle.schema_version != SCHEMA_VERSION {
        out.push(Violation {
            invariant: "schema",
            detail: format!(
                "schema_version {} is not {SCHEMA_VERSION}",
                bundle.schema_version
            ),
        });
    }
    if bundle.threshold_f != THRESHOLD_F {
        out.push(Violation {
            invariant: "threshold",
            detail: format!(
                "threshold_f is {} instead of {THRESHOLD_F}",
                bundle.threshold_f
            ),
        });
    }
    if bundle.style.hedge_color != HEDGE_COLOR {
        out.push(Violation {
            invariant: "style.hedge_color",
            detail: format!(
                "hedge color {} instead of {HEDGE_COLOR}",
                bundle.style.hedge_color
            ),
        });
    }
    if bundle.style.hedge_effect != hedge_effect() {
        out.push(Violation {
            invariant: "style.hedge_effect",
            detail: format!(
                "{:?} differs from the fixed wobble and blur",
                bundle.style.hedge_effect
            ),
        });
    }

    let s = &bundle.summary;
    if !(s.min <= s.q25 && s.q25 <= s.q75 && s.q75 <= s.max) {
        out.push(Violation {
            invariant: "summary.order",
            detail: format!(
                "min {} q25 {} q75 {} max {} out of order",
                s.min, s.q25, s.q75, s.max
            ),
        });
    }
    if !s.degenerate
        && stats::skew_label_with(s.skewness, templates.skew_thresholds())
            != (s.skew_magnitude, s.skew_direction)
    {
        out.push(Violation {
            invariant: "summary.skew_label",
            detail: format!("skewness {} does not map to its labels", s.skewness),
        });
    }

    push_all(&mut out, "text", text.violations(&templates.lexicon()));
    for span in text.spans().filter(|s| s.kind == SpanKind::Number) {
        if let Some(v) = span.value {
            if !domain.contains(v) {
                out.push(Violation {
                    invariant: "text.number_in_domain",
                    detail: format!(
                        "number span {v} lies outside [{}, {}]",
                        domain.lo, domain.hi
                    ),
                });
            }
        }
    }

    push_all(
        &mut out,
        "ssml",
        speechgen::ssml_violations(&bundle.ssml.markup, text),
    );
    push_all(
        &mut out,
        "timing",
        bundle.timing_manifest.violations(text.sentences.len()),
    );

    let dots = &bundle.dotplot_spec;
    if dots.domain != *domain {
        out.push(Violation {
            invariant: "dotplot.domain",
            detail: "dot plot domain differs from the bundle axis domain".into(),
        });
    }
    push_all(&mut out, "dotplot", dots.violations());

    match (&bundle.density_spec, s.degenerate) {
        (Some(d), _) => push_all(&mut out, "density", density_violations(d, domain)),
        (None, false) => out.push(Violation {
            invariant: "density",
            detail: "density spec missing for a non-degenerate trial".into(),
        }),
        (None, true) => {}
    }

    push_all(&mut out, "interaction", interaction_violations(bundle));
    out
}

fn density_violations(d: &DensitySpec, domain: &AxisDomain) -> Vec<String> {
    let mut out = Vec::new();
    if d.grid.len() != GRID_POINTS || d.density.len() != GRID_POINTS {
        out.push(format!(
            "density grid has {} points and {} values, expected {GRID_POINTS}",
            d.grid.len(),
            d.density.len()
        ));
        return out;
    }
    if d.grid[0] != domain.lo || d.grid[GRID_POINTS - 1] != domain.hi {
        out.push("density grid does not span the axis domain".into());
    }
    if d.grid.windows(2).any(|w| w[1] <= w[0]) {
        out.push("density grid is not ascending".into());
    }
    if d.density.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        out.push("density has negative or non-finite values".into());
    }
    if !(d.bandwidth.is_finite() && d.bandwidth > 0.0) {
        out.push(format!("bandwidth {} is not positive", d.bandwidth));
    }
    let area = d.trapezoid_integral();
    if !(0.98..=1.02).contains(&area) {
        out.push(format!(
            "density integrates to {area:.4}, outside [0.98, 1.02]"
        ));
    }
    out
}

fn interaction_violations(bundle: &ForecastBundle) -> Vec<String> {
    let mut out = Vec::new();
    let spec = &bundle.dotplot_spec;
    let tables = &bundle.interaction_tables;
    if spec.bins.len() != vizspec::BIN_COUNT || tables.bins.len() != spec.bins.len() {
        out.push(format!(
            "{} bin payloads for {} bins",
            tables.bins.len(),
            spec.bins.len()
        ));
        return out;
    }
    let mut cumulative = 0;
    let mut last_p = 0.0;
    for (payload, bin) in tables.bins.iter().zip(&spec.bins) {
        cumulative += bin.count;
        if payload.bin_index != bin.index || payload.occurrence.filled != bin.count {
            out.push(format!(
                "bin {} payload shows {} filled but the bin holds {}",
                bin.index, payload.occurrence.filled, bin.count
            ));
        }
        let p = cumulative as f64 / 100.0;
        if payload.cumulative.probability != p {
            out.push(format!(
                "bin {} cumulative probability {} instead of {p}",
                bin.index, payload.cumulative.probability
            ));
        }
        if payload.cumulative.probability < last_p {
            out.push(format!(
                "bin {} cumulative probability decreases",
                bin.index
            ));
        }
        last_p = payload.cumulative.probability;
        if payload.cumulative.threshold != bin.hi {
            out.push(format!("bin {} threshold is not its upper edge", bin.index));
        }
    }

    let spans: Vec<(usize, usize, f64)> = bundle
        .annotated_text
        .sentences
        .iter()
        .flat_map(|s| {
            s.spans
                .iter()
                .enumerate()
                .filter(|(_, sp)| sp.kind == SpanKind::Number)
                .map(move |(i, sp)| (s.index, i, sp.value.unwrap_or(f64::NAN)))
        })
        .collect();
    if spans.len() != tables.number_spans.len() {
        out.push(format!(
            "{} number payloads for {} number spans",
            tables.number_spans.len(),
            spans.len()
        ));
    }
    for ((sentence, span, value), payload) in spans.iter().zip(&tables.number_spans) {
        if payload.sentence_index != *sentence
            || payload.span_index != *span
            || payload.value != *value
        {
            out.push(format!(
                "number payload for sentence {sentence} span {span} does not match the text"
            ));
            continue;
        }
        match vizspec::highlight_region(spec, *value) {
            Ok(h) => {
                if h.bin_index != payload.bin_index
                    || h.dot_indices.len() != payload.occurrence.filled
                {
                    out.push(format!(
                        "number {value} payload disagrees with its highlighted bin {}",
                        h.bin_index
                    ));
                }
            }
            Err(e) => out.push(format!("number {value} has no highlight: {e}")),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trial_store::{generate_trials, Range};

    fn normal_trial() -> TrialDataset {
        generate_trials(1, 21, Range::new(32.0, 32.0), Range::new(2.0, 2.0))
            .unwrap()
            .trials
            .remove(0)
    }

    #[test]
    fn constant_trial_takes_degenerate_path() {
        let trial = TrialDataset::new(0, vec![32.0; 100]).unwrap();
        let b = build_bundle(&trial, &EngineConfig::default()).unwrap();
        assert_eq!(b.annotated_text.sentences.len(), 3);
        assert!(b.density_spec.is_none());
        assert_eq!(
            b.dotplot_spec.bins.iter().filter(|b| b.count > 0).count(),
            1
        );
        let v = validate_bundle(&b, &TemplateSet::default());
        assert!(v.is_empty(), "{v:?}");
    }

    #[test]
    fn normal_trial_is_valid() {
        let b = build_bundle(&normal_trial(), &EngineConfig::default()).unwrap();
        assert_eq!(b.annotated_text.sentences.len(), 4);
        assert_eq!(b.style.hedge_color, "#757575");
        assert_eq!(b.threshold_f, 32.0);
        assert_eq!(b.interaction_tables.number_spans.len(), 5);
        let v = validate_json(&b.to_json(), &TemplateSet::default());
        assert!(v.is_empty(), "{v:?}");
    }

    #[test]
    fn bundle_json_is_deterministic() {
        let trial = normal_trial();
        let a = build_bundle(&trial, &EngineConfig::default())
            .unwrap()
            .to_json();
        let b = build_bundle(&trial, &EngineConfig::default())
            .unwrap()
            .to_json();
        assert_eq!(a, b);
        let back: ForecastBundle = serde_json::from_str(&a).unwrap();
        assert_eq!(back.to_json(), a);
    }

    #[test]
    fn short_trial_is_rejected() {
        let trial = TrialDataset {
            trial_id: 0,
            samples: vec![1.0; 10],
            gen_mean: None,
            gen_sd: None,
        };
        assert!(matches!(
            build_bundle(&trial, &EngineConfig::default()),
            Err(BundleError::Trial(_))
        ));
    }

    #[test]
    fn corrupted_bundles_name_their_invariant() {
        let good = build_bundle(&normal_trial(), &EngineConfig::default()).unwrap();
        let t = TemplateSet::default();
        let check = |mutate: &dyn Fn(&mut ForecastBundle), expected: &str| {
            let mut b = good.clone();
            mutate(&mut b);
            let v = validate_bundle(&b, &t);
            assert!(
                v.iter().any(|x| x.invariant == expected),
                "{expected}: {v:?}"
            );
        };
        check(
            &|b| b.style.hedge_color = "#000000".into(),
            "style.hedge_color",
        );
        check(&|b| b.threshold_f = 0.0, "threshold");
        check(&|b| b.timing_manifest.entries[1].start_s = 0.0, "timing");
        check(&|b| b.density_spec = None, "density");
        check(
            &|b| b.ssml.markup = b.ssml.markup.replacen("rate=\"65%\"", "rate=\"80%\"", 1),
            "ssml",
        );
        check(
            &|b| b.interaction_tables.bins[0].occurrence.filled += 1,
            "interaction",
        );
        check(
            &|b| b.annotated_text.sentences[0].spans[1].text = "maybe".into(),
            "text",
        );
    }
}
