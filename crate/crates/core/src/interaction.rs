//! Payloads behind the active interface's hover interactions.
//!
//! Every dot in the quantile dot plot stands for 1% of the forecast mass, so
//! both tooltips are dot counts: the hovered bin for "how likely is this
//! value" and bins up to the hovered one for "this value or lower".

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::textgen::format_temperature;
use crate::vizspec::{highlight_region, DotPlotSpec, VizError, DOT_COUNT};

pub const ICON_ROWS: usize = 10;
pub const ICON_COLS: usize = 10;
pub const WOBBLE_DEG: f64 = 3.0;
pub const BLUR_PX: f64 = 0.5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InteractionError {
    #[error(transparent)]
    OutOfRange(#[from] VizError),
    #[error("quantile index {0} is outside 1..=100")]
    InvalidDot(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IconArrayPayload {
    pub filled: usize,
    pub total: usize,
    pub rows: usize,
    pub cols: usize,
    pub caption: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CumulativePayload {
    pub threshold: f64,
    pub probability: f64,
    pub caption: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HedgeEffect {
    pub wobble_deg: f64,
    pub blur_px: f64,
}

pub fn hedge_effect() -> HedgeEffect {
    HedgeEffect {
        wobble_deg: WOBBLE_DEG,
        blur_px: BLUR_PX,
    }
}

fn icon_array(filled: usize, v: f64) -> IconArrayPayload {
    IconArrayPayload {
        filled,
        total: DOT_COUNT,
        rows: ICON_ROWS,
        cols: ICON_COLS,
        caption: format!(
            "About {filled} in 100 forecasts land near {}",
            format_temperature(v)
        ),
    }
}

/// Formats a bin edge with at most one decimal place.
fn format_threshold(v: f64) -> String {
    let s = format!("{v:.1}");
    s.strip_suffix(".0").map(str::to_string).unwrap_or(s)
}

pub fn occurrence_payload(
    spec: &DotPlotSpec,
    v: f64,
) -> Result<IconArrayPayload, InteractionError> {
    let region = highlight_region(spec, v)?;
    Ok(icon_array(region.dot_indices.len(), v))
}

pub(crate) fn cumulative_for_bin(spec: &DotPlotSpec, bin: usize) -> CumulativePayload {
    let through: usize = spec.dots.iter().filter(|d| d.bin_index <= bin).count();
    let threshold = spec.domain.edge(bin + 1);
    CumulativePayload {
        threshold,
        probability: through as f64 / DOT_COUNT as f64,
        caption: format!(
            "There is a {through}% chance of {}°F or lower",
            format_threshold(threshold)
        ),
    }
}

pub fn cumulative_payload(
    spec: &DotPlotSpec,
    quantile_index: usize,
) -> Result<CumulativePayload, InteractionError> {
    let dot = spec
        .dot(quantile_index)
        .filter(|_| (1..=DOT_COUNT).contains(&quantile_index))
        .ok_or(InteractionError::InvalidDot(quantile_index))?;
    Ok(cumulative_for_bin(spec, dot.bin_index))
}

/// Per-bin tooltip table, so a client needs no statistics of its own.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinPayload {
    pub bin_index: usize,
    pub center: f64,
    pub occurrence: IconArrayPayload,
    pub cumulative: CumulativePayload,
}

pub fn bin_payloads(spec: &DotPlotSpec) -> Vec<BinPayload> {
    spec.bins
        .iter()
        .map(|bin| {
            let center = 0.5 * (bin.lo + bin.hi);
            BinPayload {
                bin_index: bin.index,
                center,
                occurrence: icon_array(bin.count, center),
                cumulative: cumulative_for_bin(spec, bin.index),
            }
        })
        .collect()
}
