//! Uncertainty-communication engine for temperature forecasts.
//!
//! A trial of 100 forecast samples flows through [`stats`], [`textgen`],
//! [`speechgen`], [`vizspec`] and [`interaction`], and is assembled by
//! [`bundle::build_bundle`] into one JSON-serializable [`ForecastBundle`].
//! [`telemetry`] records and aggregates what users do with it.

pub mod bundle;
pub mod interaction;
pub mod speechgen;
pub mod stats;
pub mod telemetry;
pub mod textgen;
pub mod trial_store;
pub mod vizspec;

pub use bundle::{
    build_bundle, validate_bundle, validate_json, EngineConfig, ForecastBundle, Violation,
};
pub use telemetry::{summarize_telemetry, TelemetryEvent, TelemetryLog, TelemetrySummary};
pub use textgen::TemplateSet;
pub use trial_store::{TrialDataset, TrialSet};
