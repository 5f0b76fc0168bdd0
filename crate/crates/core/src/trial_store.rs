//! Forecast trials: generation, wide-CSV persistence and selection.
//!
//! Generation is driven by `ChaCha8Rng` seeded with `seed_from_u64`; normal
//! draws use `rand_distr::Normal`. Both are portable, so the same seed yields
//! the same bytes on every platform.

use std::collections::HashSet;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const SAMPLES_PER_TRIAL: usize = 100;
pub const DEFAULT_MEAN_RANGE: Range = Range { lo: 26.0, hi: 38.0 };
pub const DEFAULT_SD_RANGE: Range = Range { lo: 1.0, hi: 4.0 };

const HEADER_PREFIX: &str = "trial_";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrialError {
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("malformed CSV: {0}")]
    Format(String),
    #[error("no trial with id {0}")]
    NotFound(u64),
}

/// Closed interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
}

impl Range {
    pub fn new(lo: f64, hi: f64) -> Self {
        Range { lo, hi }
    }

    fn is_valid(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite() && self.lo <= self.hi
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        if self.lo == self.hi {
            return self.lo;
        }
        Uniform::new_inclusive(self.lo, self.hi)
            .expect("validated range")
            .sample(rng)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialDataset {
    pub trial_id: u64,
    pub samples: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gen_mean: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gen_sd: Option<f64>,
}

impl TrialDataset {
    /// Builds a trial after checking the sample-count and finiteness laws.
    pub fn new(trial_id: u64, samples: Vec<f64>) -> Result<Self, TrialError> {
        let trial = TrialDataset {
            trial_id,
            samples,
            gen_mean: None,
            gen_sd: None,
        };
        trial.check()?;
        Ok(trial)
    }

    pub fn check(&self) -> Result<(), TrialError> {
        if self.samples.len() != SAMPLES_PER_TRIAL {
            return Err(TrialError::Format(format!(
                "trial {} has {} samples, expected {SAMPLES_PER_TRIAL}",
                self.trial_id,
                self.samples.len()
            )));
        }
        if let Some(i) = self.samples.iter().position(|x| !x.is_finite()) {
            return Err(TrialError::Format(format!(
                "trial {} sample {i} is not finite",
                self.trial_id
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSet {
    pub trials: Vec<TrialDataset>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_seed: Option<u64>,
}

impl TrialSet {
    pub fn ids(&self) -> Vec<u64> {
        self.trials.iter().map(|t| t.trial_id).collect()
    }

    pub fn get(&self, trial_id: u64) -> Option<&TrialDataset> {
        self.trials.iter().find(|t| t.trial_id == trial_id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Selector {
    ById(u64),
    RandomWithSeed(u64),
}

pub fn generate_trials(
    n_trials: usize,
    seed: u64,
    mean_range: Range,
    sd_range: Range,
) -> Result<TrialSet, TrialError> {
    if n_trials == 0 {
        return Err(TrialError::Parameter("n_trials must be at least 1".into()));
    }
    if !mean_range.is_valid() {
        return Err(TrialError::Parameter(format!(
            "mean range [{}, {}] is empty",
            mean_range.lo, mean_range.hi
        )));
    }
    if !sd_range.is_valid() || sd_range.lo <= 0.0 {
        return Err(TrialError::Parameter(format!(
            "sd range [{}, {}] must be nonempty with a positive lower bound",
            sd_range.lo, sd_range.hi
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let trials = (0..n_trials as u64)
        .map(|trial_id| {
            let gen_mean = mean_range.sample(&mut rng);
            let gen_sd = sd_range.sample(&mut rng);
            let normal = Normal::new(gen_mean, gen_sd).expect("sd validated positive");
            let samples = (0..SAMPLES_PER_TRIAL)
                .map(|_| normal.sample(&mut rng))
                .collect();
            TrialDataset {
                trial_id,
                samples,
                gen_mean: Some(gen_mean),
                gen_sd: Some(gen_sd),
            }
        })
        .collect();
    Ok(TrialSet {
        trials,
        source_seed: Some(seed),
    })
}

/// Six significant digits, fixed notation: `32.0` becomes `32.0000`.
pub fn format_sig6(v: f64) -> String {
    // The exponent of the rounded scientific form already accounts for
    // carries such as 9.999996 -> 1.00000e1.
    let sci = format!("{v:.5e}");
    let exponent: i32 = sci
        .rsplit_once('e')
        .and_then(|(_, e)| e.parse().ok())
        .unwrap_or(0);
    let decimals = (5 - exponent).max(0) as usize;
    format!("{v:.decimals$}")
}

pub fn write_csv(set: &TrialSet) -> Result<Vec<u8>, TrialError> {
    if set.trials.is_empty() {
        return Err(TrialError::Parameter("trial set is empty".into()));
    }
    for t in &set.trials {
        t.check()?;
    }
    let mut out = String::new();
    let header: Vec<String> = set
        .trials
        .iter()
        .map(|t| format!("{HEADER_PREFIX}{}", t.trial_id))
        .collect();
    out.push_str(&header.join(","));
    out.push('\n');
    for row in 0..SAMPLES_PER_TRIAL {
        for (col, t) in set.trials.iter().enumerate() {
            if col > 0 {
                out.push(',');
            }
            let _ = write!(out, "{}", format_sig6(t.samples[row]));
        }
        out.push('\n');
    }
    Ok(out.into_bytes())
}

/// Parses a wide CSV. Data rows are numbered from 1 in error messages
/// (the header is not counted).
pub fn parse_csv(bytes: &[u8]) -> Result<TrialSet, TrialError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(bytes);

    let headers = reader
        .headers()
        .map_err(|e| TrialError::Format(format!("unreadable header: {e}")))?
        .clone();
    if headers.is_empty() || headers.iter().all(|h| h.trim().is_empty()) {
        return Err(TrialError::Format("missing header row".into()));
    }

    let mut seen = HashSet::new();
    let mut ids = Vec::with_capacity(headers.len());
    for name in headers.iter() {
        let name = name.trim().trim_start_matches('\u{feff}');
        let id = name
            .strip_prefix(HEADER_PREFIX)
            .and_then(|s| s.parse::<u64>().ok())
            .ok_or_else(|| {
                TrialError::Format(format!(
                    "column header {name:?} is not of the form trial_<id>"
                ))
            })?;
        if !seen.insert(id) {
            return Err(TrialError::Format(format!("duplicate column {name}")));
        }
        ids.push(id);
    }

    let mut columns: Vec<Vec<f64>> = vec![Vec::with_capacity(SAMPLES_PER_TRIAL); ids.len()];
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| TrialError::Format(format!("data row {row}: {e}")))?;
        if record.len() > ids.len() {
            return Err(TrialError::Format(format!(
                "data row {row} has {} cells but the header names {} columns",
                record.len(),
                ids.len()
            )));
        }
        for (col, cell) in record.iter().enumerate() {
            let cell = cell.trim();
            if cell.is_empty() {
                continue;
            }
            if columns[col].len() != row - 1 {
                return Err(TrialError::Format(format!(
                    "column {HEADER_PREFIX}{} has a gap before data row {row}",
                    ids[col]
                )));
            }
            let value = cell
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| {
                    TrialError::Format(format!(
                        "non-numeric cell {cell:?} at data row {row}, column {HEADER_PREFIX}{}",
                        ids[col]
                    ))
                })?;
            columns[col].push(value);
        }
    }

    let trials = ids
        .into_iter()
        .zip(columns)
        .map(|(trial_id, samples)| {
            if samples.len() != SAMPLES_PER_TRIAL {
                return Err(TrialError::Format(format!(
                    "column {HEADER_PREFIX}{trial_id} has {} numeric rows, expected {SAMPLES_PER_TRIAL}",
                    samples.len()
                )));
            }
            Ok(TrialDataset {
                trial_id,
                samples,
                gen_mean: None,
                gen_sd: None,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(TrialSet {
        trials,
        source_seed: None,
    })
}

pub fn select_trial(set: &TrialSet, selector: Selector) -> Result<&TrialDataset, TrialError> {
    if set.trials.is_empty() {
        return Err(TrialError::Parameter("trial set is empty".into()));
    }
    match selector {
        Selector::ById(id) => set.get(id).ok_or(TrialError::NotFound(id)),
        Selector::RandomWithSeed(seed) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            Ok(&set.trials[rng.random_range(0..set.trials.len())])
        }
    }
}
