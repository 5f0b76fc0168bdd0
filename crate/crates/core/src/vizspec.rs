//! Renderer-agnostic chart specifications: a Gaussian KDE density curve and
//! a 100-quantile dot plot over 20 equal-width bins. Both share one
//! [`AxisDomain`].

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::stats::{self, StatsError};

pub const GRID_POINTS: usize = 128;
pub const BIN_COUNT: usize = 20;
pub const DOT_COUNT: usize = 100;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VizError {
    #[error("sample set is empty")]
    Empty,
    #[error("degenerate distribution: zero variance")]
    Degenerate,
    #[error("{value} is outside the axis domain [{lo}, {hi}]")]
    OutOfRange { value: f64, lo: f64, hi: f64 },
}

impl From<StatsError> for VizError {
    fn from(e: StatsError) -> Self {
        match e {
            StatsError::Degenerate => VizError::Degenerate,
            _ => VizError::Empty,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisDomain {
    pub lo: f64,
    pub hi: f64,
}

impl AxisDomain {
    pub fn contains(&self, v: f64) -> bool {
        v >= self.lo && v <= self.hi
    }

    pub fn bin_width(&self) -> f64 {
        (self.hi - self.lo) / BIN_COUNT as f64
    }

    /// Bin holding `v`: right-open bins, the last bin closed at `hi`.
    pub fn bin_of(&self, v: f64) -> Result<usize, VizError> {
        if !self.contains(v) {
            return Err(VizError::OutOfRange {
                value: v,
                lo: self.lo,
                hi: self.hi,
            });
        }
        let width = self.bin_width();
        let mut bin = (((v - self.lo) / width).floor() as usize).min(BIN_COUNT - 1);
        // Keep the index consistent with the published edges under rounding.
        if bin > 0 && v < self.edge(bin) {
            bin -= 1;
        } else if bin + 1 < BIN_COUNT && v >= self.edge(bin + 1) {
            bin += 1;
        }
        Ok(bin)
    }

    pub fn edge(&self, k: usize) -> f64 {
        if k == BIN_COUNT {
            self.hi
        } else {
            self.lo + k as f64 * self.bin_width()
        }
    }
}

/// Whole-degree padding: `[floor(min) - 1, ceil(max) + 1]`.
pub fn axis_domain(samples: &[f64]) -> Result<AxisDomain, VizError> {
    if samples.is_empty() {
        return Err(VizError::Empty);
    }
    let min = samples.iter().copied().fold(f64::INFINITY, f64::min);
    let max = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(AxisDomain {
        lo: min.floor() - 1.0,
        hi: max.ceil() + 1.0,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensitySpec {
    pub grid: Vec<f64>,
    pub density: Vec<f64>,
    pub bandwidth: f64,
    pub kernel: String,
    pub bandwidth_rule: String,
}

impl DensitySpec {
    pub fn trapezoid_integral(&self) -> f64 {
        self.grid
            .windows(2)
            .zip(self.density.windows(2))
            .map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1]))
            .sum()
    }

    pub fn mode(&self) -> f64 {
        let (i, _) =
            self.density
                .iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |best, (i, &d)| {
                    if d > best.1 {
                        (i, d)
                    } else {
                        best
                    }
                });
        self.grid[i]
    }
}

fn sample_sd(samples: &[f64]) -> f64 {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let ss: f64 = samples.iter().map(|x| (x - mean).powi(2)).sum();
    (ss / (n - 1.0)).sqrt()
}

/// Silverman's rule of thumb, `0.9 * min(sd, IQR / 1.34) * n^(-1/5)`, with
/// the sample sd (n - 1). Falls back to the sd when the IQR is zero.
pub fn silverman_bandwidth(samples: &[f64]) -> Result<f64, VizError> {
    if samples.len() < 2 {
        return Err(VizError::Empty);
    }
    let sd = sample_sd(samples);
    if sd == 0.0 || !sd.is_finite() {
        return Err(VizError::Degenerate);
    }
    let iqr = stats::quantile(samples, 0.75)? - stats::quantile(samples, 0.25)?;
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    Ok(0.9 * spread * (samples.len() as f64).powf(-0.2))
}

pub fn kde_density(samples: &[f64], domain: &AxisDomain) -> Result<DensitySpec, VizError> {
    let h = silverman_bandwidth(samples)?;
    let norm = 1.0 / (samples.len() as f64 * h * (2.0 * std::f64::consts::PI).sqrt());
    let step = (domain.hi - domain.lo) / (GRID_POINTS - 1) as f64;
    let grid: Vec<f64> = (0..GRID_POINTS)
        .map(|i| {
            if i == GRID_POINTS - 1 {
                domain.hi
            } else {
                domain.lo + i as f64 * step
            }
        })
        .collect();
    let density = grid
        .iter()
        .map(|&x| {
            norm * samples
                .iter()
                .map(|&s| {
                    let u = (x - s) / h;
                    (-0.5 * u * u).exp()
                })
                .sum::<f64>()
        })
        .collect();
    Ok(DensitySpec {
        grid,
        density,
        bandwidth: h,
        kernel: "gaussian".into(),
        bandwidth_rule: "silverman".into(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bin {
    pub index: usize,
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Dot {
    /// 1-based.
    pub quantile_index: usize,
    pub value: f64,
    pub bin_index: usize,
    pub stack_position: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DotPlotSpec {
    pub domain: AxisDomain,
    pub bins: Vec<Bin>,
    pub dots: Vec<Dot>,
}

impl DotPlotSpec {
    pub fn dots_in_bin(&self, bin: usize) -> impl Iterator<Item = &Dot> {
        self.dots.iter().filter(move |d| d.bin_index == bin)
    }

    pub fn dot(&self, quantile_index: usize) -> Option<&Dot> {
        self.dots
            .iter()
            .find(|d| d.quantile_index == quantile_index)
    }

    /// Lists violated structural invariants.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.dots.len() != DOT_COUNT {
            out.push(format!(
                "dot plot has {} dots, expected {DOT_COUNT}",
                self.dots.len()
            ));
        }
        if self.bins.len() != BIN_COUNT {
            out.push(format!(
                "dot plot has {} bins, expected {BIN_COUNT}",
                self.bins.len()
            ));
        }
        if self.domain.lo.partial_cmp(&self.domain.hi) != Some(std::cmp::Ordering::Less) {
            out.push(format!(
                "axis domain [{}, {}] is empty",
                self.domain.lo, self.domain.hi
            ));
        }
        if let (Some(first), Some(last)) = (self.bins.first(), self.bins.last()) {
            if first.lo != self.domain.lo || last.hi != self.domain.hi {
                out.push("bins do not cover the axis domain".into());
            }
            let widths: Vec<f64> = self.bins.iter().map(|b| b.hi - b.lo).collect();
            let spread = widths.iter().copied().fold(f64::NEG_INFINITY, f64::max)
                - widths.iter().copied().fold(f64::INFINITY, f64::min);
            if spread > 1e-9 {
                out.push(format!("bin widths differ by {spread:e}, exceeding 1e-9"));
            }
            for (pos, pair) in self.bins.windows(2).enumerate() {
                if pair[0].hi != pair[1].lo {
                    out.push(format!("bins {pos} and {} are not contiguous", pos + 1));
                }
            }
        }
        for (pos, bin) in self.bins.iter().enumerate() {
            if bin.index != pos {
                out.push(format!("bin at position {pos} has index {}", bin.index));
            }
        }
        let total: usize = self.bins.iter().map(|b| b.count).sum();
        if total != DOT_COUNT {
            out.push(format!("bin counts sum to {total}, expected {DOT_COUNT}"));
        }
        for (pos, dot) in self.dots.iter().enumerate() {
            if dot.quantile_index != pos + 1 {
                out.push(format!(
                    "dot {pos} has quantile_index {}",
                    dot.quantile_index
                ));
            }
            if dot.bin_index >= self.bins.len() {
                out.push(format!(
                    "dot {} has bin_index {}",
                    dot.quantile_index, dot.bin_index
                ));
                continue;
            }
            let bin = &self.bins[dot.bin_index];
            let last = dot.bin_index + 1 == self.bins.len();
            let inside =
                dot.value >= bin.lo && (dot.value < bin.hi || (last && dot.value <= bin.hi));
            if !inside {
                out.push(format!(
                    "dot {} value {} lies outside bin {}",
                    dot.quantile_index, dot.value, dot.bin_index
                ));
            }
        }
        for pair in self.dots.windows(2) {
            if pair[1].value < pair[0].value || pair[1].bin_index < pair[0].bin_index {
                out.push(format!(
                    "dot {} maps to an earlier bin or value than dot {}",
                    pair[1].quantile_index, pair[0].quantile_index
                ));
            }
        }
        for bin in &self.bins {
            let mut stacks: Vec<usize> = self
                .dots_in_bin(bin.index)
                .map(|d| d.stack_position)
                .collect();
            if stacks.len() != bin.count {
                out.push(format!(
                    "bin {} declares {} dots but holds {}",
                    bin.index,
                    bin.count,
                    stacks.len()
                ));
            }
            stacks.sort_unstable();
            if stacks.iter().enumerate().any(|(i, &s)| i != s) {
                out.push(format!("bin {} stack positions have gaps", bin.index));
            }
        }
        out
    }
}

/// 100 quantiles at `(i - 0.5) / 100`, binned and stacked in quantile order.
pub fn quantile_dotplot(samples: &[f64], domain: &AxisDomain) -> Result<DotPlotSpec, VizError> {
    if samples.is_empty() {
        return Err(VizError::Empty);
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);

    let mut counts = [0usize; BIN_COUNT];
    let mut dots = Vec::with_capacity(DOT_COUNT);
    for i in 1..=DOT_COUNT {
        let p = (i as f64 - 0.5) / DOT_COUNT as f64;
        let value = stats::quantile_sorted(&sorted, p)?;
        let bin_index = domain.bin_of(value)?;
        dots.push(Dot {
            quantile_index: i,
            value,
            bin_index,
            stack_position: counts[bin_index],
        });
        counts[bin_index] += 1;
    }
    let bins = (0..BIN_COUNT)
        .map(|k| Bin {
            index: k,
            lo: domain.edge(k),
            hi: domain.edge(k + 1),
            count: counts[k],
        })
        .collect();
    Ok(DotPlotSpec {
        domain: *domain,
        bins,
        dots,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Highlight {
    pub bin_index: usize,
    pub dot_indices: Vec<usize>,
}

pub fn highlight_region(spec: &DotPlotSpec, v: f64) -> Result<Highlight, VizError> {
    let bin_index = spec.domain.bin_of(v)?;
    Ok(Highlight {
        bin_index,
        dot_indices: spec
            .dots_in_bin(bin_index)
            .map(|d| d.quantile_index)
            .collect(),
    })
}
