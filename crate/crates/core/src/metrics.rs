//! Demand-response cost metrics, their ratios against a baseline, and the
//! peak-hour guidance signal.
//!
//! Every metric is "lower is better". Consumption-based metrics use the
//! positive part `e+ = max(0, e)` of the net series, so exports never offset
//! peaks or totals.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::param_space::GuidanceSignal;
use crate::planner::HOURS_PER_DAY;

/// Hours per load-factor window (one twelfth of a year).
pub const LOAD_FACTOR_WINDOW: usize = 730;

pub const METRIC_NAMES: [&str; 6] = [
    "ramping",
    "one_minus_load_factor",
    "avg_daily_peak",
    "peak_demand",
    "total_consumption",
    "carbon",
];

fn pos(v: f64) -> f64 {
    v.max(0.0)
}

/// Sum of absolute hour-to-hour changes.
pub fn ramping(e: &[f64]) -> f64 {
    e.windows(2).map(|w| (w[1] - w[0]).abs()).sum()
}

/// Mean over `window`-hour blocks of `1 - mean(e+) / max(e+)`. A block whose
/// maximum is zero contributes zero; a trailing partial block counts as a block.
pub fn one_minus_load_factor(e: &[f64], window: usize) -> f64 {
    if e.is_empty() || window == 0 {
        return 0.0;
    }
    let mut total = 0.0;
    let mut blocks = 0usize;
    for chunk in e.chunks(window) {
        let max = chunk.iter().copied().map(pos).fold(0.0, f64::max);
        if max > 0.0 {
            let mean = chunk.iter().copied().map(pos).sum::<f64>() / chunk.len() as f64;
            total += 1.0 - mean / max;
        }
        blocks += 1;
    }
    total / blocks as f64
}

/// Mean over days of the daily maximum of `e+`.
pub fn avg_daily_peak(e: &[f64]) -> f64 {
    if e.is_empty() {
        return 0.0;
    }
    let days: Vec<f64> = e
        .chunks(HOURS_PER_DAY)
        .map(|d| d.iter().copied().map(pos).fold(0.0, f64::max))
        .collect();
    days.iter().sum::<f64>() / days.len() as f64
}

pub fn peak_demand(e: &[f64]) -> f64 {
    e.iter().copied().map(pos).fold(0.0, f64::max)
}

pub fn total_consumption(e: &[f64]) -> f64 {
    e.iter().copied().map(pos).sum()
}

pub fn carbon(e: &[f64], intensity: &[f64]) -> f64 {
    e.iter().zip(intensity).map(|(v, c)| pos(*v) * c).sum()
}

/// The six raw metrics of one net-consumption series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawMetrics {
    pub ramping: f64,
    pub one_minus_load_factor: f64,
    pub avg_daily_peak: f64,
    pub peak_demand: f64,
    pub total_consumption: f64,
    pub carbon: f64,
}

impl RawMetrics {
    pub fn compute(e: &[f64], intensity: &[f64]) -> Result<Self> {
        if e.len() != intensity.len() {
            return Err(Error::DimensionMismatch {
                context: "carbon intensity",
                expected: e.len(),
                actual: intensity.len(),
            });
        }
        if e.iter().chain(intensity).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("metric input"));
        }
        Ok(Self {
            ramping: ramping(e),
            one_minus_load_factor: one_minus_load_factor(e, LOAD_FACTOR_WINDOW),
            avg_daily_peak: avg_daily_peak(e),
            peak_demand: peak_demand(e),
            total_consumption: total_consumption(e),
            carbon: carbon(e, intensity),
        })
    }

    pub fn as_array(&self) -> [f64; 6] {
        [
            self.ramping,
            self.one_minus_load_factor,
            self.avg_daily_peak,
            self.peak_demand,
            self.total_consumption,
            self.carbon,
        ]
    }
}

/// Raw metrics of an agent, its baseline, and their ratios.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub raw: RawMetrics,
    pub baseline: RawMetrics,
    /// Agent over baseline, in [`METRIC_NAMES`] order.
    pub ratios: [f64; 6],
    pub total_score: f64,
    /// Mean of the first four ratios.
    pub coordination_score: f64,
}

/// Element-wise `agent / baseline`. A metric that is zero for both counts as
/// ratio 1; zero for the baseline alone is an error.
pub fn score_ratios(agent: &RawMetrics, baseline: &RawMetrics) -> Result<MetricReport> {
    let a = agent.as_array();
    let b = baseline.as_array();
    let mut ratios = [0.0; 6];
    for i in 0..6 {
        ratios[i] = if b[i] > 0.0 {
            a[i] / b[i]
        } else if a[i] == 0.0 {
            1.0
        } else {
            return Err(Error::InvalidInput(format!(
                "baseline {} is zero but the agent's is {}",
                METRIC_NAMES[i], a[i]
            )));
        };
    }
    Ok(MetricReport {
        raw: *agent,
        baseline: *baseline,
        ratios,
        total_score: ratios.iter().sum::<f64>() / 6.0,
        coordination_score: ratios[..4].iter().sum::<f64>() / 4.0,
    })
}

impl MetricReport {
    pub fn csv_header() -> String {
        let mut cols: Vec<String> = METRIC_NAMES.iter().map(|n| n.to_string()).collect();
        cols.extend(METRIC_NAMES.iter().map(|n| format!("baseline_{n}")));
        cols.extend(METRIC_NAMES.iter().map(|n| format!("{n}_ratio")));
        cols.push("total_score".into());
        cols.push("coordination_score".into());
        cols.join(",")
    }

    pub fn csv_row(&self) -> String {
        self.raw
            .as_array()
            .iter()
            .chain(&self.baseline.as_array())
            .chain(&self.ratios)
            .chain([&self.total_score, &self.coordination_score])
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join(",")
    }

    /// Aligned plain-text table.
    pub fn table(&self) -> String {
        let mut out = format!("{:<24}{:>16}{:>16}{:>10}\n", "metric", "agent", "baseline", "ratio");
        let (a, b) = (self.raw.as_array(), self.baseline.as_array());
        for i in 0..6 {
            out += &format!(
                "{:<24}{:>16.4}{:>16.4}{:>10.4}\n",
                METRIC_NAMES[i], a[i], b[i], self.ratios[i]
            );
        }
        out += &format!("{:<24}{:>42.4}\n", "coordination_score", self.coordination_score);
        out += &format!("{:<24}{:>42.4}\n", "total_score", self.total_score);
        out
    }
}

/// Marks the `m` hours of highest consumption with `+v` and every other hour
/// with `-m v / (n - m)`, so the entries sum to zero. Ties go to the earlier hour.
pub fn peak_guidance(e: &[f64], m: usize, v: f64) -> Result<GuidanceSignal> {
    let n = e.len();
    if m == 0 || m >= n {
        return Err(Error::InvalidInput(format!(
            "guidance needs 0 < m < {n} peak hours, got {m}"
        )));
    }
    if !v.is_finite() || e.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("guidance input"));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| e[j].total_cmp(&e[i]).then(i.cmp(&j)));
    // Both values are integer multiples of a power of two `q` small enough
    // that every partial sum is exact, so the entries cancel in any order.
    if v == 0.0 {
        return GuidanceSignal::new(vec![0.0; n]);
    }
    let others = (n - m) as f64;
    let q = 2f64.powi((2.0 * n as f64 * v.abs()).max(f64::MIN_POSITIVE).log2().ceil() as i32 - 52);
    let k = (v / (others * q)).round();
    let peak = others * k * q;
    let rest = -(m as f64) * k * q;
    let mut out = vec![rest; n];
    for &i in &order[..m] {
        out[i] = peak;
    }
    GuidanceSignal::new(out)
}
