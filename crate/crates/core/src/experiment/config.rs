//! Experiment configuration: JSON with defaults for every field, unknown keys
//! rejected, and `a.b.c=value` overrides applied before parsing.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::es::{CandidateCount, EsSchedule};
use crate::sim::{Mismatch, RbcTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Zoirl,
    Rbc,
    Zero,
    EsUnguided,
    Blackbox,
}

impl Mode {
    pub fn learns(self) -> bool {
        matches!(self, Mode::Zoirl | Mode::EsUnguided)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Baseline {
    Rbc,
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticSource {
    pub n_buildings: usize,
    pub n_weeks: usize,
    pub noise: f64,
    /// Seed of the generated data, independent of the run seed.
    pub seed: u64,
}

impl Default for SyntheticSource {
    fn default() -> Self {
        Self {
            n_buildings: 9,
            n_weeks: 52,
            noise: 0.1,
            seed: 2021,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum TraceSource {
    Synthetic(SyntheticSource),
    Csv(PathBuf),
}

impl Default for TraceSource {
    fn default() -> Self {
        TraceSource::Synthetic(SyntheticSource::default())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScheduleConfig {
    pub n_candidates: usize,
    pub iota1: f64,
    pub iota_decay: f64,
    pub alpha: f64,
    pub alpha_decay: f64,
    pub episodes_per_candidate: usize,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        Self {
            n_candidates: 3,
            iota1: 0.4,
            iota_decay: 2.0,
            alpha: 1.0,
            alpha_decay: 0.0,
            episodes_per_candidate: 1,
        }
    }
}

impl ScheduleConfig {
    pub fn to_schedule(&self, alpha: f64) -> EsSchedule {
        EsSchedule {
            n_candidates: CandidateCount::Fixed(self.n_candidates),
            iota1: self.iota1,
            iota_decay: self.iota_decay,
            alpha,
            alpha_decay: self.alpha_decay,
            max_iterations: usize::MAX,
            episodes_per_candidate: self.episodes_per_candidate,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ThetaConfig {
    pub lo: f64,
    pub hi: f64,
    /// Every hour starts at this price.
    pub init: f64,
}

impl Default for ThetaConfig {
    fn default() -> Self {
        Self {
            lo: 0.0,
            hi: 5.0,
            init: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GuidanceConfig {
    /// Number of peak hours raised.
    pub m: usize,
    pub v: f64,
}

impl Default for GuidanceConfig {
    fn default() -> Self {
        Self { m: 2, v: 0.02 }
    }
}

/// Device constants shared by the fleet, and the rules that size each
/// building's devices from its own trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FleetConfig {
    pub eta_ehh: f64,
    pub eta_hp_tech: f64,
    pub t_c_hp: f64,
    pub efficiency: f64,
    pub decay: f64,
    /// Storage capacity in hours of mean demand.
    pub battery_hours: f64,
    pub heat_hours: f64,
    pub cooling_hours: f64,
    /// Device power as a multiple of the largest hourly demand it serves.
    pub device_margin: f64,
    /// Grid limit as a multiple of the peak non-shiftable load.
    pub grid_cap_factor: f64,
}

impl Default for FleetConfig {
    fn default() -> Self {
        Self {
            eta_ehh: 0.9,
            eta_hp_tech: 0.22,
            t_c_hp: 8.0,
            efficiency: 0.95,
            decay: 0.008,
            battery_hours: 0.25,
            heat_hours: 1.0,
            cooling_hours: 1.0,
            device_margin: 1.5,
            grid_cap_factor: 10.0,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BuildingOverride {
    pub building_id: usize,
    pub battery_capacity: Option<f64>,
    pub heat_capacity: Option<f64>,
    pub cooling_capacity: Option<f64>,
    pub e_max_ehh: Option<f64>,
    pub e_max_hpc: Option<f64>,
    pub has_heating: Option<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestFunction {
    Quadratic,
    TwoPeak,
    Rastrigin,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BlackboxConfig {
    pub functions: Vec<TestFunction>,
    /// Half-widths of the uniform evaluation noise; 0 is noiseless.
    pub noise: Vec<f64>,
    pub iterations: usize,
    /// Generation `k` holds `min(start + k, cap)` candidates.
    pub candidates_start: usize,
    pub candidates_cap: usize,
    pub iota1: f64,
    pub iota_decay: f64,
    pub seeds: usize,
    /// Step toward the maximizer used by the guided quadratic comparison.
    pub guidance_gain: f64,
}

impl Default for BlackboxConfig {
    fn default() -> Self {
        Self {
            functions: vec![TestFunction::Quadratic, TestFunction::TwoPeak, TestFunction::Rastrigin],
            noise: vec![0.0, 0.05],
            iterations: 60,
            candidates_start: 3,
            candidates_cap: 60,
            iota1: 1.5,
            iota_decay: 1.1,
            seeds: 10,
            guidance_gain: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    /// Dotted config path to the values it takes; cells are the Cartesian product.
    pub grid: BTreeMap<String, Vec<Value>>,
    pub seeds: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            grid: BTreeMap::new(),
            seeds: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub name: String,
    pub seed: u64,
    pub mode: Mode,
    pub traces: TraceSource,
    pub schedule: ScheduleConfig,
    pub theta: ThetaConfig,
    pub guidance: GuidanceConfig,
    pub fleet: FleetConfig,
    pub buildings: Vec<BuildingOverride>,
    pub mismatch: Mismatch,
    pub baseline: Baseline,
    pub rbc_table: RbcTable,
    pub initial_soc: f64,
    pub forecast_window_days: usize,
    pub blackbox: BlackboxConfig,
    pub sweep: SweepConfig,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            name: "default".into(),
            seed: 0,
            mode: Mode::Zoirl,
            traces: TraceSource::default(),
            schedule: ScheduleConfig::default(),
            theta: ThetaConfig::default(),
            guidance: GuidanceConfig::default(),
            fleet: FleetConfig::default(),
            buildings: Vec::new(),
            mismatch: Mismatch::default(),
            baseline: Baseline::Rbc,
            rbc_table: RbcTable::default(),
            initial_soc: 0.0,
            forecast_window_days: crate::planner::DEFAULT_WINDOW_DAYS,
            blackbox: BlackboxConfig::default(),
            sweep: SweepConfig::default(),
            output_dir: PathBuf::from("out"),
        }
    }
}

fn check(problems: &mut Vec<String>, ok: bool, msg: impl FnOnce() -> String) {
    if !ok {
        problems.push(msg());
    }
}

fn finite_nonneg(v: f64) -> bool {
    v.is_finite() && v >= 0.0
}

impl ExperimentConfig {
    /// Parses a JSON document after applying `overrides`.
    pub fn from_json_str(text: &str, overrides: &[(String, Value)]) -> Result<Self> {
        let mut value: Value = serde_json::from_str(text)
            .map_err(|e| Error::Config(vec![format!("invalid JSON: {e}")]))?;
        for (path, v) in overrides {
            set_path(&mut value, path, v.clone())?;
        }
        let cfg: Self =
            serde_json::from_value(value).map_err(|e| Error::Config(vec![e.to_string()]))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path, overrides: &[(String, Value)]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text, overrides)
    }

    pub fn with_overrides(&self, overrides: &[(String, Value)]) -> Result<Self> {
        let text = serde_json::to_string(self)?;
        Self::from_json_str(&text, overrides)
    }

    pub fn to_json_pretty(&self) -> String {
        // Serializing plain data into a string cannot fail.
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Collects every violated constraint rather than stopping at the first.
    pub fn validate(&self) -> Result<()> {
        let mut p = Vec::new();
        let s = &self.schedule;
        check(&mut p, s.n_candidates >= 1, || "schedule.n_candidates must be at least 1".into());
        check(&mut p, s.iota1 > 0.0 && s.iota1.is_finite(), || {
            format!("schedule.iota1 must be positive, got {}", s.iota1)
        });
        check(&mut p, finite_nonneg(s.iota_decay), || {
            format!("schedule.iota_decay must be >= 0, got {}", s.iota_decay)
        });
        check(&mut p, finite_nonneg(s.alpha), || format!("schedule.alpha must be >= 0, got {}", s.alpha));
        check(&mut p, finite_nonneg(s.alpha_decay), || {
            format!("schedule.alpha_decay must be >= 0, got {}", s.alpha_decay)
        });
        check(&mut p, s.episodes_per_candidate >= 1, || {
            "schedule.episodes_per_candidate must be at least 1".into()
        });

        let t = &self.theta;
        check(&mut p, t.lo.is_finite() && t.hi.is_finite() && t.lo <= t.hi, || {
            format!("theta bounds must be finite with lo <= hi, got [{}, {}]", t.lo, t.hi)
        });
        check(&mut p, t.init >= t.lo && t.init <= t.hi, || {
            format!("theta.init {} lies outside [{}, {}]", t.init, t.lo, t.hi)
        });

        let g = &self.guidance;
        check(&mut p, g.m <= 24, || format!("guidance.m must be at most 24, got {}", g.m));
        check(&mut p, g.v.is_finite(), || "guidance.v must be finite".into());

        let f = &self.fleet;
        for (name, v) in [("fleet.eta_ehh", f.eta_ehh), ("fleet.efficiency", f.efficiency)] {
            check(&mut p, v > 0.0 && v <= 1.0, || format!("{name} must be in (0, 1], got {v}"));
        }
        check(&mut p, f.decay >= 0.0 && f.decay < 1.0, || {
            format!("fleet.decay must be in [0, 1), got {}", f.decay)
        });
        check(&mut p, f.eta_hp_tech > 0.0 && f.eta_hp_tech.is_finite(), || {
            format!("fleet.eta_hp_tech must be positive, got {}", f.eta_hp_tech)
        });
        check(&mut p, f.t_c_hp.is_finite(), || "fleet.t_c_hp must be finite".into());
        for (name, v) in [
            ("fleet.battery_hours", f.battery_hours),
            ("fleet.heat_hours", f.heat_hours),
            ("fleet.cooling_hours", f.cooling_hours),
        ] {
            check(&mut p, finite_nonneg(v), || format!("{name} must be >= 0, got {v}"));
        }
        check(&mut p, f.device_margin >= 1.0 && f.device_margin.is_finite(), || {
            format!("fleet.device_margin must be >= 1, got {}", f.device_margin)
        });
        check(&mut p, f.grid_cap_factor > 0.0 && f.grid_cap_factor.is_finite(), || {
            format!("fleet.grid_cap_factor must be positive, got {}", f.grid_cap_factor)
        });
        for o in &self.buildings {
            for (name, v) in [
                ("battery_capacity", o.battery_capacity),
                ("heat_capacity", o.heat_capacity),
                ("cooling_capacity", o.cooling_capacity),
                ("e_max_ehh", o.e_max_ehh),
                ("e_max_hpc", o.e_max_hpc),
            ] {
                if let Some(v) = v {
                    check(&mut p, finite_nonneg(v), || {
                        format!("buildings[{}].{name} must be >= 0, got {v}", o.building_id)
                    });
                }
            }
        }

        let m = &self.mismatch;
        check(&mut p, m.extra_decay >= 0.0 && m.extra_decay < 1.0, || {
            format!("mismatch.extra_decay must be in [0, 1), got {}", m.extra_decay)
        });
        check(&mut p, m.demand_noise >= 0.0 && m.demand_noise < 1.0, || {
            format!("mismatch.demand_noise must be in [0, 1), got {}", m.demand_noise)
        });
        if let Err(Error::Config(v)) = self.rbc_table.validate() {
            p.extend(v.into_iter().map(|s| format!("rbc_table: {s}")));
        }
        check(&mut p, (0.0..=1.0).contains(&self.initial_soc), || {
            format!("initial_soc must be in [0, 1], got {}", self.initial_soc)
        });
        check(&mut p, self.forecast_window_days >= 1, || {
            "forecast_window_days must be at least 1".into()
        });
        if let TraceSource::Synthetic(src) = &self.traces {
            check(&mut p, src.n_buildings >= 1, || "traces.synthetic.n_buildings must be at least 1".into());
            check(&mut p, src.n_weeks >= 1, || "traces.synthetic.n_weeks must be at least 1".into());
            check(&mut p, finite_nonneg(src.noise) && src.noise < 1.0, || {
                format!("traces.synthetic.noise must be in [0, 1), got {}", src.noise)
            });
        }

        let b = &self.blackbox;
        check(&mut p, b.iterations >= 1, || "blackbox.iterations must be at least 1".into());
        check(&mut p, b.candidates_start >= 1 && b.candidates_cap >= b.candidates_start, || {
            "blackbox candidate counts need 1 <= candidates_start <= candidates_cap".into()
        });
        check(&mut p, b.iota1 > 0.0 && b.iota1.is_finite(), || {
            format!("blackbox.iota1 must be positive, got {}", b.iota1)
        });
        check(&mut p, finite_nonneg(b.iota_decay), || "blackbox.iota_decay must be >= 0".into());
        check(&mut p, b.noise.iter().all(|n| finite_nonneg(*n)), || {
            "blackbox.noise entries must be >= 0".into()
        });
        check(&mut p, b.seeds >= 1, || "blackbox.seeds must be at least 1".into());
        check(&mut p, b.guidance_gain.is_finite(), || "blackbox.guidance_gain must be finite".into());
        check(&mut p, self.sweep.seeds >= 1, || "sweep.seeds must be at least 1".into());
        for (k, vals) in &self.sweep.grid {
            check(&mut p, !vals.is_empty(), || format!("sweep.grid.{k} has no values"));
        }

        if p.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(p))
        }
    }
}

/// Splits `a.b=value`; the value is read as JSON, falling back to a string.
pub fn parse_override(text: &str) -> Result<(String, Value)> {
    let (path, raw) = text
        .split_once('=')
        .ok_or_else(|| Error::Config(vec![format!("override {text:?} is not of the form key=value")]))?;
    let path = path.trim();
    if path.is_empty() || path.split('.').any(str::is_empty) {
        return Err(Error::Config(vec![format!("override {text:?} has an empty key")]));
    }
    let value = serde_json::from_str(raw.trim()).unwrap_or_else(|_| Value::String(raw.trim().to_string()));
    Ok((path.to_string(), value))
}

/// Sets `value` at a dotted path, creating intermediate objects.
pub fn set_path(root: &mut Value, path: &str, value: Value) -> Result<()> {
    let mut cur = root;
    let parts: Vec<&str> = path.split('.').collect();
    for (i, key) in parts.iter().enumerate() {
        if !cur.is_object() {
            return Err(Error::Config(vec![format!(
                "override {path}: {} is not an object",
                parts[..i].join(".")
            )]));
        }
        let obj = cur.as_object_mut().expect("checked above");
        if i + 1 == parts.len() {
            obj.insert((*key).to_string(), value);
            return Ok(());
        }
        cur = obj
            .entry((*key).to_string())
            .or_insert_with(|| Value::Object(Default::default()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        let cfg = ExperimentConfig::from_json_str("{}", &[]).unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
        assert_eq!(cfg.schedule.n_candidates, 3);
        assert_eq!(cfg.schedule.iota1, 0.4);
        assert_eq!((cfg.theta.lo, cfg.theta.hi), (0.0, 5.0));
        assert_eq!((cfg.guidance.m, cfg.guidance.v), (2, 0.02));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = ExperimentConfig::from_json_str(r#"{"schedule": {"iota": 0.1}}"#, &[]).unwrap_err();
        assert!(err.to_string().contains("unknown field"), "{err}");
        assert!(ExperimentConfig::from_json_str(r#"{"colour": 1}"#, &[]).is_err());
    }

    #[test]
    fn overrides_follow_dotted_paths() {
        let ov = [
            parse_override("schedule.iota1=0.1").unwrap(),
            parse_override("mode=rbc").unwrap(),
            parse_override("traces.synthetic.n_weeks=2").unwrap(),
        ];
        let cfg = ExperimentConfig::from_json_str("{}", &ov).unwrap();
        assert_eq!(cfg.schedule.iota1, 0.1);
        assert_eq!(cfg.mode, Mode::Rbc);
        assert_eq!(cfg.traces, TraceSource::Synthetic(SyntheticSource { n_weeks: 2, ..Default::default() }));
        assert!(parse_override("novalue").is_err());
        assert!(parse_override("a..b=1").is_err());
    }

    #[test]
    fn validation_lists_every_problem() {
        let ov = [
            parse_override("schedule.iota1=-1").unwrap(),
            parse_override("theta.lo=3").unwrap(),
            parse_override("theta.hi=2").unwrap(),
            parse_override("guidance.m=30").unwrap(),
        ];
        match ExperimentConfig::from_json_str("{}", &ov) {
            Err(Error::Config(problems)) => assert!(problems.len() >= 4, "{problems:?}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn round_trips_through_json() {
        let cfg = ExperimentConfig::default();
        let back = ExperimentConfig::from_json_str(&cfg.to_json_pretty(), &[]).unwrap();
        assert_eq!(back, cfg);
        let csv = ExperimentConfig::from_json_str(r#"{"traces": {"csv": "data/t.csv"}}"#, &[]).unwrap();
        assert_eq!(csv.traces, TraceSource::Csv(PathBuf::from("data/t.csv")));
    }
}
