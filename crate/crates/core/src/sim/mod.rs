//! Multi-building storage microgrid: hourly device dynamics, rewards,
//! 24-hour episodes and the rule-based baseline controller.
//!
//! The device equations are those of the planner's model. Storage actions
//! that would push a state of charge out of `[0, 1]` or exceed a device's
//! nominal power are clipped, and thermal demand the devices cannot cover is
//! recorded as unmet.

mod csv_io;
mod synthetic;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::planner::{cop_cooling, Action, BuildingModel, Storage, HOURS_PER_DAY};

pub use csv_io::{load_traces_csv, write_traces_csv, TRACE_COLUMNS};
pub use synthetic::{generate_synthetic_traces, SyntheticSpec};

/// Changes smaller than this are not reported as clipping.
const CLIP_EPS: f64 = 1e-12;

/// Hourly exogenous series of one building. Index `i` is absolute hour `i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildingTrace {
    pub building_id: usize,
    /// kW.
    pub nonshiftable: Vec<f64>,
    /// Domestic hot water demand, kW thermal.
    pub dhw: Vec<f64>,
    /// kW thermal.
    pub cooling: Vec<f64>,
    /// kW.
    pub solar: Vec<f64>,
    pub outdoor_temp: Vec<f64>,
    /// kg CO2 per kWh.
    pub carbon: Vec<f64>,
}

impl BuildingTrace {
    pub fn len(&self) -> usize {
        self.nonshiftable.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nonshiftable.is_empty()
    }

    /// True when the building has any hot water demand.
    pub fn has_heating(&self) -> bool {
        self.dhw.iter().any(|v| *v > 0.0)
    }

    fn columns(&self) -> [(&'static str, &Vec<f64>); 6] {
        [
            ("nonshiftable_kw", &self.nonshiftable),
            ("dhw_kw", &self.dhw),
            ("cooling_kw", &self.cooling),
            ("solar_kw", &self.solar),
            ("outdoor_temp_c", &self.outdoor_temp),
            ("carbon_kg_per_kwh", &self.carbon),
        ]
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.len();
        for (name, s) in self.columns() {
            if s.len() != n {
                return Err(Error::InvalidInput(format!(
                    "building {}: {name} has {} hours, expected {n}",
                    self.building_id,
                    s.len()
                )));
            }
            if let Some(t) = s.iter().position(|v| !v.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "building {}: {name} is not finite at hour {t}",
                    self.building_id
                )));
            }
        }
        for (name, s) in &self.columns()[..4] {
            if let Some(t) = s.iter().position(|v| *v < 0.0) {
                return Err(Error::InvalidInput(format!(
                    "building {}: {name} is negative at hour {t}",
                    self.building_id
                )));
            }
        }
        Ok(())
    }
}

/// Checks that every trace is valid and all share one length.
pub fn validate_traces(traces: &[BuildingTrace]) -> Result<usize> {
    let first = traces
        .first()
        .ok_or_else(|| Error::InvalidInput("no building traces".into()))?;
    for t in traces {
        t.validate()?;
        if t.len() != first.len() {
            return Err(Error::InvalidInput(format!(
                "building {} has {} hours but building {} has {}",
                t.building_id,
                t.len(),
                first.building_id,
                first.len()
            )));
        }
    }
    Ok(first.len())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct DeviceState {
    pub soc_bat: f64,
    pub soc_heat: f64,
    pub soc_cool: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvState {
    /// Absolute hour about to be simulated.
    pub t: usize,
    pub devices: Vec<DeviceState>,
    /// Net consumption of each building in the previous hour, kW.
    pub prev_e: Vec<f64>,
}

impl EnvState {
    pub fn new(n_buildings: usize, initial: DeviceState) -> Self {
        Self {
            t: 0,
            devices: vec![initial; n_buildings],
            prev_e: vec![0.0; n_buildings],
        }
    }

    /// Hour of day of `t`, 1..=24.
    pub fn hour_of_day(&self) -> usize {
        self.t % HOURS_PER_DAY + 1
    }
}

/// Deliberate differences between the simulator and the planner's model.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Mismatch {
    /// Storage decay per hour added on top of the model's.
    #[serde(default)]
    pub extra_decay: f64,
    /// Relative amplitude of uniform noise on the demands the agent observes.
    #[serde(default)]
    pub demand_noise: f64,
}

/// What happened in one building during one hour.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BuildingStep {
    pub requested: Action,
    pub applied: Action,
    pub clipped: bool,
    pub nonshiftable: f64,
    /// Heat pump electricity, kW.
    pub heat_pump: f64,
    /// Electric heater electricity, kW.
    pub heater: f64,
    /// Battery charging power (negative when discharging), kW.
    pub battery: f64,
    pub solar: f64,
    pub unmet_heat: f64,
    pub unmet_cool: f64,
    /// Net consumption, kW.
    pub e: f64,
    pub reward: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub hour: usize,
    pub buildings: Vec<BuildingStep>,
    /// District net consumption.
    pub e: f64,
    pub reward: f64,
}

/// Per-step reward `-max(0, e)^3`.
pub fn reward(e: f64) -> f64 {
    -e.max(0.0).powi(3)
}

/// Feasible action range for a storage with state `soc` and hourly retention `keep`.
fn soc_range(s: &Storage, soc: f64, keep: f64) -> (f64, f64) {
    let base = keep * soc;
    (
        ((0.0 - base) / s.efficiency).max(-1.0),
        ((1.0 - base) / s.efficiency).min(1.0),
    )
}

struct Thermal {
    action: f64,
    electricity: f64,
    unmet: f64,
    soc: f64,
}

/// Resolves a thermal storage action against demand `demand` served by a
/// device converting electricity at rate `gain` up to `e_max`.
fn thermal(s: &Storage, soc: f64, keep: f64, requested: f64, demand: f64, gain: f64, e_max: f64) -> Thermal {
    let q_max = gain * e_max;
    if s.capacity <= 0.0 {
        let unmet = (demand - q_max).max(0.0);
        return Thermal {
            action: 0.0,
            electricity: (demand - unmet) / gain,
            unmet,
            soc: (keep * soc).clamp(0.0, 1.0),
        };
    }
    let (lo_s, hi_s) = soc_range(s, soc, keep);
    let lo = lo_s.max(-demand / s.capacity);
    let hi = hi_s.min((q_max - demand) / s.capacity);
    let (action, unmet) = if lo <= hi {
        (requested.clamp(lo, hi), 0.0)
    } else {
        // Even the largest discharge leaves the device short.
        let a = lo_s;
        (a, (a * s.capacity + demand - q_max).max(0.0))
    };
    let q = (action * s.capacity + demand - unmet).clamp(0.0, q_max);
    Thermal {
        action,
        electricity: q / gain,
        unmet,
        soc: (keep * soc + s.efficiency * action).clamp(0.0, 1.0),
    }
}

fn retention(s: &Storage, extra_decay: f64) -> f64 {
    (1.0 - s.decay - extra_decay).max(0.0)
}

/// Advances every building by one hour.
pub fn step(
    env: &EnvState,
    actions: &[Action],
    traces: &[BuildingTrace],
    models: &[BuildingModel],
    mismatch: &Mismatch,
) -> Result<(EnvState, StepOutcome)> {
    let n = env.devices.len();
    if actions.len() != n || traces.len() != n || models.len() != n {
        return Err(Error::DimensionMismatch {
            context: "simulator step",
            expected: n,
            actual: if actions.len() != n { actions.len() } else if traces.len() != n { traces.len() } else { models.len() },
        });
    }
    let t = env.t;
    let mut next = env.clone();
    let mut buildings = Vec::with_capacity(n);
    for b in 0..n {
        let (tr, m, dev, req) = (&traces[b], &models[b], &env.devices[b], actions[b]);
        if t >= tr.len() {
            return Err(Error::InvalidInput(format!(
                "hour {t} is past the end of building {}'s trace",
                tr.building_id
            )));
        }
        if [req.bat, req.heat, req.cool].iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("storage action"));
        }

        let keep_bat = retention(&m.battery, mismatch.extra_decay);
        let (bat, soc_bat) = if m.battery.capacity > 0.0 {
            let (lo, hi) = soc_range(&m.battery, dev.soc_bat, keep_bat);
            let a = req.bat.clamp(lo, hi);
            (a, (keep_bat * dev.soc_bat + m.battery.efficiency * a).clamp(0.0, 1.0))
        } else {
            (0.0, (keep_bat * dev.soc_bat).clamp(0.0, 1.0))
        };

        let heat_demand = if m.has_heating { tr.dhw[t] } else { 0.0 };
        let heat = if m.has_heating {
            thermal(
                &m.heat,
                dev.soc_heat,
                retention(&m.heat, mismatch.extra_decay),
                req.heat,
                heat_demand,
                m.eta_ehh,
                m.e_max_ehh,
            )
        } else {
            Thermal {
                action: 0.0,
                electricity: 0.0,
                unmet: 0.0,
                soc: (retention(&m.heat, mismatch.extra_decay) * dev.soc_heat).clamp(0.0, 1.0),
            }
        };
        let cop = cop_cooling(tr.outdoor_temp[t], m);
        let cool = thermal(
            &m.cooling,
            dev.soc_cool,
            retention(&m.cooling, mismatch.extra_decay),
            req.cool,
            tr.cooling[t],
            cop,
            m.e_max_hpc,
        );

        let applied = Action {
            bat,
            heat: heat.action,
            cool: cool.action,
        };
        // Actions addressed to a device the building lacks are ignored.
        let clipped = (m.battery.capacity > 0.0 && (applied.bat - req.bat).abs() > CLIP_EPS)
            || (m.has_heating && m.heat.capacity > 0.0 && (applied.heat - req.heat).abs() > CLIP_EPS)
            || (m.cooling.capacity > 0.0 && (applied.cool - req.cool).abs() > CLIP_EPS);
        let battery = bat * m.battery.capacity;
        let e = tr.nonshiftable[t] + cool.electricity + heat.electricity + battery - tr.solar[t];
        next.devices[b] = DeviceState {
            soc_bat,
            soc_heat: heat.soc,
            soc_cool: cool.soc,
        };
        next.prev_e[b] = e;
        buildings.push(BuildingStep {
            requested: req,
            applied,
            clipped,
            nonshiftable: tr.nonshiftable[t],
            heat_pump: cool.electricity,
            heater: heat.electricity,
            battery,
            solar: tr.solar[t],
            unmet_heat: heat.unmet,
            unmet_cool: cool.unmet,
            e,
            reward: reward(e),
        });
    }
    let e: f64 = buildings.iter().map(|s| s.e).sum();
    next.t = t + 1;
    Ok((
        next,
        StepOutcome {
            hour: t,
            buildings,
            e,
            reward: reward(e),
        },
    ))
}

/// Hour-of-day table applied to all three storages of every building.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RbcTable(pub Vec<f64>);

impl Default for RbcTable {
    /// Charge overnight (hours 23 to 8), discharge in the day (9 to 21).
    fn default() -> Self {
        Self(
            (1..=HOURS_PER_DAY)
                .map(|h| match h {
                    1..=8 | 23..=24 => 0.08,
                    9..=21 => -0.08,
                    _ => 0.0,
                })
                .collect(),
        )
    }
}

impl RbcTable {
    pub fn validate(&self) -> Result<()> {
        if self.0.len() != HOURS_PER_DAY {
            return Err(Error::DimensionMismatch {
                context: "rule-based action table",
                expected: HOURS_PER_DAY,
                actual: self.0.len(),
            });
        }
        if self.0.iter().any(|a| !(-1.0..=1.0).contains(a)) {
            return Err(Error::InvalidInput("rule-based actions must lie in [-1, 1]".into()));
        }
        Ok(())
    }
}

/// The rule-based action for `hour` (1..=24).
pub fn rbc_policy(hour: usize, table: &RbcTable) -> Action {
    Action::uniform(table.0[(hour + HOURS_PER_DAY - 1) % HOURS_PER_DAY])
}

/// Everything observed during one 24-hour episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeTrace {
    pub start_hour: usize,
    /// Device states at the start of each hour.
    pub states: Vec<Vec<DeviceState>>,
    pub steps: Vec<StepOutcome>,
}

impl EpisodeTrace {
    /// Net consumption of building `b`, hour by hour.
    pub fn building_e(&self, b: usize) -> Vec<f64> {
        self.steps.iter().map(|s| s.buildings[b].e).collect()
    }

    pub fn district_e(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.e).collect()
    }

    pub fn building_reward(&self, b: usize) -> f64 {
        self.steps.iter().map(|s| s.buildings[b].reward).sum()
    }

    pub fn reward(&self) -> f64 {
        self.steps.iter().map(|s| s.reward).sum()
    }
}

/// Runs 24 hours from `env.t`. The environment carries over to the next
/// episode; nothing is reset.
pub fn run_episode<P>(
    env: &EnvState,
    mut policy: P,
    traces: &[BuildingTrace],
    models: &[BuildingModel],
    mismatch: &Mismatch,
) -> Result<(EnvState, EpisodeTrace, f64)>
where
    P: FnMut(&EnvState) -> Result<Vec<Action>>,
{
    let mut env = env.clone();
    let mut trace = EpisodeTrace {
        start_hour: env.t,
        states: Vec::with_capacity(HOURS_PER_DAY),
        steps: Vec::with_capacity(HOURS_PER_DAY),
    };
    for _ in 0..HOURS_PER_DAY {
        let actions = policy(&env)?;
        let (next, out) = step(&env, &actions, traces, models, mismatch)?;
        trace.states.push(env.devices.clone());
        trace.steps.push(out);
        env = next;
    }
    let r = trace.reward();
    Ok((env, trace, r))
}

#[cfg(test)]
mod tests;
