//! Rolling-horizon lookahead planner for one building.
//!
//! At the start of hour `r` (1-based, within a 24-hour day) the planner
//! builds a linear program over hours `r..=24`, solves it, and returns the
//! storage actions planned for hour `r`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp::{self, LinearProgram, LpSolution, LpStatus, WarmStart};
use crate::param_space::ParamVector;

pub const HOURS_PER_DAY: usize = 24;
pub const VARS_PER_HOUR: usize = 10;
pub const DEFAULT_WINDOW_DAYS: usize = 14;
pub const COP_MIN: f64 = 1.0;
pub const COP_MAX: f64 = 20.0;

/// Column offsets inside one hour's block of variables.
pub mod col {
    pub const GRID: usize = 0;
    pub const HEAT_PUMP: usize = 1;
    pub const HEATER: usize = 2;
    pub const SOC_BAT: usize = 3;
    pub const SOC_HEAT: usize = 4;
    pub const SOC_COOL: usize = 5;
    pub const A_BAT: usize = 6;
    pub const A_HEAT: usize = 7;
    pub const A_COOL: usize = 8;
    pub const RAMP: usize = 9;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Storage {
    /// Fraction of the state of charge lost per hour.
    pub decay: f64,
    /// kWh.
    pub capacity: f64,
    pub efficiency: f64,
}

impl Storage {
    pub fn keep(&self) -> f64 {
        1.0 - self.decay
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BuildingModel {
    pub eta_ehh: f64,
    /// kW.
    pub e_max_ehh: f64,
    pub eta_hp_tech: f64,
    /// Target cooling temperature, degrees C.
    pub t_c_hp: f64,
    /// kW.
    pub e_max_hpc: f64,
    pub battery: Storage,
    pub heat: Storage,
    pub cooling: Storage,
    pub has_heating: bool,
    /// Symmetric bound on planned grid exchange, kW.
    pub grid_cap: f64,
}

impl BuildingModel {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        for (name, eta) in [
            ("eta_ehh", self.eta_ehh),
            ("battery.efficiency", self.battery.efficiency),
            ("heat.efficiency", self.heat.efficiency),
            ("cooling.efficiency", self.cooling.efficiency),
        ] {
            if !(eta > 0.0 && eta <= 1.0) {
                problems.push(format!("{name} must be in (0, 1], got {eta}"));
            }
        }
        if !(self.eta_hp_tech > 0.0) || !self.eta_hp_tech.is_finite() {
            problems.push(format!("eta_hp_tech must be positive, got {}", self.eta_hp_tech));
        }
        if !self.t_c_hp.is_finite() {
            problems.push("t_c_hp must be finite".into());
        }
        for (name, v) in [
            ("e_max_ehh", self.e_max_ehh),
            ("e_max_hpc", self.e_max_hpc),
            ("battery.capacity", self.battery.capacity),
            ("heat.capacity", self.heat.capacity),
            ("cooling.capacity", self.cooling.capacity),
            ("grid_cap", self.grid_cap),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                problems.push(format!("{name} must be a finite value >= 0, got {v}"));
            }
        }
        for (name, s) in [
            ("battery", &self.battery),
            ("heat", &self.heat),
            ("cooling", &self.cooling),
        ] {
            if !(s.decay >= 0.0 && s.decay < 1.0) {
                problems.push(format!("{name}.decay must be in [0, 1), got {}", s.decay));
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems))
        }
    }
}

/// Cooling coefficient of performance at `outdoor_temp`, clamped to `[1, 20]`.
pub fn cop_cooling(outdoor_temp: f64, model: &BuildingModel) -> f64 {
    if outdoor_temp <= model.t_c_hp {
        return COP_MAX;
    }
    let raw = model.eta_hp_tech * (model.t_c_hp + 273.15) / (outdoor_temp - model.t_c_hp);
    raw.clamp(COP_MIN, COP_MAX)
}

/// Predicted exogenous inputs for hours `r..=24`, one entry per hour.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forecast {
    pub cop_c: Vec<f64>,
    pub solar: Vec<f64>,
    pub nonshiftable: Vec<f64>,
    pub heating: Vec<f64>,
    pub cooling: Vec<f64>,
}

impl Forecast {
    pub fn len(&self) -> usize {
        self.cop_c.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cop_c.is_empty()
    }

    fn check(&self, horizon: usize) -> Result<()> {
        for s in [
            &self.cop_c,
            &self.solar,
            &self.nonshiftable,
            &self.heating,
            &self.cooling,
        ] {
            if s.len() != horizon {
                return Err(Error::DimensionMismatch {
                    context: "forecast horizon",
                    expected: horizon,
                    actual: s.len(),
                });
            }
            if s.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("forecast"));
            }
        }
        if self.cop_c.iter().any(|c| *c < COP_MIN) {
            return Err(Error::InvalidInput("forecast COP below 1".into()));
        }
        Ok(())
    }
}

/// Observed exogenous series for one building, oldest first. Index `i` is
/// absolute hour `i`.
#[derive(Debug, Clone, Copy)]
pub struct ObservedHistory<'a> {
    pub nonshiftable: &'a [f64],
    pub heating: &'a [f64],
    pub cooling: &'a [f64],
    pub solar: &'a [f64],
    pub outdoor_temp: &'a [f64],
}

fn hourly_average(series: &[f64], hour: usize, window_days: usize) -> f64 {
    let mut sum = 0.0;
    let mut n = 0usize;
    let mut h = hour;
    while n < window_days && h >= HOURS_PER_DAY {
        h -= HOURS_PER_DAY;
        if h < series.len() {
            sum += series[h];
            n += 1;
        }
    }
    if n > 0 {
        sum / n as f64
    } else {
        series.last().copied().unwrap_or(0.0)
    }
}

/// Forecasts hours `current_hour .. current_hour + horizon` (absolute) as the
/// mean of the same hour-of-day over the previous `window_days` days.
///
/// Only `history[..current_hour]` is read. With no same-hour observation the
/// most recent value is used; temperature falls back to `current_temp`.
pub fn forecast_moving_average<'a>(
    history: &ObservedHistory<'a>,
    current_hour: usize,
    horizon: usize,
    window_days: usize,
    current_temp: f64,
    model: &BuildingModel,
) -> Forecast {
    let cut = |s: &'a [f64]| -> &'a [f64] { &s[..current_hour.min(s.len())] };
    let (ns, heat, cool, solar, temp) = (
        cut(history.nonshiftable),
        cut(history.heating),
        cut(history.cooling),
        cut(history.solar),
        cut(history.outdoor_temp),
    );
    let mut f = Forecast {
        cop_c: Vec::with_capacity(horizon),
        solar: Vec::with_capacity(horizon),
        nonshiftable: Vec::with_capacity(horizon),
        heating: Vec::with_capacity(horizon),
        cooling: Vec::with_capacity(horizon),
    };
    for t in current_hour..current_hour + horizon {
        f.nonshiftable.push(hourly_average(ns, t, window_days));
        f.heating.push(hourly_average(heat, t, window_days));
        f.cooling.push(hourly_average(cool, t, window_days));
        f.solar.push(hourly_average(solar, t, window_days));
        let tt = if temp.is_empty() {
            current_temp
        } else {
            hourly_average(temp, t, window_days)
        };
        f.cop_c.push(cop_cooling(tt, model));
    }
    f
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlannerState {
    /// Hour of day being planned, 1..=24.
    pub hour: usize,
    pub soc_bat: f64,
    pub soc_heat: f64,
    pub soc_cool: f64,
    /// Net grid import observed in the previous hour, kW.
    pub prev_grid: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Action {
    pub bat: f64,
    pub heat: f64,
    pub cool: f64,
}

impl Action {
    pub const ZERO: Action = Action {
        bat: 0.0,
        heat: 0.0,
        cool: 0.0,
    };

    pub fn uniform(a: f64) -> Self {
        Action {
            bat: a,
            heat: a,
            cool: a,
        }
    }
}

pub fn horizon(hour: usize) -> usize {
    HOURS_PER_DAY + 1 - hour
}

/// Column index of variable `offset` (see [`col`]) at plan step `k` (0 = hour r).
pub fn var(k: usize, offset: usize) -> usize {
    k * VARS_PER_HOUR + offset
}

/// Builds the lookahead program for `state.hour` through hour 24.
///
/// Per plan hour there are 10 variables, 6 equality rows (three balances,
/// three state-of-charge recursions) and 2 inequality rows bounding the
/// ramp auxiliary from below by `|E_grid_t - E_grid_{t-1}|`. The program
/// maximizes `-sum(ramp_t + theta_{hour(t)} * E_grid_t)`.
pub fn build_lookahead_lp(
    state: &PlannerState,
    forecast: &Forecast,
    theta: &ParamVector,
    model: &BuildingModel,
) -> Result<LinearProgram> {
    if !(1..=HOURS_PER_DAY).contains(&state.hour) {
        return Err(Error::InvalidInput(format!(
            "planner hour must be in 1..=24, got {}",
            state.hour
        )));
    }
    if theta.len() != HOURS_PER_DAY {
        return Err(Error::DimensionMismatch {
            context: "theta",
            expected: HOURS_PER_DAY,
            actual: theta.len(),
        });
    }
    if theta.values().iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteParameter);
    }
    let h = horizon(state.hour);
    forecast.check(h)?;
    for v in [state.soc_bat, state.soc_heat, state.soc_cool, state.prev_grid] {
        if !v.is_finite() {
            return Err(Error::NonFinite("planner state"));
        }
    }

    let mut lp = LinearProgram::new();
    lp.objective.reserve(VARS_PER_HOUR * h);
    let heat_hi = if model.has_heating { 1.0 } else { 0.0 };
    for k in 0..h {
        let price = theta.values()[state.hour - 1 + k];
        lp.add_var(-model.grid_cap, model.grid_cap, -price);
        lp.add_var(0.0, model.e_max_hpc, 0.0);
        lp.add_var(0.0, model.e_max_ehh * heat_hi, 0.0);
        for _ in 0..3 {
            lp.add_var(0.0, 1.0, 0.0);
        }
        lp.add_var(-1.0, 1.0, 0.0);
        lp.add_var(-heat_hi, heat_hi, 0.0);
        lp.add_var(-1.0, 1.0, 0.0);
        lp.add_var(0.0, f64::INFINITY, -1.0);
    }

    let stores = [
        (col::SOC_BAT, col::A_BAT, &model.battery, state.soc_bat),
        (col::SOC_HEAT, col::A_HEAT, &model.heat, state.soc_heat),
        (col::SOC_COOL, col::A_COOL, &model.cooling, state.soc_cool),
    ];
    for k in 0..h {
        let v = |o| var(k, o);
        lp.add_eq(
            &[
                (v(col::GRID), 1.0),
                (v(col::HEAT_PUMP), -1.0),
                (v(col::HEATER), -1.0),
                (v(col::A_BAT), -model.battery.capacity),
            ],
            forecast.nonshiftable[k] - forecast.solar[k],
        );
        let heat_demand = if model.has_heating {
            forecast.heating[k]
        } else {
            0.0
        };
        lp.add_eq(
            &[
                (v(col::HEATER), model.eta_ehh),
                (v(col::A_HEAT), -model.heat.capacity),
            ],
            heat_demand,
        );
        lp.add_eq(
            &[
                (v(col::HEAT_PUMP), forecast.cop_c[k]),
                (v(col::A_COOL), -model.cooling.capacity),
            ],
            forecast.cooling[k],
        );
        for (soc, act, s, soc0) in stores {
            if k == 0 {
                lp.add_eq(&[(v(soc), 1.0), (v(act), -s.efficiency)], s.keep() * soc0);
            } else {
                lp.add_eq(
                    &[
                        (v(soc), 1.0),
                        (var(k - 1, soc), -s.keep()),
                        (v(act), -s.efficiency),
                    ],
                    0.0,
                );
            }
        }
        if k == 0 {
            lp.add_le(&[(v(col::GRID), 1.0), (v(col::RAMP), -1.0)], state.prev_grid);
            lp.add_le(&[(v(col::GRID), -1.0), (v(col::RAMP), -1.0)], -state.prev_grid);
        } else {
            let g0 = var(k - 1, col::GRID);
            lp.add_le(
                &[(v(col::GRID), 1.0), (g0, -1.0), (v(col::RAMP), -1.0)],
                0.0,
            );
            lp.add_le(
                &[(v(col::GRID), -1.0), (g0, 1.0), (v(col::RAMP), -1.0)],
                0.0,
            );
        }
    }
    Ok(lp)
}

/// Columns that are basic in the "storage idle" plan: everything except the
/// three actions is then determined by the equality rows and one ramp row.
pub fn crash_hint(num_vars: usize) -> Vec<usize> {
    (0..num_vars / VARS_PER_HOUR)
        .flat_map(|k| {
            [
                col::GRID,
                col::HEAT_PUMP,
                col::HEATER,
                col::SOC_BAT,
                col::SOC_HEAT,
                col::SOC_COOL,
                col::RAMP,
            ]
            .map(|c| var(k, c))
        })
        .collect()
}

/// Maps a basis of the `h`-hour program onto the `h - 1`-hour program that
/// follows it, dropping everything that belongs to the first hour.
fn shift_basis(basis: &[usize], h: usize) -> Vec<usize> {
    let n_old = VARS_PER_HOUR * h;
    let n_new = n_old - VARS_PER_HOUR;
    let ineq_old = 2 * h;
    basis
        .iter()
        .filter_map(|&c| {
            if c < n_old {
                c.checked_sub(VARS_PER_HOUR)
            } else {
                let row = c - n_old;
                if row < ineq_old {
                    row.checked_sub(2).map(|r| n_new + r)
                } else {
                    (row - ineq_old)
                        .checked_sub(6)
                        .map(|r| n_new + (ineq_old - 2) + r)
                }
            }
        })
        .collect()
}

/// The first-hour action of a solved plan.
pub fn first_action(x: &[f64]) -> Action {
    Action {
        bat: x[col::A_BAT].clamp(-1.0, 1.0),
        heat: x[col::A_HEAT].clamp(-1.0, 1.0),
        cool: x[col::A_COOL].clamp(-1.0, 1.0),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanOutcome {
    pub action: Action,
    /// Set when the program was infeasible and the zero action was returned.
    pub infeasible: bool,
    pub solution: LpSolution,
}

/// Solves the lookahead program and returns the action for `state.hour`.
pub fn plan(
    state: &PlannerState,
    forecast: &Forecast,
    theta: &ParamVector,
    model: &BuildingModel,
) -> Result<PlanOutcome> {
    let lp = build_lookahead_lp(state, forecast, theta, model)?;
    let start = WarmStart {
        basis: crash_hint(lp.num_vars()),
        values: Vec::new(),
    };
    solve_plan(&lp, state.hour, &start)
}

fn solve_plan(lp: &LinearProgram, hour: usize, start: &WarmStart) -> Result<PlanOutcome> {
    let solution = lp::solve_warm(lp, lp::DEFAULT_TOLERANCE, start)?;
    match solution.status {
        LpStatus::Optimal => Ok(PlanOutcome {
            action: first_action(&solution.x),
            infeasible: false,
            solution,
        }),
        LpStatus::Infeasible => Ok(PlanOutcome {
            action: Action::ZERO,
            infeasible: true,
            solution,
        }),
        LpStatus::Unbounded => Err(Error::UnboundedPlan { hour }),
    }
}

/// Rolling-horizon planner that warm-starts each solve from the previous
/// hour's plan (or, at hour 1, from the previous day's first plan).
///
/// The returned actions are optimal for the same programs as [`plan`]; when
/// a program has several optima the one reached can depend on the start.
#[derive(Debug, Clone, Default)]
pub struct RollingPlanner {
    previous: Option<(usize, Vec<f64>, Vec<usize>)>,
    day_start: Option<(Vec<f64>, Vec<usize>)>,
}

impl RollingPlanner {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn plan(
        &mut self,
        state: &PlannerState,
        forecast: &Forecast,
        theta: &ParamVector,
        model: &BuildingModel,
    ) -> Result<PlanOutcome> {
        let lp = build_lookahead_lp(state, forecast, theta, model)?;
        let n = lp.num_vars();
        let start = match (&self.previous, &self.day_start) {
            (Some((h, x, basis)), _) if *h + 1 == state.hour => WarmStart {
                basis: shift_basis(basis, horizon(*h)),
                values: x[VARS_PER_HOUR..].to_vec(),
            },
            (_, Some((x, basis))) if state.hour == 1 => WarmStart {
                basis: basis.clone(),
                values: x.clone(),
            },
            _ => WarmStart {
                basis: crash_hint(n),
                values: Vec::new(),
            },
        };
        let out = solve_plan(&lp, state.hour, &start)?;
        if out.infeasible {
            self.previous = None;
        } else {
            let sol = &out.solution;
            self.previous = Some((state.hour, sol.x.clone(), sol.basic_columns.clone()));
            if state.hour == 1 {
                self.day_start = Some((sol.x.clone(), sol.basic_columns.clone()));
            }
        }
        Ok(out)
    }
}

pub fn policy_action(
    state: &PlannerState,
    forecast: &Forecast,
    theta: &ParamVector,
    model: &BuildingModel,
) -> Result<Action> {
    Ok(plan(state, forecast, theta, model)?.action)
}
