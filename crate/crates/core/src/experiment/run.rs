//! The online district run: every building acts each hour, each learning
//! building evaluates one candidate per day and updates its search after
//! `N_k` consecutive days.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::es::{init_state, EsSchedule, EsState};
use crate::metrics::{peak_guidance, score_ratios, MetricReport, RawMetrics};
use crate::param_space::{BoxDomain, GuidanceSignal, ParamVector};
use crate::planner::{
    forecast_moving_average, horizon, Action, BuildingModel, ObservedHistory, PlannerState,
    RollingPlanner, HOURS_PER_DAY,
};
use crate::sim::{
    generate_synthetic_traces, load_traces_csv, rbc_policy, run_episode, validate_traces,
    BuildingTrace, DeviceState, EnvState, EpisodeTrace, RbcTable, SyntheticSpec,
};

use super::config::{Baseline, ExperimentConfig, Mode, TraceSource};
use super::fleet::build_fleet;
use super::outputs::{CurveRow, EventRow, RunOutputs, ThetaRow, DISTRICT};

pub fn load_traces(cfg: &ExperimentConfig) -> Result<Vec<BuildingTrace>> {
    let traces = match &cfg.traces {
        TraceSource::Synthetic(s) => {
            let spec = SyntheticSpec {
                n_buildings: s.n_buildings,
                n_weeks: s.n_weeks,
                noise: s.noise,
            };
            generate_synthetic_traces(&spec, s.seed)
        }
        TraceSource::Csv(path) => load_traces_csv(path)?,
    };
    let hours = validate_traces(&traces)?;
    if hours < HOURS_PER_DAY || hours % HOURS_PER_DAY != 0 {
        return Err(Error::InvalidInput(format!(
            "traces must cover a whole number of days, got {hours} hours"
        )));
    }
    Ok(traces)
}

/// Demand series as the agent sees them, with the configured observation noise.
struct Observed {
    nonshiftable: Vec<f64>,
    dhw: Vec<f64>,
    cooling: Vec<f64>,
}

fn observe(traces: &[BuildingTrace], noise: f64, rng: &mut ChaCha8Rng) -> Vec<Observed> {
    let mut jitter = |v: f64| {
        if noise > 0.0 {
            v * (1.0 + rng.gen_range(-noise..=noise))
        } else {
            v
        }
    };
    traces
        .iter()
        .map(|t| Observed {
            nonshiftable: t.nonshiftable.iter().map(|v| jitter(*v)).collect(),
            dhw: t.dhw.iter().map(|v| jitter(*v)).collect(),
            cooling: t.cooling.iter().map(|v| jitter(*v)).collect(),
        })
        .collect()
}

struct Context<'a> {
    cfg: &'a ExperimentConfig,
    traces: &'a [BuildingTrace],
    models: &'a [BuildingModel],
    observed: Vec<Observed>,
}

enum Policy<'p> {
    Table(&'p RbcTable),
    Zero,
    Planner(&'p [ParamVector]),
}

fn run_day(
    ctx: &Context,
    env: &EnvState,
    policy: Policy,
    planners: &mut [RollingPlanner],
) -> Result<(EnvState, EpisodeTrace, Vec<usize>)> {
    let n = ctx.traces.len();
    let mut infeasible = vec![0usize; n];
    let (next, trace, _) = run_episode(
        env,
        |env: &EnvState| -> Result<Vec<Action>> {
            let hour = env.hour_of_day();
            match &policy {
                Policy::Table(t) => Ok(vec![rbc_policy(hour, t); n]),
                Policy::Zero => Ok(vec![Action::ZERO; n]),
                Policy::Planner(thetas) => {
                    let outcomes: Vec<Result<(Action, bool)>> = planners
                        .par_iter_mut()
                        .enumerate()
                        .map(|(b, planner)| {
                            let (tr, obs, model) = (&ctx.traces[b], &ctx.observed[b], &ctx.models[b]);
                            let history = ObservedHistory {
                                nonshiftable: &obs.nonshiftable,
                                heating: &obs.dhw,
                                cooling: &obs.cooling,
                                solar: &tr.solar,
                                outdoor_temp: &tr.outdoor_temp,
                            };
                            let forecast = forecast_moving_average(
                                &history,
                                env.t,
                                horizon(hour),
                                ctx.cfg.forecast_window_days,
                                tr.outdoor_temp[env.t.saturating_sub(1)],
                                model,
                            );
                            let dev = env.devices[b];
                            let state = PlannerState {
                                hour,
                                soc_bat: dev.soc_bat,
                                soc_heat: dev.soc_heat,
                                soc_cool: dev.soc_cool,
                                prev_grid: env.prev_e[b],
                            };
                            let out = planner.plan(&state, &forecast, &thetas[b], model)?;
                            Ok((out.action, out.infeasible))
                        })
                        .collect();
                    let mut actions = Vec::with_capacity(n);
                    for (b, o) in outcomes.into_iter().enumerate() {
                        let (a, bad) = o?;
                        infeasible[b] += bad as usize;
                        actions.push(a);
                    }
                    Ok(actions)
                }
            }
        },
        ctx.traces,
        ctx.models,
        &ctx.cfg.mismatch,
    )?;
    Ok((next, trace, infeasible))
}

/// Net consumption series of a whole run.
#[derive(Debug, Clone, PartialEq)]
pub struct SpanSeries {
    pub buildings: Vec<Vec<f64>>,
    pub district: Vec<f64>,
}

impl SpanSeries {
    fn new(n: usize, hours: usize) -> Self {
        Self {
            buildings: vec![Vec::with_capacity(hours); n],
            district: Vec::with_capacity(hours),
        }
    }

    fn push(&mut self, trace: &EpisodeTrace) {
        for s in &trace.steps {
            for (b, bs) in s.buildings.iter().enumerate() {
                self.buildings[b].push(bs.e);
            }
            self.district.push(s.e);
        }
    }
}

fn initial_env(cfg: &ExperimentConfig, n: usize) -> EnvState {
    let s = cfg.initial_soc;
    EnvState::new(
        n,
        DeviceState {
            soc_bat: s,
            soc_heat: s,
            soc_cool: s,
        },
    )
}

fn baseline_series(ctx: &Context, baseline: Baseline) -> Result<SpanSeries> {
    let n = ctx.traces.len();
    let hours = ctx.traces[0].len();
    let mut env = initial_env(ctx.cfg, n);
    let mut series = SpanSeries::new(n, hours);
    let mut planners = Vec::new();
    for _ in 0..hours / HOURS_PER_DAY {
        let policy = match baseline {
            Baseline::Rbc => Policy::Table(&ctx.cfg.rbc_table),
            Baseline::Zero => Policy::Zero,
        };
        let (next, trace, _) = run_day(ctx, &env, policy, &mut planners)?;
        series.push(&trace);
        env = next;
    }
    Ok(series)
}

/// Ratio report over the first `len` hours, or `None` when the baseline
/// metric vanishes on that prefix.
fn prefix_report(agent: &[f64], base: &[f64], intensity: &[f64], len: usize) -> Result<Option<MetricReport>> {
    let a = RawMetrics::compute(&agent[..len], &intensity[..len])?;
    let b = RawMetrics::compute(&base[..len], &intensity[..len])?;
    Ok(score_ratios(&a, &b).ok())
}

struct Learner {
    state: EsState,
    rng: ChaCha8Rng,
    slot: usize,
    episodes: usize,
    reward_acc: f64,
    guidance_acc: Vec<GuidanceSignal>,
    rewards: Vec<f64>,
    guidance: Vec<GuidanceSignal>,
}

impl Learner {
    fn theta(&self) -> &ParamVector {
        &self.state.candidates[self.slot]
    }

    /// Records one day for the current candidate; returns true when the
    /// generation is complete and the search was updated.
    fn record(
        &mut self,
        reward: f64,
        guidance: GuidanceSignal,
        domain: &BoxDomain,
        schedule: &EsSchedule,
    ) -> Result<bool> {
        self.reward_acc += reward;
        self.guidance_acc.push(guidance);
        self.episodes += 1;
        if self.episodes < schedule.episodes_per_candidate {
            return Ok(false);
        }
        let e = self.episodes as f64;
        self.rewards.push(self.reward_acc / e);
        self.guidance.push(GuidanceSignal::mean(&self.guidance_acc)?);
        self.reward_acc = 0.0;
        self.guidance_acc.clear();
        self.episodes = 0;
        self.slot += 1;
        if self.slot < self.state.candidates.len() {
            return Ok(false);
        }
        let rewards = std::mem::take(&mut self.rewards);
        let guidance = std::mem::take(&mut self.guidance);
        self.state.tell(rewards, guidance, domain, schedule, &mut self.rng)?;
        self.slot = 0;
        Ok(true)
    }
}

fn curve_row(
    iteration: usize,
    day: usize,
    building: String,
    best: f64,
    mean: f64,
    report: Option<MetricReport>,
) -> CurveRow {
    let (ratios, total) = match report {
        Some(r) => (r.ratios, r.total_score),
        None => ([f64::NAN; 6], f64::NAN),
    };
    CurveRow {
        iteration,
        week: day / 7 + 1,
        building_id: building,
        best_reward: best,
        mean_reward: mean,
        ratios,
        total_score: total,
    }
}

/// Runs one district simulation in the configured mode and scores it
/// against the configured baseline.
pub fn run_district(cfg: &ExperimentConfig) -> Result<RunOutputs> {
    cfg.validate()?;
    if cfg.mode == Mode::Blackbox {
        return Err(Error::InvalidInput("blackbox mode has no district run".into()));
    }
    let traces = load_traces(cfg)?;
    let models = build_fleet(&traces, &cfg.fleet, &cfg.buildings)?;
    let n = traces.len();
    let hours = traces[0].len();
    let days = hours / HOURS_PER_DAY;

    let mut master = ChaCha8Rng::seed_from_u64(cfg.seed);
    let learner_seeds: Vec<u64> = (0..n).map(|_| master.gen()).collect();
    let mut obs_rng = ChaCha8Rng::seed_from_u64(master.gen());
    let ctx = Context {
        cfg,
        traces: &traces,
        models: &models,
        observed: observe(&traces, cfg.mismatch.demand_noise, &mut obs_rng),
    };

    let base = baseline_series(&ctx, cfg.baseline)?;
    let district_intensity = &traces[0].carbon;

    let alpha = if cfg.mode == Mode::EsUnguided { 0.0 } else { cfg.schedule.alpha };
    let schedule = cfg.schedule.to_schedule(alpha);
    let domain = BoxDomain::uniform(HOURS_PER_DAY, cfg.theta.lo, cfg.theta.hi)?;
    let z0 = ParamVector::new(vec![cfg.theta.init; HOURS_PER_DAY]);
    let mut learners = Vec::new();
    if cfg.mode.learns() {
        for seed in &learner_seeds {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let state = init_state(&z0, &domain, &schedule, &mut rng)?;
            learners.push(Learner {
                state,
                rng,
                slot: 0,
                episodes: 0,
                reward_acc: 0.0,
                guidance_acc: Vec::new(),
                rewards: Vec::new(),
                guidance: Vec::new(),
            });
        }
    }

    let mut planners = vec![RollingPlanner::new(); n];
    let mut env = initial_env(cfg, n);
    let mut series = SpanSeries::new(n, hours);
    let mut curve = Vec::new();
    let mut events = Vec::new();
    let mut week_rewards = vec![Vec::new(); n];

    for day in 0..days {
        let thetas: Vec<ParamVector> = learners.iter().map(|l| l.theta().clone()).collect();
        let policy = match cfg.mode {
            Mode::Rbc => Policy::Table(&cfg.rbc_table),
            Mode::Zero => Policy::Zero,
            _ => Policy::Planner(&thetas),
        };
        let (next, trace, infeasible) = run_day(&ctx, &env, policy, &mut planners)?;
        series.push(&trace);
        env = next;
        let len = series.district.len();

        let mut clipped = vec![0usize; n];
        let mut unmet = vec![(0.0, 0.0); n];
        for s in &trace.steps {
            for (b, bs) in s.buildings.iter().enumerate() {
                clipped[b] += bs.clipped as usize;
                unmet[b].0 += bs.unmet_heat;
                unmet[b].1 += bs.unmet_cool;
            }
        }
        for b in 0..n {
            if clipped[b] > 0 || infeasible[b] > 0 || unmet[b].0 > 0.0 || unmet[b].1 > 0.0 {
                events.push(EventRow {
                    day: day + 1,
                    building_id: traces[b].building_id,
                    clipped_hours: clipped[b],
                    infeasible_plans: infeasible[b],
                    unmet_heat_kwh: unmet[b].0,
                    unmet_cool_kwh: unmet[b].1,
                });
            }
        }

        if cfg.mode.learns() {
            let mut updated = Vec::with_capacity(n);
            for (b, l) in learners.iter_mut().enumerate() {
                let e = trace.building_e(b);
                let g = peak_guidance(&e, cfg.guidance.m, cfg.guidance.v)?;
                updated.push(l.record(trace.building_reward(b), g, &domain, &schedule)?);
            }
            // Every building shares the cadence, so they update on the same day.
            if updated.iter().any(|u| *u) {
                let (mut best_sum, mut mean_sum) = (0.0, 0.0);
                for (b, l) in learners.iter().enumerate() {
                    let last = l.state.history.last().expect("just updated");
                    let best = l.state.best.as_ref().map_or(f64::NAN, |(_, r)| *r);
                    best_sum += best;
                    mean_sum += last.mean_reward;
                    let rep = prefix_report(&series.buildings[b], &base.buildings[b], &traces[b].carbon, len)?;
                    curve.push(curve_row(last.iteration, day, traces[b].building_id.to_string(), best, last.mean_reward, rep));
                }
                let rep = prefix_report(&series.district, &base.district, district_intensity, len)?;
                let k = learners[0].state.iteration - 1;
                curve.push(curve_row(k, day, DISTRICT.into(), best_sum, mean_sum, rep));
            }
        } else {
            for (b, w) in week_rewards.iter_mut().enumerate() {
                w.push(trace.building_reward(b));
            }
            if (day + 1) % 7 == 0 || day + 1 == days {
                let (mut best_sum, mut mean_sum) = (0.0, 0.0);
                for b in 0..n {
                    let w = std::mem::take(&mut week_rewards[b]);
                    let mean = w.iter().sum::<f64>() / w.len() as f64;
                    let best = w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    best_sum += best;
                    mean_sum += mean;
                    let rep = prefix_report(&series.buildings[b], &base.buildings[b], &traces[b].carbon, len)?;
                    curve.push(curve_row(0, day, traces[b].building_id.to_string(), best, mean, rep));
                }
                let rep = prefix_report(&series.district, &base.district, district_intensity, len)?;
                curve.push(curve_row(0, day, DISTRICT.into(), best_sum, mean_sum, rep));
            }
        }
    }

    let district_raw = RawMetrics::compute(&series.district, district_intensity)?;
    let district_base = RawMetrics::compute(&base.district, district_intensity)?;
    let report = score_ratios(&district_raw, &district_base)?;
    let mut building_reports = Vec::with_capacity(n);
    for b in 0..n {
        let a = RawMetrics::compute(&series.buildings[b], &traces[b].carbon)?;
        let r = RawMetrics::compute(&base.buildings[b], &traces[b].carbon)?;
        building_reports.push((traces[b].building_id, score_ratios(&a, &r).ok()));
    }
    let theta = learners
        .iter()
        .enumerate()
        .filter_map(|(b, l)| {
            l.state.best.as_ref().map(|(z, r)| ThetaRow {
                building_id: traces[b].building_id,
                best_reward: *r,
                theta: z.values().to_vec(),
            })
        })
        .collect();

    Ok(RunOutputs {
        config: cfg.clone(),
        report: Some(report),
        building_reports,
        learning_curve: curve,
        events,
        theta,
        blackbox: Vec::new(),
        blackbox_summary: Vec::new(),
        series: Some(series),
    })
}
