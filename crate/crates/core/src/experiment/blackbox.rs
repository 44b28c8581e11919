//! Guided search on closed-form test functions with known maximizers.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::es::{init_state, run_iteration, CandidateCount, EsSchedule};
use crate::param_space::{BoxDomain, GuidanceSignal, ParamVector};

use super::config::{BlackboxConfig, ExperimentConfig, TestFunction};
use super::outputs::{BlackboxRecord, BlackboxSummary, RunOutputs};

/// Radius around the maximizer that counts as concentrated.
pub const CONCENTRATION_RADIUS: f64 = 0.1;
/// Radius within which the best candidate counts as accurate.
pub const ACCURACY_RADIUS: f64 = 0.05;
/// Share of the final generation that must be concentrated.
pub const CONCENTRATION_SHARE: f64 = 0.9;

impl TestFunction {
    pub fn name(self) -> &'static str {
        match self {
            TestFunction::Quadratic => "quadratic",
            TestFunction::TwoPeak => "two_peak",
            TestFunction::Rastrigin => "rastrigin",
        }
    }

    pub fn domain(self) -> BoxDomain {
        match self {
            TestFunction::Quadratic | TestFunction::TwoPeak => BoxDomain::uniform(1, 0.0, 1.0),
            TestFunction::Rastrigin => BoxDomain::uniform(2, -1.0, 1.0),
        }
        .expect("static box")
    }

    pub fn maximizer(self) -> Vec<f64> {
        match self {
            TestFunction::Quadratic => vec![0.7],
            TestFunction::TwoPeak => vec![0.8],
            TestFunction::Rastrigin => vec![0.3, 0.3],
        }
    }

    pub fn eval(self, z: &[f64]) -> f64 {
        match self {
            TestFunction::Quadratic => -(z[0] - 0.7).powi(2),
            TestFunction::TwoPeak => {
                (-200.0 * (z[0] - 0.8).powi(2)).exp() + 0.6 * (-200.0 * (z[0] - 0.2).powi(2)).exp()
            }
            TestFunction::Rastrigin => -z
                .iter()
                .map(|x| {
                    let d = x - 0.3;
                    d * d + 0.1 * (1.0 - (5.0 * TAU * d).cos())
                })
                .sum::<f64>(),
        }
    }
}

/// Bounded evaluation noise `U(-a, a) - ln(sinh(a) / a)`, centered so that
/// `E exp(noise) = 1`.
pub fn centered_noise<R: Rng + ?Sized>(a: f64, rng: &mut R) -> f64 {
    if a <= 0.0 {
        return 0.0;
    }
    rng.gen_range(-a..=a) - (a.sinh() / a).ln()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Case {
    pub function: TestFunction,
    pub noise: f64,
    /// Guidance pointing at the maximizer with this gain; `None` is unguided.
    pub guidance_gain: Option<f64>,
}

impl Case {
    pub fn label(&self) -> String {
        let guided = if self.guidance_gain.is_some() { "_guided" } else { "" };
        format!("{}{guided}/noise={}", self.function.name(), self.noise)
    }
}

pub fn schedule(cfg: &BlackboxConfig, guided: bool) -> EsSchedule {
    EsSchedule {
        n_candidates: CandidateCount::Growing {
            start: cfg.candidates_start,
            step: 1,
            cap: cfg.candidates_cap,
        },
        iota1: cfg.iota1,
        iota_decay: cfg.iota_decay,
        alpha: if guided { 1.0 } else { 0.0 },
        alpha_decay: 0.0,
        max_iterations: cfg.iterations,
        episodes_per_candidate: 1,
    }
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Runs one case from the center of the box. `stream` separates cases
/// that share a seed.
pub fn run_case(case: &Case, cfg: &BlackboxConfig, seed: u64, stream: u64) -> Result<BlackboxRecord> {
    let f = case.function;
    let domain = f.domain();
    let target = f.maximizer();
    let sched = schedule(cfg, case.guidance_gain.is_some());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);

    let z0 = domain.center();
    let mut state = init_state(&z0, &domain, &sched, &mut rng)?;
    let noise = case.noise;
    let evaluator = |z: &ParamVector, r: &mut ChaCha8Rng| -> Result<(f64, ParamVector)> {
        Ok((f.eval(z.values()) + centered_noise(noise, r), z.clone()))
    };
    let gain = case.guidance_gain;
    let guidance = |z: &ParamVector| -> Result<GuidanceSignal> {
        match gain {
            Some(g) => GuidanceSignal::new(z.values().iter().zip(&target).map(|(v, t)| g * (t - v)).collect()),
            None => Ok(GuidanceSignal::zeros(z.len())),
        }
    };

    let mut reached = None;
    for k in 1..=cfg.iterations {
        run_iteration(&mut state, &evaluator, &guidance, &domain, &sched, &mut rng)?;
        let best = &state.best.as_ref().expect("evaluated").0;
        if reached.is_none() && distance(best.values(), &target) <= ACCURACY_RADIUS {
            reached = Some(k);
        }
    }
    let (best, _) = state.best.clone().expect("at least one iteration");
    let last = state.batch.as_ref().expect("at least one iteration");
    let near = last
        .candidates
        .iter()
        .filter(|c| distance(c.values(), &target) <= CONCENTRATION_RADIUS)
        .count();
    Ok(BlackboxRecord {
        case: case.label(),
        seed,
        best_value: f.eval(best.values()),
        best_distance: distance(best.values(), &target),
        best: best.into_inner(),
        final_concentration: near as f64 / last.len() as f64,
        iterations_to_accuracy: reached,
    })
}

pub fn cases(cfg: &BlackboxConfig) -> Vec<Case> {
    let mut out = Vec::new();
    for &function in &cfg.functions {
        for &noise in &cfg.noise {
            out.push(Case {
                function,
                noise,
                guidance_gain: None,
            });
        }
    }
    if cfg.functions.contains(&TestFunction::Quadratic) {
        for &noise in &cfg.noise {
            out.push(Case {
                function: TestFunction::Quadratic,
                noise,
                guidance_gain: Some(cfg.guidance_gain),
            });
        }
    }
    out
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { (v[n / 2 - 1] + v[n / 2]) / 2.0 })
}

/// Median iterations to accuracy, counting seeds that never got there as
/// one past the budget.
pub fn median_iterations(records: &[&BlackboxRecord], budget: usize) -> Option<f64> {
    median(
        records
            .iter()
            .map(|r| r.iterations_to_accuracy.unwrap_or(budget + 1) as f64)
            .collect(),
    )
}

/// Every case for seeds `config.seed .. config.seed + blackbox.seeds`. A
/// guided case shares its random stream with the unguided one of the same
/// function and noise, so the two form a paired comparison.
pub fn run_blackbox_suite(config: &ExperimentConfig) -> Result<RunOutputs> {
    config.validate()?;
    let cfg = &config.blackbox;
    let cases = cases(cfg);
    let mut records = Vec::new();
    let mut summary = Vec::new();
    for case in &cases {
        let unguided = Case {
            guidance_gain: None,
            ..*case
        };
        let stream = cases.iter().position(|c| *c == unguided).unwrap_or(0) as u64;
        let recs = (0..cfg.seeds as u64)
            .map(|i| run_case(case, cfg, config.seed.wrapping_add(i), stream))
            .collect::<Result<Vec<_>>>()?;
        let refs: Vec<&BlackboxRecord> = recs.iter().collect();
        summary.push(BlackboxSummary {
            case: case.label(),
            seeds: recs.len(),
            concentrated_seeds: recs
                .iter()
                .filter(|r| r.final_concentration >= CONCENTRATION_SHARE)
                .count(),
            accurate_seeds: recs.iter().filter(|r| r.best_distance <= ACCURACY_RADIUS).count(),
            median_iterations_to_accuracy: median_iterations(&refs, cfg.iterations),
        });
        records.extend(recs);
    }
    Ok(RunOutputs {
        config: config.clone(),
        report: None,
        building_reports: Vec::new(),
        learning_curve: Vec::new(),
        events: Vec::new(),
        theta: Vec::new(),
        blackbox: records,
        blackbox_summary: summary,
        series: None,
    })
}
