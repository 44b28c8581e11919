//! Evolutionary search under trajectory guidance.
//!
//! Each generation is drawn from a reward-weighted mixture of kernels
//! centered at the previous generation's candidates, shifted by the guidance
//! signal observed while each candidate was deployed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::param_space::{
    clamp, sample_kernel, sample_mixture, BoxDomain, CandidateBatch, GuidanceSignal, KernelKind,
    KernelParams, ParamVector,
};

/// How many candidates generation `k` holds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum CandidateCount {
    Fixed(usize),
    /// `min(start + step * k, cap)`.
    Growing { start: usize, step: usize, cap: usize },
}

impl CandidateCount {
    pub fn at(&self, k: usize) -> usize {
        match *self {
            CandidateCount::Fixed(n) => n,
            CandidateCount::Growing { start, step, cap } => (start + step * k).min(cap),
        }
    }
}

/// Iteration-dependent hyperparameters: `iota_k = iota1 / k^iota_decay` and
/// `alpha_k = alpha / k^alpha_decay`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EsSchedule {
    pub n_candidates: CandidateCount,
    pub iota1: f64,
    pub iota_decay: f64,
    pub alpha: f64,
    pub alpha_decay: f64,
    pub max_iterations: usize,
    pub episodes_per_candidate: usize,
}

impl Default for EsSchedule {
    fn default() -> Self {
        Self {
            n_candidates: CandidateCount::Fixed(3),
            iota1: 0.4,
            iota_decay: 2.0,
            alpha: 1.0,
            alpha_decay: 0.0,
            max_iterations: 100,
            episodes_per_candidate: 1,
        }
    }
}

impl EsSchedule {
    pub fn n(&self, k: usize) -> usize {
        self.n_candidates.at(k)
    }

    pub fn iota(&self, k: usize) -> f64 {
        self.iota1 / (k as f64).powf(self.iota_decay)
    }

    pub fn alpha(&self, k: usize) -> f64 {
        self.alpha / (k as f64).powf(self.alpha_decay)
    }

    pub fn kernel(&self, k: usize) -> KernelParams {
        KernelParams::noisy(self.alpha(k), self.iota(k))
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        // Candidate counts never shrink, so the first generation is the smallest.
        if self.n(1) == 0 {
            problems.push("n_candidates must be at least 1".to_string());
        }
        if !(self.iota1 > 0.0 && self.iota1.is_finite()) {
            problems.push(format!("iota1 must be positive, got {}", self.iota1));
        }
        if !(self.iota_decay >= 0.0 && self.iota_decay.is_finite()) {
            problems.push(format!("iota_decay must be >= 0, got {}", self.iota_decay));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            problems.push(format!("alpha must be >= 0, got {}", self.alpha));
        }
        if !(self.alpha_decay >= 0.0 && self.alpha_decay.is_finite()) {
            problems.push(format!("alpha_decay must be >= 0, got {}", self.alpha_decay));
        }
        if self.episodes_per_candidate == 0 {
            problems.push("episodes_per_candidate must be at least 1".to_string());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationSummary {
    pub iteration: usize,
    pub mean_reward: f64,
    pub best_reward: f64,
    pub weights: Vec<f64>,
}

/// Search state between generations.
#[derive(Debug, Clone, PartialEq)]
pub struct EsState {
    /// Index of the generation held in `candidates`, starting at 1.
    pub iteration: usize,
    /// Current generation, not yet evaluated.
    pub candidates: Vec<ParamVector>,
    /// The most recent evaluated generation.
    pub batch: Option<CandidateBatch>,
    pub best: Option<(ParamVector, f64)>,
    pub history: Vec<IterationSummary>,
}

fn check_dims(z: &ParamVector, domain: &BoxDomain) -> Result<()> {
    if z.len() != domain.dim() {
        return Err(Error::DimensionMismatch {
            context: "search start",
            expected: domain.dim(),
            actual: z.len(),
        });
    }
    Ok(())
}

/// Draws the first generation from the kernel at `z0` with no guidance.
pub fn init_state<R: Rng + ?Sized>(
    z0: &ParamVector,
    domain: &BoxDomain,
    schedule: &EsSchedule,
    rng: &mut R,
) -> Result<EsState> {
    schedule.validate()?;
    check_dims(z0, domain)?;
    if z0.values().iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteParameter);
    }
    if !domain.contains(z0) {
        return Err(Error::InvalidInput("initial point lies outside the box".into()));
    }
    let rho = GuidanceSignal::zeros(domain.dim());
    let kp = KernelParams::noisy(0.0, schedule.iota(1));
    let candidates = (0..schedule.n(1))
        .map(|_| sample_kernel(z0, &rho, &kp, domain, rng))
        .collect::<Result<Vec<_>>>()?;
    Ok(EsState {
        iteration: 1,
        candidates,
        batch: None,
        best: None,
        history: Vec::new(),
    })
}

impl EsState {
    /// Records the evaluation of the current generation and draws the next one.
    pub fn tell<R: Rng + ?Sized>(
        &mut self,
        rewards: Vec<f64>,
        guidance: Vec<GuidanceSignal>,
        domain: &BoxDomain,
        schedule: &EsSchedule,
        rng: &mut R,
    ) -> Result<()> {
        if guidance.iter().any(|g| g.len() != domain.dim()) {
            return Err(Error::DimensionMismatch {
                context: "guidance signal",
                expected: domain.dim(),
                actual: guidance.iter().map(GuidanceSignal::len).find(|l| *l != domain.dim()).unwrap_or(0),
            });
        }
        let batch = CandidateBatch::evaluated(self.candidates.clone(), rewards, guidance)?;
        for (c, r) in batch.candidates.iter().zip(&batch.rewards) {
            if self.best.as_ref().map_or(true, |(_, b)| *r > *b) {
                self.best = Some((c.clone(), *r));
            }
        }
        let n = batch.len() as f64;
        self.history.push(IterationSummary {
            iteration: self.iteration,
            mean_reward: batch.rewards.iter().sum::<f64>() / n,
            best_reward: batch.rewards.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            weights: batch.weights.clone(),
        });
        let next = self.iteration + 1;
        let kp = schedule.kernel(next);
        self.candidates = (0..schedule.n(next))
            .map(|_| sample_mixture(&batch, &kp, domain, rng))
            .collect::<Result<Vec<_>>>()?;
        self.batch = Some(batch);
        self.iteration = next;
        Ok(())
    }
}

/// Evaluates every candidate of the current generation and advances the search.
///
/// Each candidate gets its own RNG stream seeded from `rng` in index order,
/// so evaluations may run in parallel without affecting the result. With
/// several episodes per candidate the rewards and guidance are averaged.
pub fn run_iteration<T, E, G, R>(
    state: &mut EsState,
    evaluator: &E,
    guidance_fn: &G,
    domain: &BoxDomain,
    schedule: &EsSchedule,
    rng: &mut R,
) -> Result<()>
where
    T: Send,
    E: Fn(&ParamVector, &mut ChaCha8Rng) -> Result<(f64, T)> + Sync,
    G: Fn(&T) -> Result<GuidanceSignal> + Sync,
    R: Rng + ?Sized,
{
    let seeds: Vec<u64> = state.candidates.iter().map(|_| rng.gen()).collect();
    let episodes = schedule.episodes_per_candidate.max(1);
    let results: Vec<Result<(f64, GuidanceSignal)>> = state
        .candidates
        .par_iter()
        .zip(seeds.par_iter())
        .enumerate()
        .map(|(index, (cand, seed))| {
            let wrap = |e: Error| Error::Evaluation {
                index,
                source: Box::new(e),
            };
            let mut stream = ChaCha8Rng::seed_from_u64(*seed);
            let mut total = 0.0;
            let mut signals = Vec::with_capacity(episodes);
            for _ in 0..episodes {
                let (r, trace) = evaluator(cand, &mut stream).map_err(wrap)?;
                if !r.is_finite() {
                    return Err(wrap(Error::NonFinite("episodic reward")));
                }
                total += r;
                signals.push(guidance_fn(&trace).map_err(wrap)?);
            }
            Ok((total / episodes as f64, GuidanceSignal::mean(&signals).map_err(wrap)?))
        })
        .collect();
    let mut rewards = Vec::with_capacity(results.len());
    let mut guidance = Vec::with_capacity(results.len());
    for r in results {
        let (reward, g) = r?;
        rewards.push(reward);
        guidance.push(g);
    }
    state.tell(rewards, guidance, domain, schedule, rng)
}

/// Outcome of a complete search.
#[derive(Debug, Clone, PartialEq)]
pub struct EsRun {
    pub best: ParamVector,
    /// `None` when no candidate was evaluated.
    pub best_reward: Option<f64>,
    pub history: Vec<IterationSummary>,
    pub state: EsState,
}

/// Runs `schedule.max_iterations` generations from `z0`.
pub fn run<T, E, G, R>(
    z0: &ParamVector,
    domain: &BoxDomain,
    schedule: &EsSchedule,
    evaluator: &E,
    guidance_fn: &G,
    rng: &mut R,
) -> Result<EsRun>
where
    T: Send,
    E: Fn(&ParamVector, &mut ChaCha8Rng) -> Result<(f64, T)> + Sync,
    G: Fn(&T) -> Result<GuidanceSignal> + Sync,
    R: Rng + ?Sized,
{
    let mut state = init_state(z0, domain, schedule, rng)?;
    for _ in 0..schedule.max_iterations {
        run_iteration(&mut state, evaluator, guidance_fn, domain, schedule, rng)?;
    }
    let (best, best_reward) = match &state.best {
        Some((b, r)) => (b.clone(), Some(*r)),
        None => (z0.clone(), None),
    };
    Ok(EsRun {
        best,
        best_reward,
        history: state.history.clone(),
        state,
    })
}

/// One step of the elitist chain: draw from the kernel at `z` and keep the
/// draw only if it scores at least as well as `z` under the noiseless `f`.
pub fn elitist_transition<F, R>(
    z: &ParamVector,
    rho: &GuidanceSignal,
    kp: &KernelParams,
    f: F,
    domain: &BoxDomain,
    rng: &mut R,
) -> Result<ParamVector>
where
    F: Fn(&ParamVector) -> f64,
    R: Rng + ?Sized,
{
    if kp.kind != KernelKind::ElitistNoiseless {
        return Err(Error::InvalidInput("elitist transition needs an elitist kernel".into()));
    }
    let z = clamp(z, domain)?;
    let draw = sample_kernel(&z, rho, kp, domain, rng)?;
    let (fz, fd) = (f(&z), f(&draw));
    if !fz.is_finite() || !fd.is_finite() {
        return Err(Error::NonFinite("objective value"));
    }
    Ok(if fd >= fz { draw } else { z })
}
