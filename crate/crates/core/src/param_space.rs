//! Parameter vectors, box domains and the sampling kernels that define the
//! candidate distribution of the guided search.
//!
//! The transition kernel is a product of symmetric triangular densities on
//! `[-3 iota, 3 iota]` per coordinate, centered at `z + alpha * rho`. Draws
//! that leave the box are projected back onto it.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Half-width of the triangular kernel support, in units of `iota`.
pub const KERNEL_HALF_WIDTH: f64 = 3.0;

/// Axis-aligned box `[lo, hi]` in `R^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxDomain {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl BoxDomain {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.is_empty() {
            return Err(Error::InvalidInput("box dimension must be at least 1".into()));
        }
        if lo.len() != hi.len() {
            return Err(Error::DimensionMismatch {
                context: "box bounds",
                expected: lo.len(),
                actual: hi.len(),
            });
        }
        for (i, (l, h)) in lo.iter().zip(&hi).enumerate() {
            if !l.is_finite() || !h.is_finite() {
                return Err(Error::NonFinite("box bounds"));
            }
            if l >= h {
                return Err(Error::InvalidInput(format!(
                    "box coordinate {i}: lower bound {l} is not below upper bound {h}"
                )));
            }
        }
        Ok(Self { lo, hi })
    }

    /// The same interval `[lo, hi]` in every one of `dim` coordinates.
    pub fn uniform(dim: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![lo; dim], vec![hi; dim])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn center(&self) -> ParamVector {
        ParamVector(
            self.lo
                .iter()
                .zip(&self.hi)
                .map(|(l, h)| 0.5 * (l + h))
                .collect(),
        )
    }

    pub fn contains(&self, v: &ParamVector) -> bool {
        v.len() == self.dim()
            && v
                .values()
                .iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(x, (l, h))| *l <= *x && *x <= *h)
    }
}

/// A point in parameter space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamVector(Vec<f64>);

impl ParamVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn distance(&self, other: &ParamVector) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

impl From<Vec<f64>> for ParamVector {
    fn from(values: Vec<f64>) -> Self {
        Self(values)
    }
}

/// Trajectory-derived direction added to a kernel center, scaled by `alpha`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GuidanceSignal(Vec<f64>);

impl GuidanceSignal {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("guidance signal"));
        }
        Ok(Self(values))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Coordinate-wise mean of several signals of equal length.
    pub fn mean(signals: &[GuidanceSignal]) -> Result<Self> {
        let first = signals
            .first()
            .ok_or_else(|| Error::InvalidInput("mean of zero guidance signals".into()))?;
        let mut acc = vec![0.0; first.len()];
        for s in signals {
            if s.len() != acc.len() {
                return Err(Error::DimensionMismatch {
                    context: "guidance mean",
                    expected: acc.len(),
                    actual: s.len(),
                });
            }
            for (a, v) in acc.iter_mut().zip(&s.0) {
                *a += v;
            }
        }
        let n = signals.len() as f64;
        acc.iter_mut().for_each(|a| *a /= n);
        Self::new(acc)
    }
}

/// One generation: candidates with their rewards, guidance and mixture weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateBatch {
    pub candidates: Vec<ParamVector>,
    pub rewards: Vec<f64>,
    pub guidance: Vec<GuidanceSignal>,
    pub weights: Vec<f64>,
}

impl CandidateBatch {
    /// Builds an evaluated batch, computing the softmax weights from `rewards`.
    pub fn evaluated(
        candidates: Vec<ParamVector>,
        rewards: Vec<f64>,
        guidance: Vec<GuidanceSignal>,
    ) -> Result<Self> {
        if candidates.len() != rewards.len() || candidates.len() != guidance.len() {
            return Err(Error::DimensionMismatch {
                context: "candidate batch",
                expected: candidates.len(),
                actual: rewards.len().min(guidance.len()),
            });
        }
        let weights = softmax_weights(&rewards)?;
        Ok(Self {
            candidates,
            rewards,
            guidance,
            weights,
        })
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KernelKind {
    Noisy,
    ElitistNoiseless,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    /// Guidance rate.
    pub alpha: f64,
    /// Kernel scale.
    pub iota: f64,
    pub kind: KernelKind,
}

impl KernelParams {
    pub fn noisy(alpha: f64, iota: f64) -> Self {
        Self {
            alpha,
            iota,
            kind: KernelKind::Noisy,
        }
    }

    pub fn elitist(alpha: f64, iota: f64) -> Self {
        Self {
            alpha,
            iota,
            kind: KernelKind::ElitistNoiseless,
        }
    }
}

/// Component-wise projection of `v` onto `domain`.
pub fn clamp(v: &ParamVector, domain: &BoxDomain) -> Result<ParamVector> {
    if v.len() != domain.dim() {
        return Err(Error::DimensionMismatch {
            context: "clamp",
            expected: domain.dim(),
            actual: v.len(),
        });
    }
    if v.0.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFiniteParameter);
    }
    Ok(ParamVector(
        v.0.iter()
            .zip(domain.lo.iter().zip(&domain.hi))
            .map(|(x, (l, h))| x.clamp(*l, *h))
            .collect(),
    ))
}

/// Max-shifted softmax; exact under a constant shift of all rewards.
pub fn softmax_weights(rewards: &[f64]) -> Result<Vec<f64>> {
    if rewards.is_empty() {
        return Err(Error::InvalidInput("softmax of an empty reward vector".into()));
    }
    if rewards.iter().any(|r| !r.is_finite()) {
        return Err(Error::NonFinite("rewards"));
    }
    let max = rewards.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = rewards.iter().map(|r| (r - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    let mut weights: Vec<f64> = exps.iter().map(|e| e / total).collect();
    // Underflowed components stay strictly positive.
    for w in weights.iter_mut() {
        if *w <= 0.0 {
            *w = f64::MIN_POSITIVE;
        }
    }
    Ok(weights)
}

fn triangular_unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let u1: f64 = rng.gen();
    let u2: f64 = rng.gen();
    u1 - u2
}

/// Draws from the triangular kernel centered at `z + alpha * rho`, then clamps into the box.
pub fn sample_kernel<R: Rng + ?Sized>(
    z: &ParamVector,
    rho: &GuidanceSignal,
    kp: &KernelParams,
    domain: &BoxDomain,
    rng: &mut R,
) -> Result<ParamVector> {
    if !(kp.iota > 0.0) || !kp.iota.is_finite() {
        return Err(Error::NonPositiveScale(kp.iota));
    }
    if !(kp.alpha >= 0.0) || !kp.alpha.is_finite() {
        return Err(Error::InvalidInput(format!(
            "guidance rate must be a finite non-negative number, got {}",
            kp.alpha
        )));
    }
    let d = domain.dim();
    if z.len() != d || rho.len() != d {
        return Err(Error::DimensionMismatch {
            context: "sample_kernel",
            expected: d,
            actual: if z.len() != d { z.len() } else { rho.len() },
        });
    }
    if z.0.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFiniteParameter);
    }
    let half_width = KERNEL_HALF_WIDTH * kp.iota;
    let raw: Vec<f64> = z
        .0
        .iter()
        .zip(&rho.0)
        .map(|(zi, ri)| zi + kp.alpha * ri + half_width * triangular_unit(rng))
        .collect();
    clamp(&ParamVector(raw), domain)
}

/// Superposition sampling: pick a component by weight, then draw from its kernel.
pub fn sample_mixture<R: Rng + ?Sized>(
    batch: &CandidateBatch,
    kp: &KernelParams,
    domain: &BoxDomain,
    rng: &mut R,
) -> Result<ParamVector> {
    let j = sample_index(&batch.weights, rng)?;
    sample_kernel(&batch.candidates[j], &batch.guidance[j], kp, domain, rng)
}

/// Inverse-CDF draw from a discrete distribution given by `weights`.
pub fn sample_index<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> Result<usize> {
    if weights.is_empty() {
        return Err(Error::InvalidInput("empty weight vector".into()));
    }
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(Error::InvalidInput("weights must be finite and non-negative".into()));
    }
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return Err(Error::InvalidInput("weights sum to zero".into()));
    }
    let u: f64 = rng.gen::<f64>() * total;
    let mut acc = 0.0;
    for (j, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return Ok(j);
        }
    }
    // Rounding left `u` just past the last partial sum.
    Ok(weights.iter().rposition(|w| *w > 0.0).unwrap_or(weights.len() - 1))
}
