//! Deterministic synthetic district traces.
//!
//! Loads follow daily sinusoids with per-building level, amplitude and phase,
//! a weekday/weekend factor and an annual temperature cycle. Every load and
//! the solar series carry bounded multiplicative noise.

use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::BuildingTrace;
use crate::planner::HOURS_PER_DAY;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub n_buildings: usize,
    pub n_weeks: usize,
    /// Relative amplitude of the uniform multiplicative noise.
    #[serde(default = "default_noise")]
    pub noise: f64,
}

fn default_noise() -> f64 {
    0.1
}

impl SyntheticSpec {
    pub fn new(n_buildings: usize, n_weeks: usize) -> Self {
        Self {
            n_buildings,
            n_weeks,
            noise: default_noise(),
        }
    }
}

struct Profile {
    base: f64,
    amplitude: f64,
    phase: f64,
    weekend: f64,
    solar_kw: f64,
    cooling_per_degree: f64,
    dhw_kw: f64,
}

/// Every fourth building, starting with the third, has no hot water demand.
fn has_heating(b: usize) -> bool {
    b % 4 != 2
}

fn profile(b: usize, rng: &mut ChaCha8Rng) -> Profile {
    let base = rng.gen_range(4.0..12.0);
    Profile {
        base,
        amplitude: rng.gen_range(0.25..0.5),
        phase: rng.gen_range(-2.0..2.0),
        weekend: rng.gen_range(0.7..1.0),
        solar_kw: base * rng.gen_range(0.3..1.0),
        cooling_per_degree: base * rng.gen_range(0.1..0.25),
        dhw_kw: if has_heating(b) { base * rng.gen_range(0.1..0.3) } else { 0.0 },
    }
}

/// Generates `spec.n_buildings` traces of `spec.n_weeks` weeks.
pub fn generate_synthetic_traces(spec: &SyntheticSpec, seed: u64) -> Vec<BuildingTrace> {
    let hours = spec.n_weeks * 7 * HOURS_PER_DAY;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let profiles: Vec<Profile> = (0..spec.n_buildings).map(|b| profile(b, &mut rng)).collect();
    let noise = spec.noise.max(0.0);
    let jitter = move |rng: &mut ChaCha8Rng| {
        if noise > 0.0 {
            1.0 + rng.gen_range(-noise..=noise)
        } else {
            1.0
        }
    };

    // Shared weather and grid carbon intensity.
    let mut temp = Vec::with_capacity(hours);
    let mut carbon = Vec::with_capacity(hours);
    for t in 0..hours {
        let day = (t / HOURS_PER_DAY) as f64;
        let h = (t % HOURS_PER_DAY) as f64;
        let season = (TAU * (day - 110.0) / 364.0).sin();
        let daily = (TAU * (h - 9.0) / 24.0).sin();
        temp.push(17.0 + 9.0 * season + 5.0 * daily + 10.0 * noise * rng.gen_range(-1.0..=1.0));
        let c = 0.4 + 0.08 * (TAU * (h - 13.0) / 24.0).sin();
        carbon.push(c * jitter(&mut rng));
    }

    profiles
        .iter()
        .enumerate()
        .map(|(b, p)| {
            let mut tr = BuildingTrace {
                building_id: b,
                nonshiftable: Vec::with_capacity(hours),
                dhw: Vec::with_capacity(hours),
                cooling: Vec::with_capacity(hours),
                solar: Vec::with_capacity(hours),
                outdoor_temp: temp.clone(),
                carbon: carbon.clone(),
            };
            for t in 0..hours {
                let day = t / HOURS_PER_DAY;
                let h = (t % HOURS_PER_DAY) as f64;
                let week = if day % 7 >= 5 { p.weekend } else { 1.0 };
                let x = h - p.phase;
                let shape = 1.0
                    + p.amplitude * (TAU * (x - 13.0) / 24.0).sin()
                    + 0.5 * p.amplitude * (2.0 * TAU * (x - 4.0) / 24.0).sin();
                tr.nonshiftable.push(p.base * shape * week * jitter(&mut rng));

                let season = 0.75 + 0.25 * (TAU * (day as f64 - 80.0) / 364.0).sin();
                let sun = if (6.0..=18.0).contains(&h) {
                    (PI * (h - 6.0) / 12.0).sin()
                } else {
                    0.0
                };
                tr.solar.push((p.solar_kw * season * sun * jitter(&mut rng)).max(0.0));

                let warm = (temp[t] - 16.0).max(0.0);
                tr.cooling
                    .push(p.cooling_per_degree * (0.5 + warm) * week * jitter(&mut rng));

                let dhw = p.dhw_kw
                    * (1.0 + 0.6 * (TAU * (x - 4.0) / 12.0).sin().max(0.0))
                    * jitter(&mut rng);
                tr.dhw.push(dhw.max(0.0));
            }
            tr
        })
        .collect()
}
