use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use zoirl_core::planner::{cop_cooling, Action, BuildingModel, Storage};
use zoirl_core::sim::{generate_synthetic_traces, step, BuildingTrace, DeviceState, EnvState, Mismatch, SyntheticSpec};

fn model(has_heating: bool, rng: &mut ChaCha8Rng) -> BuildingModel {
    let mut s = |lo: f64, hi: f64| Storage {
        decay: rng.gen_range(0.0..0.05),
        capacity: if rng.gen_bool(0.1) { 0.0 } else { rng.gen_range(lo..hi) },
        efficiency: rng.gen_range(0.8..1.0),
    };
    let (battery, heat, cooling) = (s(0.0, 20.0), s(0.0, 10.0), s(0.0, 30.0));
    BuildingModel {
        eta_ehh: 0.9,
        e_max_ehh: rng.gen_range(0.5..6.0),
        eta_hp_tech: 0.22,
        t_c_hp: 8.0,
        e_max_hpc: rng.gen_range(0.5..8.0),
        battery,
        heat,
        cooling,
        has_heating,
        grid_cap: 100.0,
    }
}

/// Maximum absolute violation of the electricity, heat and cooling balances
/// and the state-of-charge recursions for one step, recomputed from scratch.
fn residuals(
    before: &DeviceState,
    after: &DeviceState,
    out: &zoirl_core::sim::BuildingStep,
    tr: &BuildingTrace,
    m: &BuildingModel,
    t: usize,
) -> f64 {
    let elec = out.e - (tr.nonshiftable[t] + out.heat_pump + out.heater + out.applied.bat * m.battery.capacity - tr.solar[t]);
    let heat_demand = if m.has_heating { tr.dhw[t] } else { 0.0 };
    let heat = out.heater * m.eta_ehh - (out.applied.heat * m.heat.capacity + heat_demand - out.unmet_heat);
    let cop = cop_cooling(tr.outdoor_temp[t], m);
    let cool = out.heat_pump * cop - (out.applied.cool * m.cooling.capacity + tr.cooling[t] - out.unmet_cool);
    let soc = |s: &Storage, x0: f64, x1: f64, a: f64| x1 - ((1.0 - s.decay) * x0 + s.efficiency * a).clamp(0.0, 1.0);
    [
        elec,
        heat,
        cool,
        soc(&m.battery, before.soc_bat, after.soc_bat, out.applied.bat),
        soc(&m.heat, before.soc_heat, after.soc_heat, out.applied.heat),
        soc(&m.cooling, before.soc_cool, after.soc_cool, out.applied.cool),
    ]
    .iter()
    .fold(0.0, |a, r| a.max(r.abs()))
}

/// Worst balance residual over `steps` fuzzed steps, and whether every state
/// of charge stayed in [0, 1].
pub fn fuzz(seed: u64, steps: usize) -> (f64, bool) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let traces = generate_synthetic_traces(&SyntheticSpec::new(3, 1), seed);
    let models: Vec<BuildingModel> = traces.iter().map(|t| model(t.has_heating(), &mut rng)).collect();
    let mut env = EnvState::new(3, DeviceState { soc_bat: 0.5, soc_heat: 0.5, soc_cool: 0.5 });
    let mut worst = 0.0f64;
    let mut in_range = true;
    for i in 0..steps {
        env.t = i % traces[0].len();
        let actions: Vec<Action> = (0..3)
            .map(|_| {
                let mut a = || match rng.gen_range(0..4) {
                    0 => rng.gen_range(-5.0..5.0),
                    1 => 1.0,
                    2 => -1.0,
                    _ => rng.gen_range(-1.0..1.0),
                };
                Action { bat: a(), heat: a(), cool: a() }
            })
            .collect();
        let (next, out) = step(&env, &actions, &traces, &models, &Mismatch::default()).unwrap();
        for b in 0..3 {
            let r = residuals(&env.devices[b], &next.devices[b], &out.buildings[b], &traces[b], &models[b], env.t);
            worst = worst.max(r);
            let d = &next.devices[b];
            in_range &= [d.soc_bat, d.soc_heat, d.soc_cool].iter().all(|s| (0.0..=1.0).contains(s));
        }
        let total: f64 = out.buildings.iter().map(|s| s.e).sum();
        worst = worst.max((total - out.e).abs());
        env = next;
    }
    (worst, in_range)
}
