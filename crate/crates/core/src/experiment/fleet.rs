//! Per-building device models sized from each building's own trace.

use crate::error::{Error, Result};
use crate::planner::{cop_cooling, BuildingModel, Storage};
use crate::sim::BuildingTrace;

use super::config::{BuildingOverride, FleetConfig};

fn mean(s: &[f64]) -> f64 {
    if s.is_empty() {
        0.0
    } else {
        s.iter().sum::<f64>() / s.len() as f64
    }
}

fn max(s: &[f64]) -> f64 {
    s.iter().copied().fold(0.0, f64::max)
}

fn storage(cfg: &FleetConfig, capacity: f64) -> Storage {
    Storage {
        decay: cfg.decay,
        capacity,
        efficiency: cfg.efficiency,
    }
}

/// Sizes one building: storage capacities are `*_hours` times the mean
/// hourly demand, device power covers the largest hourly demand with
/// `device_margin` headroom.
pub fn size_building(trace: &BuildingTrace, cfg: &FleetConfig) -> BuildingModel {
    let mut m = BuildingModel {
        eta_ehh: cfg.eta_ehh,
        e_max_ehh: 0.0,
        eta_hp_tech: cfg.eta_hp_tech,
        t_c_hp: cfg.t_c_hp,
        e_max_hpc: 0.0,
        battery: storage(cfg, cfg.battery_hours * mean(&trace.nonshiftable)),
        heat: storage(cfg, cfg.heat_hours * mean(&trace.dhw)),
        cooling: storage(cfg, cfg.cooling_hours * mean(&trace.cooling)),
        has_heating: trace.has_heating(),
        grid_cap: (cfg.grid_cap_factor * max(&trace.nonshiftable)).max(1.0),
    };
    m.e_max_ehh = cfg.device_margin * max(&trace.dhw) / cfg.eta_ehh;
    let hp_need = trace
        .cooling
        .iter()
        .zip(&trace.outdoor_temp)
        .map(|(c, t)| c / cop_cooling(*t, &m))
        .fold(0.0, f64::max);
    m.e_max_hpc = cfg.device_margin * hp_need;
    m
}

fn apply(m: &mut BuildingModel, o: &BuildingOverride) {
    if let Some(v) = o.battery_capacity {
        m.battery.capacity = v;
    }
    if let Some(v) = o.heat_capacity {
        m.heat.capacity = v;
    }
    if let Some(v) = o.cooling_capacity {
        m.cooling.capacity = v;
    }
    if let Some(v) = o.e_max_ehh {
        m.e_max_ehh = v;
    }
    if let Some(v) = o.e_max_hpc {
        m.e_max_hpc = v;
    }
    if let Some(v) = o.has_heating {
        m.has_heating = v;
    }
}

/// Builds the fleet in trace order, then applies overrides by building id.
pub fn build_fleet(
    traces: &[BuildingTrace],
    cfg: &FleetConfig,
    overrides: &[BuildingOverride],
) -> Result<Vec<BuildingModel>> {
    let mut models: Vec<BuildingModel> = traces.iter().map(|t| size_building(t, cfg)).collect();
    for o in overrides {
        let idx = traces
            .iter()
            .position(|t| t.building_id == o.building_id)
            .ok_or_else(|| {
                Error::Config(vec![format!("override for unknown building {}", o.building_id)])
            })?;
        apply(&mut models[idx], o);
    }
    for m in &models {
        m.validate()?;
    }
    Ok(models)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{generate_synthetic_traces, SyntheticSpec};

    #[test]
    fn sizing_follows_trace_statistics() {
        let traces = generate_synthetic_traces(&SyntheticSpec::new(3, 2), 5);
        let cfg = FleetConfig::default();
        let models = build_fleet(&traces, &cfg, &[]).unwrap();
        for (t, m) in traces.iter().zip(&models) {
            let mean_ns = t.nonshiftable.iter().sum::<f64>() / t.len() as f64;
            assert!((m.battery.capacity - cfg.battery_hours * mean_ns).abs() < 1e-9);
            assert!(m.e_max_ehh * m.eta_ehh >= max(&t.dhw));
            for (c, temp) in t.cooling.iter().zip(&t.outdoor_temp) {
                assert!(m.e_max_hpc * cop_cooling(*temp, m) >= *c - 1e-9);
            }
            assert_eq!(m.has_heating, t.has_heating());
        }
        // Building 2 of the synthetic fleet has no hot water demand.
        assert_eq!(models[2].heat.capacity, 0.0);
    }

    #[test]
    fn overrides_apply_by_id() {
        let traces = generate_synthetic_traces(&SyntheticSpec::new(2, 1), 5);
        let o = BuildingOverride {
            building_id: 1,
            battery_capacity: Some(42.0),
            ..Default::default()
        };
        let models = build_fleet(&traces, &FleetConfig::default(), &[o]).unwrap();
        assert_eq!(models[1].battery.capacity, 42.0);
        let bad = BuildingOverride {
            building_id: 9,
            ..Default::default()
        };
        assert!(build_fleet(&traces, &FleetConfig::default(), &[bad]).is_err());
    }
}
