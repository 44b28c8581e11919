use super::*;
use crate::planner::tests::sample_model;

fn flat_trace(hours: usize, value: f64) -> BuildingTrace {
    BuildingTrace {
        building_id: 0,
        nonshiftable: vec![value; hours],
        dhw: vec![value; hours],
        cooling: vec![value; hours],
        solar: vec![value; hours],
        outdoor_temp: vec![20.0; hours],
        carbon: vec![0.5; hours],
    }
}

fn one(model: BuildingModel, soc: f64) -> (EnvState, Vec<BuildingModel>) {
    (
        EnvState::new(
            1,
            DeviceState {
                soc_bat: soc,
                soc_heat: soc,
                soc_cool: soc,
            },
        ),
        vec![model],
    )
}

#[test]
fn null_step_only_decays() {
    let (mut env, models) = one(sample_model(), 0.5);
    env.t = 3;
    let traces = [flat_trace(24, 0.0)];
    let (next, out) = step(&env, &[Action::ZERO], &traces, &models, &Mismatch::default()).unwrap();
    assert_eq!(out.e, 0.0);
    assert_eq!(out.reward, 0.0);
    assert!(!out.buildings[0].clipped);
    assert_eq!(next.devices[0].soc_bat, 0.5 * (1.0 - 0.008));
    assert_eq!(next.devices[0].soc_cool, 0.5 * (1.0 - 0.008));
    assert_eq!(next.t, 4);
}

#[test]
fn battery_charge_arithmetic() {
    let (env, models) = one(sample_model(), 0.0);
    let traces = [flat_trace(24, 0.0)];
    let a = Action {
        bat: 0.5,
        ..Action::ZERO
    };
    let (next, out) = step(&env, &[a], &traces, &models, &Mismatch::default()).unwrap();
    assert!((next.devices[0].soc_bat - 0.475).abs() < 1e-15);
    assert_eq!(out.buildings[0].battery, 5.0);
    assert_eq!(out.e, 5.0);
    assert_eq!(out.reward, -125.0);
}

#[test]
fn over_discharge_is_clipped_to_empty() {
    let (env, models) = one(sample_model(), 0.1);
    let traces = [flat_trace(24, 0.0)];
    let a = Action {
        bat: -1.0,
        ..Action::ZERO
    };
    let (next, out) = step(&env, &[a], &traces, &models, &Mismatch::default()).unwrap();
    assert!(next.devices[0].soc_bat.abs() < 1e-15);
    assert!(out.buildings[0].clipped);
    assert!(out.buildings[0].applied.bat > -1.0);
}

#[test]
fn thermal_discharge_never_exceeds_demand() {
    let (env, models) = one(sample_model(), 1.0);
    let mut tr = flat_trace(24, 0.0);
    tr.cooling = vec![3.0; 24];
    let a = Action {
        cool: -1.0,
        ..Action::ZERO
    };
    let (_, out) = step(&env, &[a], &[tr], &models, &Mismatch::default()).unwrap();
    let s = out.buildings[0];
    assert!((s.applied.cool * models[0].cooling.capacity + 3.0).abs() < 1e-12);
    assert_eq!(s.heat_pump, 0.0);
    assert!(s.clipped);
}

#[test]
fn unmet_heat_is_recorded() {
    let (env, models) = one(sample_model(), 0.0);
    let mut tr = flat_trace(24, 0.0);
    tr.dhw = vec![100.0; 24];
    let (_, out) = step(&env, &[Action::ZERO], &[tr], &models, &Mismatch::default()).unwrap();
    let s = out.buildings[0];
    let m = &models[0];
    assert!((s.heater - m.e_max_ehh).abs() < 1e-12);
    assert!((s.unmet_heat - (100.0 - m.eta_ehh * m.e_max_ehh)).abs() < 1e-9);
}

#[test]
fn buildings_without_heating_ignore_heat_actions() {
    let mut m = sample_model();
    m.has_heating = false;
    let (env, models) = one(m, 0.5);
    let mut tr = flat_trace(24, 0.0);
    tr.dhw = vec![4.0; 24];
    let (_, out) = step(&env, &[Action::uniform(0.3)], &[tr], &models, &Mismatch::default()).unwrap();
    let s = out.buildings[0];
    assert_eq!(s.applied.heat, 0.0);
    assert_eq!(s.heater, 0.0);
    assert!(!s.clipped);
}

#[test]
fn extra_decay_applies() {
    let (env, models) = one(sample_model(), 0.5);
    let traces = [flat_trace(24, 0.0)];
    let mm = Mismatch {
        extra_decay: 0.05,
        demand_noise: 0.0,
    };
    let (next, _) = step(&env, &[Action::ZERO], &traces, &models, &mm).unwrap();
    assert!((next.devices[0].soc_heat - 0.5 * (1.0 - 0.058)).abs() < 1e-15);
}

#[test]
fn rbc_table_lookup() {
    let t = RbcTable::default();
    assert_eq!(rbc_policy(3, &t), Action::uniform(0.08));
    assert_eq!(rbc_policy(12, &t), Action::uniform(-0.08));
    assert_eq!(rbc_policy(22, &t), Action::ZERO);
    assert_eq!(rbc_policy(24, &t), Action::uniform(0.08));
    let zero = RbcTable(vec![0.0; 24]);
    assert!((1..=24).all(|h| rbc_policy(h, &zero) == Action::ZERO));
    assert!(RbcTable(vec![0.0; 23]).validate().is_err());
}

#[test]
fn zero_day_has_zero_reward() {
    let (env, models) = one(sample_model(), 0.0);
    let traces = [flat_trace(48, 0.0)];
    let (next, trace, r) =
        run_episode(&env, |_| Ok(vec![Action::ZERO]), &traces, &models, &Mismatch::default()).unwrap();
    assert_eq!(r, 0.0);
    assert_eq!(trace.steps.len(), 24);
    assert_eq!(next.t, 24);
}

#[test]
fn episode_reward_matches_replay() {
    let traces = generate_synthetic_traces(&SyntheticSpec::new(2, 1), 4);
    let mut models = vec![sample_model(), sample_model()];
    models[1].battery.capacity = 25.0;
    let env = EnvState::new(2, DeviceState::default());
    let table = RbcTable::default();
    let policy = |e: &EnvState| Ok(vec![rbc_policy(e.hour_of_day(), &table); 2]);
    let (_, trace, r) = run_episode(&env, policy, &traces, &models, &Mismatch::default()).unwrap();

    let mut replay = env.clone();
    let mut total = 0.0;
    for h in 1..=24 {
        let (next, out) = step(
            &replay,
            &[rbc_policy(h, &table); 2],
            &traces,
            &models,
            &Mismatch::default(),
        )
        .unwrap();
        total += out.reward;
        replay = next;
    }
    assert_eq!(r, total);
    let again = run_episode(&env, policy, &traces, &models, &Mismatch::default()).unwrap();
    assert_eq!(again.1, trace);
}

#[test]
fn validation_catches_bad_traces() {
    let mut t = flat_trace(5, 1.0);
    t.cooling[2] = -1.0;
    assert!(t.validate().unwrap_err().to_string().contains("hour 2"));
    let mut t = flat_trace(5, 1.0);
    t.solar.pop();
    assert!(t.validate().is_err());
    let mut t = flat_trace(5, 1.0);
    t.outdoor_temp[0] = f64::NAN;
    assert!(t.validate().is_err());
}

#[test]
fn csv_round_trip() {
    let traces = generate_synthetic_traces(&SyntheticSpec::new(3, 1), 2);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("traces.csv");
    write_traces_csv(&traces, std::fs::File::create(&path).unwrap()).unwrap();
    let back = load_traces_csv(&path).unwrap();
    assert_eq!(back, traces);
}

#[test]
fn csv_rejects_negative_cooling_with_row() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    std::fs::write(
        &path,
        format!(
            "{}\n0,0,1,0,2,0,20,0.4\n0,1,1,0,-2,0,20,0.4\n",
            TRACE_COLUMNS.join(",")
        ),
    )
    .unwrap();
    let err = load_traces_csv(&path).unwrap_err().to_string();
    assert!(err.contains("row 3") && err.contains("cooling_kw"), "{err}");
}

#[test]
fn csv_rejects_missing_column_and_gaps() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    std::fs::write(&path, "building_id,hour,nonshiftable_kw\n0,0,1\n").unwrap();
    let err = load_traces_csv(&path).unwrap_err().to_string();
    assert!(err.contains("missing column dhw_kw"), "{err}");

    std::fs::write(
        &path,
        format!("{}\n0,0,1,0,2,0,20,0.4\n0,2,1,0,2,0,20,0.4\n", TRACE_COLUMNS.join(",")),
    )
    .unwrap();
    assert!(load_traces_csv(&path).unwrap_err().to_string().contains("expected hour 1"));
}

#[test]
fn csv_groups_by_building() {
    let traces = generate_synthetic_traces(&SyntheticSpec::new(9, 1), 3);
    let mut buf = Vec::new();
    write_traces_csv(&traces, &mut buf).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.csv");
    std::fs::write(&path, buf).unwrap();
    assert_eq!(load_traces_csv(&path).unwrap().len(), 9);
}
