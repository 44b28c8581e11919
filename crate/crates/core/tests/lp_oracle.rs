mod support;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use support::vertex::{random_lp, vertex_enumeration};
use zoirl_core::lp::{check_feasibility, solve, LpStatus, DEFAULT_TOLERANCE};

fn agrees_with_vertices(seed: u64) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lp = random_lp(&mut rng);
    let sol = solve(&lp, DEFAULT_TOLERANCE).map_err(|e| e.to_string())?;
    match (vertex_enumeration(&lp), sol.status) {
        (Some(best), LpStatus::Optimal) => {
            if (best - sol.objective_value).abs() > 1e-6 {
                return Err(format!("seed {seed}: simplex {} vs vertices {best}", sol.objective_value));
            }
            let v = check_feasibility(&lp, &sol.x, 1e-7);
            if !v.is_empty() {
                return Err(format!("seed {seed}: infeasible optimum {v:?}"));
            }
            Ok(())
        }
        (None, LpStatus::Infeasible) => Ok(()),
        (oracle, status) => Err(format!("seed {seed}: simplex {status:?}, vertices {oracle:?}")),
    }
}

#[test]
fn random_programs_match_vertex_enumeration() {
    let failures: Vec<String> = (0..500).filter_map(|s| agrees_with_vertices(s).err()).collect();
    assert!(failures.is_empty(), "{failures:#?}");
}

#[test]
fn generator_produces_both_outcomes() {
    let mut feasible = 0;
    let mut infeasible = 0;
    for s in 0..200 {
        let mut rng = ChaCha8Rng::seed_from_u64(s);
        match vertex_enumeration(&random_lp(&mut rng)) {
            Some(_) => feasible += 1,
            None => infeasible += 1,
        }
    }
    assert!(feasible > 100 && infeasible > 0, "{feasible} feasible, {infeasible} infeasible");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]
    #[test]
    fn simplex_matches_vertices(seed in any::<u64>()) {
        prop_assert!(agrees_with_vertices(seed).is_ok(), "{:?}", agrees_with_vertices(seed));
    }
}
