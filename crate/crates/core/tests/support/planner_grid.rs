//! Exhaustive grid oracle for the three-hour lookahead problem.
//!
//! Actions take the 21 values -1.0, -0.9, ..., 1.0 per storage and hour. The
//! device equations are re-derived here from the building model rather than
//! taken from the planner's program. Every constraint bounds a single
//! storage's action, so hours 1 and 2 are enumerated over the feasible index
//! ranges and the cooling action of hour 3 is solved in closed form: the cost
//! is convex in the last grid import, which is monotone in that action.

use rand::Rng;
use zoirl_core::param_space::ParamVector;
use zoirl_core::planner::{BuildingModel, Forecast, PlannerState, Storage, HOURS_PER_DAY};

pub const STEPS: usize = 21;
pub const HORIZON: usize = 3;
const FEAS_TOL: f64 = 1e-9;

pub fn grid_action(i: usize) -> f64 {
    -1.0 + 0.1 * i as f64
}

#[derive(Debug, Clone)]
pub struct Instance {
    pub model: BuildingModel,
    pub state: PlannerState,
    pub forecast: Forecast,
    pub theta: ParamVector,
}

fn storage<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> Storage {
    Storage {
        decay: rng.gen_range(0.0..0.02),
        capacity: rng.gen_range(lo..hi),
        efficiency: rng.gen_range(0.85..1.0),
    }
}

/// A random single-building instance planned from hour 22, so the lookahead
/// covers hours 22 to 24.
pub fn random_instance<R: Rng>(rng: &mut R) -> Instance {
    let has_heating = rng.gen_bool(0.8);
    let heating: Vec<f64> = (0..HORIZON).map(|_| rng.gen_range(0.0..3.0)).collect();
    let cooling: Vec<f64> = (0..HORIZON).map(|_| rng.gen_range(1.0..8.0)).collect();
    let cop_c: Vec<f64> = (0..HORIZON).map(|_| rng.gen_range(2.0..5.0)).collect();
    let eta_ehh = rng.gen_range(0.8..1.0);
    let battery = storage(rng, 2.0, 10.0);
    let heat = storage(rng, 2.0, 8.0);
    let cool = storage(rng, 5.0, 20.0);
    // Enough power to idle every hour, not always enough to charge at full rate.
    let need_h = heating.iter().fold(0.0f64, |a, h| a.max(*h)) / eta_ehh;
    let need_c = cooling
        .iter()
        .zip(&cop_c)
        .fold(0.0f64, |a, (c, p)| a.max(c / p));
    let model = BuildingModel {
        eta_ehh,
        e_max_ehh: need_h + rng.gen_range(0.5..1.5) * heat.capacity / eta_ehh,
        eta_hp_tech: 0.22,
        t_c_hp: 8.0,
        e_max_hpc: need_c + rng.gen_range(0.5..1.5) * cool.capacity / 2.0,
        battery,
        heat,
        cooling: cool,
        has_heating,
        grid_cap: 1e4,
    };
    let state = PlannerState {
        hour: HOURS_PER_DAY + 1 - HORIZON,
        soc_bat: rng.gen_range(0.0..1.0),
        soc_heat: rng.gen_range(0.0..1.0),
        soc_cool: rng.gen_range(0.0..1.0),
        prev_grid: rng.gen_range(0.0..10.0),
    };
    let forecast = Forecast {
        cop_c,
        solar: (0..HORIZON).map(|_| rng.gen_range(0.0..2.0)).collect(),
        nonshiftable: (0..HORIZON).map(|_| rng.gen_range(2.0..8.0)).collect(),
        heating,
        cooling,
    };
    let theta = ParamVector::new((0..HOURS_PER_DAY).map(|_| rng.gen_range(0.0..5.0)).collect());
    Instance {
        model,
        state,
        forecast,
        theta,
    }
}

impl Instance {
    fn price(&self, t: usize) -> f64 {
        self.theta.values()[self.state.hour - 1 + t]
    }

    fn heat_demand(&self, t: usize) -> f64 {
        if self.model.has_heating {
            self.forecast.heating[t]
        } else {
            0.0
        }
    }

    /// Grid import with every storage idle, and the import added per unit of
    /// each action: battery, heat storage, cooling storage.
    fn base_and_gains(&self, t: usize) -> (f64, [f64; 3]) {
        let m = &self.model;
        let f = &self.forecast;
        let base = f.nonshiftable[t] - f.solar[t] + self.heat_demand(t) / m.eta_ehh + f.cooling[t] / f.cop_c[t];
        (
            base,
            [
                m.battery.capacity,
                m.heat.capacity / m.eta_ehh,
                m.cooling.capacity / f.cop_c[t],
            ],
        )
    }

    fn store(&self, s: usize) -> &Storage {
        [&self.model.battery, &self.model.heat, &self.model.cooling][s]
    }

    fn soc0(&self, s: usize) -> f64 {
        [self.state.soc_bat, self.state.soc_heat, self.state.soc_cool][s]
    }

    fn next_soc(&self, s: usize, soc: f64, a: f64) -> f64 {
        let st = self.store(s);
        (1.0 - st.decay) * soc + st.efficiency * a
    }

    /// Whether action `a` of storage `s` at plan hour `t` keeps the state of
    /// charge and the serving device within bounds.
    fn allowed(&self, s: usize, t: usize, soc: f64, a: f64, tol: f64) -> bool {
        if !(-1.0 - tol..=1.0 + tol).contains(&a) {
            return false;
        }
        let next = self.next_soc(s, soc, a);
        if next < -tol || next > 1.0 + tol {
            return false;
        }
        let m = &self.model;
        match s {
            0 => true,
            1 => {
                if !m.has_heating {
                    return a.abs() <= tol;
                }
                let e = (self.heat_demand(t) + a * m.heat.capacity) / m.eta_ehh;
                e >= -tol && e <= m.e_max_ehh + tol
            }
            _ => {
                let e = (self.forecast.cooling[t] + a * m.cooling.capacity) / self.forecast.cop_c[t];
                e >= -tol && e <= m.e_max_hpc + tol
            }
        }
    }

    /// Feasible grid indices of storage `s` at hour `t`, as an inclusive range.
    fn range(&self, s: usize, t: usize, soc: f64) -> Option<(usize, usize)> {
        let ok: Vec<usize> = (0..STEPS)
            .filter(|&i| self.allowed(s, t, soc, grid_action(i), FEAS_TOL))
            .collect();
        let (&lo, &hi) = (ok.first()?, ok.last()?);
        assert_eq!(hi - lo + 1, ok.len(), "feasible actions form an interval");
        Some((lo, hi))
    }

    /// Lookahead cost `sum |g_t - g_{t-1}| + theta_t g_t` of a plan, or `None`
    /// if some action leaves the feasible set by more than `tol`.
    pub fn cost(&self, actions: &[[f64; 3]], tol: f64) -> Option<f64> {
        assert_eq!(actions.len(), HORIZON);
        let mut soc = [0, 1, 2].map(|s| self.soc0(s));
        let mut prev = self.state.prev_grid;
        let mut total = 0.0;
        for (t, a) in actions.iter().enumerate() {
            let (base, gain) = self.base_and_gains(t);
            let mut g = base;
            for s in 0..3 {
                if !self.allowed(s, t, soc[s], a[s], tol) {
                    return None;
                }
                soc[s] = self.next_soc(s, soc[s], a[s]);
                g += gain[s] * a[s];
            }
            if g.abs() > self.model.grid_cap + tol {
                return None;
            }
            total += (g - prev).abs() + self.price(t) * g;
            prev = g;
        }
        Some(total)
    }
}

/// Smallest lookahead cost over the full action grid.
pub fn grid_best(inst: &Instance) -> f64 {
    let gains: Vec<(f64, [f64; 3])> = (0..HORIZON).map(|t| inst.base_and_gains(t)).collect();
    let bound: f64 = gains
        .iter()
        .map(|(b, g)| b.abs() + g.iter().sum::<f64>())
        .fold(0.0, f64::max);
    assert!(bound < inst.model.grid_cap, "grid cap must not bind for the oracle");

    // Per storage: hour-1 range, then for each hour-1 index its hour-2 range,
    // then for each (i1, i2) the hour-3 range.
    struct Tree {
        first: Option<(usize, usize)>,
        second: Vec<Option<(usize, usize)>>,
        third: Vec<Vec<Option<(usize, usize)>>>,
    }
    let trees: Vec<Tree> = (0..3)
        .map(|s| {
            let soc0 = inst.soc0(s);
            let mut second = vec![None; STEPS];
            let mut third = vec![vec![None; STEPS]; STEPS];
            for i1 in 0..STEPS {
                let soc1 = inst.next_soc(s, soc0, grid_action(i1));
                second[i1] = inst.range(s, 1, soc1);
                for i2 in 0..STEPS {
                    let soc2 = inst.next_soc(s, soc1, grid_action(i2));
                    third[i1][i2] = inst.range(s, 2, soc2);
                }
            }
            Tree {
                first: inst.range(s, 0, soc0),
                second,
                third,
            }
        })
        .collect();

    let th = [inst.price(0), inst.price(1), inst.price(2)];
    let (b3, k3) = gains[2];
    let mut best = f64::INFINITY;

    let (Some(rb), Some(rh), Some(rc)) = (trees[0].first, trees[1].first, trees[2].first) else {
        return best;
    };
    for ib1 in rb.0..=rb.1 {
        for ih1 in rh.0..=rh.1 {
            for ic1 in rc.0..=rc.1 {
                let (b, k) = gains[0];
                let g1 = b + k[0] * grid_action(ib1) + k[1] * grid_action(ih1) + k[2] * grid_action(ic1);
                let c1 = (g1 - inst.state.prev_grid).abs() + th[0] * g1;
                let (Some(sb), Some(sh), Some(sc)) =
                    (trees[0].second[ib1], trees[1].second[ih1], trees[2].second[ic1])
                else {
                    continue;
                };
                for ib2 in sb.0..=sb.1 {
                    for ih2 in sh.0..=sh.1 {
                        for ic2 in sc.0..=sc.1 {
                            let (b, k) = gains[1];
                            let g2 = b + k[0] * grid_action(ib2) + k[1] * grid_action(ih2) + k[2] * grid_action(ic2);
                            let c2 = c1 + (g2 - g1).abs() + th[1] * g2;
                            let (Some(tb), Some(thr), Some(tc)) = (
                                trees[0].third[ib1][ib2],
                                trees[1].third[ih1][ih2],
                                trees[2].third[ic1][ic2],
                            ) else {
                                continue;
                            };
                            let f = |g: f64| (g - g2).abs() + th[2] * g;
                            for ib3 in tb.0..=tb.1 {
                                for ih3 in thr.0..=thr.1 {
                                    let rest = b3 + k3[0] * grid_action(ib3) + k3[1] * grid_action(ih3);
                                    let g_at = |i: usize| rest + k3[2] * grid_action(i);
                                    let c3 = if th[2] >= 1.0 {
                                        f(g_at(tc.0))
                                    } else {
                                        // Continuous minimizer puts g3 at g2.
                                        let x = ((g2 - rest) / k3[2] + 1.0) / 0.1;
                                        let lo = x.floor().clamp(tc.0 as f64, tc.1 as f64) as usize;
                                        let hi = x.ceil().clamp(tc.0 as f64, tc.1 as f64) as usize;
                                        f(g_at(lo)).min(f(g_at(hi)))
                                    };
                                    best = best.min(c2 + c3);
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    best
}

/// Plain enumeration of every feasible grid plan, scored by [`Instance::cost`].
/// Returns `None` without scoring when there are more than `limit` plans.
/// Used to check [`grid_best`].
pub fn grid_best_plain(inst: &Instance, limit: usize) -> Option<f64> {
    fn options(inst: &Instance, t: usize, soc: [f64; 3]) -> [Vec<f64>; 3] {
        [0, 1, 2].map(|s| {
            (0..STEPS)
                .map(grid_action)
                .filter(|a| inst.allowed(s, t, soc[s], *a, FEAS_TOL))
                .collect()
        })
    }
    fn walk(inst: &Instance, t: usize, soc: [f64; 3], plan: &mut Vec<[f64; 3]>, score: bool, out: &mut (f64, usize)) {
        if t == HORIZON {
            if score {
                let c = inst.cost(plan, FEAS_TOL).expect("enumerated plans are feasible");
                out.0 = out.0.min(c);
            }
            out.1 += 1;
            return;
        }
        let [ob, oh, oc] = options(inst, t, soc);
        for &b in &ob {
            for &h in &oh {
                for &c in &oc {
                    let a = [b, h, c];
                    let next = [0, 1, 2].map(|s| inst.next_soc(s, soc[s], a[s]));
                    plan.push(a);
                    walk(inst, t + 1, next, plan, score, out);
                    plan.pop();
                }
            }
        }
    }
    let soc0 = [0, 1, 2].map(|s| inst.soc0(s));
    let mut out = (f64::INFINITY, 0);
    walk(inst, 0, soc0, &mut Vec::new(), false, &mut out);
    if out.1 > limit {
        return None;
    }
    let mut out = (f64::INFINITY, 0);
    walk(inst, 0, soc0, &mut Vec::new(), true, &mut out);
    Some(out.0)
}
