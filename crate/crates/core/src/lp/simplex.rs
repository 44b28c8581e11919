//! Bounded-variable revised primal simplex.
//!
//! Every row gets a logical column (`+1` in that row): a slack in `[0, inf)`
//! for `<=` rows, a fixed `[0, 0]` column for equality rows. The basis is
//! kept as a sparse LU factorization with product-form updates, refreshed
//! every [`REFACTOR_EVERY`] basis changes.
//!
//! The starting basis holds as many caller-hinted columns as are linearly
//! independent, completed with logicals. Phase 1 minimizes the sum of bound
//! violations of the basic variables, so no artificial columns are needed.
//!
//! Pivoting is fully deterministic: Dantzig pricing with lowest-index tie
//! breaks, falling back to Bland's rule while a run of degenerate pivots is
//! in progress.

use super::lu::{factorize, Lu};
use super::{LinearProgram, LpError, LpSolution, LpStatus};

const PIVOT_TOL: f64 = 1e-9;
const DEGENERATE_STEP: f64 = 1e-12;
const DEGENERATE_RUN: usize = 30;
const REFACTOR_EVERY: usize = 64;

#[derive(Clone, Copy, PartialEq, Eq)]
enum Phase {
    Feasibility,
    Optimality,
}

enum Step {
    Optimal,
    Infeasible,
    Unbounded,
    Progress,
}

struct Revised {
    m: usize,
    n_struct: usize,
    /// Column-compressed constraint matrix over all columns, logicals last.
    col_start: Vec<usize>,
    entries: Vec<(usize, f64)>,
    rhs: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    cost: Vec<f64>,
    x: Vec<f64>,
    /// Variable at each basis position.
    basis: Vec<usize>,
    is_basic: Vec<bool>,
    lu: Lu,
    /// Reduced costs, indexed by variable; zero for basic variables.
    d: Vec<f64>,
    alpha: Vec<f64>,
    y: Vec<f64>,
    work: Vec<f64>,
    tol: f64,
    bland: bool,
    degenerate_run: usize,
    iterations: usize,
}

pub(super) fn solve_revised(
    lp: &LinearProgram,
    tol: f64,
    hint: &[usize],
    start: Option<&[f64]>,
) -> Result<LpSolution, LpError> {
    let mut s = Revised::build(lp, tol, hint, start);
    let limit = 50 * (2 * s.m + s.n_struct) + 1_000;
    let status = loop {
        let phase = if s.has_infeasible_basic() {
            Phase::Feasibility
        } else {
            Phase::Optimality
        };
        s.price(phase);
        match s.iterate(phase) {
            Step::Progress => {}
            Step::Infeasible => break LpStatus::Infeasible,
            Step::Unbounded => break LpStatus::Unbounded,
            Step::Optimal => {
                // Recompute basic values to shed accumulated drift, then
                // confirm.
                s.refresh_basic_values();
                if s.has_infeasible_basic() {
                    continue;
                }
                s.price(Phase::Optimality);
                if s.choose_entering().is_none() {
                    break LpStatus::Optimal;
                }
            }
        }
        if s.lu.num_updates() >= REFACTOR_EVERY {
            s.refactor();
        }
        if s.iterations > limit {
            return Err(LpError::IterationLimit(s.iterations));
        }
    };

    let mut x: Vec<f64> = s.x[..s.n_struct].to_vec();
    for (j, v) in x.iter_mut().enumerate() {
        *v = v.clamp(lp.lower[j], lp.upper[j]);
    }
    let (objective_value, reduced_cost_gap) = match status {
        LpStatus::Optimal => (lp.objective_value(&x), s.reduced_cost_gap()),
        _ => (f64::NAN, f64::NAN),
    };
    let mut basic_columns = s.basis.clone();
    basic_columns.sort_unstable();
    Ok(LpSolution {
        status,
        x,
        objective_value,
        iterations: s.iterations,
        reduced_cost_gap,
        basic_columns,
    })
}

impl Revised {
    fn build(lp: &LinearProgram, tol: f64, hint: &[usize], start: Option<&[f64]>) -> Self {
        let n = lp.num_vars();
        let m_ub = lp.num_ineq();
        let m = m_ub + lp.num_eq();
        let ncols = n + m;

        let mut col_start = vec![0usize; ncols + 1];
        for e in lp.ineq.iter().chain(&lp.eq) {
            col_start[e.col + 1] += 1;
        }
        for j in n..ncols {
            col_start[j + 1] = 1;
        }
        for j in 0..ncols {
            col_start[j + 1] += col_start[j];
        }
        let mut entries = vec![(0usize, 0.0f64); col_start[ncols]];
        let mut fill = col_start.clone();
        for (offset, block) in [(0, &lp.ineq), (m_ub, &lp.eq)] {
            for e in block {
                entries[fill[e.col]] = (offset + e.row, e.coeff);
                fill[e.col] += 1;
            }
        }
        for i in 0..m {
            entries[fill[n + i]] = (i, 1.0);
        }
        for j in 0..n {
            entries[col_start[j]..col_start[j + 1]].sort_unstable_by_key(|e| e.0);
        }

        let mut lower = lp.lower.clone();
        let mut upper = lp.upper.clone();
        // Internally minimize the negated objective.
        let mut cost: Vec<f64> = lp.objective.iter().map(|c| -c).collect();
        let mut rhs = lp.b_ub.clone();
        rhs.extend_from_slice(&lp.b_eq);
        for i in 0..m {
            lower.push(0.0);
            upper.push(if i < m_ub { f64::INFINITY } else { 0.0 });
            cost.push(0.0);
        }
        let mut x = vec![0.0; ncols];
        for j in 0..n {
            let v = start.and_then(|s| s.get(j).copied()).unwrap_or(0.0);
            x[j] = if v.is_finite() { v } else { 0.0 }.clamp(lower[j], upper[j]);
        }

        let mut seen = vec![false; ncols];
        let candidates: Vec<usize> = hint
            .iter()
            .copied()
            .filter(|&h| h < ncols && !std::mem::replace(&mut seen[h], true))
            .collect();

        let mut s = Self {
            m,
            n_struct: n,
            col_start,
            entries,
            rhs,
            lower,
            upper,
            cost,
            x,
            basis: Vec::new(),
            is_basic: vec![false; ncols],
            lu: Lu::default(),
            d: vec![0.0; ncols],
            alpha: vec![0.0; m],
            y: vec![0.0; m],
            work: vec![0.0; m],
            tol,
            bland: false,
            degenerate_run: 0,
            iterations: 0,
        };
        s.install(&candidates);
        s
    }

    fn column(&self, j: usize) -> &[(usize, f64)] {
        &self.entries[self.col_start[j]..self.col_start[j + 1]]
    }

    /// Factorizes a basis built from `candidates`, completing it with
    /// logicals, and recomputes the basic values.
    fn install(&mut self, candidates: &[usize]) {
        let cols: Vec<&[(usize, f64)]> = candidates.iter().map(|&j| self.column(j)).collect();
        let f = factorize(self.m, &cols);
        for &b in &self.basis {
            self.is_basic[b] = false;
        }
        self.basis = f
            .steps
            .iter()
            .enumerate()
            .map(|(k, s)| match s {
                Some(c) => candidates[*c],
                None => self.n_struct + f.lu.pivot_row[k],
            })
            .collect();
        self.lu = f.lu;
        for &b in &self.basis {
            self.is_basic[b] = true;
        }
        // Dropped candidates and everything else nonbasic sit inside bounds.
        for (j, v) in self.x.iter_mut().enumerate() {
            if !self.is_basic[j] {
                *v = v.clamp(self.lower[j], self.upper[j]);
            }
        }
        self.refresh_basic_values();
    }

    fn refactor(&mut self) {
        let current = self.basis.clone();
        self.install(&current);
    }

    /// `x_B = B^-1 (b - N x_N)`.
    fn refresh_basic_values(&mut self) {
        let mut v = self.rhs.clone();
        for j in 0..self.x.len() {
            let xj = self.x[j];
            if self.is_basic[j] || xj == 0.0 {
                continue;
            }
            for &(i, a) in &self.entries[self.col_start[j]..self.col_start[j + 1]] {
                v[i] -= a * xj;
            }
        }
        self.lu.ftran(&mut v, &mut self.work);
        for (k, &b) in self.basis.iter().enumerate() {
            self.x[b] = v[k];
        }
    }

    fn is_infeasible(&self, j: usize) -> bool {
        self.x[j] < self.lower[j] - self.tol || self.x[j] > self.upper[j] + self.tol
    }

    fn has_infeasible_basic(&self) -> bool {
        self.basis.iter().any(|&b| self.is_infeasible(b))
    }

    /// Reduced costs of the phase objective for the nonbasic columns.
    fn price(&mut self, phase: Phase) {
        for (yk, &b) in self.y.iter_mut().zip(&self.basis) {
            *yk = match phase {
                Phase::Optimality => self.cost[b],
                // Minimize the total violation: below-lower basics have cost
                // -1, above-upper +1.
                Phase::Feasibility => {
                    if self.x[b] < self.lower[b] - self.tol {
                        -1.0
                    } else if self.x[b] > self.upper[b] + self.tol {
                        1.0
                    } else {
                        0.0
                    }
                }
            };
        }
        self.lu.btran(&mut self.y, &mut self.work);
        let y = &self.y;
        for (j, dj) in self.d.iter_mut().enumerate() {
            if self.is_basic[j] {
                *dj = 0.0;
                continue;
            }
            let c = match phase {
                Phase::Optimality => self.cost[j],
                Phase::Feasibility => 0.0,
            };
            let col = &self.entries[self.col_start[j]..self.col_start[j + 1]];
            let dot: f64 = col.iter().map(|&(i, a)| a * y[i]).sum();
            *dj = c - dot;
        }
    }

    /// Entering variable and direction (+1 increase, -1 decrease).
    fn choose_entering(&self) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        let mut best_score = 0.0;
        for j in 0..self.d.len() {
            if self.is_basic[j] {
                continue;
            }
            let dj = self.d[j];
            let dir = if dj < -self.tol && self.x[j] < self.upper[j] {
                1.0
            } else if dj > self.tol && self.x[j] > self.lower[j] {
                -1.0
            } else {
                continue;
            };
            if self.bland {
                return Some((j, dir));
            }
            if dj.abs() > best_score {
                best_score = dj.abs();
                best = Some((j, dir));
            }
        }
        best
    }

    fn iterate(&mut self, phase: Phase) -> Step {
        let Some((q, dir)) = self.choose_entering() else {
            return if phase == Phase::Feasibility {
                Step::Infeasible
            } else {
                Step::Optimal
            };
        };
        self.iterations += 1;

        self.alpha.iter_mut().for_each(|v| *v = 0.0);
        for &(i, a) in &self.entries[self.col_start[q]..self.col_start[q + 1]] {
            self.alpha[i] = a;
        }
        self.lu.ftran(&mut self.alpha, &mut self.work);

        let own = if dir > 0.0 {
            self.upper[q] - self.x[q]
        } else {
            self.x[q] - self.lower[q]
        };

        let mut theta = f64::INFINITY;
        let mut leave: Option<(usize, f64)> = None;
        let mut leave_alpha = 0.0;
        for k in 0..self.m {
            let a = self.alpha[k];
            if a.abs() <= PIVOT_TOL {
                continue;
            }
            // Basic variable moves at rate -alpha per unit step.
            let rate = a * dir;
            let b = self.basis[k];
            let (xb, lb, ub) = (self.x[b], self.lower[b], self.upper[b]);
            let (limit, bound) = if rate > 0.0 {
                // Decreasing.
                if xb > ub + self.tol {
                    ((xb - ub) / rate, ub)
                } else if xb < lb - self.tol || lb == f64::NEG_INFINITY {
                    continue;
                } else {
                    ((xb - lb).max(0.0) / rate, lb)
                }
            } else if xb < lb - self.tol {
                ((lb - xb) / -rate, lb)
            } else if xb > ub + self.tol || ub == f64::INFINITY {
                continue;
            } else {
                ((ub - xb).max(0.0) / -rate, ub)
            };
            let better = match leave {
                None => limit < theta,
                Some((r, _)) => {
                    let tie = (limit - theta).abs() <= 1e-12 * (1.0 + theta.abs());
                    if tie {
                        if self.bland {
                            b < self.basis[r]
                        } else {
                            rate.abs() > leave_alpha
                        }
                    } else {
                        limit < theta
                    }
                }
            };
            if better {
                theta = limit;
                leave = Some((k, bound));
                leave_alpha = rate.abs();
            }
        }

        if own <= theta {
            if own == f64::INFINITY {
                return Step::Unbounded;
            }
            // Bound flip: no basis change.
            self.shift(q, dir, own);
            self.x[q] = if dir > 0.0 { self.upper[q] } else { self.lower[q] };
            self.track_degeneracy(own);
            return Step::Progress;
        }
        let Some((r, bound)) = leave else {
            return Step::Unbounded;
        };
        self.shift(q, dir, theta);
        let leaving = self.basis[r];
        self.x[leaving] = bound;
        self.lu.update(r, &self.alpha);
        self.basis[r] = q;
        self.is_basic[leaving] = false;
        self.is_basic[q] = true;
        self.track_degeneracy(theta);
        Step::Progress
    }

    fn track_degeneracy(&mut self, step: f64) {
        if step <= DEGENERATE_STEP {
            self.degenerate_run += 1;
            if self.degenerate_run >= DEGENERATE_RUN {
                self.bland = true;
            }
        } else {
            self.degenerate_run = 0;
            self.bland = false;
        }
    }

    fn shift(&mut self, q: usize, dir: f64, step: f64) {
        if step == 0.0 {
            return;
        }
        self.x[q] += dir * step;
        for k in 0..self.m {
            let a = self.alpha[k];
            if a != 0.0 {
                self.x[self.basis[k]] -= dir * step * a;
            }
        }
    }

    /// Smallest |reduced cost| among nonbasic columns free to move.
    fn reduced_cost_gap(&self) -> f64 {
        (0..self.d.len())
            .filter(|&j| !self.is_basic[j] && self.lower[j] < self.upper[j])
            .map(|j| self.d[j].abs())
            .fold(f64::INFINITY, f64::min)
    }
}
