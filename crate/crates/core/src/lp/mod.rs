//! Linear programs in sparse-triplet form and a deterministic simplex solver.

mod dump;
mod model;
mod lu;
mod simplex;

use serde::{Deserialize, Serialize};

pub use dump::{read_dump, write_dump};
pub use model::{LinearProgram, Triplet};

pub const DEFAULT_TOLERANCE: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LpError {
    #[error("malformed linear program: {0}")]
    Malformed(String),
    #[error("tolerance must be positive, got {0}")]
    BadTolerance(f64),
    #[error("simplex did not terminate within {0} iterations")]
    IterationLimit(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Final iterate; only meaningful when `status` is `Optimal`.
    pub x: Vec<f64>,
    /// `c.x` for an optimal solution, NaN otherwise.
    pub objective_value: f64,
    pub iterations: usize,
    /// Smallest |reduced cost| over nonbasic columns that are free to move.
    /// Values near zero signal alternative optima.
    pub reduced_cost_gap: f64,
    /// Final basis, ascending. Column `num_vars + i` is the logical of row
    /// `i`, counting inequality rows first and then equality rows.
    pub basic_columns: Vec<usize>,
}

impl LpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

/// Solves `lp` to optimality within `tol` (feasibility and optimality).
pub fn solve(lp: &LinearProgram, tol: f64) -> Result<LpSolution, LpError> {
    if !(tol > 0.0) || !tol.is_finite() {
        return Err(LpError::BadTolerance(tol));
    }
    lp.validate()?;
    simplex::solve_revised(lp, tol, &[], None)
}

/// Starting point for [`solve_warm`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WarmStart {
    /// Columns to try to place in the initial basis, numbered as in
    /// [`LpSolution::basic_columns`].
    pub basis: Vec<usize>,
    /// Initial values for nonbasic structurals (clamped into their bounds).
    /// Missing entries start at 0 clamped into bounds.
    pub values: Vec<f64>,
}

/// Like [`solve`], but starts from a basis containing as many of the hinted
/// columns as can be arranged into a lower-triangular basis, with nonbasic
/// columns at the hinted values. Among alternative optima the one returned
/// may differ from a cold solve; for a given start it is deterministic.
pub fn solve_warm(lp: &LinearProgram, tol: f64, start: &WarmStart) -> Result<LpSolution, LpError> {
    if !(tol > 0.0) || !tol.is_finite() {
        return Err(LpError::BadTolerance(tol));
    }
    lp.validate()?;
    simplex::solve_revised(lp, tol, &start.basis, Some(&start.values))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConstraintKind {
    /// Row of the `<=` block.
    Inequality,
    /// Row of the equality block.
    Equality,
    /// Variable bound; `index` is the column.
    Bound,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ConstraintKind,
    pub index: usize,
    pub magnitude: f64,
}

/// Lists every constraint of `lp` that `x` violates by more than `tol`.
pub fn check_feasibility(lp: &LinearProgram, x: &[f64], tol: f64) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut lhs_ub = vec![0.0; lp.num_ineq()];
    for t in &lp.ineq {
        lhs_ub[t.row] += t.coeff * x.get(t.col).copied().unwrap_or(f64::NAN);
    }
    for (i, (lhs, b)) in lhs_ub.iter().zip(&lp.b_ub).enumerate() {
        let excess = lhs - b;
        if !(excess <= tol) {
            out.push(Violation {
                kind: ConstraintKind::Inequality,
                index: i,
                magnitude: excess,
            });
        }
    }
    let mut lhs_eq = vec![0.0; lp.num_eq()];
    for t in &lp.eq {
        lhs_eq[t.row] += t.coeff * x.get(t.col).copied().unwrap_or(f64::NAN);
    }
    for (i, (lhs, b)) in lhs_eq.iter().zip(&lp.b_eq).enumerate() {
        let gap = (lhs - b).abs();
        if !(gap <= tol) {
            out.push(Violation {
                kind: ConstraintKind::Equality,
                index: i,
                magnitude: gap,
            });
        }
    }
    for (j, v) in x.iter().enumerate().take(lp.num_vars()) {
        let below = lp.lower[j] - v;
        let above = v - lp.upper[j];
        let worst = below.max(above);
        if !(worst <= tol) {
            out.push(Violation {
                kind: ConstraintKind::Bound,
                index: j,
                magnitude: worst,
            });
        }
    }
    out
}
