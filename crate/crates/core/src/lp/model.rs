
use serde::{Deserialize, Serialize};

use super::LpError;

/// One nonzero of a constraint matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Triplet {
    pub row: usize,
    pub col: usize,
    pub coeff: f64,
}

/// `maximize c.x  s.t.  A_ub x <= b_ub,  A_eq x = b_eq,  l <= x <= u`.
///
/// Bounds may be infinite. Constraint matrices are stored as sparse triplets.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub ineq: Vec<Triplet>,
    pub b_ub: Vec<f64>,
    pub eq: Vec<Triplet>,
    pub b_eq: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl LinearProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_ineq(&self) -> usize {
        self.b_ub.len()
    }

    pub fn num_eq(&self) -> usize {
        self.b_eq.len()
    }

    /// Adds a variable and returns its column index.
    pub fn add_var(&mut self, lower: f64, upper: f64, objective: f64) -> usize {
        self.objective.push(objective);
        self.lower.push(lower);
        self.upper.push(upper);
        self.objective.len() - 1
    }

    /// `sum(coeff * x[col]) <= rhs`; returns the inequality row index.
    pub fn add_le(&mut self, terms: &[(usize, f64)], rhs: f64) -> usize {
        let row = self.b_ub.len();
        self.ineq.extend(
            terms
                .iter()
                .filter(|(_, c)| *c != 0.0)
                .map(|&(col, coeff)| Triplet { row, col, coeff }),
        );
        self.b_ub.push(rhs);
        row
    }

    /// `sum(coeff * x[col]) >= rhs`, stored as a negated `<=` row.
    pub fn add_ge(&mut self, terms: &[(usize, f64)], rhs: f64) -> usize {
        let negated: Vec<(usize, f64)> = terms.iter().map(|&(c, a)| (c, -a)).collect();
        self.add_le(&negated, -rhs)
    }

    /// `sum(coeff * x[col]) = rhs`; returns the equality row index.
    pub fn add_eq(&mut self, terms: &[(usize, f64)], rhs: f64) -> usize {
        let row = self.b_eq.len();
        self.eq.extend(
            terms
                .iter()
                .filter(|(_, c)| *c != 0.0)
                .map(|&(col, coeff)| Triplet { row, col, coeff }),
        );
        self.b_eq.push(rhs);
        row
    }

    pub fn validate(&self) -> Result<(), LpError> {
        let n = self.num_vars();
        if self.lower.len() != n || self.upper.len() != n {
            return Err(LpError::Malformed(format!(
                "{} objective entries but {} lower / {} upper bounds",
                n,
                self.lower.len(),
                self.upper.len()
            )));
        }
        if self.objective.iter().any(|c| !c.is_finite()) {
            return Err(LpError::Malformed("non-finite objective coefficient".into()));
        }
        for (j, (l, u)) in self.lower.iter().zip(&self.upper).enumerate() {
            if l.is_nan() || u.is_nan() || *l == f64::INFINITY || *u == f64::NEG_INFINITY {
                return Err(LpError::Malformed(format!("invalid bounds on variable {j}")));
            }
            if l > u {
                return Err(LpError::Malformed(format!(
                    "variable {j} has lower bound {l} above upper bound {u}"
                )));
            }
        }
        check_block("inequality", &self.ineq, &self.b_ub, n)?;
        check_block("equality", &self.eq, &self.b_eq, n)?;
        Ok(())
    }

    /// Dense copies of the two constraint blocks (row-major).
    pub fn dense_blocks(&self) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let n = self.num_vars();
        let mut ub = vec![vec![0.0; n]; self.num_ineq()];
        for t in &self.ineq {
            ub[t.row][t.col] += t.coeff;
        }
        let mut eq = vec![vec![0.0; n]; self.num_eq()];
        for t in &self.eq {
            eq[t.row][t.col] += t.coeff;
        }
        (ub, eq)
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }
}

fn check_block(name: &str, entries: &[Triplet], rhs: &[f64], n: usize) -> Result<(), LpError> {
    if rhs.iter().any(|b| !b.is_finite()) {
        return Err(LpError::Malformed(format!("non-finite {name} right-hand side")));
    }
    for t in entries {
        if t.row >= rhs.len() || t.col >= n {
            return Err(LpError::Malformed(format!(
                "{name} entry ({}, {}) out of range ({} rows, {} columns)",
                t.row,
                t.col,
                rhs.len(),
                n
            )));
        }
        if !t.coeff.is_finite() {
            return Err(LpError::Malformed(format!(
                "non-finite {name} coefficient at ({}, {})",
                t.row, t.col
            )));
        }
    }
    let mut keys: Vec<(usize, usize)> = entries.iter().map(|t| (t.row, t.col)).collect();
    keys.sort_unstable();
    if let Some(w) = keys.windows(2).find(|w| w[0] == w[1]) {
        return Err(LpError::Malformed(format!(
            "duplicate {name} entry ({}, {})",
            w[0].0, w[0].1
        )));
    }
    Ok(())
}
