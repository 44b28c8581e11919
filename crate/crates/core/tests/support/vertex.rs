//! Brute-force LP oracle: enumerate every vertex of a bounded polytope.

use rand::Rng;
use zoirl_core::lp::LinearProgram;

/// Random LP with `n <= 4` variables in a finite box and `m <= 6` rows.
/// About one in five instances gets an arbitrary right-hand side and may be
/// infeasible; the rest contain a known interior point.
pub fn random_lp<R: Rng>(rng: &mut R) -> LinearProgram {
    let n = rng.gen_range(1..=4);
    let m = rng.gen_range(0..=6);
    let mut lp = LinearProgram::new();
    let mut x0 = Vec::with_capacity(n);
    for _ in 0..n {
        let lo = rng.gen_range(-5.0..0.0);
        let hi = rng.gen_range(0.5..5.0);
        x0.push(rng.gen_range(lo..hi));
        lp.add_var(lo, hi, rng.gen_range(-3.0..3.0));
    }
    let arbitrary_rhs = rng.gen_bool(0.2);
    for _ in 0..m {
        let terms: Vec<(usize, f64)> = (0..n).map(|j| (j, rng.gen_range(-5.0..5.0))).collect();
        let rhs = if arbitrary_rhs {
            rng.gen_range(-10.0..10.0)
        } else {
            terms.iter().map(|(j, a)| a * x0[*j]).sum::<f64>() + rng.gen_range(0.0..2.0)
        };
        lp.add_le(&terms, rhs);
    }
    lp
}

fn solve_square(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let p = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[p][col].abs() < 1e-10 {
            return None;
        }
        a.swap(col, p);
        b.swap(col, p);
        for i in 0..n {
            if i != col {
                let f = a[i][col] / a[col][col];
                if f != 0.0 {
                    for k in col..n {
                        a[i][k] -= f * a[col][k];
                    }
                    b[i] -= f * b[col];
                }
            }
        }
    }
    Some((0..n).map(|i| b[i] / a[i][i]).collect())
}

fn combinations(k: usize, n: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if cur.len() == n {
        out.push(cur.clone());
        return;
    }
    for i in start..k {
        cur.push(i);
        combinations(k, n, i + 1, cur, out);
        cur.pop();
    }
}

/// Best objective over all vertices, or `None` when no vertex is feasible.
/// Only inequality rows and finite variable bounds are supported.
pub fn vertex_enumeration(lp: &LinearProgram) -> Option<f64> {
    assert!(lp.b_eq.is_empty(), "oracle handles inequality rows only");
    let n = lp.num_vars();
    let (ub, _) = lp.dense_blocks();
    // Every constraint as a row `g.x <= h`.
    let mut rows: Vec<(Vec<f64>, f64)> = ub.into_iter().zip(lp.b_ub.iter().copied()).collect();
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        rows.push((e.clone(), lp.upper[j]));
        e[j] = -1.0;
        rows.push((e, -lp.lower[j]));
    }
    let mut subsets = Vec::new();
    combinations(rows.len(), n, 0, &mut Vec::new(), &mut subsets);
    let mut best: Option<f64> = None;
    for s in subsets {
        let a: Vec<Vec<f64>> = s.iter().map(|&i| rows[i].0.clone()).collect();
        let b: Vec<f64> = s.iter().map(|&i| rows[i].1).collect();
        let Some(x) = solve_square(a, b) else { continue };
        let feasible = rows.iter().all(|(g, h)| {
            g.iter().zip(&x).map(|(gi, xi)| gi * xi).sum::<f64>() <= h + 1e-9
        });
        if feasible {
            let v = lp.objective_value(&x);
            best = Some(best.map_or(v, |b: f64| b.max(v)));
        }
    }
    best
}
