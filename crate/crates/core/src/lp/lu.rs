//! Sparse LU factorization of a simplex basis with product-form updates.
//!
//! Pivots are chosen by singleton detection first and a threshold Markowitz
//! search on whatever kernel remains. Basis position `k` is the `k`-th pivot.

/// Relative threshold for accepting a kernel pivot against its column.
const MARKOWITZ_U: f64 = 0.1;
/// Entries at or below this magnitude are treated as structural zeros.
const ZERO: f64 = 1e-13;
/// Columns examined by one Markowitz search once a pivot has been found.
const SEARCH_LIMIT: usize = 4;
/// Pivots smaller than this make a column count as dependent.
const PIVOT_MIN: f64 = 1e-10;

/// Result of factorizing a candidate column set.
pub(super) struct Factorization {
    pub lu: Lu,
    /// `steps[k]` is `Some(c)` for candidate `c`, or `None` when the unit
    /// column of row `lu.pivot_row[k]` was inserted.
    pub steps: Vec<Option<usize>>,
}

#[derive(Default)]
pub(super) struct Lu {
    m: usize,
    pub pivot_row: Vec<usize>,
    l_start: Vec<usize>,
    /// Row multipliers of each elimination step.
    l: Vec<(usize, f64)>,
    u_diag: Vec<f64>,
    u_start: Vec<usize>,
    /// Off-diagonal U entries by basis position.
    u: Vec<(usize, f64)>,
    eta_pos: Vec<usize>,
    eta_piv: Vec<f64>,
    eta_start: Vec<usize>,
    eta: Vec<(usize, f64)>,
}

/// Factorizes the matrix whose columns are `cols` (row-index, value lists
/// over `m` rows). Candidates that turn out dependent are left out and the
/// uncovered rows receive unit columns, so the result is always nonsingular.
pub(super) fn factorize(m: usize, cols: &[&[(usize, f64)]]) -> Factorization {
    WORK.with(|w| factorize_with(&mut w.borrow_mut(), m, cols))
}

/// Scratch storage reused across factorizations on the same thread.
#[derive(Default)]
struct Work {
    rows: Vec<Vec<(usize, f64)>>,
    col_rows: Vec<Vec<usize>>,
    buckets: Vec<Vec<usize>>,
    row_count: Vec<usize>,
    col_count: Vec<usize>,
    row_live: Vec<bool>,
    col_live: Vec<bool>,
    row_stack: Vec<usize>,
    col_stack: Vec<usize>,
    targets: Vec<usize>,
    pivot_row: Vec<(usize, f64)>,
    u_cand: Vec<usize>,
    step_of: Vec<usize>,
}

thread_local! {
    static WORK: std::cell::RefCell<Work> = std::cell::RefCell::new(Work::default());
}

fn reset<T>(v: &mut Vec<Vec<T>>, len: usize) {
    if v.len() < len {
        v.resize_with(len, Vec::new);
    }
    for inner in &mut v[..len] {
        inner.clear();
    }
}

fn factorize_with(w: &mut Work, m: usize, cols: &[&[(usize, f64)]]) -> Factorization {
    let nc = cols.len();
    reset(&mut w.rows, m);
    reset(&mut w.col_rows, nc);
    reset(&mut w.buckets, m + 1);
    let Work {
        rows,
        col_rows,
        buckets,
        row_count,
        col_count,
        row_live,
        col_live,
        row_stack,
        col_stack,
        targets,
        pivot_row,
        u_cand,
        step_of,
    } = w;
    let rows = &mut rows[..m];
    let col_rows = &mut col_rows[..nc];
    let buckets = &mut buckets[..m + 1];
    for (c, col) in cols.iter().enumerate() {
        for &(i, v) in col.iter() {
            if v.abs() > ZERO {
                rows[i].push((c, v));
                col_rows[c].push(i);
            }
        }
    }
    row_count.clear();
    row_count.extend(rows.iter().map(Vec::len));
    col_count.clear();
    col_count.extend(col_rows.iter().map(Vec::len));
    row_live.clear();
    row_live.resize(m, true);
    col_live.clear();
    col_live.resize(nc, true);
    for c in 0..nc {
        buckets[col_count[c].min(m)].push(c);
    }
    row_stack.clear();
    row_stack.extend((0..m).rev().filter(|&i| row_count[i] == 1));
    col_stack.clear();
    col_stack.extend((0..nc).rev().filter(|&c| col_count[c] == 1));

    let mut lu = Lu {
        m,
        pivot_row: Vec::with_capacity(m),
        l_start: Vec::with_capacity(m + 1),
        u_diag: Vec::with_capacity(m),
        u_start: Vec::with_capacity(m + 1),
        eta_start: Vec::with_capacity(16),
        ..Lu::default()
    };
    lu.l_start.push(0);
    lu.u_start.push(0);
    let mut steps: Vec<Option<usize>> = Vec::with_capacity(m);
    // U entries reference candidates until every pivot is known.
    u_cand.clear();

    let entry = |rows: &[Vec<(usize, f64)>], i: usize, c: usize| -> Option<f64> {
        rows[i].iter().find(|e| e.0 == c).map(|e| e.1)
    };
    let col_max = |rows: &[Vec<(usize, f64)>], col_rows: &[Vec<usize>], row_live: &[bool], c: usize| {
        col_rows[c]
            .iter()
            .filter(|&&i| row_live[i])
            .filter_map(|&i| entry(rows, i, c))
            .fold(0.0f64, |a, v| a.max(v.abs()))
    };

    loop {
        let choice = if let Some(c) = col_stack.pop() {
            if !col_live[c] || col_count[c] != 1 {
                continue;
            }
            let Some(i) = col_rows[c]
                .iter()
                .copied()
                .find(|&i| row_live[i] && entry(&rows, i, c).is_some())
            else {
                continue;
            };
            if entry(&rows, i, c).unwrap().abs() < PIVOT_MIN {
                continue;
            }
            (i, c)
        } else if let Some(i) = row_stack.pop() {
            if !row_live[i] || row_count[i] != 1 {
                continue;
            }
            let Some(&(c, v)) = rows[i].first() else {
                continue;
            };
            let cm = col_max(&rows, &col_rows, &row_live, c);
            if v.abs() < PIVOT_MIN || v.abs() < 1e-3 * cm {
                continue;
            }
            (i, c)
        } else {
            // Threshold Markowitz search over the remaining kernel, visiting
            // columns in order of increasing count.
            let mut best: Option<(usize, usize)> = None;
            let mut best_cost = usize::MAX;
            let mut best_abs = 0.0;
            let mut examined = 0;
            'search: for (cnt, bucket) in buckets.iter_mut().enumerate().skip(1) {
                let mut idx = 0;
                while idx < bucket.len() {
                    let c = bucket[idx];
                    if !col_live[c] || col_count[c] != cnt {
                        bucket.swap_remove(idx);
                        continue;
                    }
                    idx += 1;
                    let cm = col_max(&rows, &col_rows, &row_live, c);
                    if cm < PIVOT_MIN {
                        continue;
                    }
                    for &i in &col_rows[c] {
                        if !row_live[i] {
                            continue;
                        }
                        let Some(v) = entry(&rows, i, c) else { continue };
                        if v.abs() < MARKOWITZ_U * cm {
                            continue;
                        }
                        let cost = (row_count[i] - 1) * (cnt - 1);
                        if cost < best_cost || (cost == best_cost && v.abs() > best_abs) {
                            best_cost = cost;
                            best_abs = v.abs();
                            best = Some((i, c));
                        }
                    }
                    examined += 1;
                    if best.is_some() && (best_cost <= (cnt - 1) * (cnt - 1) || examined >= SEARCH_LIMIT) {
                        break 'search;
                    }
                }
            }
            match best {
                Some(p) => p,
                None => break,
            }
        };

        let (r, c) = choice;
        let piv = entry(&rows, r, c).unwrap();
        row_live[r] = false;
        col_live[c] = false;
        pivot_row.clear();
        pivot_row.append(&mut rows[r]);
        for &(j, _) in pivot_row.iter() {
            if j != c {
                col_count[j] -= 1;
                buckets[col_count[j]].push(j);
                if col_live[j] && col_count[j] == 1 {
                    col_stack.push(j);
                }
            }
        }
        // Eliminate column c from the other live rows.
        targets.clear();
        targets.extend(col_rows[c].iter().copied().filter(|&i| row_live[i]));
        for &i in targets.iter() {
            let Some(p) = rows[i].iter().position(|e| e.0 == c) else {
                continue;
            };
            let f = rows[i][p].1 / piv;
            rows[i].swap_remove(p);
            row_count[i] -= 1;
            lu.l.push((i, f));
            for &(j, v) in pivot_row.iter() {
                if j == c {
                    continue;
                }
                match rows[i].iter().position(|e| e.0 == j) {
                    Some(q) => {
                        rows[i][q].1 -= f * v;
                        if rows[i][q].1.abs() <= ZERO {
                            rows[i].swap_remove(q);
                            row_count[i] -= 1;
                            col_count[j] -= 1;
                            buckets[col_count[j]].push(j);
                            if col_live[j] && col_count[j] == 1 {
                                col_stack.push(j);
                            }
                        }
                    }
                    None => {
                        let w = -f * v;
                        if w.abs() > ZERO {
                            rows[i].push((j, w));
                            row_count[i] += 1;
                            col_count[j] += 1;
                            buckets[col_count[j].min(m)].push(j);
                            col_rows[j].push(i);
                        }
                    }
                }
            }
            if row_count[i] == 1 {
                row_stack.push(i);
            }
        }
        lu.l_start.push(lu.l.len());
        lu.pivot_row.push(r);
        lu.u_diag.push(piv);
        for &(j, v) in pivot_row.iter() {
            if j != c {
                u_cand.push(j);
                lu.u.push((j, v));
            }
        }
        lu.u_start.push(u_cand.len());
        steps.push(Some(c));
    }

    step_of.clear();
    step_of.resize(nc, usize::MAX);
    for (k, s) in steps.iter().enumerate() {
        if let Some(c) = s {
            step_of[*c] = k;
        }
    }
    // Dependent candidates are dropped; so are the U entries that name them.
    let mut u_start = vec![0];
    let mut u = Vec::with_capacity(lu.u.len());
    for k in 0..steps.len() {
        for &(c, v) in &lu.u[lu.u_start[k]..lu.u_start[k + 1]] {
            let s = step_of[c];
            if s != usize::MAX {
                u.push((s, v));
            }
        }
        u_start.push(u.len());
    }
    lu.u = u;
    lu.u_start = u_start;
    for i in 0..m {
        if row_live[i] {
            lu.pivot_row.push(i);
            lu.u_diag.push(1.0);
            lu.l_start.push(lu.l.len());
            lu.u_start.push(lu.u.len());
            steps.push(None);
        }
    }
    lu.eta_start.push(0);
    Factorization { lu, steps }
}

impl Lu {
    pub fn num_updates(&self) -> usize {
        self.eta_pos.len()
    }

    /// Solves `B a = v` in place: `v` is indexed by row on entry and by
    /// basis position on exit. `work` must have length `m`.
    pub fn ftran(&self, v: &mut [f64], work: &mut [f64]) {
        let m = self.m;
        for k in 0..m {
            let p = v[self.pivot_row[k]];
            if p != 0.0 {
                for &(i, f) in &self.l[self.l_start[k]..self.l_start[k + 1]] {
                    v[i] -= f * p;
                }
            }
        }
        for k in (0..m).rev() {
            let mut s = v[self.pivot_row[k]];
            for &(j, u) in &self.u[self.u_start[k]..self.u_start[k + 1]] {
                s -= u * work[j];
            }
            work[k] = s / self.u_diag[k];
        }
        v.copy_from_slice(&work[..m]);
        for t in 0..self.eta_pos.len() {
            let r = self.eta_pos[t];
            let xr = v[r] / self.eta_piv[t];
            v[r] = xr;
            if xr != 0.0 {
                for &(i, a) in &self.eta[self.eta_start[t]..self.eta_start[t + 1]] {
                    v[i] -= a * xr;
                }
            }
        }
    }

    /// Solves `B^T y = c` in place: `c` is indexed by basis position on entry
    /// and by row on exit.
    pub fn btran(&self, c: &mut [f64], work: &mut [f64]) {
        let m = self.m;
        for t in (0..self.eta_pos.len()).rev() {
            let r = self.eta_pos[t];
            let mut s = c[r];
            for &(i, a) in &self.eta[self.eta_start[t]..self.eta_start[t + 1]] {
                s -= a * c[i];
            }
            c[r] = s / self.eta_piv[t];
        }
        for k in 0..m {
            let z = c[k] / self.u_diag[k];
            if z != 0.0 {
                for &(j, u) in &self.u[self.u_start[k]..self.u_start[k + 1]] {
                    c[j] -= u * z;
                }
            }
            work[self.pivot_row[k]] = z;
        }
        for k in (0..m).rev() {
            let p = self.pivot_row[k];
            let mut s = work[p];
            for &(i, f) in &self.l[self.l_start[k]..self.l_start[k + 1]] {
                s -= f * work[i];
            }
            work[p] = s;
        }
        c.copy_from_slice(&work[..m]);
    }

    /// Records that position `r` now holds the column whose FTRAN image is
    /// `alpha`.
    pub fn update(&mut self, r: usize, alpha: &[f64]) {
        for (i, &a) in alpha.iter().enumerate() {
            if i != r && a.abs() > ZERO {
                self.eta.push((i, a));
            }
        }
        self.eta_pos.push(r);
        self.eta_piv.push(alpha[r]);
        self.eta_start.push(self.eta.len());
    }
}
