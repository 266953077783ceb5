//! Dense two-phase tableau simplex with Bland's rule and lexicographic
//! objectives.
//!
//! The solver works on `max c·x  s.t.  A·x = b, x >= 0`. Several objectives
//! may be supplied; they are optimized in order, and while optimizing
//! objective `k` only columns whose reduced costs vanish for every earlier
//! objective may enter the basis. The final basis is therefore optimal for
//! all stages at once.

use std::fmt;

pub(crate) const PIVOT_TOL: f64 = 1e-11;
pub(crate) const OPT_TOL: f64 = 1e-9;
pub(crate) const FEAS_TOL: f64 = 1e-9;
const MAX_PIVOTS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Termination {
    Optimal,
    Infeasible,
    Unbounded,
    PivotLimit,
}

/// Standard-form problem. `a` is row-major, `m × n`.
#[derive(Debug, Clone)]
pub(crate) struct StandardLp {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub objectives: Vec<Vec<f64>>,
}

#[derive(Clone)]
pub(crate) struct SimplexResult {
    pub termination: Termination,
    pub x: Vec<f64>,
    /// Basic column per remaining row.
    pub basis: Vec<usize>,
    /// Original row indices kept after removing redundant equalities.
    pub rows: Vec<usize>,
    pub values: Vec<f64>,
    /// Rows of the final tableau, aligned with `rows`; last entry is the rhs.
    pub tableau: Vec<Vec<f64>>,
}

impl fmt::Debug for SimplexResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SimplexResult")
            .field("termination", &self.termination)
            .field("basis", &self.basis)
            .field("values", &self.values)
            .finish()
    }
}

struct Tableau {
    n: usize,
    /// Structural plus artificial column count.
    width: usize,
    rows: Vec<Vec<f64>>,
    row_ids: Vec<usize>,
    basis: Vec<usize>,
    /// One reduced-cost row per objective, each of length `width + 1`; the
    /// last entry holds minus the objective value.
    costs: Vec<Vec<f64>>,
    banned: Vec<bool>,
    pivots: usize,
}

impl Tableau {
    fn rhs(&self, i: usize) -> f64 {
        self.rows[i][self.width]
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.rows[r][c];
        for v in self.rows[r].iter_mut() {
            *v /= p;
        }
        let pivot_row = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i != r {
                let f = row[c];
                if f != 0.0 {
                    for (v, pv) in row.iter_mut().zip(pivot_row.iter()) {
                        *v -= f * pv;
                    }
                    row[c] = 0.0;
                }
            }
        }
        for cost in self.costs.iter_mut() {
            let f = cost[c];
            if f != 0.0 {
                for (v, pv) in cost.iter_mut().zip(pivot_row.iter()) {
                    *v -= f * pv;
                }
                cost[c] = 0.0;
            }
        }
        self.basis[r] = c;
        self.pivots += 1;
    }

    /// Bland's rule: lowest-index improving column, then lowest-index basic
    /// variable among tied ratios.
    fn optimize(&mut self, stage: usize) -> Termination {
        loop {
            if self.pivots > MAX_PIVOTS {
                return Termination::PivotLimit;
            }
            let entering = (0..self.width).find(|&j| {
                !self.banned[j]
                    && self.costs[stage][j] > OPT_TOL
                    && self.costs[..stage].iter().all(|c| c[j].abs() <= OPT_TOL)
                    && !self.basis.contains(&j)
            });
            let Some(col) = entering else {
                return Termination::Optimal;
            };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.rows.len() {
                let a = self.rows[i][col];
                if a > PIVOT_TOL {
                    let ratio = self.rhs(i).max(0.0) / a;
                    leave = match leave {
                        None => Some((i, ratio)),
                        Some((k, best)) => {
                            if ratio < best - FEAS_TOL * (1.0 + best.abs())
                                || (ratio <= best + FEAS_TOL * (1.0 + best.abs())
                                    && self.basis[i] < self.basis[k])
                            {
                                Some((i, ratio.min(best)))
                            } else {
                                Some((k, best))
                            }
                        }
                    };
                }
            }
            let Some((row, _)) = leave else {
                return Termination::Unbounded;
            };
            self.pivot(row, col);
        }
    }

    fn solution(&self) -> Vec<f64> {
        let mut x = vec![0.0; self.n];
        for (i, &j) in self.basis.iter().enumerate() {
            if j < self.n {
                x[j] = self.rhs(i).max(0.0);
            }
        }
        x
    }
}

fn cost_rows(lp: &StandardLp, width: usize) -> Vec<Vec<f64>> {
    lp.objectives
        .iter()
        .map(|c| {
            let mut row = vec![0.0; width + 1];
            row[..c.len()].copy_from_slice(c);
            row
        })
        .collect()
}

fn price_out(costs: &mut [Vec<f64>], rows: &[Vec<f64>], basis: &[usize]) {
    for cost in costs.iter_mut() {
        for (row, &j) in rows.iter().zip(basis) {
            let f = cost[j];
            if f != 0.0 {
                for (v, rv) in cost.iter_mut().zip(row.iter()) {
                    *v -= f * rv;
                }
            }
        }
    }
}

fn finish(t: Tableau, lp: &StandardLp, termination: Termination) -> SimplexResult {
    let x = t.solution();
    let values = lp
        .objectives
        .iter()
        .map(|c| c.iter().zip(&x).map(|(ci, xi)| ci * xi).sum())
        .collect();
    SimplexResult {
        termination,
        x,
        basis: t.basis,
        rows: t.row_ids,
        values,
        tableau: t.rows,
    }
}

fn run_stages(mut t: Tableau, lp: &StandardLp) -> SimplexResult {
    for stage in 0..lp.objectives.len() {
        match t.optimize(stage) {
            Termination::Optimal => {}
            other => return finish(t, lp, other),
        }
    }
    finish(t, lp, Termination::Optimal)
}

/// Cold start: phase 1 with artificials on rows lacking a unit column.
pub(crate) fn solve(lp: &StandardLp) -> SimplexResult {
    let m = lp.b.len();
    let n = lp.a.first().map_or(lp.objectives.first().map_or(0, Vec::len), Vec::len);

    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(m);
    for i in 0..m {
        let sign = if lp.b[i] < 0.0 { -1.0 } else { 1.0 };
        let mut row: Vec<f64> = lp.a[i].iter().map(|v| sign * v).collect();
        row.push(sign * lp.b[i]);
        rows.push(row);
    }

    // Reuse existing unit columns (slacks) as the starting basis where possible.
    let mut basis = vec![usize::MAX; m];
    for j in 0..n {
        let nonzero: Vec<usize> = (0..m).filter(|&i| rows[i][j] != 0.0).collect();
        if nonzero.len() == 1 {
            let i = nonzero[0];
            if basis[i] == usize::MAX && rows[i][j] == 1.0 {
                basis[i] = j;
            }
        }
    }
    let art_rows: Vec<usize> = (0..m).filter(|&i| basis[i] == usize::MAX).collect();
    let width = n + art_rows.len();
    for row in rows.iter_mut() {
        let rhs = row.pop().unwrap_or(0.0);
        row.resize(width, 0.0);
        row.push(rhs);
    }
    for (k, &i) in art_rows.iter().enumerate() {
        rows[i][n + k] = 1.0;
        basis[i] = n + k;
    }

    let mut phase1 = vec![vec![0.0; width + 1]];
    for k in 0..art_rows.len() {
        phase1[0][n + k] = -1.0;
    }
    price_out(&mut phase1, &rows, &basis);

    let mut t = Tableau {
        n,
        width,
        rows,
        row_ids: (0..m).collect(),
        basis,
        costs: phase1,
        banned: vec![false; width],
        pivots: 0,
    };

    if !art_rows.is_empty() {
        match t.optimize(0) {
            Termination::Optimal => {}
            Termination::PivotLimit => return finish_phase1_failure(t, lp, Termination::PivotLimit),
            // Phase 1 is bounded above by zero.
            Termination::Unbounded | Termination::Infeasible => {
                return finish_phase1_failure(t, lp, Termination::Infeasible)
            }
        }
        let scale = 1.0 + lp.b.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if -t.costs[0][width] < -FEAS_TOL * scale {
            return finish_phase1_failure(t, lp, Termination::Infeasible);
        }
        // Drive remaining artificials out of the basis; drop redundant rows.
        let mut i = 0;
        while i < t.rows.len() {
            if t.basis[i] >= n {
                let col = (0..n)
                    .filter(|j| !t.basis.contains(j))
                    .find(|&j| t.rows[i][j].abs() > 1e3 * PIVOT_TOL);
                match col {
                    Some(j) => {
                        t.pivot(i, j);
                        i += 1;
                    }
                    None => {
                        t.rows.remove(i);
                        t.row_ids.remove(i);
                        t.basis.remove(i);
                    }
                }
            } else {
                i += 1;
            }
        }
        for j in n..width {
            t.banned[j] = true;
        }
    }

    t.costs = cost_rows(lp, width);
    price_out(&mut t.costs, &t.rows, &t.basis);
    run_stages(t, lp)
}

fn finish_phase1_failure(t: Tableau, lp: &StandardLp, termination: Termination) -> SimplexResult {
    let mut res = finish(t, lp, termination);
    res.values = vec![f64::NAN; lp.objectives.len()];
    res
}

/// Warm start from a previous basis. Returns `None` when that basis is
/// singular or primal infeasible for the new data.
pub(crate) fn solve_from_basis(lp: &StandardLp, start: &[usize]) -> Option<SimplexResult> {
    let m = lp.b.len();
    if start.len() != m {
        return None;
    }
    let n = lp.a.first().map_or(0, Vec::len);
    if start.iter().any(|&j| j >= n) {
        return None;
    }
    let mut rows: Vec<Vec<f64>> = (0..m)
        .map(|i| {
            let mut r = lp.a[i].clone();
            r.push(lp.b[i]);
            r
        })
        .collect();
    let mut basis = vec![usize::MAX; m];
    let mut assigned = vec![false; m];
    for &col in start {
        let (best, mag) = (0..m)
            .filter(|&i| !assigned[i])
            .map(|i| (i, rows[i][col].abs()))
            .fold((usize::MAX, 0.0), |acc, v| if v.1 > acc.1 { v } else { acc });
        if best == usize::MAX || mag <= 1e3 * PIVOT_TOL {
            return None;
        }
        let p = rows[best][col];
        for v in rows[best].iter_mut() {
            *v /= p;
        }
        let pr = rows[best].clone();
        for (i, row) in rows.iter_mut().enumerate() {
            if i != best {
                let f = row[col];
                if f != 0.0 {
                    for (v, pv) in row.iter_mut().zip(pr.iter()) {
                        *v -= f * pv;
                    }
                    row[col] = 0.0;
                }
            }
        }
        assigned[best] = true;
        basis[best] = col;
    }
    let scale = 1.0 + lp.b.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    for row in rows.iter_mut() {
        let rhs = row[n];
        if rhs < -FEAS_TOL * scale {
            return None;
        }
        if rhs < 0.0 {
            row[n] = 0.0;
        }
    }
    let mut costs = cost_rows(lp, n);
    price_out(&mut costs, &rows, &basis);
    let t = Tableau {
        n,
        width: n,
        rows,
        row_ids: (0..m).collect(),
        basis,
        costs,
        banned: vec![false; n],
        pivots: 0,
    };
    Some(run_stages(t, lp))
}
