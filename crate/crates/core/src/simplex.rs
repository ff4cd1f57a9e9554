//! Small dense linear programs.
//!
//! A two-phase primal simplex on a dense tableau with Bland's rule for
//! anti-cycling. Problem sizes here are tiny (tens of variables), so
//! simplicity and determinism beat sparse machinery. The module also
//! enumerates the vertices of transportation polytopes by exhausting basis
//! subsets; that path is the independent oracle against which the simplex
//! route is checked.

use crate::error::{Error, Result};
use itertools::Itertools;

const PIVOT_TOL: f64 = 1e-9;
const FEAS_TOL: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintOp {
    Eq,
    Le,
}

#[derive(Debug, Clone)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub op: ConstraintOp,
    pub rhs: f64,
}

/// `min c.x  s.t.  constraints, x >= 0`.
#[derive(Debug, Clone)]
pub struct Lp {
    pub n_vars: usize,
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpSolution {
    Optimal { x: Vec<f64>, value: f64 },
    Infeasible,
    Unbounded,
}

struct Tableau {
    /// (m + 1) rows by (n_cols + 1) columns; last row is the objective,
    /// last column the rhs. Objective row holds reduced costs and
    /// `-objective value` in its rhs cell.
    t: Vec<Vec<f64>>,
    basis: Vec<usize>,
    n_cols: usize,
    /// Columns barred from entering (artificials during phase 2).
    barred: Vec<bool>,
}

impl Tableau {
    fn m(&self) -> usize {
        self.basis.len()
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let piv = self.t[row][col];
        debug_assert!(piv.abs() > PIVOT_TOL);
        for v in self.t[row].iter_mut() {
            *v /= piv;
        }
        for r in 0..self.t.len() {
            if r == row {
                continue;
            }
            let factor = self.t[r][col];
            if factor == 0.0 {
                continue;
            }
            for c in 0..=self.n_cols {
                let delta = factor * self.t[row][c];
                self.t[r][c] -= delta;
            }
        }
        self.basis[row] = col;
    }

    /// Bland's rule: lowest-index entering column with negative reduced
    /// cost; lowest basic-variable index among ratio-test ties.
    fn run(&mut self) -> LpSolution {
        loop {
            let m = self.m();
            let obj_row = m;
            let mut entering = None;
            for j in 0..self.n_cols {
                if !self.barred[j] && self.t[obj_row][j] < -PIVOT_TOL {
                    entering = Some(j);
                    break;
                }
            }
            let Some(col) = entering else {
                let mut x = vec![0.0; self.n_cols];
                for (i, &b) in self.basis.iter().enumerate() {
                    x[b] = self.t[i][self.n_cols];
                }
                return LpSolution::Optimal {
                    x,
                    value: -self.t[obj_row][self.n_cols],
                };
            };
            let mut leaving: Option<(usize, f64)> = None;
            for i in 0..m {
                let a = self.t[i][col];
                if a > PIVOT_TOL {
                    let ratio = self.t[i][self.n_cols] / a;
                    match leaving {
                        None => leaving = Some((i, ratio)),
                        Some((best_i, best_r)) => {
                            if ratio < best_r - PIVOT_TOL
                                || ((ratio - best_r).abs() <= PIVOT_TOL
                                    && self.basis[i] < self.basis[best_i])
                            {
                                leaving = Some((i, ratio));
                            }
                        }
                    }
                }
            }
            let Some((row, _)) = leaving else {
                return LpSolution::Unbounded;
            };
            self.pivot(row, col);
        }
    }

    /// Rebuild the objective row for cost vector `c` (length n_cols)
    /// relative to the current basis.
    fn set_objective(&mut self, c: &[f64]) {
        let m = self.m();
        self.t[m][..self.n_cols].copy_from_slice(c);
        self.t[m][self.n_cols] = 0.0;
        for i in 0..m {
            let cb = c[self.basis[i]];
            if cb == 0.0 {
                continue;
            }
            for j in 0..=self.n_cols {
                let delta = cb * self.t[i][j];
                self.t[m][j] -= delta;
            }
        }
    }
}

/// Two-phase primal simplex.
pub fn solve(lp: &Lp) -> Result<LpSolution> {
    if lp.objective.len() != lp.n_vars {
        return Err(Error::Shape("objective length != n_vars".into()));
    }
    for (i, c) in lp.constraints.iter().enumerate() {
        if c.coeffs.len() != lp.n_vars {
            return Err(Error::Shape(format!("constraint {i} has wrong arity")));
        }
    }

    let m = lp.constraints.len();
    // Sign-normalize rhs, classify rows.
    // Le with rhs >= 0 -> slack basic. Le with rhs < 0 becomes Ge -> surplus
    // + artificial. Eq -> artificial.
    #[derive(Clone, Copy)]
    enum RowKind {
        Slack,
        SurplusArtificial,
        Artificial,
    }
    let mut rows: Vec<(Vec<f64>, f64, RowKind)> = Vec::with_capacity(m);
    for c in &lp.constraints {
        let mut coeffs = c.coeffs.clone();
        let mut rhs = c.rhs;
        let flipped = rhs < 0.0;
        if flipped {
            coeffs.iter_mut().for_each(|v| *v = -*v);
            rhs = -rhs;
        }
        let kind = match (c.op, flipped) {
            (ConstraintOp::Le, false) => RowKind::Slack,
            (ConstraintOp::Le, true) => RowKind::SurplusArtificial,
            (ConstraintOp::Eq, _) => RowKind::Artificial,
        };
        rows.push((coeffs, rhs, kind));
    }

    let n_slack = rows
        .iter()
        .filter(|r| matches!(r.2, RowKind::Slack | RowKind::SurplusArtificial))
        .count();
    let n_art = rows
        .iter()
        .filter(|r| matches!(r.2, RowKind::SurplusArtificial | RowKind::Artificial))
        .count();
    let n_cols = lp.n_vars + n_slack + n_art;

    let mut t = vec![vec![0.0; n_cols + 1]; m + 1];
    let mut basis = vec![0usize; m];
    let mut slack_cursor = 0;
    let mut art_cursor = 0;
    let mut art_cols = Vec::new();
    for (i, (coeffs, rhs, kind)) in rows.iter().enumerate() {
        t[i][..lp.n_vars].copy_from_slice(coeffs);
        t[i][n_cols] = *rhs;
        match kind {
            RowKind::Slack => {
                let col = lp.n_vars + slack_cursor;
                slack_cursor += 1;
                t[i][col] = 1.0;
                basis[i] = col;
            }
            RowKind::SurplusArtificial => {
                let s = lp.n_vars + slack_cursor;
                slack_cursor += 1;
                t[i][s] = -1.0;
                let a = lp.n_vars + n_slack + art_cursor;
                art_cursor += 1;
                t[i][a] = 1.0;
                art_cols.push(a);
                basis[i] = a;
            }
            RowKind::Artificial => {
                let a = lp.n_vars + n_slack + art_cursor;
                art_cursor += 1;
                t[i][a] = 1.0;
                art_cols.push(a);
                basis[i] = a;
            }
        }
    }

    let mut tab = Tableau {
        t,
        basis,
        n_cols,
        barred: vec![false; n_cols],
    };

    if !art_cols.is_empty() {
        let mut phase1 = vec![0.0; n_cols];
        for &a in &art_cols {
            phase1[a] = 1.0;
        }
        tab.set_objective(&phase1);
        match tab.run() {
            LpSolution::Optimal { value, .. } => {
                if value > FEAS_TOL {
                    return Ok(LpSolution::Infeasible);
                }
            }
            // Phase 1 is bounded below by zero.
            _ => unreachable!("phase 1 cannot be unbounded"),
        }
        // Pivot basic artificials out; drop rows that are linearly redundant.
        let is_art = |c: usize| c >= lp.n_vars + n_slack;
        let mut row = 0;
        while row < tab.m() {
            if is_art(tab.basis[row]) {
                let mut pivot_col = None;
                for j in 0..lp.n_vars + n_slack {
                    if tab.t[row][j].abs() > PIVOT_TOL {
                        pivot_col = Some(j);
                        break;
                    }
                }
                match pivot_col {
                    Some(col) => tab.pivot(row, col),
                    None => {
                        tab.t.remove(row);
                        tab.basis.remove(row);
                        continue;
                    }
                }
            }
            row += 1;
        }
        for &a in &art_cols {
            tab.barred[a] = true;
        }
    }

    let mut c2 = vec![0.0; n_cols];
    c2[..lp.n_vars].copy_from_slice(&lp.objective);
    tab.set_objective(&c2);
    let solution = tab.run();
    Ok(match solution {
        LpSolution::Optimal { x, value } => LpSolution::Optimal {
            x: x[..lp.n_vars].to_vec(),
            value,
        },
        other => other,
    })
}

/// All vertices of the transportation polytope
/// `{ q >= 0 : row sums = rows, column sums = cols }`, found by exhausting
/// basis subsets of size `nr + nc - 1`. Both margin vectors must be strictly
/// positive with equal totals. Intended for small instances (the oracle
/// side of the dual-route check); cell counts above 16 are rejected.
pub fn transportation_vertices(rows: &[f64], cols: &[f64]) -> Result<Vec<Vec<f64>>> {
    let nr = rows.len();
    let nc = cols.len();
    let cells = nr * nc;
    if cells == 0 {
        return Err(Error::Shape("empty transportation polytope".into()));
    }
    if cells > 16 {
        return Err(Error::Shape(format!(
            "vertex enumeration capped at 16 cells, got {cells}"
        )));
    }
    if rows.iter().chain(cols).any(|&v| v <= 0.0) {
        return Err(Error::Shape("margins must be strictly positive".into()));
    }
    let rank = nr + nc - 1;

    // Equations: nr row sums plus the first nc-1 column sums (the last is
    // implied by equal totals).
    let eq_row = |cell: usize, eq: usize| -> f64 {
        let (r, c) = (cell / nc, cell % nc);
        if eq < nr {
            if r == eq {
                1.0
            } else {
                0.0
            }
        } else if c == eq - nr {
            1.0
        } else {
            0.0
        }
    };
    let mut rhs_full = Vec::with_capacity(rank);
    rhs_full.extend_from_slice(rows);
    rhs_full.extend_from_slice(&cols[..nc - 1]);

    let mut seen = std::collections::HashSet::new();
    let mut vertices = Vec::new();
    for subset in (0..cells).combinations(rank) {
        // Dense rank x rank system over the chosen basic cells.
        let mut a = vec![vec![0.0f64; rank]; rank];
        let mut b = rhs_full.clone();
        for (j, &cell) in subset.iter().enumerate() {
            for (i, row) in a.iter_mut().enumerate() {
                row[j] = eq_row(cell, i);
            }
        }
        if !gaussian_solve(&mut a, &mut b) {
            continue;
        }
        if b.iter().any(|&v| v < -1e-9) {
            continue;
        }
        let mut q = vec![0.0; cells];
        for (j, &cell) in subset.iter().enumerate() {
            q[cell] = b[j].max(0.0);
        }
        // Verify the dropped column equation too (guards elimination noise).
        let last_col: f64 = (0..nr).map(|r| q[r * nc + nc - 1]).sum();
        if (last_col - cols[nc - 1]).abs() > 1e-7 {
            continue;
        }
        let key: Vec<i64> = q.iter().map(|&v| (v * 1e9).round() as i64).collect();
        if seen.insert(key) {
            vertices.push(q);
        }
    }
    Ok(vertices)
}

/// In-place Gaussian elimination with partial pivoting; false if singular.
#[allow(clippy::needless_range_loop)]
fn gaussian_solve(a: &mut [Vec<f64>], b: &mut [f64]) -> bool {
    let n = b.len();
    for col in 0..n {
        let mut best = col;
        for r in col + 1..n {
            if a[r][col].abs() > a[best][col].abs() {
                best = r;
            }
        }
        if a[best][col].abs() < 1e-10 {
            return false;
        }
        a.swap(col, best);
        b.swap(col, best);
        for r in 0..n {
            if r == col {
                continue;
            }
            let f = a[r][col] / a[col][col];
            if f == 0.0 {
                continue;
            }
            for c in col..n {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    for i in 0..n {
        b[i] /= a[i][i];
    }
    true
}
