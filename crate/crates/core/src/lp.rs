//! Dense two-phase simplex for the small time-share programs.
//!
//! The programs solved here have a handful of variables and rows, so a
//! dense tableau is the right tool: it terminates at an exact vertex, and
//! Bland's rule makes pivoting deterministic and cycle-free. Rows are
//! scaled to unit max coefficient before solving; tolerances below are
//! relative to that scaling.

/// Maximize `objective . x` subject to `rows[i] . x <= rhs[i]` and `x >= 0`.
/// Encode `>=` rows by negating coefficients and right-hand side.
#[derive(Debug, Clone)]
pub struct DenseLp {
    pub objective: Vec<f64>,
    pub rows: Vec<Vec<f64>>,
    pub rhs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal {
        x: Vec<f64>,
        objective: f64,
    },
    /// Phase 1 could not reach zero. The listed rows kept positive
    /// artificial variables at the phase-1 optimum; together they form an
    /// unsatisfiable subsystem.
    Infeasible {
        violated_rows: Vec<usize>,
    },
    Unbounded,
}

const TOL_RC: f64 = 1e-9; // reduced-cost threshold for entering columns
const TOL_PIVOT: f64 = 1e-9; // minimum usable pivot magnitude
const TOL_FEAS: f64 = 1e-9; // phase-1 objective treated as zero below this
const SNAP: f64 = 1e-13; // tableau entries below this in magnitude snap to 0
const MAX_PIVOTS: usize = 100_000;

struct Tableau {
    // rows of [coefficients | rhs], one per constraint
    t: Vec<Vec<f64>>,
    // objective row in reduced-cost form, same width
    obj: Vec<f64>,
    basis: Vec<usize>,
    banned: Vec<bool>,
    ncols: usize,
}

impl Tableau {
    fn pivot(&mut self, row: usize, col: usize) {
        let piv = self.t[row][col];
        let inv = 1.0 / piv;
        for v in self.t[row].iter_mut() {
            *v *= inv;
        }
        self.t[row][col] = 1.0;
        let pivot_row = self.t[row].clone();
        for (i, r) in self.t.iter_mut().enumerate() {
            if i == row {
                continue;
            }
            let factor = r[col];
            if factor != 0.0 {
                for (v, pv) in r.iter_mut().zip(&pivot_row) {
                    *v -= factor * pv;
                    if v.abs() < SNAP {
                        *v = 0.0;
                    }
                }
                r[col] = 0.0;
            }
        }
        let factor = self.obj[col];
        if factor != 0.0 {
            for (v, pv) in self.obj.iter_mut().zip(&pivot_row) {
                *v -= factor * pv;
                if v.abs() < SNAP {
                    *v = 0.0;
                }
            }
            self.obj[col] = 0.0;
        }
        self.basis[row] = col;
    }

    /// Runs simplex iterations until optimal or unbounded. Bland's rule:
    /// smallest improving column enters, ratio ties resolved by smallest
    /// basis variable.
    fn iterate(&mut self) -> Result<(), ()> {
        for _ in 0..MAX_PIVOTS {
            let mut entering = None;
            for j in 0..self.ncols {
                if !self.banned[j] && self.obj[j] < -TOL_RC {
                    entering = Some(j);
                    break;
                }
            }
            let Some(col) = entering else {
                return Ok(());
            };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.t.len() {
                let a = self.t[i][col];
                if a > TOL_PIVOT {
                    let ratio = self.t[i][self.ncols] / a;
                    match leave {
                        None => leave = Some((i, ratio)),
                        Some((best_i, best_r)) => {
                            if ratio < best_r - 1e-12
                                || ((ratio - best_r).abs() <= 1e-12
                                    && self.basis[i] < self.basis[best_i])
                            {
                                leave = Some((i, ratio));
                            }
                        }
                    }
                }
            }
            match leave {
                Some((row, _)) => self.pivot(row, col),
                None => return Err(()),
            }
        }
        panic!("simplex exceeded {MAX_PIVOTS} pivots, LP is numerically degenerate");
    }

    fn objective_value(&self) -> f64 {
        self.obj[self.ncols]
    }
}

/// Solves the program with a textbook two-phase method.
pub fn solve(lp: &DenseLp) -> LpOutcome {
    let n = lp.objective.len();
    let m = lp.rows.len();
    assert_eq!(lp.rhs.len(), m, "rhs length must match row count");
    for r in &lp.rows {
        assert_eq!(r.len(), n, "row width must match objective length");
    }

    // Scale each row to unit max coefficient; scaling the rhs alongside
    // keeps the solution vector unchanged.
    let mut rows = lp.rows.clone();
    let mut rhs = lp.rhs.clone();
    for i in 0..m {
        let scale = rows[i].iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        if scale > 0.0 {
            let inv = 1.0 / scale;
            for v in rows[i].iter_mut() {
                *v *= inv;
            }
            rhs[i] *= inv;
        }
    }

    // Equality form: row . x + slack_i = rhs_i with slack >= 0. Rows with
    // negative rhs flip sign, turning their slack coefficient to -1 and
    // requiring an artificial basic variable.
    let mut needs_art = vec![false; m];
    let mut n_art = 0;
    for i in 0..m {
        if rhs[i] < 0.0 {
            needs_art[i] = true;
            n_art += 1;
        }
    }
    let ncols = n + m + n_art;
    let mut t = vec![vec![0.0; ncols + 1]; m];
    let mut basis = vec![0usize; m];
    let mut art_of_row = vec![usize::MAX; m];
    let mut next_art = n + m;
    for i in 0..m {
        let flip = if needs_art[i] { -1.0 } else { 1.0 };
        for j in 0..n {
            t[i][j] = flip * rows[i][j];
        }
        t[i][n + i] = flip;
        t[i][ncols] = flip * rhs[i];
        if needs_art[i] {
            t[i][next_art] = 1.0;
            basis[i] = next_art;
            art_of_row[i] = next_art;
            next_art += 1;
        } else {
            basis[i] = n + i;
        }
    }

    let mut tab = Tableau {
        t,
        obj: vec![0.0; ncols + 1],
        basis,
        banned: vec![false; ncols],
        ncols,
    };

    // ---- phase 1: drive artificials to zero ----
    if n_art > 0 {
        for j in (n + m)..ncols {
            tab.obj[j] = 1.0; // maximize -(sum of artificials)
        }
        for (i, &art) in art_of_row.iter().enumerate() {
            if art != usize::MAX {
                let row = tab.t[i].clone();
                for (v, rv) in tab.obj.iter_mut().zip(&row) {
                    *v -= rv;
                }
            }
        }
        if tab.iterate().is_err() {
            // phase-1 objective is bounded by construction
            unreachable!("phase 1 cannot be unbounded");
        }
        if tab.objective_value() < -TOL_FEAS {
            let mut violated = Vec::new();
            for i in 0..m {
                let b = tab.basis[i];
                if b >= n + m && tab.t[i][ncols] > 1e-10 {
                    violated.push(i);
                }
            }
            violated.sort_unstable();
            return LpOutcome::Infeasible { violated_rows: violated };
        }
        // Pivot remaining zero-level artificials out of the basis, or drop
        // their rows as redundant.
        let mut i = 0;
        while i < tab.t.len() {
            if tab.basis[i] >= n + m {
                let mut pivoted = false;
                for j in 0..(n + m) {
                    if tab.t[i][j].abs() > TOL_PIVOT {
                        tab.pivot(i, j);
                        pivoted = true;
                        break;
                    }
                }
                if !pivoted {
                    tab.t.remove(i);
                    tab.basis.remove(i);
                    continue;
                }
            }
            i += 1;
        }
        for j in (n + m)..ncols {
            tab.banned[j] = true;
        }
    }

    // ---- phase 2: optimize the real objective ----
    for j in 0..ncols {
        tab.obj[j] = if j < n { -lp.objective[j] } else { 0.0 };
    }
    tab.obj[ncols] = 0.0;
    for i in 0..tab.t.len() {
        let b = tab.basis[i];
        let factor = tab.obj[b];
        if factor != 0.0 {
            let row = tab.t[i].clone();
            for (v, rv) in tab.obj.iter_mut().zip(&row) {
                *v -= factor * rv;
            }
            tab.obj[b] = 0.0;
        }
    }
    if tab.iterate().is_err() {
        return LpOutcome::Unbounded;
    }

    let mut x = vec![0.0; n];
    for (i, &b) in tab.basis.iter().enumerate() {
        if b < n {
            x[b] = tab.t[i][tab.ncols].max(0.0);
        }
    }
    let objective = lp.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
    LpOutcome::Optimal { x, objective }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn optimal(lp: &DenseLp) -> (Vec<f64>, f64) {
        match solve(lp) {
            LpOutcome::Optimal { x, objective } => (x, objective),
            other => panic!("expected optimal, got {other:?}"),
        }
    }

    #[test]
    fn box_maximum() {
        let lp = DenseLp {
            objective: vec![1.0, 1.0],
            rows: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            rhs: vec![1.0, 2.0],
        };
        let (x, obj) = optimal(&lp);
        assert!((x[0] - 1.0).abs() < 1e-9);
        assert!((x[1] - 2.0).abs() < 1e-9);
        assert!((obj - 3.0).abs() < 1e-9);
    }

    #[test]
    fn shared_budget_vertex() {
        // max 3x + 2y subject to x + y <= 4, x <= 2
        let lp = DenseLp {
            objective: vec![3.0, 2.0],
            rows: vec![vec![1.0, 1.0], vec![1.0, 0.0]],
            rhs: vec![4.0, 2.0],
        };
        let (x, obj) = optimal(&lp);
        assert!((x[0] - 2.0).abs() < 1e-9);
        assert!((x[1] - 2.0).abs() < 1e-9);
        assert!((obj - 10.0).abs() < 1e-9);
    }

    #[test]
    fn phase_one_handles_lower_bounds() {
        // 1 <= x <= 3, maximize x and then minimize x
        let rows = vec![vec![-1.0], vec![1.0]];
        let rhs = vec![-1.0, 3.0];
        let (x, _) = optimal(&DenseLp { objective: vec![1.0], rows: rows.clone(), rhs: rhs.clone() });
        assert!((x[0] - 3.0).abs() < 1e-9);
        let (x, obj) = optimal(&DenseLp { objective: vec![-1.0], rows, rhs });
        assert!((x[0] - 1.0).abs() < 1e-9);
        assert!((obj + 1.0).abs() < 1e-9);
    }

    #[test]
    fn conflicting_bounds_are_infeasible() {
        // x >= 2 and x <= 1
        let lp = DenseLp {
            objective: vec![1.0],
            rows: vec![vec![-1.0], vec![1.0]],
            rhs: vec![-2.0, 1.0],
        };
        match solve(&lp) {
            LpOutcome::Infeasible { violated_rows } => assert!(!violated_rows.is_empty()),
            other => panic!("expected infeasible, got {other:?}"),
        }
    }

    #[test]
    fn zero_row_with_negative_rhs_is_infeasible() {
        let lp = DenseLp {
            objective: vec![1.0],
            rows: vec![vec![0.0], vec![1.0]],
            rhs: vec![-1.0, 5.0],
        };
        match solve(&lp) {
            LpOutcome::Infeasible { violated_rows } => assert_eq!(violated_rows, vec![0]),
            other => panic!("expected infeasible, got {other:?}"),
        }
    }

    #[test]
    fn open_direction_is_unbounded() {
        let lp = DenseLp {
            objective: vec![1.0, 0.0],
            rows: vec![vec![0.0, 1.0]],
            rhs: vec![1.0],
        };
        assert_eq!(solve(&lp), LpOutcome::Unbounded);
    }

    #[test]
    fn degenerate_duplicate_rows() {
        let lp = DenseLp {
            objective: vec![1.0, 1.0],
            rows: vec![vec![1.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]],
            rhs: vec![1.0, 1.0, 1.0],
        };
        let (_, obj) = optimal(&lp);
        assert!((obj - 2.0).abs() < 1e-9);
    }

    #[test]
    fn pinned_variable_via_opposing_rows() {
        // x = 1 enforced by x <= 1 and x >= 1, y free up to 2
        let lp = DenseLp {
            objective: vec![5.0, 1.0],
            rows: vec![vec![1.0, 0.0], vec![-1.0, 0.0], vec![0.0, 1.0]],
            rhs: vec![1.0, -1.0, 2.0],
        };
        let (x, obj) = optimal(&lp);
        assert!((x[0] - 1.0).abs() < 1e-9);
        assert!((obj - 7.0).abs() < 1e-9);
    }

    #[test]
    fn badly_scaled_rows_still_solve() {
        // same geometry as shared_budget_vertex, scaled by 1e6 and 1e-6
        let lp = DenseLp {
            objective: vec![3.0, 2.0],
            rows: vec![vec![1e6, 1e6], vec![1e-6, 0.0]],
            rhs: vec![4e6, 2e-6],
        };
        let (x, obj) = optimal(&lp);
        assert!((x[0] - 2.0).abs() < 1e-6);
        assert!((x[1] - 2.0).abs() < 1e-6);
        assert!((obj - 10.0).abs() < 1e-5);
    }

    #[test]
    fn empty_constraint_set_is_unbounded_for_positive_objective() {
        let lp = DenseLp { objective: vec![1.0], rows: vec![], rhs: vec![] };
        assert_eq!(solve(&lp), LpOutcome::Unbounded);
    }
}
