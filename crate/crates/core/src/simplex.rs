//! Dense two-phase simplex for small linear programs.
//!
//! Solves `maximize c.x  s.t.  a_i.x (<=|=|>=) b_i,  x >= 0` on a full
//! tableau with Bland's rule, so degenerate problems (the nonsignaling
//! equalities are highly redundant) terminate. Every optimum is returned with
//! a dual vector and a certificate recomputed from the original data.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

#[derive(Debug, Clone)]
pub struct LinearProgram {
    n_vars: usize,
    objective: Vec<f64>,
    constraints: Vec<Constraint>,
}

#[derive(Debug, Clone, Copy)]
pub struct Tolerances {
    pub feasibility: f64,
    pub optimality: f64,
    pub pivot: f64,
    /// Largest accepted primal residual, dual infeasibility or duality gap.
    pub certificate: f64,
    pub max_iterations: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            feasibility: 1e-9,
            optimality: 1e-9,
            pivot: 1e-11,
            certificate: 1e-7,
            max_iterations: 200_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Certificate {
    pub primal_residual: f64,
    pub dual_infeasibility: f64,
    pub duality_gap: f64,
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub x: Vec<f64>,
    pub objective: f64,
    /// One multiplier per constraint, in input order.
    pub duals: Vec<f64>,
    pub certificate: Certificate,
    pub iterations: usize,
}

impl LinearProgram {
    /// A maximization problem over `n_vars` nonnegative variables.
    pub fn maximize(objective: Vec<f64>) -> Self {
        LinearProgram {
            n_vars: objective.len(),
            objective,
            constraints: Vec::new(),
        }
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn add(&mut self, coeffs: Vec<f64>, relation: Relation, rhs: f64) {
        assert_eq!(coeffs.len(), self.n_vars, "constraint width");
        self.constraints.push(Constraint {
            coeffs,
            relation,
            rhs,
        });
    }

    pub fn solve(&self) -> Result<Solution> {
        self.solve_with(Tolerances::default())
    }

    pub fn solve_with(&self, tol: Tolerances) -> Result<Solution> {
        let mut tab = Tableau::build(self);
        let mut iterations = 0;

        // Phase 1: maximize -sum(artificials).
        let phase1_cost: Vec<f64> = (0..tab.n_cols)
            .map(|j| if tab.is_artificial(j) { -1.0 } else { 0.0 })
            .collect();
        tab.set_objective(&phase1_cost);
        iterations += tab.run(&tol, false)?;
        if tab.objective_value() < -tol.feasibility {
            return Err(Error::Infeasible);
        }
        tab.drive_out_artificials(tol.pivot);

        // Phase 2
        let mut cost = self.objective.clone();
        cost.resize(tab.n_cols, 0.0);
        tab.set_objective(&cost);
        iterations += tab.run(&tol, true)?;

        let mut x = vec![0.0; self.n_vars];
        for (row, &var) in tab.basis.iter().enumerate() {
            if var < self.n_vars {
                x[var] = tab.rhs(row);
            }
        }
        let duals: Vec<f64> = (0..tab.m)
            .map(|i| -tab.rc[tab.initial_col[i]] * tab.row_sign[i])
            .collect();
        let objective: f64 = self.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
        let certificate = self.certify(&x, &duals);
        if certificate.primal_residual > tol.certificate
            || certificate.dual_infeasibility > tol.certificate
            || certificate.duality_gap > tol.certificate
        {
            return Err(Error::Internal(format!(
                "LP certificate check failed: {certificate:?}"
            )));
        }
        Ok(Solution {
            x,
            objective,
            duals,
            certificate,
            iterations,
        })
    }

    /// Primal feasibility, dual feasibility and gap of `(x, y)` on the
    /// original constraint data.
    pub fn certify(&self, x: &[f64], y: &[f64]) -> Certificate {
        let mut primal = x.iter().fold(0.0f64, |m, v| m.max(-v));
        let mut dual = 0.0f64;
        let mut dual_obj = 0.0;
        let mut reduced = self.objective.clone();
        for (c, &yi) in self.constraints.iter().zip(y) {
            let lhs: f64 = c.coeffs.iter().zip(x).map(|(a, v)| a * v).sum();
            let r = lhs - c.rhs;
            primal = primal.max(match c.relation {
                Relation::Le => r,
                Relation::Ge => -r,
                Relation::Eq => r.abs(),
            });
            dual = dual.max(match c.relation {
                Relation::Le => -yi,
                Relation::Ge => yi,
                Relation::Eq => 0.0,
            });
            dual_obj += yi * c.rhs;
            for (rj, a) in reduced.iter_mut().zip(&c.coeffs) {
                *rj -= yi * a;
            }
        }
        dual = reduced.iter().fold(dual, |m, r| m.max(*r));
        let primal_obj: f64 = self.objective.iter().zip(x).map(|(c, v)| c * v).sum();
        Certificate {
            primal_residual: primal.max(0.0),
            dual_infeasibility: dual.max(0.0),
            duality_gap: (primal_obj - dual_obj).abs(),
        }
    }
}

struct Tableau {
    m: usize,
    n_cols: usize,
    first_artificial: usize,
    /// Row-major `m x (n_cols + 1)`, right-hand side last.
    cells: Vec<f64>,
    /// Reduced costs `c_j - c_B B^-1 a_j`; the last entry is minus the objective.
    rc: Vec<f64>,
    basis: Vec<usize>,
    initial_col: Vec<usize>,
    row_sign: Vec<f64>,
}

impl Tableau {
    fn build(lp: &LinearProgram) -> Self {
        let m = lp.constraints.len();
        let n = lp.n_vars;
        let row_sign: Vec<f64> = lp
            .constraints
            .iter()
            .map(|c| if c.rhs < 0.0 { -1.0 } else { 1.0 })
            .collect();
        let relation = |i: usize| match (lp.constraints[i].relation, row_sign[i] < 0.0) {
            (Relation::Le, true) => Relation::Ge,
            (Relation::Ge, true) => Relation::Le,
            (r, _) => r,
        };
        let n_slack = (0..m).filter(|&i| relation(i) != Relation::Eq).count();
        let n_art = (0..m).filter(|&i| relation(i) != Relation::Le).count();
        let first_artificial = n + n_slack;
        let n_cols = first_artificial + n_art;
        let width = n_cols + 1;

        let mut cells = vec![0.0; m * width];
        let mut basis = vec![0; m];
        let mut initial_col = vec![0; m];
        let (mut next_slack, mut next_art) = (n, first_artificial);
        for (i, c) in lp.constraints.iter().enumerate() {
            let row = &mut cells[i * width..(i + 1) * width];
            for (dst, a) in row[..n].iter_mut().zip(&c.coeffs) {
                *dst = row_sign[i] * a;
            }
            row[n_cols] = row_sign[i] * c.rhs;
            match relation(i) {
                Relation::Le => {
                    row[next_slack] = 1.0;
                    basis[i] = next_slack;
                    next_slack += 1;
                }
                Relation::Ge => {
                    row[next_slack] = -1.0;
                    next_slack += 1;
                    row[next_art] = 1.0;
                    basis[i] = next_art;
                    next_art += 1;
                }
                Relation::Eq => {
                    row[next_art] = 1.0;
                    basis[i] = next_art;
                    next_art += 1;
                }
            }
            initial_col[i] = basis[i];
        }
        Tableau {
            m,
            n_cols,
            first_artificial,
            cells,
            rc: vec![0.0; width],
            basis,
            initial_col,
            row_sign,
        }
    }

    fn width(&self) -> usize {
        self.n_cols + 1
    }

    fn is_artificial(&self, j: usize) -> bool {
        j >= self.first_artificial && j < self.n_cols
    }

    fn at(&self, i: usize, j: usize) -> f64 {
        self.cells[i * self.width() + j]
    }

    fn rhs(&self, i: usize) -> f64 {
        self.at(i, self.n_cols)
    }

    fn objective_value(&self) -> f64 {
        -self.rc[self.n_cols]
    }

    fn set_objective(&mut self, cost: &[f64]) {
        let w = self.width();
        let mut rc = cost.to_vec();
        rc.push(0.0);
        for i in 0..self.m {
            let cb = cost[self.basis[i]];
            if cb != 0.0 {
                for (r, t) in rc.iter_mut().zip(&self.cells[i * w..(i + 1) * w]) {
                    *r -= cb * t;
                }
            }
        }
        self.rc = rc;
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let w = self.width();
        let p = self.at(row, col);
        let pivot_row: Vec<f64> = self.cells[row * w..(row + 1) * w]
            .iter()
            .map(|v| v / p)
            .collect();
        for i in 0..self.m {
            if i == row {
                continue;
            }
            let f = self.at(i, col);
            if f != 0.0 {
                for (t, pr) in self.cells[i * w..(i + 1) * w].iter_mut().zip(&pivot_row) {
                    *t -= f * pr;
                }
            }
        }
        let f = self.rc[col];
        if f != 0.0 {
            for (r, pr) in self.rc.iter_mut().zip(&pivot_row) {
                *r -= f * pr;
            }
        }
        self.cells[row * w..(row + 1) * w].copy_from_slice(&pivot_row);
        self.basis[row] = col;
    }

    /// Bland's rule iterations until optimal. Returns the pivot count.
    fn run(&mut self, tol: &Tolerances, bar_artificials: bool) -> Result<usize> {
        for it in 0..tol.max_iterations {
            let entering = (0..self.n_cols)
                .filter(|&j| !(bar_artificials && self.is_artificial(j)))
                .find(|&j| self.rc[j] > tol.optimality);
            let Some(col) = entering else {
                return Ok(it);
            };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.m {
                let a = self.at(i, col);
                if a > tol.pivot {
                    let ratio = self.rhs(i).max(0.0) / a;
                    leave = match leave {
                        Some((r, best))
                            if ratio > best + 1e-12
                                || (ratio >= best - 1e-12 && self.basis[i] > self.basis[r]) =>
                        {
                            Some((r, best))
                        }
                        _ => Some((i, ratio)),
                    };
                }
            }
            match leave {
                Some((row, _)) => self.pivot(row, col),
                None => return Err(Error::Unbounded),
            }
        }
        Err(Error::Internal("simplex iteration limit reached".into()))
    }

    /// Replaces zero-level artificial basics by structural columns where the
    /// row allows it; rows with no such entry are redundant and stay inert.
    fn drive_out_artificials(&mut self, pivot_tol: f64) {
        for i in 0..self.m {
            if !self.is_artificial(self.basis[i]) {
                continue;
            }
            let col = (0..self.first_artificial)
                .max_by(|&a, &b| self.at(i, a).abs().total_cmp(&self.at(i, b).abs()))
                .filter(|&j| self.at(i, j).abs() > pivot_tol);
            if let Some(col) = col {
                self.pivot(i, col);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn textbook_problem() {
        // max 3x + 5y st x <= 4, 2y <= 12, 3x + 2y <= 18 -> (2, 6), 36
        let mut lp = LinearProgram::maximize(vec![3.0, 5.0]);
        lp.add(vec![1.0, 0.0], Relation::Le, 4.0);
        lp.add(vec![0.0, 2.0], Relation::Le, 12.0);
        lp.add(vec![3.0, 2.0], Relation::Le, 18.0);
        let s = lp.solve().unwrap();
        assert!((s.objective - 36.0).abs() < 1e-9);
        assert!((s.x[0] - 2.0).abs() < 1e-9 && (s.x[1] - 6.0).abs() < 1e-9);
        // shadow prices (0, 3/2, 1)
        assert!((s.duals[1] - 1.5).abs() < 1e-9 && (s.duals[2] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn equalities_and_ge_rows() {
        // max -x - y st x + y = 2, x - y >= -1, x <= 1.5 -> min x + y = 2
        let mut lp = LinearProgram::maximize(vec![-1.0, -1.0]);
        lp.add(vec![1.0, 1.0], Relation::Eq, 2.0);
        lp.add(vec![1.0, -1.0], Relation::Ge, -1.0);
        lp.add(vec![1.0, 0.0], Relation::Le, 1.5);
        let s = lp.solve().unwrap();
        assert!((s.objective + 2.0).abs() < 1e-9);
        assert!(s.certificate.duality_gap < 1e-9);
    }

    #[test]
    fn redundant_equalities() {
        // the same equality three times plus a combination of it
        let mut lp = LinearProgram::maximize(vec![1.0, 2.0, 0.0]);
        for _ in 0..3 {
            lp.add(vec![1.0, 1.0, 1.0], Relation::Eq, 1.0);
        }
        lp.add(vec![2.0, 2.0, 2.0], Relation::Eq, 2.0);
        lp.add(vec![0.0, 1.0, 0.0], Relation::Le, 0.25);
        let s = lp.solve().unwrap();
        assert!((s.objective - 1.25).abs() < 1e-9);
    }

    #[test]
    fn infeasible_and_unbounded() {
        let mut lp = LinearProgram::maximize(vec![1.0]);
        lp.add(vec![1.0], Relation::Le, 1.0);
        lp.add(vec![1.0], Relation::Ge, 2.0);
        assert!(matches!(lp.solve(), Err(Error::Infeasible)));

        let mut lp = LinearProgram::maximize(vec![1.0, 0.0]);
        lp.add(vec![1.0, -1.0], Relation::Le, 1.0);
        assert!(matches!(lp.solve(), Err(Error::Unbounded)));
    }

    #[test]
    fn degenerate_cycling_example() {
        // Beale's example, which cycles under the textbook largest-coefficient rule.
        let mut lp = LinearProgram::maximize(vec![0.75, -150.0, 0.02, -6.0]);
        lp.add(vec![0.25, -60.0, -0.04, 9.0], Relation::Le, 0.0);
        lp.add(vec![0.5, -90.0, -0.02, 3.0], Relation::Le, 0.0);
        lp.add(vec![0.0, 0.0, 1.0, 0.0], Relation::Le, 1.0);
        let s = lp.solve().unwrap();
        assert!((s.objective - 0.05).abs() < 1e-9);
    }

    /// Brute force over vertices of a 2-variable polygon: every pair of
    /// active constraints (plus the axes) solved directly.
    fn vertex_oracle(c: [f64; 2], rows: &[([f64; 2], f64)]) -> f64 {
        let mut lines: Vec<([f64; 2], f64)> = rows.to_vec();
        lines.push(([1.0, 0.0], 0.0));
        lines.push(([0.0, 1.0], 0.0));
        let mut best = f64::NEG_INFINITY;
        for i in 0..lines.len() {
            for j in i + 1..lines.len() {
                let (a, b) = (lines[i], lines[j]);
                let det = a.0[0] * b.0[1] - a.0[1] * b.0[0];
                if det.abs() < 1e-12 {
                    continue;
                }
                let x = (a.1 * b.0[1] - a.0[1] * b.1) / det;
                let y = (a.0[0] * b.1 - a.1 * b.0[0]) / det;
                let ok = x >= -1e-9
                    && y >= -1e-9
                    && rows.iter().all(|(r, h)| r[0] * x + r[1] * y <= h + 1e-9);
                if ok {
                    best = best.max(c[0] * x + c[1] * y);
                }
            }
        }
        best
    }

    #[test]
    fn random_polygons_match_vertex_enumeration() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let c = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            let mut rows: Vec<([f64; 2], f64)> = (0..rng.random_range(1..6))
                .map(|_| ([rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)], rng.random_range(0.1..2.0)))
                .collect();
            // keep it bounded
            rows.push(([1.0, 1.0], 3.0));
            let mut lp = LinearProgram::maximize(c.to_vec());
            for (r, h) in &rows {
                lp.add(r.to_vec(), Relation::Le, *h);
            }
            let s = lp.solve().unwrap();
            assert!((s.objective - vertex_oracle(c, &rows)).abs() < 1e-8);
            assert!(s.certificate.duality_gap < 1e-7);
        }
    }
}
