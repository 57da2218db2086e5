//! Dense two-phase simplex with Bland's anti-cycling rule.
//!
//! Sized for the small feasibility and epsilon-maximization programs that
//! arise in membership tests; there is no sparsity handling and no presolve.

use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone)]
struct Constraint {
    coeffs: Vec<f64>,
    relation: Relation,
    rhs: f64,
}

/// `maximize c^T x` subject to linear constraints, `x >= 0` unless marked free.
#[derive(Debug, Clone)]
pub struct LinearProgram {
    n: usize,
    objective: Vec<f64>,
    constraints: Vec<Constraint>,
    free: Vec<bool>,
    max_pivots: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal { x: Vec<f64>, value: f64 },
    Infeasible,
    Unbounded,
}

impl LpOutcome {
    pub fn is_feasible(&self) -> bool {
        !matches!(self, LpOutcome::Infeasible)
    }
}

/// Solver-state failures, kept apart from a proven-infeasible outcome.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LpError {
    #[error("simplex pivot limit {0} reached")]
    PivotLimit(usize),
    #[error("malformed linear program: {0}")]
    Malformed(String),
}

const PIVOT_EPS: f64 = 1e-11;
const COST_EPS: f64 = 1e-11;

impl LinearProgram {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            objective: vec![0.0; n],
            constraints: Vec::new(),
            free: vec![false; n],
            max_pivots: 50_000,
        }
    }

    pub fn num_vars(&self) -> usize {
        self.n
    }

    pub fn maximize(&mut self, c: &[f64]) -> &mut Self {
        assert_eq!(c.len(), self.n, "objective length");
        self.objective = c.to_vec();
        self
    }

    pub fn constrain(&mut self, coeffs: &[f64], relation: Relation, rhs: f64) -> &mut Self {
        assert_eq!(coeffs.len(), self.n, "constraint length");
        self.constraints.push(Constraint {
            coeffs: coeffs.to_vec(),
            relation,
            rhs,
        });
        self
    }

    pub fn set_free(&mut self, j: usize) -> &mut Self {
        self.free[j] = true;
        self
    }

    pub fn solve(&self) -> Result<LpOutcome, LpError> {
        if self
            .constraints
            .iter()
            .any(|c| c.coeffs.iter().any(|v| !v.is_finite()) || !c.rhs.is_finite())
            || self.objective.iter().any(|v| !v.is_finite())
        {
            return Err(LpError::Malformed("non-finite coefficient".into()));
        }
        // column map: original var -> (plus column, optional minus column)
        let mut col_of = Vec::with_capacity(self.n);
        let mut ncols = 0;
        for j in 0..self.n {
            if self.free[j] {
                col_of.push((ncols, Some(ncols + 1)));
                ncols += 2;
            } else {
                col_of.push((ncols, None));
                ncols += 1;
            }
        }
        let n_struct = ncols;
        let m = self.constraints.len();

        // normalize so every rhs is nonnegative
        let mut rows: Vec<(Vec<f64>, Relation, f64)> = Vec::with_capacity(m);
        for c in &self.constraints {
            let mut a = vec![0.0; n_struct];
            for j in 0..self.n {
                let (p, q) = col_of[j];
                a[p] = c.coeffs[j];
                if let Some(q) = q {
                    a[q] = -c.coeffs[j];
                }
            }
            let (mut rel, mut rhs) = (c.relation, c.rhs);
            if rhs < 0.0 {
                a.iter_mut().for_each(|v| *v = -*v);
                rhs = -rhs;
                rel = match rel {
                    Relation::Le => Relation::Ge,
                    Relation::Ge => Relation::Le,
                    Relation::Eq => Relation::Eq,
                };
            }
            rows.push((a, rel, rhs));
        }

        let n_slack = rows.iter().filter(|r| r.1 != Relation::Eq).count();
        let n_art = rows.iter().filter(|r| r.1 != Relation::Le).count();
        let total = n_struct + n_slack + n_art;
        let art_start = n_struct + n_slack;

        let mut tab = Tableau {
            a: vec![vec![0.0; total + 1]; m],
            obj: vec![0.0; total + 1],
            basis: vec![0; m],
            blocked: vec![false; total],
        };
        let (mut s, mut art) = (n_struct, art_start);
        for (i, (a, rel, rhs)) in rows.iter().enumerate() {
            tab.a[i][..n_struct].copy_from_slice(a);
            tab.a[i][total] = *rhs;
            match rel {
                Relation::Le => {
                    tab.a[i][s] = 1.0;
                    tab.basis[i] = s;
                    s += 1;
                }
                Relation::Ge => {
                    tab.a[i][s] = -1.0;
                    s += 1;
                    tab.a[i][art] = 1.0;
                    tab.basis[i] = art;
                    art += 1;
                }
                Relation::Eq => {
                    tab.a[i][art] = 1.0;
                    tab.basis[i] = art;
                    art += 1;
                }
            }
        }

        let scale = rows.iter().fold(1.0_f64, |acc, r| acc.max(r.2.abs()));
        let mut pivots = 0usize;

        // phase I: minimize the sum of artificials
        if n_art > 0 {
            let mut cost = vec![0.0; total];
            cost[art_start..].iter_mut().for_each(|c| *c = 1.0);
            tab.price(&cost);
            match tab.run(&mut pivots, self.max_pivots)? {
                Phase::Optimal => {}
                Phase::Unbounded => {
                    return Err(LpError::Malformed("phase I reported unbounded".into()))
                }
            }
            let infeas = -tab.obj[total];
            if infeas > 1e-9 * scale {
                return Ok(LpOutcome::Infeasible);
            }
            // drive zero-level artificials out of the basis where possible
            for i in 0..m {
                if tab.basis[i] >= art_start {
                    if let Some(j) = (0..art_start).find(|&j| tab.a[i][j].abs() > 1e-9) {
                        tab.pivot(i, j);
                    }
                }
            }
            for j in art_start..total {
                tab.blocked[j] = true;
            }
        }

        // phase II: internal form is minimization
        let mut cost = vec![0.0; total];
        for j in 0..self.n {
            let (p, q) = col_of[j];
            cost[p] = -self.objective[j];
            if let Some(q) = q {
                cost[q] = self.objective[j];
            }
        }
        tab.price(&cost);
        match tab.run(&mut pivots, self.max_pivots)? {
            Phase::Unbounded => return Ok(LpOutcome::Unbounded),
            Phase::Optimal => {}
        }

        let mut y = vec![0.0; total];
        for i in 0..m {
            y[tab.basis[i]] = tab.a[i][total];
        }
        let x: Vec<f64> = (0..self.n)
            .map(|j| {
                let (p, q) = col_of[j];
                y[p] - q.map_or(0.0, |q| y[q])
            })
            .collect();
        let value = x.iter().zip(&self.objective).map(|(a, b)| a * b).sum();
        Ok(LpOutcome::Optimal { x, value })
    }
}

enum Phase {
    Optimal,
    Unbounded,
}

struct Tableau {
    a: Vec<Vec<f64>>,
    /// Reduced costs; the last entry holds minus the objective value.
    obj: Vec<f64>,
    basis: Vec<usize>,
    blocked: Vec<bool>,
}

impl Tableau {
    fn width(&self) -> usize {
        self.obj.len() - 1
    }

    fn price(&mut self, cost: &[f64]) {
        let w = self.width();
        self.obj[..w].copy_from_slice(cost);
        self.obj[w] = 0.0;
        for i in 0..self.a.len() {
            let cb = cost[self.basis[i]];
            if cb != 0.0 {
                for j in 0..=w {
                    self.obj[j] -= cb * self.a[i][j];
                }
            }
        }
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let w = self.width();
        let p = self.a[r][c];
        for j in 0..=w {
            self.a[r][j] /= p;
        }
        self.a[r][c] = 1.0;
        let pivot_row = self.a[r].clone();
        for (i, row) in self.a.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[c];
            if f != 0.0 {
                for j in 0..=w {
                    row[j] -= f * pivot_row[j];
                }
                row[c] = 0.0;
            }
        }
        let f = self.obj[c];
        if f != 0.0 {
            for j in 0..=w {
                self.obj[j] -= f * pivot_row[j];
            }
            self.obj[c] = 0.0;
        }
        self.basis[r] = c;
    }

    fn run(&mut self, pivots: &mut usize, limit: usize) -> Result<Phase, LpError> {
        let w = self.width();
        loop {
            // Bland: lowest-index improving column
            let entering = (0..w).find(|&j| !self.blocked[j] && self.obj[j] < -COST_EPS);
            let Some(c) = entering else {
                return Ok(Phase::Optimal);
            };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.a.len() {
                let aic = self.a[i][c];
                if aic > PIVOT_EPS {
                    let ratio = self.a[i][w] / aic;
                    leave = match leave {
                        None => Some((i, ratio)),
                        Some((k, best)) => {
                            if ratio < best - 1e-12
                                || (ratio <= best + 1e-12 && self.basis[i] < self.basis[k])
                            {
                                Some((i, ratio))
                            } else {
                                Some((k, best))
                            }
                        }
                    };
                }
            }
            let Some((r, _)) = leave else {
                return Ok(Phase::Unbounded);
            };
            self.pivot(r, c);
            *pivots += 1;
            if *pivots > limit {
                return Err(LpError::PivotLimit(limit));
            }
        }
    }
}

impl fmt::Display for LpOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LpOutcome::Optimal { value, .. } => write!(f, "optimal ({value})"),
            LpOutcome::Infeasible => f.write_str("infeasible"),
            LpOutcome::Unbounded => f.write_str("unbounded"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn textbook_maximization() {
        // max 3x + 5y, x <= 4, 2y <= 12, 3x + 2y <= 18 -> (2, 6), 36
        let mut lp = LinearProgram::new(2);
        lp.maximize(&[3.0, 5.0])
            .constrain(&[1.0, 0.0], Relation::Le, 4.0)
            .constrain(&[0.0, 2.0], Relation::Le, 12.0)
            .constrain(&[3.0, 2.0], Relation::Le, 18.0);
        match lp.solve().unwrap() {
            LpOutcome::Optimal { x, value } => {
                assert_abs_diff_eq!(value, 36.0, epsilon = 1e-12);
                assert_abs_diff_eq!(x[0], 2.0, epsilon = 1e-12);
                assert_abs_diff_eq!(x[1], 6.0, epsilon = 1e-12);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn infeasible_and_unbounded() {
        let mut lp = LinearProgram::new(1);
        lp.constrain(&[1.0], Relation::Ge, 2.0)
            .constrain(&[1.0], Relation::Le, 1.0);
        assert_eq!(lp.solve().unwrap(), LpOutcome::Infeasible);

        let mut lp = LinearProgram::new(1);
        lp.maximize(&[1.0]).constrain(&[1.0], Relation::Ge, 1.0);
        assert_eq!(lp.solve().unwrap(), LpOutcome::Unbounded);
    }

    #[test]
    fn free_variables_and_equalities() {
        // max -x s.t. x = -3 with x free
        let mut lp = LinearProgram::new(1);
        lp.maximize(&[-1.0])
            .set_free(0)
            .constrain(&[1.0], Relation::Eq, -3.0);
        match lp.solve().unwrap() {
            LpOutcome::Optimal { x, value } => {
                assert_abs_diff_eq!(x[0], -3.0, epsilon = 1e-12);
                assert_abs_diff_eq!(value, 3.0, epsilon = 1e-12);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn redundant_equalities_are_tolerated() {
        let mut lp = LinearProgram::new(2);
        lp.maximize(&[1.0, 1.0])
            .constrain(&[1.0, 1.0], Relation::Eq, 1.0)
            .constrain(&[2.0, 2.0], Relation::Eq, 2.0);
        match lp.solve().unwrap() {
            LpOutcome::Optimal { value, .. } => assert_abs_diff_eq!(value, 1.0, epsilon = 1e-12),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn degenerate_cycling_example_terminates() {
        // Beale's classic cycling instance; Bland's rule must terminate.
        let mut lp = LinearProgram::new(4);
        lp.maximize(&[0.75, -150.0, 0.02, -6.0])
            .constrain(&[0.25, -60.0, -0.04, 9.0], Relation::Le, 0.0)
            .constrain(&[0.5, -90.0, -0.02, 3.0], Relation::Le, 0.0)
            .constrain(&[0.0, 0.0, 1.0, 0.0], Relation::Le, 1.0);
        match lp.solve().unwrap() {
            LpOutcome::Optimal { value, .. } => assert_abs_diff_eq!(value, 0.05, epsilon = 1e-9),
            other => panic!("unexpected {other:?}"),
        }
    }
}
