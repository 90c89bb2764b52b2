//! Dense two-phase primal simplex with bounded variables.
//!
//! Solves `min c'x  s.t.  a_r'x {<=, =, >=} b_r,  0 <= x <= ub` on a full
//! tableau. Upper bounds are handled by bound flipping rather than extra
//! rows, which keeps the correlated-equilibrium distance problem at one row
//! per incentive constraint.

use thiserror::Error;

const PIVOT_TOL: f64 = 1e-10;
const COST_TOL: f64 = 1e-10;
const FEASIBILITY_TOL: f64 = 1e-8;
/// Consecutive degenerate pivots after which Bland's rule takes over.
const DEGENERATE_SWITCH: usize = 50;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LpError {
    #[error("is infeasible (phase-one objective {0:e})")]
    Infeasible(f64),
    #[error("is unbounded")]
    Unbounded,
    #[error("hit the iteration limit of {0}")]
    IterationLimit(usize),
    #[error("is malformed: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone)]
struct Row {
    coeffs: Vec<f64>,
    relation: Relation,
    rhs: f64,
}

#[derive(Debug, Clone)]
pub struct LinearProgram {
    objective: Vec<f64>,
    upper: Vec<f64>,
    rows: Vec<Row>,
    max_iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub objective: f64,
    pub x: Vec<f64>,
    pub iterations: usize,
}

impl LinearProgram {
    /// A minimization over `objective.len()` variables, each in `[0, inf)`.
    pub fn minimize(objective: Vec<f64>) -> Self {
        let n = objective.len();
        LinearProgram {
            objective,
            upper: vec![f64::INFINITY; n],
            rows: Vec::new(),
            max_iterations: 100_000,
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn set_upper(&mut self, var: usize, bound: f64) {
        self.upper[var] = bound;
    }

    pub fn add_row(&mut self, coeffs: Vec<f64>, relation: Relation, rhs: f64) {
        self.rows.push(Row {
            coeffs,
            relation,
            rhs,
        });
    }

    pub fn with_max_iterations(mut self, n: usize) -> Self {
        self.max_iterations = n;
        self
    }

    pub fn solve(&self) -> Result<LpSolution, LpError> {
        let n = self.num_vars();
        for (r, row) in self.rows.iter().enumerate() {
            if row.coeffs.len() != n {
                return Err(LpError::Malformed(format!(
                    "row {r} has {} coefficients for {n} variables",
                    row.coeffs.len()
                )));
            }
            if !row.rhs.is_finite() || row.coeffs.iter().any(|a| !a.is_finite()) {
                return Err(LpError::Malformed(format!("row {r} is not finite")));
            }
        }
        if self.upper.iter().any(|u| u.is_nan() || *u < 0.0) {
            return Err(LpError::Malformed("negative or NaN upper bound".into()));
        }
        Tableau::build(self).run(&self.objective, self.max_iterations)
    }
}

struct Tableau {
    m: usize,
    n_orig: usize,
    cols: usize,
    /// Row-major `m x cols`, holds `B^-1 A`.
    t: Vec<f64>,
    /// Values of the basic variables.
    beta: Vec<f64>,
    basis: Vec<usize>,
    upper: Vec<f64>,
    at_upper: Vec<bool>,
    is_basic: Vec<bool>,
    cost: Vec<f64>,
    artificial_start: usize,
    iterations: usize,
}

impl Tableau {
    fn build(lp: &LinearProgram) -> Self {
        let m = lp.rows.len();
        let n = lp.num_vars();
        let slack_count = lp.rows.iter().filter(|r| r.relation != Relation::Eq).count();
        let artificial_start = n + slack_count;
        let cols = artificial_start + m;
        let mut t = vec![0.0; m * cols];
        let mut beta = vec![0.0; m];
        let mut basis = vec![0; m];
        let mut upper = lp.upper.clone();
        upper.resize(cols, f64::INFINITY);
        let mut slack = n;
        for (r, row) in lp.rows.iter().enumerate() {
            let sign = if row.rhs < 0.0 { -1.0 } else { 1.0 };
            let line = &mut t[r * cols..(r + 1) * cols];
            for (dst, a) in line.iter_mut().zip(&row.coeffs) {
                *dst = sign * a;
            }
            beta[r] = sign * row.rhs;
            let mut basic_slack = None;
            match row.relation {
                Relation::Le => {
                    line[slack] = sign;
                    if sign > 0.0 {
                        basic_slack = Some(slack);
                    }
                    slack += 1;
                }
                Relation::Ge => {
                    line[slack] = -sign;
                    if sign < 0.0 {
                        basic_slack = Some(slack);
                    }
                    slack += 1;
                }
                Relation::Eq => {}
            }
            let art = artificial_start + r;
            line[art] = 1.0;
            basis[r] = basic_slack.unwrap_or(art);
            if basic_slack.is_some() {
                // this artificial never enters
                upper[art] = 0.0;
            }
        }
        let mut is_basic = vec![false; cols];
        for &b in &basis {
            is_basic[b] = true;
        }
        let mut cost = vec![0.0; cols];
        for c in cost.iter_mut().skip(artificial_start) {
            *c = 1.0;
        }
        Tableau {
            m,
            n_orig: n,
            cols,
            t,
            beta,
            basis,
            upper,
            at_upper: vec![false; cols],
            is_basic,
            cost,
            artificial_start,
            iterations: 0,
        }
    }

    fn run(mut self, objective: &[f64], max_iterations: usize) -> Result<LpSolution, LpError> {
        self.optimize(max_iterations)?;
        let phase_one = self.objective_value();
        if phase_one > FEASIBILITY_TOL {
            return Err(LpError::Infeasible(phase_one));
        }
        for a in self.artificial_start..self.cols {
            self.upper[a] = 0.0;
            self.at_upper[a] = false;
        }
        self.cost = vec![0.0; self.cols];
        self.cost[..self.n_orig].copy_from_slice(objective);
        self.optimize(max_iterations)?;
        let x = self.values();
        let objective_value = x.iter().zip(objective).map(|(x, c)| x * c).sum();
        Ok(LpSolution {
            objective: objective_value,
            x,
            iterations: self.iterations,
        })
    }

    fn objective_value(&self) -> f64 {
        let mut z = 0.0;
        for j in 0..self.cols {
            if !self.is_basic[j] && self.at_upper[j] {
                z += self.cost[j] * self.upper[j];
            }
        }
        for (r, &b) in self.basis.iter().enumerate() {
            z += self.cost[b] * self.beta[r];
        }
        z
    }

    fn reduced_costs(&self) -> Vec<f64> {
        let mut d = self.cost.clone();
        for (r, &b) in self.basis.iter().enumerate() {
            let cb = self.cost[b];
            if cb != 0.0 {
                let line = &self.t[r * self.cols..(r + 1) * self.cols];
                for (dj, a) in d.iter_mut().zip(line) {
                    *dj -= cb * a;
                }
            }
        }
        d
    }

    fn optimize(&mut self, max_iterations: usize) -> Result<(), LpError> {
        let mut degenerate_run = 0usize;
        loop {
            if self.iterations >= max_iterations {
                return Err(LpError::IterationLimit(max_iterations));
            }
            let d = self.reduced_costs();
            let bland = degenerate_run >= DEGENERATE_SWITCH;
            let mut entering = None;
            let mut best = 0.0;
            for j in 0..self.cols {
                if self.is_basic[j] || self.upper[j] == 0.0 {
                    continue;
                }
                let gain = if self.at_upper[j] { d[j] } else { -d[j] };
                if gain > COST_TOL {
                    if bland {
                        entering = Some(j);
                        break;
                    }
                    if gain > best {
                        best = gain;
                        entering = Some(j);
                    }
                }
            }
            let Some(j) = entering else {
                return Ok(());
            };
            let dir = if self.at_upper[j] { -1.0 } else { 1.0 };

            // ratio test
            let mut theta = self.upper[j];
            let mut leaving: Option<(usize, bool)> = None;
            for r in 0..self.m {
                let alpha = dir * self.t[r * self.cols + j];
                let b = self.basis[r];
                let limit = if alpha > PIVOT_TOL {
                    self.beta[r].max(0.0) / alpha
                } else if alpha < -PIVOT_TOL && self.upper[b].is_finite() {
                    (self.upper[b] - self.beta[r]).max(0.0) / -alpha
                } else {
                    continue;
                };
                let better = if limit < theta - 1e-12 {
                    true
                } else if let Some((lr, _)) = leaving {
                    // ties: Bland picks the smallest variable index
                    bland && (limit - theta).abs() <= 1e-12 && self.basis[r] < self.basis[lr]
                } else {
                    false
                };
                if better {
                    theta = limit;
                    leaving = Some((r, alpha < 0.0));
                }
            }
            if !theta.is_finite() {
                return Err(LpError::Unbounded);
            }
            self.iterations += 1;
            degenerate_run = if theta <= 1e-12 { degenerate_run + 1 } else { 0 };

            for r in 0..self.m {
                self.beta[r] -= dir * theta * self.t[r * self.cols + j];
            }
            match leaving {
                None => {
                    // bound flip, basis unchanged
                    self.at_upper[j] = !self.at_upper[j];
                }
                Some((r, to_upper)) => {
                    let start = if self.at_upper[j] { self.upper[j] } else { 0.0 };
                    let leaving_var = self.basis[r];
                    self.pivot(r, j);
                    self.beta[r] = start + dir * theta;
                    self.is_basic[leaving_var] = false;
                    self.at_upper[leaving_var] = to_upper;
                    self.is_basic[j] = true;
                    self.at_upper[j] = false;
                    self.basis[r] = j;
                }
            }
        }
    }

    fn pivot(&mut self, r: usize, j: usize) {
        let cols = self.cols;
        let p = self.t[r * cols + j];
        for v in &mut self.t[r * cols..(r + 1) * cols] {
            *v /= p;
        }
        let pivot_row: Vec<f64> = self.t[r * cols..(r + 1) * cols].to_vec();
        for i in 0..self.m {
            if i == r {
                continue;
            }
            let f = self.t[i * cols + j];
            if f == 0.0 {
                continue;
            }
            let line = &mut self.t[i * cols..(i + 1) * cols];
            for (v, pr) in line.iter_mut().zip(&pivot_row) {
                *v -= f * pr;
            }
            line[j] = 0.0;
        }
    }

    fn values(&self) -> Vec<f64> {
        let mut x: Vec<f64> = (0..self.n_orig)
            .map(|j| if self.at_upper[j] { self.upper[j] } else { 0.0 })
            .collect();
        for (r, &b) in self.basis.iter().enumerate() {
            if b < self.n_orig {
                x[b] = self.beta[r].clamp(0.0, self.upper[b]);
            }
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-9
    }

    #[test]
    fn textbook_maximization() {
        // max 3x + 5y s.t. x <= 4, 2y <= 12, 3x + 2y <= 18  ->  (2, 6), 36
        let mut lp = LinearProgram::minimize(vec![-3.0, -5.0]);
        lp.add_row(vec![1.0, 0.0], Relation::Le, 4.0);
        lp.add_row(vec![0.0, 2.0], Relation::Le, 12.0);
        lp.add_row(vec![3.0, 2.0], Relation::Le, 18.0);
        let s = lp.solve().unwrap();
        assert!(close(s.objective, -36.0));
        assert!(close(s.x[0], 2.0) && close(s.x[1], 6.0));
    }

    #[test]
    fn upper_bounds_replace_rows() {
        let mut lp = LinearProgram::minimize(vec![-3.0, -5.0]);
        lp.set_upper(0, 4.0);
        lp.set_upper(1, 6.0);
        lp.add_row(vec![3.0, 2.0], Relation::Le, 18.0);
        let s = lp.solve().unwrap();
        assert!(close(s.objective, -36.0), "{s:?}");
    }

    #[test]
    fn equality_and_ge_rows() {
        // min x + 2y + 3z s.t. x + y + z = 1, y + z >= 0.5, z >= 0.25
        let mut lp = LinearProgram::minimize(vec![1.0, 2.0, 3.0]);
        lp.add_row(vec![1.0, 1.0, 1.0], Relation::Eq, 1.0);
        lp.add_row(vec![0.0, 1.0, 1.0], Relation::Ge, 0.5);
        lp.add_row(vec![0.0, 0.0, 1.0], Relation::Ge, 0.25);
        let s = lp.solve().unwrap();
        // x = 0.5, y = 0.25, z = 0.25 -> 0.5 + 0.5 + 0.75
        assert!(close(s.objective, 1.75), "{s:?}");
    }

    #[test]
    fn negative_rhs_rows() {
        // min x s.t. -x <= -2  (x >= 2)
        let mut lp = LinearProgram::minimize(vec![1.0]);
        lp.add_row(vec![-1.0], Relation::Le, -2.0);
        assert!(close(lp.solve().unwrap().objective, 2.0));
    }

    #[test]
    fn infeasible_is_reported() {
        let mut lp = LinearProgram::minimize(vec![1.0, 1.0]);
        lp.add_row(vec![1.0, 1.0], Relation::Le, 1.0);
        lp.add_row(vec![1.0, 1.0], Relation::Ge, 2.0);
        assert!(matches!(lp.solve(), Err(LpError::Infeasible(_))));
        let mut bounded = LinearProgram::minimize(vec![1.0]);
        bounded.set_upper(0, 1.0);
        bounded.add_row(vec![1.0], Relation::Ge, 2.0);
        assert!(matches!(bounded.solve(), Err(LpError::Infeasible(_))));
    }

    #[test]
    fn unbounded_is_reported() {
        let mut lp = LinearProgram::minimize(vec![-1.0, 0.0]);
        lp.add_row(vec![1.0, -1.0], Relation::Le, 1.0);
        assert_eq!(lp.solve(), Err(LpError::Unbounded));
    }

    #[test]
    fn redundant_equalities() {
        let mut lp = LinearProgram::minimize(vec![1.0, 1.0]);
        lp.add_row(vec![1.0, 1.0], Relation::Eq, 1.0);
        lp.add_row(vec![2.0, 2.0], Relation::Eq, 2.0);
        assert!(close(lp.solve().unwrap().objective, 1.0));
    }

    #[test]
    fn malformed_rows_are_rejected() {
        let mut lp = LinearProgram::minimize(vec![1.0, 1.0]);
        lp.add_row(vec![1.0], Relation::Le, 1.0);
        assert!(matches!(lp.solve(), Err(LpError::Malformed(_))));
    }

    #[test]
    fn agrees_with_vertex_enumeration_on_random_2d_programs() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        for _ in 0..200 {
            let c = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            let rows: Vec<([f64; 2], f64)> = (0..4)
                .map(|_| ([rng.random_range(0.1..2.0), rng.random_range(0.1..2.0)], rng.random_range(0.5..3.0)))
                .collect();
            let mut lp = LinearProgram::minimize(c.to_vec());
            for (a, b) in &rows {
                lp.add_row(a.to_vec(), Relation::Le, *b);
            }
            let s = lp.solve().unwrap();
            // enumerate vertices of {x >= 0, a x <= b}
            let mut lines: Vec<([f64; 2], f64)> = rows.clone();
            lines.push(([1.0, 0.0], 0.0));
            lines.push(([0.0, 1.0], 0.0));
            let mut best = f64::INFINITY;
            for i in 0..lines.len() {
                for j in i + 1..lines.len() {
                    let (a1, b1) = lines[i];
                    let (a2, b2) = lines[j];
                    let det = a1[0] * a2[1] - a1[1] * a2[0];
                    if det.abs() < 1e-12 {
                        continue;
                    }
                    let x = (b1 * a2[1] - a1[1] * b2) / det;
                    let y = (a1[0] * b2 - b1 * a2[0]) / det;
                    let feasible = x >= -1e-9
                        && y >= -1e-9
                        && rows.iter().all(|(a, b)| a[0] * x + a[1] * y <= b + 1e-9);
                    if feasible {
                        best = best.min(c[0] * x + c[1] * y);
                    }
                }
            }
            assert!((s.objective - best).abs() < 1e-8, "{} vs {}", s.objective, best);
        }
    }
}
