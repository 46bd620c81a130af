//! Dense bounded-variable two-phase primal simplex.
//!
//! Problems are small (at most a few thousand columns) and must solve
//! bit-identically on every run, so the solver works on a dense tableau with a
//! fully deterministic pivot rule: Dantzig pricing with lowest-index
//! tie-breaking, falling back to Bland's rule after a streak of degenerate
//! pivots to rule out cycling.
//!
//! Upper bounds are handled by reflection: a nonbasic variable sitting at its
//! upper bound `u` is replaced by `u - x`, which keeps every nonbasic variable
//! at zero in the tableau.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

const PIVOT_TOL: f64 = 1e-9;
const OPTIMALITY_TOL: f64 = 1e-10;
const PHASE_ONE_TOL: f64 = 1e-9;
const DEGENERATE_STREAK: usize = 50;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub coeffs: Vec<(usize, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

/// `max c x` subject to linear rows and `0 <= x <= upper`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearProgram {
    objective: Vec<f64>,
    upper: Vec<f64>,
    rows: Vec<Row>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

impl LpStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            LpStatus::Optimal => "optimal",
            LpStatus::Infeasible => "infeasible",
            LpStatus::Unbounded => "unbounded",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimplexResult {
    pub status: LpStatus,
    pub objective: f64,
    pub x: Vec<f64>,
    /// Largest violation of any row or bound by `x`, in the units of the input.
    pub max_violation: f64,
    pub iterations: usize,
}

impl LinearProgram {
    /// Variables start unbounded above.
    pub fn new(objective: Vec<f64>) -> Self {
        let n = objective.len();
        LinearProgram {
            objective,
            upper: vec![f64::INFINITY; n],
            rows: Vec::new(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn upper_bounds(&self) -> &[f64] {
        &self.upper
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    pub fn set_upper(&mut self, var: usize, upper: f64) {
        assert!(upper >= 0.0, "upper bound must be nonnegative");
        self.upper[var] = upper;
    }

    pub fn add_row(&mut self, coeffs: Vec<(usize, f64)>, relation: Relation, rhs: f64) {
        debug_assert!(coeffs.iter().all(|&(j, _)| j < self.num_vars()));
        self.rows.push(Row {
            coeffs,
            relation,
            rhs,
        });
    }

    /// The same problem with columns reordered: new column `k` is old column `perm[k]`.
    pub fn permute_columns(&self, perm: &[usize]) -> LinearProgram {
        assert_eq!(perm.len(), self.num_vars());
        let mut inverse = vec![usize::MAX; perm.len()];
        for (k, &old) in perm.iter().enumerate() {
            inverse[old] = k;
        }
        LinearProgram {
            objective: perm.iter().map(|&old| self.objective[old]).collect(),
            upper: perm.iter().map(|&old| self.upper[old]).collect(),
            rows: self
                .rows
                .iter()
                .map(|r| Row {
                    coeffs: r.coeffs.iter().map(|&(j, a)| (inverse[j], a)).collect(),
                    relation: r.relation,
                    rhs: r.rhs,
                })
                .collect(),
        }
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        for (v, u) in x.iter().zip(&self.upper) {
            worst = worst.max(-v).max(v - u);
        }
        for r in &self.rows {
            let lhs: f64 = r.coeffs.iter().map(|&(j, a)| a * x[j]).sum();
            let gap = match r.relation {
                Relation::Le => lhs - r.rhs,
                Relation::Ge => r.rhs - lhs,
                Relation::Eq => (lhs - r.rhs).abs(),
            };
            worst = worst.max(gap);
        }
        worst
    }

    pub fn solve(&self) -> Result<SimplexResult> {
        Tableau::new(self).run(self)
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Kind {
    Structural,
    Slack,
    Artificial,
}

struct Tableau {
    m: usize,
    n_total: usize,
    /// Row-major `m x (n_total + 1)`; the last column holds basic values.
    t: Vec<f64>,
    basis: Vec<usize>,
    is_basic: Vec<bool>,
    upper: Vec<f64>,
    reflected: Vec<bool>,
    kind: Vec<Kind>,
    /// Equilibrated copy of the constraint matrix for the final basis re-solve.
    a: DMatrix<f64>,
    b: DVector<f64>,
    iterations: usize,
}

impl Tableau {
    fn new(lp: &LinearProgram) -> Self {
        let m = lp.rows.len();
        let n = lp.num_vars();
        let n_slack = lp.rows.iter().filter(|r| r.relation != Relation::Eq).count();
        // Every row gets an artificial except <= rows whose slack can start basic.
        let mut needs_artificial = Vec::with_capacity(m);
        let mut signs = Vec::with_capacity(m);
        for r in &lp.rows {
            let scale = r.coeffs.iter().fold(0.0f64, |acc, &(_, a)| acc.max(a.abs()));
            let scale = if scale > 0.0 { scale } else { 1.0 };
            let sign = if r.rhs < 0.0 { -1.0 } else { 1.0 };
            let relation = effective_relation(r.relation, sign);
            needs_artificial.push(relation != Relation::Le);
            signs.push(sign / scale);
        }
        let n_art = needs_artificial.iter().filter(|&&b| b).count();
        let n_total = n + n_slack + n_art;
        let width = n_total + 1;
        let mut t = vec![0.0; m * width];
        let mut a = DMatrix::zeros(m, n_total);
        let mut b = DVector::zeros(m);
        let mut kind = vec![Kind::Structural; n];
        kind.extend(std::iter::repeat(Kind::Slack).take(n_slack));
        kind.extend(std::iter::repeat(Kind::Artificial).take(n_art));
        let mut upper = lp.upper.clone();
        upper.extend(std::iter::repeat(f64::INFINITY).take(n_slack + n_art));
        let mut basis = vec![0; m];
        let mut slack_col = n;
        let mut art_col = n + n_slack;
        for (i, r) in lp.rows.iter().enumerate() {
            let s = signs[i];
            for &(j, coef) in &r.coeffs {
                a[(i, j)] += s * coef;
            }
            b[i] = s * r.rhs;
            let relation = effective_relation(r.relation, s);
            match relation {
                Relation::Le => {
                    a[(i, slack_col)] = 1.0;
                    basis[i] = slack_col;
                    slack_col += 1;
                }
                Relation::Ge => {
                    a[(i, slack_col)] = -1.0;
                    slack_col += 1;
                }
                Relation::Eq => {}
            }
            if needs_artificial[i] {
                a[(i, art_col)] = 1.0;
                basis[i] = art_col;
                art_col += 1;
            }
        }
        for i in 0..m {
            for j in 0..n_total {
                t[i * width + j] = a[(i, j)];
            }
            t[i * width + n_total] = b[i];
        }
        let mut is_basic = vec![false; n_total];
        for &j in &basis {
            is_basic[j] = true;
        }
        Tableau {
            m,
            n_total,
            t,
            basis,
            is_basic,
            upper,
            reflected: vec![false; n_total],
            kind,
            a,
            b,
            iterations: 0,
        }
    }

    fn width(&self) -> usize {
        self.n_total + 1
    }

    fn at(&self, i: usize, j: usize) -> f64 {
        self.t[i * self.width() + j]
    }

    fn rhs(&self, i: usize) -> f64 {
        self.at(i, self.n_total)
    }

    /// Reflects column `j` about its upper bound: `x_j -> u_j - x_j`.
    fn reflect_nonbasic(&mut self, j: usize, costs: &mut [f64]) {
        let u = self.upper[j];
        let w = self.width();
        for i in 0..self.m {
            let aij = self.t[i * w + j];
            if aij != 0.0 {
                self.t[i * w + self.n_total] -= u * aij;
                self.t[i * w + j] = -aij;
            }
        }
        costs[j] = -costs[j];
        self.reflected[j] = !self.reflected[j];
    }

    /// Reflects the basic variable of row `r` so it can leave at its upper bound.
    fn reflect_basic(&mut self, r: usize, costs: &mut [f64]) {
        let j = self.basis[r];
        let u = self.upper[j];
        let w = self.width();
        for k in 0..w {
            self.t[r * w + k] = -self.t[r * w + k];
        }
        self.t[r * w + j] = 1.0;
        self.t[r * w + self.n_total] += u;
        costs[j] = -costs[j];
        self.reflected[j] = !self.reflected[j];
    }

    fn pivot(&mut self, r: usize, e: usize) {
        let w = self.width();
        let p = self.t[r * w + e];
        for k in 0..w {
            self.t[r * w + k] /= p;
        }
        self.t[r * w + e] = 1.0;
        let pivot_row: Vec<f64> = self.t[r * w..(r + 1) * w].to_vec();
        for i in 0..self.m {
            if i == r {
                continue;
            }
            let f = self.t[i * w + e];
            if f == 0.0 {
                continue;
            }
            for (k, &pk) in pivot_row.iter().enumerate() {
                if pk != 0.0 {
                    self.t[i * w + k] -= f * pk;
                }
            }
            self.t[i * w + e] = 0.0;
        }
        let leaving = self.basis[r];
        self.is_basic[leaving] = false;
        self.is_basic[e] = true;
        self.basis[r] = e;
    }

    fn reduced_costs(&self, costs: &[f64], allowed: &dyn Fn(usize) -> bool) -> Vec<f64> {
        let mut d = vec![0.0; self.n_total];
        for j in 0..self.n_total {
            if self.is_basic[j] || !allowed(j) {
                continue;
            }
            let mut v = costs[j];
            for i in 0..self.m {
                let cb = costs[self.basis[i]];
                if cb != 0.0 {
                    v -= cb * self.at(i, j);
                }
            }
            d[j] = v;
        }
        d
    }

    /// Runs one phase to optimality. Returns `false` on unboundedness.
    fn optimize(&mut self, costs: &mut [f64], allowed: &dyn Fn(usize) -> bool, limit: usize) -> Result<bool> {
        let mut degenerate_run = 0usize;
        loop {
            if self.iterations >= limit {
                return Err(Error::Solver(format!("not converged after {limit} iterations")));
            }
            let bland = degenerate_run >= DEGENERATE_STREAK;
            let d = self.reduced_costs(costs, allowed);
            let mut entering = None;
            let mut best = OPTIMALITY_TOL;
            for (j, &dj) in d.iter().enumerate() {
                if self.is_basic[j] || !allowed(j) || dj <= OPTIMALITY_TOL {
                    continue;
                }
                if bland {
                    entering = Some(j);
                    break;
                }
                if dj > best {
                    best = dj;
                    entering = Some(j);
                }
            }
            let Some(e) = entering else {
                return Ok(true);
            };
            self.iterations += 1;

            // Ratio test: the entering variable grows from zero.
            let mut step = self.upper[e];
            let mut leave: Option<(usize, bool)> = None;
            let mut leave_tie = f64::INFINITY;
            for i in 0..self.m {
                let aie = self.at(i, e);
                let bi = self.rhs(i).max(0.0);
                let (limit_i, to_upper) = if aie > PIVOT_TOL {
                    (bi / aie, false)
                } else if aie < -PIVOT_TOL && self.upper[self.basis[i]].is_finite() {
                    let u = self.upper[self.basis[i]];
                    (((u - self.rhs(i)).max(0.0)) / -aie, true)
                } else {
                    continue;
                };
                // Ties prefer the larger pivot, or the lower variable index under Bland.
                let tie = if bland { self.basis[i] as f64 } else { -aie.abs() };
                let better = match leave {
                    None => limit_i < step,
                    Some(_) => limit_i < step || (limit_i == step && tie < leave_tie),
                };
                if better {
                    leave = Some((i, to_upper));
                    leave_tie = tie;
                    step = limit_i;
                }
            }
            if step == f64::INFINITY {
                return Ok(false);
            }
            if step <= 0.0 {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }
            match leave {
                None => self.reflect_nonbasic(e, costs),
                Some((r, to_upper)) => {
                    if to_upper {
                        self.reflect_basic(r, costs);
                    }
                    self.pivot(r, e);
                }
            }
        }
    }

    fn run(mut self, lp: &LinearProgram) -> Result<SimplexResult> {
        let n = lp.num_vars();
        let limit = 20_000 + 50 * (self.m + self.n_total);
        let has_artificial = self.kind.contains(&Kind::Artificial);

        if has_artificial {
            let mut costs: Vec<f64> = self
                .kind
                .iter()
                .map(|k| if *k == Kind::Artificial { -1.0 } else { 0.0 })
                .collect();
            self.optimize(&mut costs, &|_| true, limit)?;
            let infeasibility: f64 = (0..self.m)
                .filter(|&i| self.kind[self.basis[i]] == Kind::Artificial)
                .map(|i| self.rhs(i).max(0.0))
                .sum();
            if infeasibility > PHASE_ONE_TOL {
                return Ok(SimplexResult {
                    status: LpStatus::Infeasible,
                    objective: f64::NAN,
                    x: vec![0.0; n],
                    max_violation: f64::NAN,
                    iterations: self.iterations,
                });
            }
            // Artificials stay in the problem pinned to zero.
            for j in 0..self.n_total {
                if self.kind[j] == Kind::Artificial {
                    self.upper[j] = 0.0;
                }
            }
        }

        let mut costs = vec![0.0; self.n_total];
        for j in 0..n {
            costs[j] = if self.reflected[j] { -lp.objective[j] } else { lp.objective[j] };
        }
        let kind = self.kind.clone();
        let bounded = self.optimize(
            &mut costs,
            &|j| kind[j] != Kind::Artificial,
            limit,
        )?;
        if !bounded {
            return Ok(SimplexResult {
                status: LpStatus::Unbounded,
                objective: f64::INFINITY,
                x: vec![0.0; n],
                max_violation: f64::NAN,
                iterations: self.iterations,
            });
        }

        let x = self.primal_values(n);
        Ok(SimplexResult {
            status: LpStatus::Optimal,
            objective: lp.objective_value(&x),
            max_violation: lp.max_violation(&x),
            x,
            iterations: self.iterations,
        })
    }

    /// Recovers the structural values by re-solving the final basis against
    /// the original (equilibrated) matrix, which removes the rounding drift
    /// accumulated by the tableau updates.
    fn primal_values(&self, n: usize) -> Vec<f64> {
        let mut values = vec![0.0; self.n_total];
        for j in 0..self.n_total {
            if !self.is_basic[j] && self.reflected[j] {
                values[j] = self.upper[j];
            }
        }
        let mut rhs = self.b.clone();
        for j in 0..self.n_total {
            if values[j] != 0.0 {
                for i in 0..self.m {
                    rhs[i] -= self.a[(i, j)] * values[j];
                }
            }
        }
        let mut basis_matrix = DMatrix::zeros(self.m, self.m);
        for (col, &j) in self.basis.iter().enumerate() {
            basis_matrix.set_column(col, &self.a.column(j));
        }
        let solved = basis_matrix.lu().solve(&rhs);
        for (i, &j) in self.basis.iter().enumerate() {
            let tableau_value = if self.reflected[j] {
                self.upper[j] - self.rhs(i)
            } else {
                self.rhs(i)
            };
            values[j] = match &solved {
                Some(s) if s[i].is_finite() => s[i],
                _ => tableau_value,
            };
        }
        values[..n]
            .iter()
            .zip(&self.upper[..n])
            .map(|(&v, &u)| v.clamp(0.0, u))
            .collect()
    }
}

fn effective_relation(relation: Relation, sign: f64) -> Relation {
    match (relation, sign < 0.0) {
        (Relation::Le, true) => Relation::Ge,
        (Relation::Ge, true) => Relation::Le,
        (r, _) => r,
    }
}
