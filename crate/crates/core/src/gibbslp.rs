//! Yield maximization over Gibbs-stochastic matrices.
//!
//! The permutation-symmetric reduction keeps only the entries `x_ij` that move
//! population from the `j - 1` times excited shell (energy `(j-1) W`) to a
//! level of the `i` times switched shell (energy `i delta`). A level at
//! `i delta` receives Gibbs weight `sum_j C(N, j-1) e^{-(j-1) W} x_ij` from the
//! excited shells and must be topped up to exactly `e^{-i delta}` by some
//! column that is empty in the initial state. Where that remainder comes from
//! is selected by [`ColumnChoice`].
//!
//! Every coefficient is assembled from logarithms and the variables are
//! rescaled to `y_ij = x_ij / ub_ij` with the tightest implied bound `ub_ij`,
//! which keeps all scaled coefficients in `[0, 1]` even when the raw ones span
//! hundreds of decades.

use serde::Serialize;

use crate::curves::{max_uncorrelated_yield, DEFAULT_YIELD_TOL};
use crate::error::{Error, Result};
use crate::logscalar::{ln_binomial, ln_sum_exp, CompensatedSum};
use crate::simplex::{LinearProgram, LpStatus, Relation};
use crate::state::{yield_from_populations, ModelParams};

/// Largest molecule count accepted by [`build_symmetric_lp`].
pub const N_MAX: u32 = 200;
/// Scaled coefficients below this are dropped.
pub const TRUNCATION_THRESHOLD: f64 = 1e-300;
/// Feasibility slack accepted on the unscaled constraints.
pub const CONSTRAINT_TOL: f64 = 1e-9;

/// Which empty-in-the-initial-state column supplies the Gibbs weight each
/// target level still lacks.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ColumnChoice {
    /// Each target level keeps its own remainder on the diagonal of `G`.
    /// This is always feasible and reproduces the unreduced problem.
    Diagonal,
    /// Every target level draws its remainder from the group of `k`-switched
    /// levels, which then has a column-mass budget of its own. `FixedGroup(1)`
    /// is the single-switched column.
    FixedGroup(u32),
}

/// The reduced linear program in scaled variables.
#[derive(Clone, Debug)]
pub struct SymmetricLP {
    pub params: ModelParams,
    pub choice: ColumnChoice,
    pub lp: LinearProgram,
    /// `ln ub_ij`, indexed like the variables.
    ln_scale: Vec<f64>,
    /// Number of coefficients dropped below [`TRUNCATION_THRESHOLD`].
    pub truncated: usize,
}

impl SymmetricLP {
    pub fn n(&self) -> u32 {
        self.params.n
    }

    /// Column of `x_ij`, `i in 1..=N`, `j in 1..=N+1`.
    pub fn var_index(&self, i: u32, j: u32) -> usize {
        var_index(self.params.n, i, j)
    }

    pub fn num_structural(&self) -> usize {
        self.lp.num_vars()
    }

    /// Unscaled `x` from scaled solver values.
    pub fn unscale(&self, y: &[f64]) -> Vec<f64> {
        y.iter().zip(&self.ln_scale).map(|(v, s)| v * s.exp()).collect()
    }

    /// `p_i = sum_j C(N, j-1) x_ij (1-q)^{N-(j-1)} q^{j-1}`.
    pub fn populations(&self, x: &[f64]) -> Vec<f64> {
        let n = self.params.n;
        (1..=n)
            .map(|i| {
                let mut acc = CompensatedSum::default();
                for j in 1..=n + 1 {
                    let v = x[self.var_index(i, j)];
                    if v > 0.0 {
                        acc.add((ln_shell_population(&self.params, j) + v.ln()).exp());
                    }
                }
                acc.value()
            })
            .collect()
    }

    /// Entries of the supplying column for each target level.
    ///
    /// For `FixedGroup(k)` this is `z_i = e^{k delta} / C(N, k) [e^{-i delta} - inflow_i]`.
    /// For `Diagonal` it is the diagonal entry `1 - e^{i delta} inflow_i`.
    pub fn z_values(&self, x: &[f64]) -> Vec<f64> {
        let n = self.params.n;
        let delta = self.params.delta;
        (1..=n)
            .map(|i| {
                let inflow = self.gibbs_inflow(x, i);
                match self.choice {
                    ColumnChoice::Diagonal => 1.0 - (i as f64 * delta).exp() * inflow,
                    ColumnChoice::FixedGroup(k) => {
                        let pre = (k as f64 * delta - ln_binomial(n as u64, k as u64)).exp();
                        pre * ((-(i as f64) * delta).exp() - inflow)
                    }
                }
            })
            .collect()
    }

    /// `sum_j C(N, j-1) e^{-(j-1) W} x_ij`.
    fn gibbs_inflow(&self, x: &[f64], i: u32) -> f64 {
        let mut acc = CompensatedSum::default();
        for j in 1..=self.params.n + 1 {
            let v = x[self.var_index(i, j)];
            if v > 0.0 {
                acc.add((ln_shell_weight(&self.params, j) + v.ln()).exp());
            }
        }
        acc.value()
    }

    /// Largest violation of the unscaled constraints by `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let n = self.params.n;
        let mut worst = 0.0f64;
        for &v in x {
            worst = worst.max(-v).max(v - 1.0);
        }
        for j in 1..=n + 1 {
            let mass: f64 = (1..=n)
                .map(|i| ln_binomial(n as u64, i as u64).exp() * x[self.var_index(i, j)])
                .sum();
            worst = worst.max(mass - 1.0);
        }
        let z = self.z_values(x);
        for &zi in &z {
            worst = worst.max(-zi).max(zi - 1.0);
        }
        if let ColumnChoice::FixedGroup(_) = self.choice {
            let mass: f64 = (1..=n)
                .map(|i| ln_binomial(n as u64, i as u64).exp() * z[i as usize - 1])
                .sum();
            worst = worst.max(mass - 1.0);
        }
        worst
    }
}

fn var_index(n: u32, i: u32, j: u32) -> usize {
    debug_assert!((1..=n).contains(&i) && (1..=n + 1).contains(&j));
    ((i - 1) * (n + 1) + (j - 1)) as usize
}

/// `ln [C(N, j-1) (1-q)^{N-(j-1)} q^{j-1}]`, the population of shell `j`.
fn ln_shell_population(params: &ModelParams, j: u32) -> f64 {
    let n = params.n as u64;
    let k = (j - 1) as u64;
    let ln_q = if k == 0 { 0.0 } else { k as f64 * params.q.ln() };
    let ln_1mq = if n == k { 0.0 } else { (n - k) as f64 * (1.0 - params.q).ln() };
    ln_binomial(n, k) + ln_q + ln_1mq
}

/// `ln [C(N, j-1) e^{-(j-1) W}]`, the Gibbs weight of shell `j`.
fn ln_shell_weight(params: &ModelParams, j: u32) -> f64 {
    ln_binomial(params.n as u64, (j - 1) as u64) - (j - 1) as f64 * params.w
}

/// Coefficients in scaled variables, with truncation bookkeeping.
struct RowBuilder<'a> {
    ln_scale: &'a [f64],
    truncated: usize,
}

impl RowBuilder<'_> {
    fn coeffs(&mut self, terms: impl Iterator<Item = (usize, f64)>) -> Vec<(usize, f64)> {
        let mut out = Vec::new();
        for (var, ln_coef) in terms {
            let v = (ln_coef + self.ln_scale[var]).exp();
            if v >= TRUNCATION_THRESHOLD {
                out.push((var, v));
            } else if ln_coef > f64::NEG_INFINITY && self.ln_scale[var] > f64::NEG_INFINITY {
                self.truncated += 1;
            }
        }
        out
    }
}

/// Builds the reduced problem with the diagonal remainder.
pub fn build_symmetric_lp(params: &ModelParams) -> Result<SymmetricLP> {
    build_symmetric_lp_with(params, ColumnChoice::Diagonal)
}

pub fn build_symmetric_lp_with(params: &ModelParams, choice: ColumnChoice) -> Result<SymmetricLP> {
    params.validate()?;
    let n = params.n;
    if n > N_MAX {
        return Err(Error::SizeLimit(format!(
            "symmetric LP supports N <= {N_MAX}, got {n}; use the asymptotic solver"
        )));
    }
    if let ColumnChoice::FixedGroup(k) = choice {
        if !(1..=n).contains(&k) {
            return Err(Error::InvalidParameter(format!("fixed group must lie in 1..={n}, got {k}")));
        }
    }
    let delta = params.delta;
    let nv = (n * (n + 1)) as usize;
    let ln_c = |i: u32| ln_binomial(n as u64, i as u64);

    // ub_ij from the column-mass row and the nonnegative-remainder row.
    let mut ln_scale = vec![0.0; nv];
    for i in 1..=n {
        for j in 1..=n + 1 {
            let by_mass = -ln_c(i);
            let by_remainder = -(i as f64) * delta - ln_shell_weight(params, j);
            ln_scale[var_index(n, i, j)] = by_mass.min(by_remainder).min(0.0);
        }
    }
    let mut rows = RowBuilder {
        ln_scale: &ln_scale,
        truncated: 0,
    };

    let objective_terms = (1..=n).flat_map(|i| {
        (1..=n + 1).map(move |j| {
            let ln_obj = ln_binomial(n as u64 - 1, i as u64 - 1) + ln_shell_population(params, j);
            (var_index(n, i, j), ln_obj)
        })
    });
    let sparse_objective = rows.coeffs(objective_terms);
    let mut objective = vec![0.0; nv];
    for (var, v) in sparse_objective {
        objective[var] = v;
    }
    let mut lp = LinearProgram::new(objective);
    for var in 0..nv {
        lp.set_upper(var, 1.0);
    }

    // Nonnegative remainder: inflow_i <= e^{-i delta}.
    for i in 1..=n {
        let terms = (1..=n + 1).map(|j| (var_index(n, i, j), ln_shell_weight(params, j) + i as f64 * delta));
        let coeffs = rows.coeffs(terms);
        lp.add_row(coeffs, Relation::Le, 1.0);
    }
    // Column mass of every excited shell.
    for j in 1..=n + 1 {
        let terms = (1..=n).map(|i| (var_index(n, i, j), ln_c(i)));
        let coeffs = rows.coeffs(terms);
        lp.add_row(coeffs, Relation::Le, 1.0);
    }

    if let ColumnChoice::FixedGroup(k) = choice {
        let ln_supply = ln_c(k) - k as f64 * delta;
        // z_i <= 1: inflow_i >= e^{-i delta} - C(N,k) e^{-k delta}, when that is positive.
        for i in 1..=n {
            let ln_target = -(i as f64) * delta;
            if ln_target > ln_supply {
                let ln_rhs = ln_target + crate::logscalar::ln_one_minus_exp(ln_supply - ln_target);
                let terms = (1..=n + 1).map(|j| (var_index(n, i, j), ln_shell_weight(params, j) - ln_rhs));
                let coeffs = rows.coeffs(terms);
                lp.add_row(coeffs, Relation::Ge, 1.0);
            }
        }
        // Column mass of the supplying group: total inflow >= sum_{i != k} C(N,i) e^{-i delta}.
        let ln_s = ln_sum_exp((1..=n).filter(|&i| i != k).map(|i| ln_c(i) - i as f64 * delta));
        if ln_s > f64::NEG_INFINITY {
            let terms = (1..=n).flat_map(|i| {
                (1..=n + 1).map(move |j| (var_index(n, i, j), ln_c(i) + ln_shell_weight(params, j) - ln_s))
            });
            let coeffs = rows.coeffs(terms);
            lp.add_row(coeffs, Relation::Ge, 1.0);
        }
    }

    let truncated = rows.truncated;
    if truncated > 0 {
        log::debug!(
            "symmetric LP (N={n}, delta={delta}): {truncated} coefficients below {TRUNCATION_THRESHOLD:e} dropped"
        );
    }
    Ok(SymmetricLP {
        params: *params,
        choice,
        lp,
        ln_scale,
        truncated,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct XEntry {
    pub i: u32,
    pub j: u32,
    pub value: f64,
}

/// Solution of the reduced problem in the original variables.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LPSolution {
    pub n: u32,
    pub delta: f64,
    pub w: f64,
    pub q: f64,
    pub status: String,
    pub gamma: f64,
    pub x: Vec<XEntry>,
    pub p: Vec<f64>,
    pub z: Vec<f64>,
    #[serde(skip)]
    pub max_violation: f64,
    #[serde(skip)]
    pub objective_value: f64,
}

impl LPSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal.as_str()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("LP solutions serialize")
    }
}

pub fn solve_lp(lp: &SymmetricLP) -> Result<LPSolution> {
    let raw = lp.lp.solve()?;
    let p = &lp.params;
    if raw.status == LpStatus::Unbounded {
        return Err(Error::Solver("unbounded; the yield is bounded by one".into()));
    }
    if raw.status != LpStatus::Optimal {
        return Ok(LPSolution {
            n: p.n,
            delta: p.delta,
            w: p.w,
            q: p.q,
            status: raw.status.as_str().into(),
            gamma: f64::NAN,
            x: Vec::new(),
            p: Vec::new(),
            z: Vec::new(),
            max_violation: f64::NAN,
            objective_value: f64::NAN,
        });
    }
    let x = lp.unscale(&raw.x);
    let pops = lp.populations(&x);
    let gamma = yield_from_populations(&pops, p.n);
    let entries = (1..=p.n)
        .flat_map(|i| (1..=p.n + 1).map(move |j| (i, j)))
        .map(|(i, j)| XEntry {
            i,
            j,
            value: x[lp.var_index(i, j)],
        })
        .collect();
    Ok(LPSolution {
        n: p.n,
        delta: p.delta,
        w: p.w,
        q: p.q,
        status: raw.status.as_str().into(),
        gamma,
        z: lp.z_values(&x),
        max_violation: lp.max_violation(&x),
        objective_value: raw.objective,
        x: entries,
        p: pops,
    })
}

/// Optimal correlated yield and the per-level switched populations `p_1..p_N`.
pub fn max_correlated_yield(params: &ModelParams) -> Result<(f64, Vec<f64>)> {
    let lp = build_symmetric_lp(params)?;
    let sol = solve_lp(&lp)?;
    if !sol.is_optimal() {
        return Err(Error::Solver(format!("{} at N={}, delta={}", sol.status, params.n, params.delta)));
    }
    Ok((sol.gamma, sol.p))
}

/// One level of an unreduced problem.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FullLevel {
    pub energy: f64,
    pub population: f64,
    /// Contribution of one unit of final population on this level to the objective.
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FullLpSolution {
    pub status: LpStatus,
    pub gamma: f64,
    pub final_populations: Vec<f64>,
    /// Largest deviation from stochasticity or Gibbs preservation of the recovered `G`.
    pub max_violation: f64,
}

/// Maximizes `sum_r weight_r (G p)_r` over all Gibbs-stochastic `G`.
///
/// Each entry is written as `G_rc = v_rc min(1, e^{E_c - E_r})`. Column sums
/// and Gibbs preservation then read `sum_r min(1, e^{E_c - E_r}) v_rc = 1` and
/// `sum_c min(1, e^{E_r - E_c}) v_rc = 1`, whose coefficients all lie in
/// `(0, 1]` regardless of how far apart the energies are.
pub fn solve_full_gibbs_lp(levels: &[FullLevel]) -> Result<FullLpSolution> {
    let l = levels.len();
    if l == 0 {
        return Err(Error::InvalidParameter("no levels".into()));
    }
    let idx = |r: usize, c: usize| r * l + c;
    let factor = |to: usize, from: usize| (levels[from].energy - levels[to].energy).min(0.0).exp();
    let mut objective = vec![0.0; l * l];
    for r in 0..l {
        for c in 0..l {
            objective[idx(r, c)] = levels[r].weight * levels[c].population * factor(r, c);
        }
    }
    let mut lp = LinearProgram::new(objective);
    for r in 0..l {
        let coeffs = (0..l).map(|c| (idx(r, c), factor(c, r))).collect();
        lp.add_row(coeffs, Relation::Eq, 1.0);
    }
    for c in 0..l {
        let coeffs = (0..l).map(|r| (idx(r, c), factor(r, c))).collect();
        lp.add_row(coeffs, Relation::Eq, 1.0);
    }
    let raw = lp.solve()?;
    if raw.status != LpStatus::Optimal {
        return Ok(FullLpSolution {
            status: raw.status,
            gamma: f64::NAN,
            final_populations: Vec::new(),
            max_violation: f64::NAN,
        });
    }
    let g = |r: usize, c: usize| raw.x[idx(r, c)] * factor(r, c);
    let final_populations: Vec<f64> = (0..l)
        .map(|r| (0..l).map(|c| g(r, c) * levels[c].population).sum())
        .collect();
    let gamma = final_populations
        .iter()
        .zip(levels)
        .map(|(p, lv)| p * lv.weight)
        .sum();
    let mut worst = 0.0f64;
    for c in 0..l {
        let col: f64 = (0..l).map(|r| g(r, c)).sum();
        worst = worst.max((col - 1.0).abs());
    }
    for r in 0..l {
        let tau_r = (-levels[r].energy).exp();
        let image: f64 = (0..l).map(|c| g(r, c) * (-levels[c].energy).exp()).sum();
        worst = worst.max((image / tau_r - 1.0).abs());
    }
    Ok(FullLpSolution {
        status: raw.status,
        gamma,
        final_populations,
        max_violation: worst,
    })
}

/// Levels of `n` independent copies of `single`: energies add, populations
/// multiply and weights are averaged over molecules. Level order follows the
/// base-`L` digits of the index, first molecule least significant.
pub fn product_structure(single: &[FullLevel], n: u32) -> Vec<FullLevel> {
    let l = single.len();
    let total = l.pow(n);
    (0..total)
        .map(|code| {
            let mut c = code;
            let mut level = FullLevel {
                energy: 0.0,
                population: 1.0,
                weight: 0.0,
            };
            for _ in 0..n {
                let s = &single[c % l];
                level.energy += s.energy;
                level.population *= s.population;
                level.weight += s.weight / n as f64;
                c /= l;
            }
            level
        })
        .collect()
}

/// All `3^N` product levels of `N` three-level molecules with populations of
/// the initial product state and the per-molecule switched fraction as weight.
pub fn product_levels(params: &ModelParams) -> Result<Vec<FullLevel>> {
    params.validate()?;
    if params.n > 3 {
        return Err(Error::SizeLimit(format!("unreduced problem supports N <= 3, got {}", params.n)));
    }
    let single = [
        FullLevel {
            energy: 0.0,
            population: 1.0 - params.q,
            weight: 0.0,
        },
        FullLevel {
            energy: params.delta,
            population: 0.0,
            weight: 1.0,
        },
        FullLevel {
            energy: params.w,
            population: params.q,
            weight: 0.0,
        },
    ];
    Ok(product_structure(&single, params.n))
}

/// Optimal correlated yield from the unreduced problem, for `N <= 3`.
pub fn brute_force_full_lp(params: &ModelParams) -> Result<f64> {
    let sol = solve_full_gibbs_lp(&product_levels(params)?)?;
    if sol.status != LpStatus::Optimal {
        return Err(Error::Solver(format!("unreduced problem is {}", sol.status.as_str())));
    }
    Ok(sol.gamma)
}

/// Uncorrelated optimum, delegated to the curve bisection.
pub fn max_uncorrelated_yield_lp_check(params: &ModelParams) -> Result<f64> {
    Ok(max_uncorrelated_yield(params, DEFAULT_YIELD_TOL)?.gamma)
}
