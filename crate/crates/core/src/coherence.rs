//! Two molecules with a coherence between the singly excited levels.
//!
//! The initial state `rho_2 + alpha |0W><W0| + h.c.` is block diagonal in the
//! energy basis. Its only off-diagonal block lives in the degenerate
//! two-dimensional subspace at energy `W`, and diagonalizing that block gives
//! the eigenvalues `q(1-q) +- |alpha|`. Because Gibbs-preserving maps may
//! rotate freely inside a degenerate subspace, every yield depends on the
//! coherence only through these two eigenvalues, so the problem reduces to a
//! diagonal state with a split `W` shell.
//!
//! Positivity requires `|alpha| <= q(1-q)`, and at the upper end `alpha_max`
//! the whole shell collapses onto a single level.

use crate::curves::{max_yield_by_bisection, DEFAULT_YIELD_TOL};
use crate::error::{Error, Result};
use crate::gibbslp::{solve_full_gibbs_lp, FullLevel};
use crate::logscalar::LogScalar;
use crate::simplex::LpStatus;
use crate::state::{excited_label, switched_label, DiagonalState, LevelGroup, ModelParams};

/// Slack allowed above `q(1-q)` before `|alpha|` is rejected.
pub const POSITIVITY_TOL: f64 = 1e-15;

/// Label of the larger eigenvalue of the `W` block.
pub const UPPER_LABEL: &str = "1W+";
/// Label of the smaller eigenvalue of the `W` block.
pub const LOWER_LABEL: &str = "1W-";

/// Eigen-decomposed two-molecule state.
#[derive(Clone, Debug, PartialEq)]
pub struct CoherentPairState {
    pub q: f64,
    pub alpha_abs: f64,
    /// Populations of the levels at `0`, `W` (upper), `W` (lower) and `2W`.
    pub populations: [f64; 4],
}

impl CoherentPairState {
    pub fn new(q: f64, alpha_abs: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&q) {
            return Err(Error::InvalidParameter(format!("q must lie in [0, 1], got {q}")));
        }
        if !(alpha_abs >= 0.0) {
            return Err(Error::InvalidParameter(format!("|alpha| must be >= 0, got {alpha_abs}")));
        }
        let mixed = q * (1.0 - q);
        if alpha_abs > mixed + POSITIVITY_TOL {
            return Err(Error::Precondition(format!(
                "state is not positive: |alpha| = {alpha_abs} exceeds q(1-q) = {mixed}"
            )));
        }
        Ok(CoherentPairState {
            q,
            alpha_abs,
            populations: [
                (1.0 - q) * (1.0 - q),
                mixed + alpha_abs,
                (mixed - alpha_abs).max(0.0),
                q * q,
            ],
        })
    }
}

/// The coherence at which the `W` block becomes rank one.
pub fn alpha_max(q: f64) -> f64 {
    q * (1.0 - q)
}

/// Diagonal form of the coherent initial state, with empty target groups at
/// `delta` (two levels) and `2 delta` so that it shares its structure with
/// [`coherent_target_state`].
pub fn build_coherent_initial(params: &ModelParams, alpha_abs: f64) -> Result<DiagonalState> {
    params.validate()?;
    let pair = CoherentPairState::new(params.q, alpha_abs)?;
    pair_state(params, pair.populations, [0.0, 0.0])
}

/// `sigma(gamma)^{(x) 2}` on the structure of [`build_coherent_initial`].
pub fn coherent_target_state(params: &ModelParams, gamma: f64) -> Result<DiagonalState> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::InvalidParameter(format!("gamma must lie in [0, 1], got {gamma}")));
    }
    let ground = (1.0 - gamma) * (1.0 - gamma);
    pair_state(params, [ground, 0.0, 0.0, 0.0], [gamma * (1.0 - gamma), gamma * gamma])
}

fn pair_state(params: &ModelParams, excited: [f64; 4], switched: [f64; 2]) -> Result<DiagonalState> {
    let (d, w) = (params.delta, params.w);
    let mut groups = vec![
        LevelGroup::new(0.0, 0.0, LogScalar::from_f64(excited[0]), excited_label(0)),
        LevelGroup::new(w, 0.0, LogScalar::from_f64(excited[1]), UPPER_LABEL),
        LevelGroup::new(w, 0.0, LogScalar::from_f64(excited[2]), LOWER_LABEL),
        LevelGroup::new(2.0 * w, 0.0, LogScalar::from_f64(excited[3]), excited_label(2)),
        LevelGroup::new(d, 2f64.ln(), LogScalar::from_f64(switched[0]), switched_label(1)),
        LevelGroup::new(2.0 * d, 0.0, LogScalar::from_f64(switched[1]), switched_label(2)),
    ];
    groups.sort_by(|a, b| a.energy.total_cmp(&b.energy));
    DiagonalState::new(groups)
}

/// The nine product levels `|ab>` with the coherent populations on `|0W>`
/// and `|W0>`, weighted by the switched fraction.
pub fn coherent_full_levels(params: &ModelParams, alpha_abs: f64) -> Result<Vec<FullLevel>> {
    params.validate()?;
    let pair = CoherentPairState::new(params.q, alpha_abs)?;
    let energies = [0.0, params.delta, params.w];
    let mut levels = Vec::with_capacity(9);
    for a in 0..3 {
        for b in 0..3 {
            let population = match (a, b) {
                (0, 0) => pair.populations[0],
                (0, 2) => pair.populations[1],
                (2, 0) => pair.populations[2],
                (2, 2) => pair.populations[3],
                _ => 0.0,
            };
            let weight = ((a == 1) as u8 + (b == 1) as u8) as f64 / 2.0;
            levels.push(FullLevel {
                energy: energies[a] + energies[b],
                population,
                weight,
            });
        }
    }
    Ok(levels)
}

/// Optimal yield from the coherent state.
///
/// With `allow_final_correlations` the target is any state reachable by a
/// Gibbs-preserving map and the optimum comes from the unreduced linear
/// program on nine levels. Otherwise the target must be the product
/// `sigma(gamma)^{(x) 2}` and the optimum comes from curve bisection.
pub fn max_yield_coherent(params: &ModelParams, alpha_abs: f64, allow_final_correlations: bool) -> Result<f64> {
    if allow_final_correlations {
        let sol = solve_full_gibbs_lp(&coherent_full_levels(params, alpha_abs)?)?;
        if sol.status != LpStatus::Optimal {
            return Err(Error::Solver(format!("coherent LP is {}", sol.status.as_str())));
        }
        Ok(sol.gamma)
    } else {
        let initial = build_coherent_initial(params, alpha_abs)?;
        let opt = max_yield_by_bisection(&initial, |g| coherent_target_state(params, g), DEFAULT_YIELD_TOL)?;
        Ok(opt.gamma)
    }
}

/// `(gamma_corr(alpha_max) - gamma_corr(0)) / gamma_corr(0)`, the relative
/// gain a maximal coherence buys when final correlations are allowed.
pub fn coherence_advantage(params: &ModelParams) -> Result<f64> {
    let base = max_yield_coherent(params, 0.0, true)?;
    let coherent = max_yield_coherent(params, alpha_max(params.q), true)?;
    if base == 0.0 {
        return Err(Error::DivisionByZero("yield without coherence is zero".into()));
    }
    Ok((coherent - base) / base)
}
