//! Molecules with a vibrational sublevel above the ground state and above the
//! switched state.
//!
//! Each molecule has levels `0`, `omega0`, `delta`, `delta + omega_delta` and
//! `W`. The ground manifold starts in a thermal state at inverse temperature
//! `beta0`, which may differ from the bath's, and the excited level `W` is
//! populated with probability `q`. Both switched sublevels count as switched.

use crate::error::{Error, Result};
use crate::gibbslp::{product_structure, solve_full_gibbs_lp, FullLevel};
use crate::logscalar::LogScalar;
use crate::simplex::LpStatus;
use crate::state::{DiagonalState, LevelGroup};

/// Level labels in ascending single-molecule order.
pub const FIVE_LEVEL_LABELS: [&str; 5] = ["0", "omega0", "delta", "delta+omega", "W"];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FiveLevelParams {
    pub delta: f64,
    pub w: f64,
    pub omega0: f64,
    pub omega_delta: f64,
    pub beta0: f64,
    pub q: f64,
}

impl FiveLevelParams {
    pub fn validate(&self) -> Result<()> {
        let finite = [self.delta, self.w, self.omega0, self.omega_delta, self.beta0, self.q]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidParameter("five-level parameters must be finite".into()));
        }
        if !(self.delta > 0.0 && self.w > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "delta and W must be positive, got {} and {}",
                self.delta, self.w
            )));
        }
        if !(self.omega0 > 0.0 && self.omega_delta > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "sublevel spacings must be positive, got {} and {}",
                self.omega0, self.omega_delta
            )));
        }
        if self.omega0 >= self.w || self.omega_delta >= self.w {
            return Err(Error::InvalidParameter("sublevel spacings must stay below W".into()));
        }
        if !(self.beta0 > 0.0) {
            return Err(Error::InvalidParameter(format!("beta0 must be positive, got {}", self.beta0)));
        }
        if !(0.0..=1.0).contains(&self.q) {
            return Err(Error::InvalidParameter(format!("q must lie in [0, 1], got {}", self.q)));
        }
        Ok(())
    }
}

/// One molecule with levels `0, omega0, delta, delta + omega_delta, W`.
///
/// The ground manifold holds `1 - q` split thermally at `beta0`:
/// `q_0 = (1 - q) / (1 + e^{-beta0 omega0})`.
pub fn five_level_initial(params: &FiveLevelParams) -> Result<DiagonalState> {
    let groups = single_levels(params)?
        .iter()
        .zip(FIVE_LEVEL_LABELS)
        .map(|(&(energy, population), label)| LevelGroup::new(energy, 0.0, LogScalar::from_f64(population), label))
        .collect();
    DiagonalState::new(groups)
}

fn single_levels(params: &FiveLevelParams) -> Result<[(f64, f64); 5]> {
    params.validate()?;
    let boltz = (-params.beta0 * params.omega0).exp();
    let q0 = (1.0 - params.q) / (1.0 + boltz);
    let q_omega = (1.0 - params.q) * boltz / (1.0 + boltz);
    Ok([
        (0.0, q0),
        (params.omega0, q_omega),
        (params.delta, 0.0),
        (params.delta + params.omega_delta, 0.0),
        (params.w, params.q),
    ])
}

/// The product levels of `n` molecules, weighted by their switched fraction.
pub fn five_level_levels(params: &FiveLevelParams, n: u32) -> Result<Vec<FullLevel>> {
    let single: Vec<FullLevel> = single_levels(params)?
        .iter()
        .enumerate()
        .map(|(k, &(energy, population))| FullLevel {
            energy,
            population,
            weight: if k == 2 || k == 3 { 1.0 } else { 0.0 },
        })
        .collect();
    Ok(product_structure(&single, n))
}

/// Optimal yield over all Gibbs-preserving maps on `5^n` levels, final
/// correlations allowed. Only `n` of 1 or 2 is supported.
pub fn five_level_yield(params: &FiveLevelParams, n: u32) -> Result<f64> {
    if !(1..=2).contains(&n) {
        return Err(Error::SizeLimit(format!("five-level model supports n = 1 or 2, got {n}")));
    }
    let sol = solve_full_gibbs_lp(&five_level_levels(params, n)?)?;
    if sol.status != LpStatus::Optimal {
        return Err(Error::Solver(format!("five-level LP is {}", sol.status.as_str())));
    }
    Ok(sol.gamma)
}
