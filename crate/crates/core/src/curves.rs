//! Thermomajorization curves and the yield optimizers built on them.
//!
//! A curve is the piecewise-linear concave function obtained by walking the
//! levels of a state in beta-order (descending `p * exp(E)`) and accumulating
//! `(Gibbs weight, population)`. The x-coordinates span hundreds of decades for
//! many-molecule states, so they are stored as logarithms.
//!
//! `rho` thermomajorizes `sigma` iff `f_rho(x) >= f_sigma(x)` for all `x`.
//! Since `f_rho` is concave and `f_sigma` is linear between its elbows,
//! `f_rho - f_sigma` is concave on every piece of `f_sigma` and attains its
//! minimum over a piece at one of the piece's endpoints. Checking the elbows of
//! `sigma` is therefore sufficient.
//!
//! Near the end of a curve the heights approach one and the decisive
//! differences can be far below double precision of `y`. Every elbow therefore
//! also carries the remaining mass `tail = 1 - y`, summed from the end, and
//! heights close to one are compared through their tails.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::logscalar::{ln_one_minus_exp, log_add_exp, CompensatedSum};
use crate::state::{tensor_power_grouped, uncorrelated_target_state, DiagonalState, ModelParams};

/// Default bisection tolerance on the yield.
pub const DEFAULT_YIELD_TOL: f64 = 1e-10;
/// Default relative slack when comparing curve heights.
pub const DEFAULT_CURVE_TOL: f64 = 1e-11;
/// Resolution of the coarse scan that seeds the bisection.
const SCAN_STEPS: usize = 2048;

/// Group permutation sorted by descending `ln p + E`.
#[derive(Clone, Debug, PartialEq)]
pub struct BetaOrder {
    /// Group indices, highest key first.
    pub order: Vec<usize>,
    /// `ln(p * exp(E))` per group, indexed like the state's groups.
    pub ln_keys: Vec<f64>,
}

/// Ties are broken by ascending energy, then by original index.
pub fn beta_order(state: &DiagonalState) -> BetaOrder {
    let groups = state.groups();
    let ln_keys: Vec<f64> = groups
        .iter()
        .map(|g| {
            if g.population.is_zero() {
                f64::NEG_INFINITY
            } else {
                g.population.ln() + g.energy
            }
        })
        .collect();
    let mut order: Vec<usize> = (0..groups.len()).collect();
    order.sort_by(|&a, &b| {
        ln_keys[b]
            .partial_cmp(&ln_keys[a])
            .unwrap_or(Ordering::Equal)
            .then(groups[a].energy.total_cmp(&groups[b].energy))
            .then(a.cmp(&b))
    });
    BetaOrder { order, ln_keys }
}

/// `p q~ exp(W) = 1 - q~`: below this excitation the ground level leads the beta-order.
pub fn high_excitation_threshold(w: f64) -> f64 {
    1.0 / (1.0 + w.exp())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Elbow {
    /// Log of the cumulative Gibbs weight.
    pub ln_x: f64,
    /// Cumulative population.
    pub y: f64,
    /// Population beyond this elbow, accurate even when `y` rounds to one.
    pub tail: f64,
}

impl Elbow {
    pub fn x(&self) -> f64 {
        self.ln_x.exp()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ThermomajorizationCurve {
    elbows: Vec<Elbow>,
    /// Log-slope of the segment ending at `elbows[i + 1]`.
    ln_slopes: Vec<f64>,
    ln_z_total: f64,
}

impl ThermomajorizationCurve {
    pub fn elbows(&self) -> &[Elbow] {
        &self.elbows
    }

    pub fn ln_slopes(&self) -> &[f64] {
        &self.ln_slopes
    }

    pub fn ln_z_total(&self) -> f64 {
        self.ln_z_total
    }

    /// Index of the segment containing `ln_x`, or `None` outside the curve.
    fn segment(&self, ln_x: f64) -> Option<usize> {
        let idx = self.elbows.partition_point(|e| e.ln_x < ln_x);
        (idx > 0 && idx < self.elbows.len()).then(|| idx - 1)
    }

    /// Curve height at `x = exp(ln_x)`.
    pub fn eval_ln(&self, ln_x: f64) -> f64 {
        let idx = self.elbows.partition_point(|e| e.ln_x < ln_x);
        if idx == 0 {
            return 0.0;
        }
        if idx == self.elbows.len() {
            return self.elbows[idx - 1].y;
        }
        let a = self.elbows[idx - 1];
        let b = self.elbows[idx];
        let ln_slope = self.ln_slopes[idx - 1];
        if ln_slope == f64::NEG_INFINITY {
            return a.y;
        }
        let ln_dx = if a.ln_x == f64::NEG_INFINITY {
            ln_x
        } else {
            ln_x + ln_one_minus_exp(a.ln_x - ln_x)
        };
        (a.y + (ln_dx + ln_slope).exp()).min(b.y)
    }

    /// Population beyond `x = exp(ln_x)`, interpolated from the right end of
    /// its segment so that no cancellation against one occurs.
    pub fn tail_ln(&self, ln_x: f64) -> f64 {
        let idx = self.elbows.partition_point(|e| e.ln_x < ln_x);
        if idx == 0 {
            return self.elbows[0].tail;
        }
        if idx == self.elbows.len() {
            return 0.0;
        }
        let a = self.elbows[idx - 1];
        let b = self.elbows[idx];
        let ln_slope = self.ln_slopes[idx - 1];
        if ln_slope == f64::NEG_INFINITY || ln_x >= b.ln_x {
            return b.tail;
        }
        let ln_dx = b.ln_x + ln_one_minus_exp(ln_x - b.ln_x);
        (b.tail + (ln_dx + ln_slope).exp()).min(a.tail)
    }

    /// `ln(s x)` for the slope `s` of the segment containing `ln_x`. By
    /// concavity this never exceeds the height, and it bounds how far the
    /// height moves under a relative rounding of `x`.
    fn ln_slope_times_x(&self, ln_x: f64) -> f64 {
        self.segment(ln_x)
            .map_or(f64::NEG_INFINITY, |k| self.ln_slopes[k] + ln_x)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.eval_ln(x.ln())
    }

    /// Checks the structural invariants: origin start, increasing x,
    /// nondecreasing y, nonincreasing slopes and the end point `(Z, 1)`.
    pub fn check_invariants(&self, tol: f64) -> std::result::Result<(), String> {
        let first = self.elbows[0];
        if first.ln_x != f64::NEG_INFINITY || first.y != 0.0 {
            return Err("curve does not start at the origin".into());
        }
        for w in self.elbows.windows(2) {
            if !(w[1].ln_x > w[0].ln_x) {
                return Err(format!("x not increasing at {:?}", w[1]));
            }
            if w[1].y < w[0].y {
                return Err(format!("y decreasing at {:?}", w[1]));
            }
        }
        for w in self.ln_slopes.windows(2) {
            if w[1] > w[0] + tol * w[0].abs().max(1.0) {
                return Err(format!("slopes increase: {} -> {}", w[0], w[1]));
            }
        }
        let last = self.elbows.last().unwrap();
        if (last.ln_x - self.ln_z_total).abs() > 1e-12 * self.ln_z_total.abs().max(1.0) {
            return Err("curve does not end at z_total".into());
        }
        if (last.y - 1.0).abs() > 1e-10 {
            return Err(format!("curve ends at height {}", last.y));
        }
        Ok(())
    }
}

/// Builds the curve of `state`. Groups with (numerically) equal keys are merged into one
/// segment, as are all trailing empty groups.
pub fn build_curve(state: &DiagonalState) -> ThermomajorizationCurve {
    let groups = state.groups();
    let order = beta_order(state);
    let mut elbows = vec![Elbow {
        ln_x: f64::NEG_INFINITY,
        y: 0.0,
        tail: 0.0,
    }];
    let mut segment_mass: Vec<f64> = Vec::new();
    let mut ln_slopes = Vec::new();
    let mut ln_x = f64::NEG_INFINITY;
    let mut y = CompensatedSum::default();
    let mut current_key: Option<f64> = None;
    for &gi in &order.order {
        let g = &groups[gi];
        let key = order.ln_keys[gi];
        ln_x = log_add_exp(ln_x, g.ln_gibbs_weight());
        let mass = if g.population.is_zero() { 0.0 } else { g.mass().to_f64() };
        y.add(mass);
        let elbow = Elbow {
            ln_x,
            y: y.value(),
            tail: 0.0,
        };
        if current_key.is_some_and(|k| same_key(k, key)) {
            *elbows.last_mut().unwrap() = elbow;
            *segment_mass.last_mut().unwrap() += mass;
        } else {
            elbows.push(elbow);
            ln_slopes.push(key);
            segment_mass.push(mass);
            current_key = Some(key);
        }
    }
    let mut tail = CompensatedSum::default();
    for (k, m) in segment_mass.iter().enumerate().rev() {
        tail.add(*m);
        elbows[k].tail = tail.value();
    }
    ThermomajorizationCurve {
        elbows,
        ln_slopes,
        ln_z_total: state.ln_partition_function(),
    }
}

/// Keys equal up to rounding describe a single straight segment.
fn same_key(a: f64, b: f64) -> bool {
    a == b || (a - b).abs() <= 1e-12 * a.abs().max(1.0)
}

/// `f_rho(x) >= f_sigma(x)` at every elbow of `sigma`, up to a relative slack.
///
/// Each elbow is compared through its height or, when that is closer to one,
/// through its tail. A shortfall is tolerated if it is below `tol` times the
/// compared quantity plus the rounding floor `8 eps s x` of both curves, `s`
/// being the local slope.
pub fn thermomajorizes(
    rho: &ThermomajorizationCurve,
    sigma: &ThermomajorizationCurve,
    tol: f64,
) -> Result<bool> {
    let scale = rho.ln_z_total.abs().max(1.0);
    if (rho.ln_z_total - sigma.ln_z_total).abs() > 1e-10 * scale {
        return Err(Error::MismatchedStructure(format!(
            "curves end at ln Z = {} and {}",
            rho.ln_z_total, sigma.ln_z_total
        )));
    }
    let eps = f64::EPSILON;
    Ok(sigma.elbows.iter().enumerate().skip(1).all(|(k, e)| {
        let (shortfall, size) = if e.tail < e.y {
            (rho.tail_ln(e.ln_x) - e.tail, e.tail)
        } else {
            (e.y - rho.eval_ln(e.ln_x), e.y)
        };
        let sigma_sx = (sigma.ln_slopes[k - 1] + e.ln_x).exp();
        let rho_sx = rho.ln_slope_times_x(e.ln_x).exp();
        shortfall <= tol * size + 8.0 * eps * (sigma_sx + rho_sx)
    }))
}

/// Result of a yield bisection. `feasible` is false when no probed target was
/// reachable, in which case `gamma` is reported as zero.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UncorrelatedOptimum {
    pub gamma: f64,
    pub feasible: bool,
}

/// Largest `gamma` for which `initial` thermomajorizes `target(gamma)`.
///
/// The reachable set of a one-parameter family is an interval that need not
/// contain `gamma = 0` (a pure ground state is not reachable from an excited
/// state), so a descending scan seeds the bisection with a feasible point.
/// Reachability just above the result is re-checked and a violation is
/// reported as [`Error::NonMonotoneFeasibility`].
pub fn max_yield_by_bisection<F>(initial: &DiagonalState, target: F, tol: f64) -> Result<UncorrelatedOptimum>
where
    F: Fn(f64) -> Result<DiagonalState>,
{
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance must be > 0, got {tol}")));
    }
    let rho = build_curve(initial);
    let feasible = |gamma: f64| -> Result<bool> {
        let sigma = build_curve(&target(gamma)?);
        thermomajorizes(&rho, &sigma, DEFAULT_CURVE_TOL)
    };

    if feasible(1.0)? {
        return Ok(UncorrelatedOptimum {
            gamma: 1.0,
            feasible: true,
        });
    }
    let step = 1.0 / SCAN_STEPS as f64;
    let mut seed = None;
    for k in 1..=SCAN_STEPS {
        let gamma = 1.0 - k as f64 * step;
        if feasible(gamma)? {
            seed = Some(gamma);
            break;
        }
    }
    let Some(mut lo) = seed else {
        return Ok(UncorrelatedOptimum {
            gamma: 0.0,
            feasible: false,
        });
    };
    let mut hi = (lo + step).min(1.0);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if feasible(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let probe = lo + 10.0 * tol;
    if probe <= 1.0 && feasible(probe)? {
        return Err(Error::NonMonotoneFeasibility { gamma: lo });
    }
    Ok(UncorrelatedOptimum {
        gamma: lo,
        feasible: true,
    })
}

/// Largest `gamma` with `rho^{(x) N}` thermomajorizing `sigma(gamma)^{(x) N}`.
pub fn max_uncorrelated_yield(params: &ModelParams, tol: f64) -> Result<UncorrelatedOptimum> {
    let initial = tensor_power_grouped(params)?;
    max_yield_by_bisection(&initial, |g| uncorrelated_target_state(params, g), tol)
}

/// Single-molecule optimum, the `N = 1` case of [`max_uncorrelated_yield`].
pub fn single_molecule_yield(params: &ModelParams) -> Result<f64> {
    Ok(max_uncorrelated_yield(&params.with_n(1), DEFAULT_YIELD_TOL)?.gamma)
}
