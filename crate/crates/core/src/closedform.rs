//! Analytic yields: the free-energy threshold, the large-N uncorrelated
//! yield, and the piecewise two-molecule optima.

use crate::error::{Error, Result};
use crate::logscalar::xlnx;
use crate::state::{relative_entropy_to_gibbs, DiagonalState, ModelParams};

/// Radicands down to this value are treated as rounding noise and clamped to zero.
const RADICAND_TOL: f64 = 1e-12;
/// Scan resolution used to bracket branch intersections on `(0, w]`.
const BRANCH_SCAN_STEPS: usize = 6000;
const ROOT_TOL: f64 = 1e-13;

/// `g(x) = (1 - x)^2`.
pub fn g(x: f64) -> f64 {
    (1.0 - x) * (1.0 - x)
}

/// `h(x) = (1 + e^{-x})^2`.
pub fn h(x: f64) -> f64 {
    let a = 1.0 + (-x).exp();
    a * a
}

/// Free energy of the single-molecule initial state, `qW + q ln q + (1-q) ln(1-q)`.
pub fn delta_star(q: f64, w: f64) -> f64 {
    debug_assert!((0.0..=1.0).contains(&q));
    q * w + xlnx(q) + xlnx(1.0 - q)
}

/// Free energy of `gamma|delta><delta| + (1 - gamma)|0><0|`.
fn two_level_free_energy(gamma: f64, delta: f64) -> f64 {
    gamma * delta + xlnx(gamma) + xlnx(1.0 - gamma)
}

/// Bisection on a bracket with `f(lo) <= 0 < f(hi)`, or the reverse.
fn bisect_root<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let lo_negative = f(lo) <= 0.0;
    for _ in 0..200 {
        if hi - lo <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if (f(mid) <= 0.0) == lo_negative {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Large-N optimal uncorrelated yield from saturating `F(rho) = F(sigma)`.
///
/// Returns one for `delta <= delta_star`; beyond that, the larger of the two
/// roots, which lies above the Gibbs population `1 / (1 + e^delta)`.
pub fn gamma_td(params: &ModelParams) -> Result<f64> {
    params.validate()?;
    let target = delta_star(params.q, params.w);
    let delta = params.delta;
    if delta <= target {
        return Ok(1.0);
    }
    let gibbs = 1.0 / (1.0 + delta.exp());
    let residual = |gamma: f64| two_level_free_energy(gamma, delta) - target;
    if residual(gibbs) >= 0.0 {
        // The initial free energy sits below every member of the family.
        return Ok(gibbs);
    }
    Ok(bisect_root(residual, gibbs, 1.0, 1e-15))
}

/// Free-energy mismatch `F(sigma(gamma)) - F(rho)`, the residual solved by [`gamma_td`].
pub fn gamma_td_residual(params: &ModelParams, gamma: f64) -> f64 {
    two_level_free_energy(gamma, params.delta) - delta_star(params.q, params.w)
}

/// Asymptotic conversion rate `D(rho||tau) / D(sigma||tau)`.
pub fn conversion_rate(rho: &DiagonalState, sigma: &DiagonalState, gibbs: &DiagonalState) -> Result<f64> {
    let num = relative_entropy_to_gibbs(rho, gibbs)?;
    let den = relative_entropy_to_gibbs(sigma, gibbs)?;
    if den.abs() <= 1e-14 {
        return Err(Error::DivisionByZero(
            "target state is the Gibbs state".into(),
        ));
    }
    Ok(num / den)
}

/// `(gamma_c - gamma_u) / gamma_u`.
pub fn relative_advantage(gamma_c: f64, gamma_u: f64) -> Result<f64> {
    if gamma_u <= 0.0 {
        return Err(Error::DivisionByZero(format!("uncorrelated yield {gamma_u}")));
    }
    Ok((gamma_c - gamma_u) / gamma_u)
}

/// One analytic piece of a two-molecule optimum.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Branch {
    /// Uncorrelated, small gap.
    UncorrelatedLow,
    /// Uncorrelated, large gap.
    UncorrelatedHigh,
    /// Correlated, small gap.
    CorrelatedLow,
    /// Correlated plateau.
    CorrelatedPlateau,
    /// Correlated, large gap.
    CorrelatedHigh,
}

impl Branch {
    /// Raw branch value; radicands may be negative off the branch's domain.
    fn raw(self, delta: f64, q: f64, w: f64) -> (f64, Option<f64>) {
        let gq = g(q);
        match self {
            Branch::UncorrelatedLow => {
                let r = 1.0 - gq * (h(w) - (-2.0 * delta).exp());
                (r.max(0.0).sqrt(), Some(r))
            }
            Branch::UncorrelatedHigh => {
                let r = gq * (h(w) - (-2.0 * delta).exp() - 2.0 * (-delta).exp());
                (1.0 - r.max(0.0).sqrt(), Some(r))
            }
            Branch::CorrelatedLow => (1.0 - 0.5 * gq * (h(w) - (-2.0 * delta).exp()), None),
            Branch::CorrelatedPlateau => {
                let v = 1.0 - gq * (0.5 * (h(w) + 1.0) - (-delta).exp() * h(delta).sqrt());
                (v, None)
            }
            Branch::CorrelatedHigh => {
                let v = 0.5
                    * (1.0 - gq * (h(w) - h(delta) + 1.0)
                        + q * q
                        + q * gq.sqrt() * ((w - 2.0 * delta).exp() - (-w).exp()));
                (v, None)
            }
        }
    }

    /// Branch value with the radicand domain check.
    pub fn eval(self, delta: f64, q: f64, w: f64) -> Result<f64> {
        let (value, radicand) = self.raw(delta, q, w);
        match radicand {
            Some(r) if r < -RADICAND_TOL => Err(Error::Domain(r)),
            _ => Ok(value),
        }
    }
}

/// A piecewise function of the gap: `branches[k]` is active between
/// `branch_points[k - 1]` (exclusive) and `branch_points[k]` (inclusive).
#[derive(Clone, Debug, PartialEq)]
pub struct PiecewiseYield {
    pub q: f64,
    pub w: f64,
    pub branches: Vec<Branch>,
    pub branch_points: Vec<f64>,
}

impl PiecewiseYield {
    pub fn active_branch(&self, delta: f64) -> Branch {
        let k = self.branch_points.partition_point(|&b| b < delta);
        self.branches[k]
    }

    pub fn eval(&self, delta: f64) -> Result<f64> {
        if !(delta > 0.0) {
            return Err(Error::InvalidParameter(format!("delta must be > 0, got {delta}")));
        }
        Ok(self.active_branch(delta).eval(delta, self.q, self.w)?.clamp(0.0, 1.0))
    }

    /// Largest jump between adjacent branches at the branch points.
    pub fn max_discontinuity(&self) -> f64 {
        self.branch_points
            .iter()
            .enumerate()
            .map(|(k, &d)| {
                let a = self.branches[k].raw(d, self.q, self.w).0;
                let b = self.branches[k + 1].raw(d, self.q, self.w).0;
                (a - b).abs()
            })
            .fold(0.0, f64::max)
    }
}

/// Gap values at which the two-molecule optima switch branch.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BranchPoints {
    pub delta_u2: f64,
    pub delta_c1: f64,
    pub delta_c2: f64,
}

fn check_high_excitation(q: f64, w: f64) -> Result<()> {
    if !(w > 0.0 && w.is_finite()) {
        return Err(Error::InvalidParameter(format!("w must be > 0, got {w}")));
    }
    let q_tilde = crate::curves::high_excitation_threshold(w);
    if !(q >= q_tilde && q <= 1.0) {
        return Err(Error::Precondition(format!(
            "closed forms need q in [{q_tilde:e}, 1], got {q}"
        )));
    }
    Ok(())
}

/// Walks `(0, w]` and records every change of the smallest branch, refining
/// each change by bisection on the difference of the two branches involved.
fn branch_transitions(candidates: &[Branch], q: f64, w: f64) -> Vec<(f64, Branch, Branch)> {
    let lowest = |delta: f64| -> Branch {
        let mut best = candidates[0];
        let mut best_value = best.raw(delta, q, w).0;
        for &b in &candidates[1..] {
            let v = b.raw(delta, q, w).0;
            if v < best_value {
                best = b;
                best_value = v;
            }
        }
        best
    };
    let step = w / BRANCH_SCAN_STEPS as f64;
    let mut out = Vec::new();
    let mut prev_delta = step;
    let mut prev = lowest(prev_delta);
    for k in 2..=BRANCH_SCAN_STEPS {
        let delta = k as f64 * step;
        let current = lowest(delta);
        if current != prev {
            let diff = |d: f64| prev.raw(d, q, w).0 - current.raw(d, q, w).0;
            let root = bisect_root(diff, prev_delta, delta, ROOT_TOL);
            out.push((root, prev, current));
            prev = current;
        }
        prev_delta = delta;
    }
    out
}

fn single_transition(found: &[(f64, Branch, Branch)], from: Branch, to: Branch) -> Result<f64> {
    found
        .iter()
        .find(|t| t.1 == from && t.2 == to)
        .map(|t| t.0)
        .ok_or_else(|| Error::RootNotFound(format!("no transition {from:?} -> {to:?} in (0, w]")))
}

/// Branch points of both two-molecule optima, located by intersecting
/// adjacent branch expressions.
pub fn branch_points_two_mol(q: f64, w: f64) -> Result<BranchPoints> {
    check_high_excitation(q, w)?;
    if g(q) == 0.0 {
        return Err(Error::RootNotFound("all branches coincide at q = 1".into()));
    }
    let u = branch_transitions(&[Branch::UncorrelatedLow, Branch::UncorrelatedHigh], q, w);
    let c = branch_transitions(
        &[Branch::CorrelatedLow, Branch::CorrelatedPlateau, Branch::CorrelatedHigh],
        q,
        w,
    );
    let delta_u2 = single_transition(&u, Branch::UncorrelatedLow, Branch::UncorrelatedHigh)?;
    let delta_c1 = single_transition(&c, Branch::CorrelatedLow, Branch::CorrelatedPlateau)?;
    let delta_c2 = single_transition(&c, Branch::CorrelatedPlateau, Branch::CorrelatedHigh)?;
    if u.len() != 1 || c.len() != 2 {
        return Err(Error::RootNotFound(format!(
            "unexpected branch structure: {} uncorrelated, {} correlated transitions",
            u.len(),
            c.len()
        )));
    }
    Ok(BranchPoints {
        delta_u2,
        delta_c1,
        delta_c2,
    })
}

pub fn gamma2_uncorrelated_piecewise(q: f64, w: f64) -> Result<PiecewiseYield> {
    let bp = branch_points_two_mol(q, w)?;
    Ok(PiecewiseYield {
        q,
        w,
        branches: vec![Branch::UncorrelatedLow, Branch::UncorrelatedHigh],
        branch_points: vec![bp.delta_u2],
    })
}

pub fn gamma2_correlated_piecewise(q: f64, w: f64) -> Result<PiecewiseYield> {
    let bp = branch_points_two_mol(q, w)?;
    Ok(PiecewiseYield {
        q,
        w,
        branches: vec![
            Branch::CorrelatedLow,
            Branch::CorrelatedPlateau,
            Branch::CorrelatedHigh,
        ],
        branch_points: vec![bp.delta_c1, bp.delta_c2],
    })
}

/// Optimal two-molecule yield with a product final state.
pub fn gamma2_uncorrelated(delta: f64, q: f64, w: f64) -> Result<f64> {
    check_high_excitation(q, w)?;
    if q == 1.0 {
        return Ok(1.0);
    }
    gamma2_uncorrelated_piecewise(q, w)?.eval(delta)
}

/// Optimal two-molecule yield when the final state may be correlated.
pub fn gamma2_correlated(delta: f64, q: f64, w: f64) -> Result<f64> {
    check_high_excitation(q, w)?;
    if q == 1.0 {
        return Ok(1.0);
    }
    gamma2_correlated_piecewise(q, w)?.eval(delta)
}

/// Gap in `[lo, hi]` where the correlated and uncorrelated two-molecule
/// optima come closest, and the remaining difference there.
pub fn two_mol_closest_approach(q: f64, w: f64, lo: f64, hi: f64) -> Result<(f64, f64)> {
    let c = gamma2_correlated_piecewise(q, w)?;
    let u = gamma2_uncorrelated_piecewise(q, w)?;
    let diff = |d: f64| -> Result<f64> { Ok(c.eval(d)? - u.eval(d)?) };
    let scan = |from: f64, to: f64, steps: usize| -> Result<(f64, f64)> {
        let mut best = (from, f64::INFINITY);
        for k in 0..=steps {
            let d = from + (to - from) * k as f64 / steps as f64;
            let v = diff(d)?;
            if v < best.1 {
                best = (d, v);
            }
        }
        Ok(best)
    };
    let coarse = scan(lo, hi, 10_000)?;
    let width = (hi - lo) / 10_000.0;
    let fine = scan((coarse.0 - width).max(lo), (coarse.0 + width).min(hi), 10_000)?;
    let best = if fine.1 <= coarse.1 { fine } else { coarse };
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curves::{max_uncorrelated_yield, single_molecule_yield, DEFAULT_YIELD_TOL};
    use crate::state::{single_molecule_state, tensor_power_grouped};
    use proptest::prelude::*;

    const W: f64 = 30.0;

    fn params(delta: f64, n: u32) -> ModelParams {
        ModelParams::new(delta, W, 0.5, n).unwrap()
    }

    fn grid() -> impl Iterator<Item = f64> {
        (1..=600).map(|k| k as f64 * 0.05)
    }

    #[test]
    fn delta_star_examples() {
        assert!((delta_star(0.5, 30.0) - (15.0 - 2f64.ln())).abs() < 1e-13);
        assert!((delta_star(0.5, 30.0) - 14.3069).abs() < 1e-4);
        assert_eq!(delta_star(1.0, 7.0), 7.0);
        assert!((delta_star(0.5, 0.0) + 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn gamma_td_examples() {
        assert_eq!(gamma_td(&params(3.0, 1)).unwrap(), 1.0);
        let ds = delta_star(0.5, W);
        assert_eq!(gamma_td(&params(ds, 1)).unwrap(), 1.0);
        let g20 = gamma_td(&params(20.0, 1)).unwrap();
        assert!((g20 - 0.7438).abs() < 1e-4, "{g20}");
        assert!(gamma_td_residual(&params(20.0, 1), g20).abs() < 1e-12);
    }

    #[test]
    fn gamma_td_is_one_then_strictly_decreasing() {
        let ds = delta_star(0.5, W);
        let mut prev = 1.0;
        for delta in grid() {
            let g = gamma_td(&params(delta, 1)).unwrap();
            if delta <= ds {
                assert_eq!(g, 1.0);
            } else {
                assert!(g < prev, "delta={delta}");
                assert!(gamma_td_residual(&params(delta, 1), g).abs() < 1e-10);
            }
            prev = g;
        }
    }

    #[test]
    fn conversion_rate_examples() {
        let p = params(3.0, 1);
        let rho = single_molecule_state(&p).unwrap();
        let tau = rho.gibbs();
        assert!((conversion_rate(&rho, &rho, &tau).unwrap() - 1.0).abs() < 1e-15);
        assert!(matches!(conversion_rate(&rho, &tau, &tau), Err(Error::DivisionByZero(_))));

        // Target saturating the second law on a structure with no W population.
        let p20 = params(20.0, 1);
        let gamma = gamma_td(&p20).unwrap();
        let target = crate::state::uncorrelated_target_state(&p20, gamma).unwrap();
        let rho20 = tensor_power_grouped(&p20).unwrap();
        let r = conversion_rate(&rho20, &target, &rho20.gibbs()).unwrap();
        assert!((r - 1.0).abs() < 1e-10, "{r}");

        let closer = crate::state::uncorrelated_target_state(&p20, 0.5 * gamma).unwrap();
        assert!(conversion_rate(&rho20, &closer, &rho20.gibbs()).unwrap() > 1.0);
    }

    #[test]
    fn relative_advantage_examples() {
        assert_eq!(relative_advantage(0.5, 0.5).unwrap(), 0.0);
        assert!((relative_advantage(0.6, 0.5).unwrap() - 0.2).abs() < 1e-15);
        assert!(relative_advantage(0.6, 0.0).is_err());
    }

    #[test]
    fn uncorrelated_equal_gap_is_q() {
        for &q in &[0.2, 0.5, 0.8] {
            let g = gamma2_uncorrelated(W, q, W).unwrap();
            assert!((g - q).abs() < 1e-12, "q={q}: {g}");
        }
    }

    #[test]
    fn small_gap_limits() {
        let u = gamma2_uncorrelated(1e-6, 0.5, W).unwrap();
        assert!(1.0 - u < 1e-5);
        let c = gamma2_correlated(1e-6, 0.5, W).unwrap();
        let expected = 1.0 - 0.25 * (h(W) - (-2e-6f64).exp()) / 2.0;
        assert!((c - expected).abs() < 1e-15);
    }

    #[test]
    fn branch_points_for_reference_parameters() {
        let bp = branch_points_two_mol(0.5, W).unwrap();
        assert!((bp.delta_c1 - (1.0 + 2f64.sqrt()).ln()).abs() < 1e-10);
        assert!((bp.delta_u2 - 0.93).abs() < 0.02, "{}", bp.delta_u2);
        assert!(bp.delta_c2 > 14.0 && bp.delta_c2 < 15.5, "{}", bp.delta_c2);
        for pw in [gamma2_uncorrelated_piecewise(0.5, W), gamma2_correlated_piecewise(0.5, W)] {
            assert!(pw.unwrap().max_discontinuity() < 1e-8);
        }
    }

    #[test]
    fn precondition_rejects_low_excitation() {
        assert!(matches!(gamma2_correlated(1.0, 1e-20, W), Err(Error::Precondition(_))));
        assert!(branch_points_two_mol(1.0, W).is_err());
    }

    /// Optima of the two-molecule linear program, computed with an external
    /// interior-point/simplex solver on the unreduced 9x9 Gibbs-stochastic problem.
    const CORRELATED_ORACLE: [(f64, f64); 11] = [
        (0.05, 0.9881046773),
        (0.5, 0.9209849301),
        (1.0, 0.8758036811),
        (2.0, 0.7884127305),
        (3.0, 0.7630664551),
        (5.0, 0.7516958367),
        (10.0, 0.7500113505),
        (15.0, 0.6250000765),
        (16.0, 0.5169169385),
        (20.0, 0.5000056755),
        (30.0, 0.5),
    ];

    /// Uncorrelated optima from an independent floating-point curve bisection.
    const UNCORRELATED_ORACLE: [(f64, f64); 5] = [
        (0.05, 0.9880330736),
        (1.0, 0.8204827067),
        (2.0, 0.5783918304),
        (3.0, 0.5261996436),
        (5.0, 0.5033918280),
    ];

    #[test]
    fn correlated_matches_frozen_oracle() {
        for (delta, expected) in CORRELATED_ORACLE {
            let c = gamma2_correlated(delta, 0.5, W).unwrap();
            assert!((c - expected).abs() < 1e-8, "delta={delta}: {c} vs {expected}");
        }
    }

    #[test]
    fn uncorrelated_matches_frozen_oracle() {
        for (delta, expected) in UNCORRELATED_ORACLE {
            let u = gamma2_uncorrelated(delta, 0.5, W).unwrap();
            assert!((u - expected).abs() < 1e-8, "delta={delta}: {u} vs {expected}");
        }
    }

    #[test]
    fn uncorrelated_matches_curve_bisection() {
        for delta in grid().step_by(7) {
            let u = gamma2_uncorrelated(delta, 0.5, W).unwrap();
            let b = max_uncorrelated_yield(&params(delta, 2), DEFAULT_YIELD_TOL).unwrap();
            assert!(b.feasible);
            assert!((u - b.gamma).abs() < 1e-7, "delta={delta}: {u} vs {}", b.gamma);
        }
    }

    #[test]
    fn ordering_against_single_molecule() {
        for delta in grid().step_by(5) {
            let c = gamma2_correlated(delta, 0.5, W).unwrap();
            let u = gamma2_uncorrelated(delta, 0.5, W).unwrap();
            let s = single_molecule_yield(&params(delta, 1)).unwrap();
            assert!(c >= u - 1e-12 && u >= s - 1e-7, "delta={delta}: {c} {u} {s}");
        }
    }

    #[test]
    fn yields_touch_near_crossing_point() {
        let (at, gap) = two_mol_closest_approach(0.5, W, 0.5, 3.0).unwrap();
        assert!(gap < 1e-6 && (at - 0.925).abs() <= 0.05, "min gap {gap} at {at}");
    }

    proptest! {
        #[test]
        fn correlated_dominates_uncorrelated(q in 0.2f64..0.8, delta in 0.01f64..30.0) {
            let c = gamma2_correlated(delta, q, W).unwrap();
            let u = gamma2_uncorrelated(delta, q, W).unwrap();
            prop_assert!(c >= u - 1e-12);
            prop_assert!((0.0..=1.0).contains(&c) && (0.0..=1.0).contains(&u));
        }

        #[test]
        fn piecewise_equals_lowest_branch(q in 0.2f64..0.8, delta in 0.01f64..30.0) {
            let c = gamma2_correlated(delta, q, W).unwrap();
            let lowest = [Branch::CorrelatedLow, Branch::CorrelatedPlateau, Branch::CorrelatedHigh]
                .iter()
                .map(|b| b.raw(delta, q, W).0)
                .fold(f64::INFINITY, f64::min);
            prop_assert!((c - lowest).abs() < 1e-12);
        }

        #[test]
        fn gamma_td_nonincreasing(a in 0.01f64..40.0, b in 0.01f64..40.0) {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            let glo = gamma_td(&params(lo, 1)).unwrap();
            let ghi = gamma_td(&params(hi, 1)).unwrap();
            prop_assert!(ghi <= glo + 1e-14);
        }
    }
}
