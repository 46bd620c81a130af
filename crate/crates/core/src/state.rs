//! Energy-level structures, diagonal states and their entropic functionals.
//!
//! Energies are in units of `k_B T` (inverse temperature fixed to one).
//! A [`DiagonalState`] is a list of [`LevelGroup`]s; each group is a set of
//! degenerate levels sharing one energy and one per-level population.

use crate::error::{Error, Result};
use crate::logscalar::{ln_binomial, ln_sum_exp, CompensatedSum, LogScalar};

/// Normalization tolerance for every constructed state.
pub const NORMALIZATION_TOL: f64 = 1e-12;

/// Photoswitch ensemble: cis-trans gap, excited-level energy, initial
/// excitation probability and molecule count.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelParams {
    pub delta: f64,
    pub w: f64,
    pub q: f64,
    pub n: u32,
}

impl ModelParams {
    pub fn new(delta: f64, w: f64, q: f64, n: u32) -> Result<Self> {
        let params = ModelParams { delta, w, q, n };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(Error::InvalidParameter(format!("delta must be > 0, got {}", self.delta)));
        }
        if !(self.w > 0.0 && self.w.is_finite()) {
            return Err(Error::InvalidParameter(format!("w must be > 0, got {}", self.w)));
        }
        if !(0.0..=1.0).contains(&self.q) {
            return Err(Error::InvalidParameter(format!("q must lie in [0, 1], got {}", self.q)));
        }
        if self.n == 0 {
            return Err(Error::InvalidParameter("n must be at least 1".into()));
        }
        Ok(())
    }

    pub fn with_n(self, n: u32) -> Self {
        ModelParams { n, ..self }
    }

    pub fn with_delta(self, delta: f64) -> Self {
        ModelParams { delta, ..self }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LevelGroup {
    pub energy: f64,
    pub ln_degeneracy: f64,
    /// Population of each individual level in the group.
    pub population: LogScalar,
    pub label: String,
}

impl LevelGroup {
    pub fn new(energy: f64, ln_degeneracy: f64, population: LogScalar, label: impl Into<String>) -> Self {
        LevelGroup {
            energy,
            ln_degeneracy,
            population,
            label: label.into(),
        }
    }

    /// Total population of the group, `deg * p`.
    pub fn mass(&self) -> LogScalar {
        LogScalar::from_ln(self.ln_degeneracy) * self.population
    }

    /// Unnormalized Gibbs weight of the whole group, `deg * exp(-E)`.
    pub fn ln_gibbs_weight(&self) -> f64 {
        self.ln_degeneracy - self.energy
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DiagonalState {
    groups: Vec<LevelGroup>,
}

impl DiagonalState {
    /// Validates normalization, nonnegative log-degeneracies and uniqueness
    /// of `(energy, label)` pairs.
    pub fn new(groups: Vec<LevelGroup>) -> Result<Self> {
        if groups.is_empty() {
            return Err(Error::InvalidParameter("a state needs at least one level".into()));
        }
        for (i, g) in groups.iter().enumerate() {
            if !(g.ln_degeneracy >= 0.0) || !g.energy.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "group {:?} has energy {} and log-degeneracy {}",
                    g.label, g.energy, g.ln_degeneracy
                )));
            }
            if groups[..i]
                .iter()
                .any(|h| h.energy == g.energy && h.label == g.label)
            {
                return Err(Error::DuplicateGroup {
                    energy: g.energy,
                    label: g.label.clone(),
                });
            }
        }
        let state = DiagonalState { groups };
        let total = state.total_mass();
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::NotNormalized { total });
        }
        Ok(state)
    }

    pub fn groups(&self) -> &[LevelGroup] {
        &self.groups
    }

    pub fn group(&self, label: &str) -> Option<&LevelGroup> {
        self.groups.iter().find(|g| g.label == label)
    }

    pub fn total_mass(&self) -> f64 {
        let mut sum = CompensatedSum::default();
        for g in &self.groups {
            sum.add(g.mass().to_f64());
        }
        sum.value()
    }

    /// Natural log of the number of individual levels.
    pub fn ln_total_levels(&self) -> f64 {
        ln_sum_exp(self.groups.iter().map(|g| g.ln_degeneracy))
    }

    /// `ln Z` with `Z = sum deg * exp(-E)` over the structure.
    pub fn ln_partition_function(&self) -> f64 {
        ln_sum_exp(self.groups.iter().map(LevelGroup::ln_gibbs_weight))
    }

    /// The Gibbs state on this state's level structure, labels preserved.
    pub fn gibbs(&self) -> DiagonalState {
        let ln_z = self.ln_partition_function();
        let groups = self
            .groups
            .iter()
            .map(|g| LevelGroup {
                population: LogScalar::from_ln(-g.energy - ln_z),
                ..g.clone()
            })
            .collect();
        DiagonalState { groups }
    }

    /// Same energies, degeneracies and labels, in the same order.
    pub fn same_structure(&self, other: &DiagonalState) -> bool {
        self.groups.len() == other.groups.len()
            && self.groups.iter().zip(&other.groups).all(|(a, b)| {
                a.energy == b.energy && a.ln_degeneracy == b.ln_degeneracy && a.label == b.label
            })
    }

    /// Every individual level as `(energy, population)`, sorted by energy
    /// then population. Only sensible for small structures.
    pub fn expanded_levels(&self) -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        for g in &self.groups {
            let deg = g.ln_degeneracy.exp().round() as usize;
            out.extend(std::iter::repeat((g.energy, g.population.to_f64())).take(deg));
        }
        out.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        out
    }
}

/// `(1 - q)|0><0| + q|W><W|` on the three levels `0, delta, W`.
pub fn single_molecule_state(params: &ModelParams) -> Result<DiagonalState> {
    params.validate()?;
    DiagonalState::new(vec![
        LevelGroup::new(0.0, 0.0, LogScalar::from_f64(1.0 - params.q), "0"),
        LevelGroup::new(params.delta, 0.0, LogScalar::ZERO, "delta"),
        LevelGroup::new(params.w, 0.0, LogScalar::from_f64(params.q), "W"),
    ])
}

/// Label of the group of levels with `k` of `n` molecules excited to `W`.
pub fn excited_label(k: u32) -> String {
    format!("{k}W")
}

/// Label of the group of levels with `i` of `n` molecules switched to `delta`.
pub fn switched_label(i: u32) -> String {
    format!("{i}delta")
}

/// `rho^{(x) N}` grouped by excitation count, plus empty target groups at
/// `i * delta` for `i = 1..N`.
///
/// Groups are ordered by ascending energy; on equal energy the excited group
/// comes first. Mixed levels containing both `delta` and `W` factors carry no
/// population in either the initial or the target states and are omitted.
pub fn tensor_power_grouped(params: &ModelParams) -> Result<DiagonalState> {
    params.validate()?;
    let n = params.n;
    let ln_q = LogScalar::from_f64(params.q);
    let ln_1mq = LogScalar::from_f64(1.0 - params.q);
    let mut groups = Vec::with_capacity(2 * n as usize + 1);
    for k in 0..=n {
        let pop = ln_q.powi(k as u64) * ln_1mq.powi((n - k) as u64);
        groups.push(LevelGroup::new(
            k as f64 * params.w,
            ln_binomial(n as u64, k as u64),
            pop,
            excited_label(k),
        ));
    }
    for i in 1..=n {
        groups.push(LevelGroup::new(
            i as f64 * params.delta,
            ln_binomial(n as u64, i as u64),
            LogScalar::ZERO,
            switched_label(i),
        ));
    }
    groups.sort_by(|a, b| a.energy.total_cmp(&b.energy));
    DiagonalState::new(groups)
}

/// `sigma(gamma)^{(x) N}` with `sigma(gamma) = gamma|delta><delta| + (1 - gamma)|0><0|`,
/// on the same structure as [`tensor_power_grouped`].
pub fn uncorrelated_target_state(params: &ModelParams, gamma: f64) -> Result<DiagonalState> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::InvalidParameter(format!("gamma must lie in [0, 1], got {gamma}")));
    }
    let n = params.n;
    let g = LogScalar::from_f64(gamma);
    let one_minus = LogScalar::from_f64(1.0 - gamma);
    let mut state = tensor_power_grouped(params)?;
    for group in &mut state.groups {
        group.population = LogScalar::ZERO;
    }
    for group in &mut state.groups {
        if group.label == excited_label(0) {
            group.population = one_minus.powi(n as u64);
        }
        for i in 1..=n {
            if group.label == switched_label(i) {
                group.population = g.powi(i as u64) * one_minus.powi((n - i) as u64);
            }
        }
    }
    check_normalized(&state)?;
    Ok(state)
}

/// A symmetric correlated target on the structure of [`tensor_power_grouped`]:
/// per-level populations `p_1..p_N` on the switched groups, the remaining
/// mass on the ground level.
pub fn correlated_target_state(params: &ModelParams, per_level: &[f64]) -> Result<DiagonalState> {
    let n = params.n;
    if per_level.len() != n as usize {
        return Err(Error::InvalidParameter(format!(
            "expected {} populations, got {}",
            n,
            per_level.len()
        )));
    }
    let mut state = tensor_power_grouped(params)?;
    let mut assigned = CompensatedSum::default();
    for group in &mut state.groups {
        group.population = LogScalar::ZERO;
        for i in 1..=n {
            if group.label == switched_label(i) {
                let p = per_level[i as usize - 1];
                if p < 0.0 {
                    return Err(Error::InvalidParameter(format!("negative population {p}")));
                }
                group.population = LogScalar::from_f64(p);
                assigned.add(group.mass().to_f64());
            }
        }
    }
    let rest = 1.0 - assigned.value();
    if rest < -NORMALIZATION_TOL {
        return Err(Error::NotNormalized {
            total: assigned.value(),
        });
    }
    for group in &mut state.groups {
        if group.label == excited_label(0) {
            group.population = LogScalar::from_f64(rest.max(0.0));
        }
    }
    check_normalized(&state)?;
    Ok(state)
}

fn check_normalized(state: &DiagonalState) -> Result<()> {
    let total = state.total_mass();
    if (total - 1.0).abs() > NORMALIZATION_TOL {
        return Err(Error::NotNormalized { total });
    }
    Ok(())
}

/// Gibbs state over `(energy, ln_degeneracy)` levels.
pub fn gibbs_state(levels: &[(f64, f64)]) -> Result<DiagonalState> {
    if levels.is_empty() {
        return Err(Error::InvalidParameter("gibbs_state needs at least one level".into()));
    }
    let groups = levels
        .iter()
        .enumerate()
        .map(|(i, &(e, ln_deg))| LevelGroup::new(e, ln_deg, LogScalar::ONE, format!("level {i}")))
        .collect();
    let structure = DiagonalState { groups };
    DiagonalState::new(structure.gibbs().groups)
}

/// Nonequilibrium free energy `<E> - S` (inverse temperature one).
pub fn free_energy(state: &DiagonalState) -> f64 {
    let mut sum = CompensatedSum::default();
    for g in &state.groups {
        if g.population.is_zero() {
            continue;
        }
        let mass = g.mass().to_f64();
        sum.add(mass * g.energy);
        sum.add(mass * g.population.ln());
    }
    sum.value()
}

/// `D(state || gibbs) = sum deg p (ln p - ln p_gibbs)`.
pub fn relative_entropy_to_gibbs(state: &DiagonalState, gibbs: &DiagonalState) -> Result<f64> {
    if !state.same_structure(gibbs) {
        return Err(Error::MismatchedStructure(
            "relative entropy needs identical level structures".into(),
        ));
    }
    let mut sum = CompensatedSum::default();
    for (g, t) in state.groups.iter().zip(&gibbs.groups) {
        if g.population.is_zero() {
            continue;
        }
        if t.population.is_zero() {
            return Err(Error::UndefinedSupport {
                label: g.label.clone(),
            });
        }
        sum.add(g.mass().to_f64() * (g.population.ln() - t.population.ln()));
    }
    Ok(sum.value())
}

fn shannon(probs: &[f64]) -> f64 {
    -probs.iter().map(|&p| crate::logscalar::xlnx(p)).sum::<f64>()
}

/// Mutual information of `diag(p0, p1, p1, p2)` on `{00, delta0, 0delta, deltadelta}`.
pub fn mutual_information_two_mol(p0: f64, p1: f64, p2: f64) -> Result<f64> {
    if p0 < 0.0 || p1 < 0.0 || p2 < 0.0 {
        return Err(Error::InvalidParameter("populations must be nonnegative".into()));
    }
    let total = p0 + 2.0 * p1 + p2;
    if (total - 1.0).abs() > 1e-10 {
        return Err(Error::NotNormalized { total });
    }
    let joint = shannon(&[p0, p1, p1, p2]);
    let marginal = shannon(&[p0 + p1, p1 + p2]);
    Ok((2.0 * marginal - joint).max(0.0))
}

/// `gamma_N = sum_k C(N-1, k-1) p_k` from per-level populations `p_1..p_N`.
pub fn yield_from_populations(per_level: &[f64], n: u32) -> f64 {
    debug_assert_eq!(per_level.len(), n as usize);
    let mut sum = CompensatedSum::default();
    for (idx, &p) in per_level.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        let k = idx as u64 + 1;
        sum.add((ln_binomial(n as u64 - 1, k - 1) + p.ln()).exp());
    }
    let value = sum.value();
    if value > 1.0 && value <= 1.0 + 1e-9 {
        1.0
    } else {
        value.max(0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logscalar::ln_sum_exp;
    use proptest::prelude::*;

    fn params(delta: f64, w: f64, q: f64, n: u32) -> ModelParams {
        ModelParams::new(delta, w, q, n).unwrap()
    }

    #[test]
    fn single_molecule_populations() {
        let s = single_molecule_state(&params(3.0, 30.0, 0.5, 1)).unwrap();
        let pops: Vec<_> = s.groups().iter().map(|g| (g.energy, g.population.to_f64())).collect();
        assert_eq!(pops, vec![(0.0, 0.5), (3.0, 0.0), (30.0, 0.5)]);

        let ground = single_molecule_state(&params(3.0, 30.0, 0.0, 1)).unwrap();
        assert_eq!(ground.group("0").unwrap().population.to_f64(), 1.0);
        assert!(ground.group("W").unwrap().population.is_zero());

        let excited = single_molecule_state(&params(3.0, 30.0, 1.0, 1)).unwrap();
        assert!(excited.group("0").unwrap().population.is_zero());
        assert_eq!(excited.group("W").unwrap().population.to_f64(), 1.0);
    }

    #[test]
    fn invalid_params_rejected() {
        assert!(ModelParams::new(0.0, 30.0, 0.5, 1).is_err());
        assert!(ModelParams::new(1.0, -1.0, 0.5, 1).is_err());
        assert!(ModelParams::new(1.0, 30.0, 1.5, 1).is_err());
        assert!(ModelParams::new(1.0, 30.0, 0.5, 0).is_err());
    }

    #[test]
    fn two_molecule_grouping() {
        let s = tensor_power_grouped(&params(3.0, 30.0, 0.5, 2)).unwrap();
        let g0 = s.group(&excited_label(0)).unwrap();
        let g1 = s.group(&excited_label(1)).unwrap();
        let g2 = s.group(&excited_label(2)).unwrap();
        assert_eq!((g0.energy, g0.ln_degeneracy.exp().round(), g0.population.to_f64()), (0.0, 1.0, 0.25));
        assert_eq!((g1.energy, g1.ln_degeneracy.exp().round(), g1.population.to_f64()), (30.0, 2.0, 0.25));
        assert_eq!((g2.energy, g2.ln_degeneracy.exp().round(), g2.population.to_f64()), (60.0, 1.0, 0.25));
        assert!(s.group(&switched_label(1)).unwrap().population.is_zero());
        assert_eq!(s.groups().len(), 5);
    }

    #[test]
    fn one_molecule_grouping_is_single_state() {
        let p = params(3.0, 30.0, 0.3, 1);
        let a = tensor_power_grouped(&p).unwrap().expanded_levels();
        let b = single_molecule_state(&p).unwrap().expanded_levels();
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.0, y.0);
            assert!((x.1 - y.1).abs() < 1e-15);
        }
    }

    #[test]
    fn fifty_molecule_central_group_mass() {
        let s = tensor_power_grouped(&params(3.0, 30.0, 0.5, 50)).unwrap();
        let g = s.group(&excited_label(25)).unwrap();
        assert!((g.population.ln() - 50.0 * 0.5f64.ln()).abs() < 1e-12);
        // C(50,25) / 2^50, evaluated independently in integer arithmetic.
        let expected = 126_410_606_437_752.0 / 2f64.powi(50);
        assert!((g.mass().to_f64() - expected).abs() < 1e-13);
        assert!((g.mass().to_f64() - 0.1123).abs() < 1e-4);
    }

    /// Enumerate all 3^N strings and compare the total mass per excitation count.
    #[test]
    fn grouping_matches_enumeration() {
        for n in 1..=6u32 {
            let q = 0.37;
            let p = params(2.0, 7.0, q, n);
            let s = tensor_power_grouped(&p).unwrap();
            let mut by_k = vec![0.0f64; n as usize + 1];
            let total = 3usize.pow(n);
            for code in 0..total {
                let mut c = code;
                let mut prob = 1.0;
                let mut k = 0;
                for _ in 0..n {
                    match c % 3 {
                        0 => prob *= 1.0 - q,
                        1 => prob *= 0.0,
                        _ => {
                            prob *= q;
                            k += 1;
                        }
                    }
                    c /= 3;
                }
                by_k[k] += prob;
            }
            for k in 0..=n {
                let g = s.group(&excited_label(k)).unwrap();
                assert!((g.mass().to_f64() - by_k[k as usize]).abs() < 1e-14, "n={n} k={k}");
            }
        }
    }

    #[test]
    fn gibbs_examples() {
        let one = gibbs_state(&[(0.0, 0.0)]).unwrap();
        assert_eq!(one.groups()[0].population.to_f64(), 1.0);

        let two = gibbs_state(&[(0.0, 0.0), (30.0, 0.0)]).unwrap();
        let e = (-30.0f64).exp();
        assert!((two.groups()[0].population.to_f64() - 1.0 / (1.0 + e)).abs() < 1e-16);
        assert!((two.groups()[1].population.to_f64() / (e / (1.0 + e)) - 1.0).abs() < 1e-12);

        let three = gibbs_state(&[(0.0, 0.0), (3.0, 0.0), (30.0, 0.0)]).unwrap();
        let z = 1.0 + (-3.0f64).exp() + (-30.0f64).exp();
        assert!((three.ln_partition_function() - z.ln()).abs() < 1e-15);
    }

    #[test]
    fn free_energy_examples() {
        let p = params(3.0, 30.0, 0.5, 1);
        let rho = single_molecule_state(&p).unwrap();
        assert!((free_energy(&rho) - (15.0 - 2f64.ln())).abs() < 1e-12);
        assert!((free_energy(&rho) - 14.3069).abs() < 1e-4);

        let tau = rho.gibbs();
        assert!((free_energy(&tau) + tau.ln_partition_function()).abs() < 1e-14);

        let pure = single_molecule_state(&params(3.0, 30.0, 1.0, 1)).unwrap();
        assert!((free_energy(&pure) - 30.0).abs() < 1e-14);
    }

    #[test]
    fn relative_entropy_examples() {
        let p = params(3.0, 30.0, 0.5, 1);
        let rho = single_molecule_state(&p).unwrap();
        let tau = rho.gibbs();
        assert!(relative_entropy_to_gibbs(&tau, &tau).unwrap().abs() < 1e-15);
        let d = relative_entropy_to_gibbs(&rho, &tau).unwrap();
        let ln_z = (1.0 + (-3.0f64).exp() + (-30.0f64).exp()).ln();
        assert!((d - (15.0 - 2f64.ln() + ln_z)).abs() < 1e-12);
    }

    #[test]
    fn relative_entropy_rejects_mismatch() {
        let a = single_molecule_state(&params(3.0, 30.0, 0.5, 1)).unwrap();
        let b = single_molecule_state(&params(4.0, 30.0, 0.5, 1)).unwrap();
        assert!(matches!(
            relative_entropy_to_gibbs(&a, &b.gibbs()),
            Err(Error::MismatchedStructure(_))
        ));
    }

    #[test]
    fn mutual_information_examples() {
        let g: f64 = 0.3;
        let mi = mutual_information_two_mol((1.0 - g).powi(2), g * (1.0 - g), g * g).unwrap();
        assert!(mi < 1e-15);
        let mi = mutual_information_two_mol(0.5, 0.0, 0.5).unwrap();
        assert!((mi - 2f64.ln()).abs() < 1e-15);
        assert!(mutual_information_two_mol(0.5, 0.5, 0.5).is_err());
    }

    #[test]
    fn yield_examples() {
        assert_eq!(yield_from_populations(&[0.0, 0.0], 2), 0.0);
        assert_eq!(yield_from_populations(&[0.0, 1.0], 2), 1.0);
        assert!((yield_from_populations(&[0.125; 3], 3) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn correlated_target_puts_rest_on_ground() {
        let p = params(3.0, 30.0, 0.5, 2);
        let s = correlated_target_state(&p, &[0.1, 0.5]).unwrap();
        assert!((s.group(&excited_label(0)).unwrap().population.to_f64() - 0.3).abs() < 1e-15);
        assert!(correlated_target_state(&p, &[0.4, 0.5]).is_err());
    }

    fn random_state(pops: &[f64], energies: &[f64]) -> DiagonalState {
        let total: f64 = pops.iter().sum();
        let groups = pops
            .iter()
            .zip(energies)
            .enumerate()
            .map(|(i, (&p, &e))| LevelGroup::new(e, 0.0, LogScalar::from_f64(p / total), format!("l{i}")))
            .collect();
        DiagonalState::new(groups).unwrap()
    }

    proptest! {
        #[test]
        fn gibbs_minimizes_free_energy(
            pops in proptest::collection::vec(0.0f64..1.0, 4),
            energies in proptest::collection::vec(0.0f64..10.0, 4),
        ) {
            prop_assume!(pops.iter().sum::<f64>() > 1e-3);
            let s = random_state(&pops, &energies);
            prop_assert!(free_energy(&s.gibbs()) <= free_energy(&s) + 1e-12);
        }

        #[test]
        fn relative_entropy_is_free_energy_difference(
            pops in proptest::collection::vec(0.0f64..1.0, 5),
            energies in proptest::collection::vec(0.0f64..20.0, 5),
        ) {
            prop_assume!(pops.iter().sum::<f64>() > 1e-3);
            let s = random_state(&pops, &energies);
            let tau = s.gibbs();
            let d = relative_entropy_to_gibbs(&s, &tau).unwrap();
            prop_assert!(d >= -1e-12);
            prop_assert!((d - (free_energy(&s) - free_energy(&tau))).abs() < 1e-10);
        }

        #[test]
        fn constructed_states_are_normalized(q in 0.0f64..=1.0, n in 1u32..80) {
            let s = tensor_power_grouped(&params(1.5, 30.0, q, n)).unwrap();
            prop_assert!((s.total_mass() - 1.0).abs() < 1e-12);
            let ln_levels = ln_sum_exp((0..=n).map(|k| ln_binomial(n as u64, k as u64)));
            prop_assert!(s.ln_total_levels() >= ln_levels);
        }

        #[test]
        fn mutual_information_nonnegative(a in 0.0f64..1.0, b in 0.0f64..1.0, c in 0.0f64..1.0) {
            let t = a + 2.0 * b + c;
            prop_assume!(t > 1e-6);
            let mi = mutual_information_two_mol(a / t, b / t, c / t).unwrap();
            prop_assert!(mi >= 0.0);
        }

        #[test]
        fn mutual_information_vanishes_on_products(g in 0.0f64..=1.0) {
            let mi = mutual_information_two_mol((1.0 - g).powi(2), g * (1.0 - g), g * g).unwrap();
            prop_assert!(mi < 1e-12);
        }
    }
}
