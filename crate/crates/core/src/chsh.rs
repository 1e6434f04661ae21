//! CHSH correlators for the Bell-Wigner experiment: exact expectation values,
//! the joint outcome table of each setting pair, seeded Monte Carlo sampling,
//! and the classical bound by enumeration.
//!
//! Settings are indexed `(i, j)` with `i` choosing `A_i` on Alice's side and
//! `j` choosing `B_j` on Bob's. The CHSH combination is
//! `S = <A1 B1> + <A1 B0> + <A0 B1> - <A0 B0>`.

use std::sync::OnceLock;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{expectation, ComplexMatrix};
use crate::observables::{lift, ObservableSet, SpectralTerm};
use crate::rng::{self, Domain};
use crate::states::{Space, StateVector};

/// Setting pairs in the order the CHSH combination lists them.
pub const SETTINGS: [(usize, usize); 4] = [(1, 1), (1, 0), (0, 1), (0, 0)];

/// The classical bound on `S`.
pub const CLASSICAL_BOUND: f64 = 2.0;

/// Lifted operators shared by every computation.
struct Lifted {
    /// `alice[i]`, `bob[j]`: lifted spectra.
    alice: [Vec<SpectralTerm>; 2],
    bob: [Vec<SpectralTerm>; 2],
    /// `products[i][j] = lift(A_i) lift(B_j)`.
    products: [[ComplexMatrix; 2]; 2],
    /// `joint[i][j]` lists `(a, b, P_a P_b)` over both spectra.
    joint: [[Vec<(f64, f64, ComplexMatrix)>; 2]; 2],
}

fn lifted() -> &'static Lifted {
    static LIFTED: OnceLock<Lifted> = OnceLock::new();
    LIFTED.get_or_init(|| {
        let set = ObservableSet::standard();
        let alice = [
            set.alice(0).lifted_spectrum(),
            set.alice(1).lifted_spectrum(),
        ];
        let bob = [set.bob(0).lifted_spectrum(), set.bob(1).lifted_spectrum()];
        let a = [lift(set.alice(0)), lift(set.alice(1))];
        let b = [lift(set.bob(0)), lift(set.bob(1))];
        let products = [0, 1].map(|i| [0, 1].map(|j| &a[i] * &b[j]));
        let joint = [0, 1].map(|i| {
            [0, 1].map(|j| {
                let mut table = Vec::new();
                for ta in &alice[i] {
                    for tb in &bob[j] {
                        table.push((ta.value, tb.value, &ta.projector * &tb.projector));
                    }
                }
                table
            })
        });
        Lifted {
            alice,
            bob,
            products,
            joint,
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Exact,
    Sampled,
}

/// The four correlators, serialized under fixed keys in CHSH order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correlators {
    #[serde(rename = "A1B1")]
    pub a1b1: f64,
    #[serde(rename = "A1B0")]
    pub a1b0: f64,
    #[serde(rename = "A0B1")]
    pub a0b1: f64,
    #[serde(rename = "A0B0")]
    pub a0b0: f64,
}

impl Correlators {
    pub fn from_fn(mut f: impl FnMut(usize, usize) -> f64) -> Self {
        Self {
            a1b1: f(1, 1),
            a1b0: f(1, 0),
            a0b1: f(0, 1),
            a0b0: f(0, 0),
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        match (i, j) {
            (1, 1) => self.a1b1,
            (1, 0) => self.a1b0,
            (0, 1) => self.a0b1,
            (0, 0) => self.a0b0,
            _ => panic!("setting pair ({i}, {j}) out of range"),
        }
    }

    pub fn s_value(&self) -> f64 {
        self.a1b1 + self.a1b0 + self.a0b1 - self.a0b0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChshReport {
    pub mode: Mode,
    pub correlators: Correlators,
    pub s_value: f64,
    /// Sampled mode only.
    pub shots_per_setting: Option<u64>,
    pub standard_error: Option<f64>,
    /// `(S - 2) / standard_error`; absent when the standard error is zero.
    pub sigma_violation: Option<f64>,
}

impl ChshReport {
    pub fn exact(correlators: Correlators) -> Self {
        Self {
            mode: Mode::Exact,
            correlators,
            s_value: correlators.s_value(),
            shots_per_setting: None,
            standard_error: None,
            sigma_violation: None,
        }
    }
}

/// One cell of a setting pair's outcome table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointOutcome {
    pub a_value: f64,
    pub b_value: f64,
    pub joint_probability: f64,
}

fn check_full(state: &StateVector) -> Result<()> {
    state.expect_space(Space::Full)
}

fn check_setting(i: usize, j: usize) -> Result<()> {
    for (name, v) in [("i", i), ("j", j)] {
        if v > 1 {
            return Err(Error::InvalidParameter {
                name: if name == "i" {
                    "alice setting"
                } else {
                    "bob setting"
                },
                reason: format!("must be 0 or 1, got {v}"),
            });
        }
    }
    Ok(())
}

/// Exact correlators `<A_i B_j>` and the CHSH value.
pub fn chsh_exact(state: &StateVector) -> Result<ChshReport> {
    check_full(state)?;
    let l = lifted();
    let mut values = [[0.0; 2]; 2];
    for (i, j) in SETTINGS {
        values[i][j] = expectation(state.amplitudes(), &l.products[i][j])?;
    }
    Ok(ChshReport::exact(Correlators::from_fn(|i, j| values[i][j])))
}

/// Exact CHSH report of a Born-weighted ensemble of pure states.
pub fn chsh_exact_mixture(ensemble: &[(f64, StateVector)]) -> Result<ChshReport> {
    let mut values = [[0.0; 2]; 2];
    for (weight, state) in ensemble {
        let report = chsh_exact(state)?;
        for (i, j) in SETTINGS {
            values[i][j] += weight * report.correlators.get(i, j);
        }
    }
    Ok(ChshReport::exact(Correlators::from_fn(|i, j| values[i][j])))
}

/// Joint outcome table for measuring `A_i` and `B_j` together.
///
/// Rows run over Alice's outcomes (outer) and Bob's (inner), zero-probability
/// cells included: four rows for `(0, 0)`, six for mixed settings, nine for `(1, 1)`.
pub fn joint_distribution(state: &StateVector, i: usize, j: usize) -> Result<Vec<JointOutcome>> {
    check_full(state)?;
    check_setting(i, j)?;
    lifted().joint[i][j]
        .iter()
        .map(|(a, b, proj)| {
            let p = expectation(state.amplitudes(), proj)?;
            Ok(JointOutcome {
                a_value: *a,
                b_value: *b,
                joint_probability: p.clamp(0.0, 1.0),
            })
        })
        .collect()
}

/// Joint outcome table of a Born-weighted ensemble.
pub fn joint_distribution_mixture(
    ensemble: &[(f64, StateVector)],
    i: usize,
    j: usize,
) -> Result<Vec<JointOutcome>> {
    check_setting(i, j)?;
    let mut table: Vec<JointOutcome> = lifted().joint[i][j]
        .iter()
        .map(|(a, b, _)| JointOutcome {
            a_value: *a,
            b_value: *b,
            joint_probability: 0.0,
        })
        .collect();
    for (weight, state) in ensemble {
        for (cell, part) in table.iter_mut().zip(joint_distribution(state, i, j)?) {
            cell.joint_probability += weight * part.joint_probability;
        }
    }
    Ok(table)
}

/// Alice's outcome marginal for setting `i`, computed from her spectrum alone.
pub fn alice_marginal(state: &StateVector, i: usize) -> Result<Vec<(f64, f64)>> {
    check_full(state)?;
    check_setting(i, 0)?;
    lifted().alice[i]
        .iter()
        .map(|t| Ok((t.value, expectation(state.amplitudes(), &t.projector)?)))
        .collect()
}

/// Bob's outcome marginal for setting `j`.
pub fn bob_marginal(state: &StateVector, j: usize) -> Result<Vec<(f64, f64)>> {
    check_full(state)?;
    check_setting(0, j)?;
    lifted().bob[j]
        .iter()
        .map(|t| Ok((t.value, expectation(state.amplitudes(), &t.projector)?)))
        .collect()
}

/// How the four settings of a sampled run are scheduled. Both produce
/// bit-identical reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Serial,
    #[default]
    Parallel,
}

/// Per-setting tallies of the product `a * b`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
struct Tally {
    plus: u64,
    minus: u64,
    zero: u64,
}

impl Tally {
    fn shots(&self) -> u64 {
        self.plus + self.minus + self.zero
    }

    fn mean(&self) -> f64 {
        (self.plus as f64 - self.minus as f64) / self.shots() as f64
    }

    /// Unbiased sample variance of the product.
    fn variance(&self) -> f64 {
        let n = self.shots() as f64;
        let mean = self.mean();
        let second = (self.plus + self.minus) as f64 / n;
        ((second - mean * mean) * n / (n - 1.0)).max(0.0)
    }
}

fn sample_table(table: &[JointOutcome], shots: u64, rng: &mut impl Rng) -> Tally {
    let mut cdf = Vec::with_capacity(table.len());
    let mut acc = 0.0;
    for o in table {
        acc += o.joint_probability;
        cdf.push(acc);
    }
    // falls back to the last populated cell when rounding leaves cdf < 1
    let last = table
        .iter()
        .rposition(|o| o.joint_probability > 0.0)
        .expect("outcome table has no mass");
    let mut tally = Tally::default();
    for _ in 0..shots {
        let u: f64 = rng.random();
        let k = cdf.iter().position(|&c| u < c).unwrap_or(last);
        let product = table[k].a_value * table[k].b_value;
        if product > 0.0 {
            tally.plus += 1;
        } else if product < 0.0 {
            tally.minus += 1;
        } else {
            tally.zero += 1;
        }
    }
    tally
}

fn sampled_report(
    tables: &[[Vec<JointOutcome>; 2]; 2],
    shots: u64,
    seed: u64,
    exec: Execution,
) -> Result<ChshReport> {
    if shots < 2 {
        return Err(Error::InvalidParameter {
            name: "shots_per_setting",
            reason: format!("at least 2 shots are needed for a variance, got {shots}"),
        });
    }
    let run = |&(i, j): &(usize, usize)| {
        let mut rng = rng::stream(seed, Domain::ChshSetting, &[i as u64, j as u64]);
        sample_table(&tables[i][j], shots, &mut rng)
    };
    let tallies: Vec<Tally> = match exec {
        Execution::Serial => SETTINGS.iter().map(run).collect(),
        Execution::Parallel => SETTINGS.par_iter().map(run).collect(),
    };
    let mut by_setting = [[Tally::default(); 2]; 2];
    for (&(i, j), t) in SETTINGS.iter().zip(&tallies) {
        by_setting[i][j] = *t;
    }
    let correlators = Correlators::from_fn(|i, j| by_setting[i][j].mean());
    let s_value = correlators.s_value();
    let variance_sum: f64 = tallies.iter().map(Tally::variance).sum();
    let standard_error = (variance_sum / shots as f64).sqrt();
    let sigma_violation =
        (standard_error > 0.0).then(|| (s_value - CLASSICAL_BOUND) / standard_error);
    Ok(ChshReport {
        mode: Mode::Sampled,
        correlators,
        s_value,
        shots_per_setting: Some(shots),
        standard_error: Some(standard_error),
        sigma_violation,
    })
}

/// Monte Carlo CHSH run with `shots` joint measurements per setting pair.
pub fn chsh_sampled(state: &StateVector, shots: u64, seed: u64) -> Result<ChshReport> {
    chsh_sampled_with(state, shots, seed, Execution::Parallel)
}

pub fn chsh_sampled_with(
    state: &StateVector,
    shots: u64,
    seed: u64,
    exec: Execution,
) -> Result<ChshReport> {
    let tables = tables_for(|i, j| joint_distribution(state, i, j))?;
    sampled_report(&tables, shots, seed, exec)
}

/// Monte Carlo CHSH run on a Born-weighted ensemble: each shot measures a
/// member drawn with its weight.
pub fn chsh_sampled_mixture(
    ensemble: &[(f64, StateVector)],
    shots: u64,
    seed: u64,
    exec: Execution,
) -> Result<ChshReport> {
    let tables = tables_for(|i, j| joint_distribution_mixture(ensemble, i, j))?;
    sampled_report(&tables, shots, seed, exec)
}

fn tables_for(
    mut f: impl FnMut(usize, usize) -> Result<Vec<JointOutcome>>,
) -> Result<[[Vec<JointOutcome>; 2]; 2]> {
    Ok([[f(0, 0)?, f(0, 1)?], [f(1, 0)?, f(1, 1)?]])
}

/// A joint assignment of values to the four observables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ValueAssignment {
    pub a0: i8,
    pub a1: i8,
    pub b0: i8,
    pub b1: i8,
}

impl ValueAssignment {
    pub fn chsh(&self) -> i32 {
        let (a0, a1, b0, b1) = (
            self.a0 as i32,
            self.a1 as i32,
            self.b0 as i32,
            self.b1 as i32,
        );
        a1 * b1 + a1 * b0 + a0 * b1 - a0 * b0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Enumeration {
    pub cases: usize,
    pub max: i32,
    pub maximizers: Vec<ValueAssignment>,
}

/// Exhaustive search over simultaneous values: `a0, b0` in `{-1, +1}` and
/// `a1, b1` drawn from the given sets.
pub fn enumerate_assignments(a1_values: &[i8], b1_values: &[i8]) -> Enumeration {
    let mut cases = 0;
    let mut max = i32::MIN;
    let mut maximizers = Vec::new();
    for a0 in [-1, 1] {
        for b0 in [-1, 1] {
            for &a1 in a1_values {
                for &b1 in b1_values {
                    let v = ValueAssignment { a0, a1, b0, b1 };
                    cases += 1;
                    let s = v.chsh();
                    if s > max {
                        max = s;
                        maximizers.clear();
                    }
                    if s == max {
                        maximizers.push(v);
                    }
                }
            }
        }
    }
    Enumeration {
        cases,
        max,
        maximizers,
    }
}

/// The full enumeration: `a1, b1` may also take the value 0.
pub fn classical_enumeration() -> Enumeration {
    enumerate_assignments(&[-1, 0, 1], &[-1, 0, 1])
}

/// Largest CHSH value any joint value assignment reaches.
pub fn classical_max() -> f64 {
    classical_enumeration().max as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::{bell_wigner_state, product_ket, Polarization::*, Record::*};
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_8, SQRT_2};

    #[test]
    fn exact_on_bell_wigner_state() {
        let report = chsh_exact(&bell_wigner_state()).unwrap();
        let c = report.correlators;
        for (got, want) in [
            (c.a1b1, FRAC_1_SQRT_2),
            (c.a1b0, FRAC_1_SQRT_2),
            (c.a0b1, FRAC_1_SQRT_2),
            (c.a0b0, -FRAC_1_SQRT_2),
        ] {
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
        assert!((report.s_value - 2.0 * SQRT_2).abs() < 1e-12);
        assert_eq!(report.s_value, c.s_value());
        assert_eq!(report.mode, Mode::Exact);
    }

    #[test]
    fn exact_on_product_state() {
        let report = chsh_exact(&product_ket((H, Fv), (H, Fv))).unwrap();
        assert_eq!(report.correlators.a0b0, 1.0);
        assert_eq!(report.correlators.a1b1, 0.0);
        assert!(report.s_value <= 2.0);
    }

    #[test]
    fn exact_rejects_small_states() {
        let err = chsh_exact(&crate::states::plus_photon()).unwrap_err();
        assert_eq!(
            err,
            Error::DimensionMismatch {
                expected: 16,
                found: 2
            }
        );
    }

    #[test]
    fn classical_bound_is_two() {
        let e = classical_enumeration();
        assert_eq!(e.cases, 36);
        assert_eq!(e.max, 2);
        assert_eq!(classical_max(), 2.0);
        assert!(!e.maximizers.is_empty());
        assert!(e.maximizers.iter().all(|m| m.chsh() == 2));
    }

    #[test]
    fn classical_bound_with_wigner_values_frozen_at_zero() {
        // only -a0*b0 survives, so the maximum is 1
        let e = enumerate_assignments(&[0], &[0]);
        assert_eq!(e.cases, 4);
        assert_eq!(e.max, 1);
        assert_eq!(e.maximizers.len(), 2);
    }

    #[test]
    fn joint_distribution_sizes_and_completeness() {
        let psi = bell_wigner_state();
        for (i, j, len) in [(0, 0, 4), (0, 1, 6), (1, 0, 6), (1, 1, 9)] {
            let table = joint_distribution(&psi, i, j).unwrap();
            assert_eq!(table.len(), len);
            let total: f64 = table.iter().map(|o| o.joint_probability).sum();
            assert!((total - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn joint_distribution_matches_correlators() {
        let psi = bell_wigner_state();
        let report = chsh_exact(&psi).unwrap();
        for (i, j) in SETTINGS {
            let e: f64 = joint_distribution(&psi, i, j)
                .unwrap()
                .iter()
                .map(|o| o.a_value * o.b_value * o.joint_probability)
                .sum();
            assert!((e - report.correlators.get(i, j)).abs() < 1e-12);
        }
    }

    #[test]
    fn friend_records_both_plus() {
        let table = joint_distribution(&bell_wigner_state(), 0, 0).unwrap();
        let p = table
            .iter()
            .find(|o| o.a_value == 1.0 && o.b_value == 1.0)
            .unwrap()
            .joint_probability;
        let want = FRAC_PI_8.sin().powi(2) / 2.0;
        assert!((p - want).abs() < 1e-12);
        assert!((p - 0.073_223_304_703_363).abs() < 1e-12);
    }

    #[test]
    fn sampling_requires_two_shots() {
        assert!(matches!(
            chsh_sampled(&bell_wigner_state(), 1, 0),
            Err(Error::InvalidParameter { .. })
        ));
    }

    #[test]
    fn sampled_is_deterministic_and_schedule_independent() {
        let psi = bell_wigner_state();
        let a = chsh_sampled_with(&psi, 2000, 7, Execution::Serial).unwrap();
        let b = chsh_sampled_with(&psi, 2000, 7, Execution::Parallel).unwrap();
        let c = chsh_sampled(&psi, 2000, 7).unwrap();
        assert_eq!(a, b);
        assert_eq!(b, c);
        assert_eq!(a.s_value.to_bits(), c.s_value.to_bits());
        let d = chsh_sampled(&psi, 2000, 8).unwrap();
        assert_ne!(a, d);
    }

    #[test]
    fn sampled_thousand_shots_violates_by_five_sigma() {
        let report = chsh_sampled(&bell_wigner_state(), 1000, 42).unwrap();
        assert!(report.sigma_violation.unwrap() > 5.0, "{report:?}");
        assert_eq!(report.shots_per_setting, Some(1000));
    }

    #[test]
    fn sampled_product_state_has_no_sigma() {
        // A0B0 is deterministic and A1 products are 0 always: zero variance
        let report = chsh_sampled(&product_ket((H, Fh), (V, Fv)), 100, 1).unwrap();
        assert_eq!(report.standard_error, Some(0.0));
        assert_eq!(report.sigma_violation, None);
    }

    #[test]
    fn tally_statistics() {
        let t = Tally {
            plus: 3,
            minus: 1,
            zero: 0,
        };
        assert_eq!(t.mean(), 0.5);
        // values 1,1,1,-1: mean 0.5, unbiased variance (3*0.25 + 2.25)/3 = 1
        assert!((t.variance() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn report_json_keys() {
        let report = chsh_exact(&bell_wigner_state()).unwrap();
        let json = serde_json::to_string(&report).unwrap();
        let keys: Vec<&str> = [
            "\"mode\"",
            "\"A1B1\"",
            "\"A1B0\"",
            "\"A0B1\"",
            "\"A0B0\"",
            "\"s_value\"",
            "\"shots_per_setting\"",
            "\"standard_error\"",
            "\"sigma_violation\"",
        ]
        .to_vec();
        let mut last = 0;
        for k in keys {
            let at = json
                .find(k)
                .unwrap_or_else(|| panic!("{k} missing from {json}"));
            assert!(at >= last, "{k} out of order");
            last = at;
        }
        let back: ChshReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, report);
    }
}
