//! The friend-level observables `A0`, `B0` and Wigner-level observables `A1`,
//! `B1`, each carrying an analytic spectral decomposition.
//!
//! `A0` reads the friend's record: `+1` on `F_v`, `-1` on `F_h`. `A1` measures
//! the photon-friend pair in the basis `|phi+-> = (|h F_v> +- |v F_h>)/sqrt(2)`
//! with outcomes `+1`, `-1`, and `0` on the rank-2 complement.

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;

use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

use crate::linalg::{
    commutator_norm, is_projector, kron, r, ComplexMatrix, ComplexVector, TOLERANCE,
};
use crate::states::{BasisLayout, Polarization, Record, Side};

/// Minimum Frobenius norm of an intra-side commutator for it to count as non-commuting.
pub const NONCOMMUTING_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum ObservableLabel {
    A0,
    A1,
    B0,
    B1,
}

impl ObservableLabel {
    pub const ALL: [Self; 4] = [Self::A0, Self::A1, Self::B0, Self::B1];

    pub fn side(self) -> Side {
        match self {
            Self::A0 | Self::A1 => Side::Alice,
            Self::B0 | Self::B1 => Side::Bob,
        }
    }

    /// 0 for the friend-level observable, 1 for the Wigner-level one.
    pub fn setting(self) -> usize {
        match self {
            Self::A0 | Self::B0 => 0,
            Self::A1 | Self::B1 => 1,
        }
    }

    pub fn of(side: Side, setting: usize) -> Self {
        match (side, setting) {
            (Side::Alice, 0) => Self::A0,
            (Side::Alice, 1) => Self::A1,
            (Side::Bob, 0) => Self::B0,
            (Side::Bob, 1) => Self::B1,
            _ => panic!("setting must be 0 or 1, got {setting}"),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::A0 => "A0",
            Self::A1 => "A1",
            Self::B0 => "B0",
            Self::B1 => "B1",
        }
    }
}

impl fmt::Display for ObservableLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ObservableLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|l| l.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown observable `{s}` (expected A0, A1, B0 or B1)"))
    }
}

/// One outcome value and the projector onto its eigenspace.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralTerm {
    pub value: f64,
    pub projector: ComplexMatrix,
}

impl SpectralTerm {
    pub fn rank(&self) -> usize {
        self.projector.trace().re.round() as usize
    }
}

impl Serialize for SpectralTerm {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut st = serializer.serialize_struct("SpectralTerm", 3)?;
        st.serialize_field("value", &self.value)?;
        st.serialize_field("rank", &self.rank())?;
        st.serialize_field("projector", &self.projector)?;
        st.end()
    }
}

/// A local observable on one side's photon and friend, with its spectrum.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Observable {
    label: ObservableLabel,
    side: Side,
    matrix: ComplexMatrix,
    spectrum: Vec<SpectralTerm>,
}

impl Observable {
    /// Assembles an observable without checking its spectrum. Used for
    /// negative controls; [`verify_algebra`] reports any inconsistency.
    pub fn from_parts(
        label: ObservableLabel,
        matrix: ComplexMatrix,
        spectrum: Vec<SpectralTerm>,
    ) -> Self {
        Self {
            label,
            side: label.side(),
            matrix,
            spectrum,
        }
    }

    pub fn label(&self) -> ObservableLabel {
        self.label
    }

    pub fn side(&self) -> Side {
        self.side
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn spectrum(&self) -> &[SpectralTerm] {
        &self.spectrum
    }

    /// `sum value * projector`.
    pub fn reconstruct(&self) -> ComplexMatrix {
        let dim = self.matrix.rows();
        self.spectrum
            .iter()
            .fold(ComplexMatrix::zeros(dim, dim), |acc, t| {
                &acc + &t.projector.scale(r(t.value))
            })
    }

    /// The spectrum lifted to the 16-dimensional layout.
    pub fn lifted_spectrum(&self) -> Vec<SpectralTerm> {
        self.spectrum
            .iter()
            .map(|t| SpectralTerm {
                value: t.value,
                projector: lift_local(&t.projector, self.side),
            })
            .collect()
    }
}

fn local_ket(p: Polarization, f: Record) -> ComplexVector {
    ComplexVector::basis(BasisLayout::LOCAL_DIM, BasisLayout::local_index(p, f))
}

fn ketbra(v: &ComplexVector) -> ComplexMatrix {
    v.outer(v)
}

/// `|+>` and `|->` of the Wigner-level measurement.
fn phi_pair() -> (ComplexVector, ComplexVector) {
    let hfv = local_ket(Polarization::H, Record::Fv);
    let vfh = local_ket(Polarization::V, Record::Fh);
    let s = r(FRAC_1_SQRT_2);
    let plus = (&hfv + &vfh).scale(s);
    let minus = (&hfv - &vfh).scale(s);
    (plus, minus)
}

/// `|h F_v><h F_v| + |v F_h><v F_h|`, the square of the Wigner-level observable.
pub fn correlated_projector() -> ComplexMatrix {
    &ketbra(&local_ket(Polarization::H, Record::Fv))
        + &ketbra(&local_ket(Polarization::V, Record::Fh))
}

fn friend_observable(label: ObservableLabel) -> Observable {
    let i2 = ComplexMatrix::identity(2);
    let fv = ComplexMatrix::diagonal(&[0.0, 1.0]);
    let fh = ComplexMatrix::diagonal(&[1.0, 0.0]);
    let matrix = kron(&i2, &(&fv - &fh));
    let spectrum = vec![
        SpectralTerm {
            value: 1.0,
            projector: kron(&i2, &fv),
        },
        SpectralTerm {
            value: -1.0,
            projector: kron(&i2, &fh),
        },
    ];
    Observable::from_parts(label, matrix, spectrum)
}

fn wigner_observable(label: ObservableLabel) -> Observable {
    let (plus, minus) = phi_pair();
    let p_plus = ketbra(&plus);
    let p_minus = ketbra(&minus);
    let kernel = &(&ComplexMatrix::identity(4) - &p_plus) - &p_minus;
    let matrix = &p_plus - &p_minus;
    let spectrum = vec![
        SpectralTerm {
            value: 1.0,
            projector: p_plus,
        },
        SpectralTerm {
            value: -1.0,
            projector: p_minus,
        },
        SpectralTerm {
            value: 0.0,
            projector: kernel,
        },
    ];
    Observable::from_parts(label, matrix, spectrum)
}

pub fn make_a0() -> Observable {
    friend_observable(ObservableLabel::A0)
}

pub fn make_b0() -> Observable {
    friend_observable(ObservableLabel::B0)
}

pub fn make_a1() -> Observable {
    wigner_observable(ObservableLabel::A1)
}

pub fn make_b1() -> Observable {
    wigner_observable(ObservableLabel::B1)
}

pub fn make(label: ObservableLabel) -> Observable {
    match label {
        ObservableLabel::A0 => make_a0(),
        ObservableLabel::A1 => make_a1(),
        ObservableLabel::B0 => make_b0(),
        ObservableLabel::B1 => make_b1(),
    }
}

/// Embeds a 4x4 operator on one side into the 16-dimensional layout:
/// `M (x) I` for Alice, `I (x) M` for Bob.
pub fn lift_local(m: &ComplexMatrix, side: Side) -> ComplexMatrix {
    let id = ComplexMatrix::identity(BasisLayout::LOCAL_DIM);
    match side {
        Side::Alice => kron(m, &id),
        Side::Bob => kron(&id, m),
    }
}

pub fn lift(obs: &Observable) -> ComplexMatrix {
    lift_local(obs.matrix(), obs.side())
}

/// The four observables of one CHSH experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservableSet {
    pub a0: Observable,
    pub a1: Observable,
    pub b0: Observable,
    pub b1: Observable,
}

impl ObservableSet {
    pub fn standard() -> Self {
        Self {
            a0: make_a0(),
            a1: make_a1(),
            b0: make_b0(),
            b1: make_b1(),
        }
    }

    pub fn get(&self, label: ObservableLabel) -> &Observable {
        match label {
            ObservableLabel::A0 => &self.a0,
            ObservableLabel::A1 => &self.a1,
            ObservableLabel::B0 => &self.b0,
            ObservableLabel::B1 => &self.b1,
        }
    }

    pub fn alice(&self, setting: usize) -> &Observable {
        self.get(ObservableLabel::of(Side::Alice, setting))
    }

    pub fn bob(&self, setting: usize) -> &Observable {
        self.get(ObservableLabel::of(Side::Bob, setting))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlgebraCheck {
    pub name: String,
    pub passed: bool,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlgebraReport {
    pub all_passed: bool,
    pub checks: Vec<AlgebraCheck>,
}

impl AlgebraReport {
    pub fn check(&self, name: &str) -> Option<&AlgebraCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// (value, rank) pairs the spectrum of each kind of observable must have.
fn expected_spectrum(label: ObservableLabel) -> &'static [(f64, usize)] {
    match label.setting() {
        0 => &[(1.0, 2), (-1.0, 2)],
        _ => &[(1.0, 1), (-1.0, 1), (0.0, 2)],
    }
}

/// Largest violation of the spectral-decomposition contract, or infinity when
/// the outcome values or ranks are not the expected ones.
fn spectrum_residual(obs: &Observable) -> f64 {
    let m = obs.matrix();
    let dim = m.rows();
    if !m.is_square() || dim != BasisLayout::LOCAL_DIM {
        return f64::INFINITY;
    }
    let mut found: Vec<(f64, usize)> = obs.spectrum().iter().map(|t| (t.value, t.rank())).collect();
    let mut want = expected_spectrum(obs.label()).to_vec();
    found.sort_by(|a, b| a.0.total_cmp(&b.0));
    want.sort_by(|a, b| a.0.total_cmp(&b.0));
    if found != want {
        return f64::INFINITY;
    }

    let mut residual = m.hermiticity_residual();
    residual = residual.max(obs.reconstruct().distance(m));
    let mut sum = ComplexMatrix::zeros(dim, dim);
    for (k, t) in obs.spectrum().iter().enumerate() {
        let p = &t.projector;
        if !is_projector(p, TOLERANCE) {
            residual = residual.max(
                (p * p)
                    .distance(p)
                    .max(p.hermiticity_residual())
                    .max(TOLERANCE * 2.0),
            );
        }
        // M P = value P
        residual = residual.max((m * p).distance(&p.scale(r(t.value))));
        for other in &obs.spectrum()[k + 1..] {
            residual = residual.max((p * &other.projector).frobenius_norm());
        }
        sum = &sum + p;
    }
    residual.max(sum.distance(&ComplexMatrix::identity(dim)))
}

/// Checks the algebraic identities the CHSH argument relies on.
///
/// Failures are reported as entries with `passed == false`; nothing here
/// returns an error.
pub fn verify_algebra(set: &ObservableSet) -> AlgebraReport {
    let mut checks = Vec::new();
    let mut push = |name: String, passed: bool, residual: f64| {
        checks.push(AlgebraCheck {
            name,
            passed,
            residual,
        })
    };

    for obs in [&set.a0, &set.b0] {
        let m = obs.matrix();
        let residual = if m.is_square() {
            (m * m).distance(&ComplexMatrix::identity(m.rows()))
        } else {
            f64::INFINITY
        };
        push(
            format!("{}^2 = I", obs.label()),
            residual <= TOLERANCE,
            residual,
        );
    }

    let target = correlated_projector();
    for obs in [&set.a1, &set.b1] {
        let m = obs.matrix();
        let residual = if m.is_square() && m.rows() == target.rows() {
            (m * m).distance(&target)
        } else {
            f64::INFINITY
        };
        push(
            format!("{}^2 = |hFv><hFv| + |vFh><vFh|", obs.label()),
            residual <= TOLERANCE,
            residual,
        );
    }

    let lifted: Vec<(ObservableLabel, ComplexMatrix)> = [&set.a0, &set.a1, &set.b0, &set.b1]
        .into_iter()
        .map(|o| (o.label(), lift(o)))
        .collect();
    let (alice, bob) = lifted.split_at(2);
    for (la, ma) in alice {
        for (lb, mb) in bob {
            let norm = commutator_norm(ma, mb).unwrap_or(f64::INFINITY);
            push(format!("[{la},{lb}] = 0"), norm == 0.0, norm);
        }
    }
    for pair in [alice, bob] {
        let norm = commutator_norm(&pair[0].1, &pair[1].1).unwrap_or(0.0);
        push(
            format!("[{},{}] != 0", pair[0].0, pair[1].0),
            norm > NONCOMMUTING_THRESHOLD,
            norm,
        );
    }

    for obs in [&set.a0, &set.a1, &set.b0, &set.b1] {
        let residual = spectrum_residual(obs);
        push(
            format!("spectrum {}", obs.label()),
            residual <= TOLERANCE,
            residual,
        );
    }

    let all_passed = checks.iter().all(|c| c.passed);
    AlgebraReport { all_passed, checks }
}

impl Serialize for ComplexMatrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeSeq;
        let mut rows = serializer.serialize_seq(Some(self.rows()))?;
        for i in 0..self.rows() {
            let row: Vec<[f64; 2]> = (0..self.cols())
                .map(|j| {
                    let z = self.get(i, j);
                    [z.re, z.im]
                })
                .collect();
            rows.serialize_element(&row)?;
        }
        rows.end()
    }
}
