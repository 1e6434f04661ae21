//! Basis layout and the state vectors of the photon/friend experiment.
//!
//! Every 16-dimensional vector in this crate uses one ordering of the four
//! subsystems, `photon_a, friend_a, photon_b, friend_b`, with photon_a as the
//! most significant bit of the basis index. Encodings are `h -> 0, v -> 1`
//! for photons and `F_h -> 0, F_v -> 1` for friends.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_8};
use std::fmt;

use num_complex::Complex64;
use serde::ser::{SerializeSeq, SerializeStruct};
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::linalg::{r, ComplexMatrix, ComplexVector, TOLERANCE};

/// Photon polarization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Polarization {
    H = 0,
    V = 1,
}

/// A friend's record of the polarization it saw.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Record {
    Fh = 0,
    Fv = 1,
}

impl Polarization {
    pub fn from_bit(bit: usize) -> Self {
        if bit == 0 {
            Self::H
        } else {
            Self::V
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Self::H => "h",
            Self::V => "v",
        }
    }
}

impl Record {
    pub fn from_bit(bit: usize) -> Self {
        if bit == 0 {
            Self::Fh
        } else {
            Self::Fv
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Self::Fh => "F_h",
            Self::Fv => "F_v",
        }
    }
}

/// The two labs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Alice,
    Bob,
}

/// The subsystem ordering shared by every vector in the crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BasisLayout;

impl BasisLayout {
    pub const SUBSYSTEMS: [&'static str; 4] = ["photon_a", "friend_a", "photon_b", "friend_b"];
    pub const DIM: usize = 16;
    /// Dimension of one side (photon and friend).
    pub const LOCAL_DIM: usize = 4;

    /// Index of a photon/friend ket on one side.
    pub const fn local_index(photon: Polarization, friend: Record) -> usize {
        (photon as usize) << 1 | friend as usize
    }

    pub fn local_labels(index: usize) -> (Polarization, Record) {
        assert!(index < Self::LOCAL_DIM, "local index {index} out of range");
        (
            Polarization::from_bit(index >> 1 & 1),
            Record::from_bit(index & 1),
        )
    }

    pub const fn index(labels: [(Polarization, Record); 2]) -> usize {
        Self::local_index(labels[0].0, labels[0].1) << 2
            | Self::local_index(labels[1].0, labels[1].1)
    }

    pub fn labels(index: usize) -> [(Polarization, Record); 2] {
        assert!(index < Self::DIM, "basis index {index} out of range");
        [
            Self::local_labels(index >> 2),
            Self::local_labels(index & 3),
        ]
    }

    /// Human-readable label, e.g. `h F_v | v F_h`.
    pub fn describe(index: usize) -> String {
        let [(pa, fa), (pb, fb)] = Self::labels(index);
        format!(
            "{} {} | {} {}",
            pa.symbol(),
            fa.symbol(),
            pb.symbol(),
            fb.symbol()
        )
    }
}

/// Which tensor space a [`StateVector`] lives in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Space {
    /// A single photon.
    Photon,
    /// One photon and its friend.
    PhotonFriend,
    /// Alice's and Bob's photons without friends.
    PhotonPair,
    /// The full four-subsystem layout.
    Full,
}

impl Space {
    pub fn dim(self) -> usize {
        match self {
            Self::Photon => 2,
            Self::PhotonFriend | Self::PhotonPair => 4,
            Self::Full => BasisLayout::DIM,
        }
    }

    pub fn subsystems(self) -> &'static [&'static str] {
        match self {
            Self::Photon => &["photon"],
            Self::PhotonFriend => &["photon", "friend"],
            Self::PhotonPair => &["photon_a", "photon_b"],
            Self::Full => &BasisLayout::SUBSYSTEMS,
        }
    }
}

/// A normalized pure state together with the space it lives in.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    space: Space,
    amplitudes: ComplexVector,
}

impl StateVector {
    pub fn new(space: Space, amplitudes: ComplexVector) -> Result<Self> {
        if amplitudes.dim() != space.dim() {
            return Err(Error::DimensionMismatch {
                expected: space.dim(),
                found: amplitudes.dim(),
            });
        }
        let norm = amplitudes.norm();
        if (norm - 1.0).abs() > TOLERANCE {
            return Err(Error::NotNormalized { norm });
        }
        Ok(Self { space, amplitudes })
    }

    /// Normalizes `amplitudes` first. Fails on the zero vector.
    pub fn normalizing(space: Space, amplitudes: ComplexVector) -> Result<Self> {
        let norm = amplitudes.norm();
        let normalized = amplitudes
            .normalized()
            .ok_or(Error::NotNormalized { norm })?;
        Self::new(space, normalized)
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.dim()
    }

    pub fn amplitudes(&self) -> &ComplexVector {
        &self.amplitudes
    }

    pub fn amplitude(&self, index: usize) -> Complex64 {
        self.amplitudes.get(index)
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }

    pub(crate) fn expect_space(&self, space: Space) -> Result<()> {
        if self.space != space {
            return Err(Error::DimensionMismatch {
                expected: space.dim(),
                found: self.dim(),
            });
        }
        Ok(())
    }
}

impl fmt::Display for StateVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (i, z) in self.amplitudes.entries().iter().enumerate() {
            if z.norm_sqr() == 0.0 {
                continue;
            }
            if !first {
                f.write_str(" + ")?;
            }
            first = false;
            write!(f, "({:.5}{:+.5}i)|{i}>", z.re, z.im)?;
        }
        Ok(())
    }
}

struct Amplitudes<'a>(&'a [Complex64]);

impl Serialize for Amplitudes<'_> {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut seq = serializer.serialize_seq(Some(self.0.len()))?;
        for z in self.0 {
            seq.serialize_element(&[z.re, z.im])?;
        }
        seq.end()
    }
}

/// Serializes as `{"layout": [...], "amplitudes": [[re, im], ...]}`.
impl Serialize for StateVector {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = serializer.serialize_struct("StateVector", 2)?;
        st.serialize_field("layout", self.space.subsystems())?;
        st.serialize_field("amplitudes", &Amplitudes(self.amplitudes.entries()))?;
        st.end()
    }
}

/// How a friend's record is correlated with the photon it observed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FriendMapping {
    /// `|h> -> |h F_h>`, `|v> -> |v F_v>`.
    Aligned,
    /// `|h> -> |h F_v>`, `|v> -> |v F_h>`, the convention of the four-photon experiment.
    AntiAligned,
}

impl FriendMapping {
    pub fn record_for(self, photon: Polarization) -> Record {
        match (self, photon) {
            (Self::Aligned, Polarization::H) | (Self::AntiAligned, Polarization::V) => Record::Fh,
            (Self::Aligned, Polarization::V) | (Self::AntiAligned, Polarization::H) => Record::Fv,
        }
    }

    /// The two local indices the mapping can populate, ordered `(h, v)`.
    pub fn support(self) -> [usize; 2] {
        [Polarization::H, Polarization::V].map(|p| BasisLayout::local_index(p, self.record_for(p)))
    }

    /// The 4x2 isometry implementing the mapping.
    pub fn isometry(self) -> ComplexMatrix {
        let mut m = ComplexMatrix::zeros(4, 2);
        for (col, row) in self.support().into_iter().enumerate() {
            m.set(row, col, r(1.0));
        }
        m
    }
}

/// `(|h> + |v>)/sqrt(2)`.
pub fn plus_photon() -> StateVector {
    let s = FRAC_1_SQRT_2;
    StateVector::new(Space::Photon, ComplexVector::from_real(&[s, s]).unwrap()).unwrap()
}

pub fn photon(p: Polarization) -> StateVector {
    StateVector::new(Space::Photon, ComplexVector::basis(2, p as usize)).unwrap()
}

/// `|photon friend>` on one side.
pub fn local_ket(photon: Polarization, friend: Record) -> StateVector {
    StateVector::new(
        Space::PhotonFriend,
        ComplexVector::basis(4, BasisLayout::local_index(photon, friend)),
    )
    .unwrap()
}

/// A basis ket of the full 16-dimensional layout.
pub fn product_ket(alice: (Polarization, Record), bob: (Polarization, Record)) -> StateVector {
    StateVector::new(
        Space::Full,
        ComplexVector::basis(BasisLayout::DIM, BasisLayout::index([alice, bob])),
    )
    .unwrap()
}

/// Lets a friend record the photon's polarization: `a|h> + b|v>` becomes
/// `a|h F(h)> + b|v F(v)>` with `F` given by `mapping`.
pub fn correlate_friend(photon: &StateVector, mapping: FriendMapping) -> Result<StateVector> {
    photon.expect_space(Space::Photon)?;
    let amplitudes = mapping.isometry().apply(photon.amplitudes())?;
    StateVector::new(Space::PhotonFriend, amplitudes)
}

/// `(|h>_a |v>_b - |v>_a |h>_b)/sqrt(2)` on the photon pair.
pub fn entangled_pair() -> StateVector {
    let s = FRAC_1_SQRT_2;
    StateVector::new(
        Space::PhotonPair,
        ComplexVector::from_real(&[0.0, s, -s, 0.0]).unwrap(),
    )
    .unwrap()
}

/// The four-photon state on which Wigner-level and friend-level observables
/// reach the quantum CHSH maximum.
pub fn bell_wigner_state() -> StateVector {
    use Polarization::{H, V};
    use Record::{Fh, Fv};

    let cos = FRAC_1_SQRT_2 * FRAC_PI_8.cos();
    let sin = FRAC_1_SQRT_2 * FRAC_PI_8.sin();
    let mut amplitudes = ComplexVector::zeros(BasisLayout::DIM).entries().to_vec();
    amplitudes[BasisLayout::index([(H, Fv), (V, Fh)])] = r(cos);
    amplitudes[BasisLayout::index([(V, Fh), (H, Fv)])] = r(cos);
    amplitudes[BasisLayout::index([(H, Fv), (H, Fv)])] = r(sin);
    amplitudes[BasisLayout::index([(V, Fh), (V, Fh)])] = r(-sin);
    StateVector::new(Space::Full, ComplexVector::new(amplitudes).unwrap()).unwrap()
}
