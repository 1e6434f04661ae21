//! Executable versions of three accounts of what happens when a friend
//! measures: spontaneous localization (GRW), pilot wave, and many worlds.
//!
//! All three keep both terms of the photon-friend superposition when the
//! friend is microscopic and retain a single term (per run) when it is
//! macroscopic. Exact reports average over runs with Born weights; sampled
//! reports draw one branch per shot.

use std::fmt;

use rand::Rng;
use rand_distr::{Distribution, Exp};
use rayon::prelude::*;
use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

use crate::chsh::{chsh_exact_mixture, chsh_sampled_mixture, ChshReport, Execution};
use crate::error::{Error, Result};
use crate::linalg::{r, ComplexVector};
use crate::rng::{self, Domain};
use crate::states::{BasisLayout, FriendMapping, Polarization, Record, Side, Space, StateVector};

/// Per-particle localization rate, in 1/s.
pub const DEFAULT_RATE_PER_PARTICLE: f64 = 1e-16;
/// Default measurement duration, in seconds.
pub const DEFAULT_DURATION_S: f64 = 1e3;
/// Below this total rate the exponential sampler is rejected.
pub const MIN_TOTAL_RATE: f64 = 1e-30;
/// Branches with weight at or below this are dropped as numerically null.
pub const BRANCH_WEIGHT_FLOOR: f64 = 1e-15;
/// Largest weight outside the correlated kets that a collapse accepts.
pub const LEAKAGE_TOLERANCE: f64 = 1e-9;

const MICRO_MAX_PARTICLES: f64 = 1e6;
const MACRO_MIN_PARTICLES: f64 = 1e20;
const TRIAL_BLOCK: u64 = 1 << 14;

/// Parameters of the GRW localization estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GrwParams {
    pub n_particles: f64,
    pub duration_s: f64,
    pub rate_per_particle: f64,
}

impl GrwParams {
    pub fn new(n_particles: f64, duration_s: f64, rate_per_particle: f64) -> Result<Self> {
        let finite_nonneg = |name, v: f64| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidParameter {
                    name,
                    reason: format!("must be finite and non-negative, got {v}"),
                })
            }
        };
        finite_nonneg("n_particles", n_particles)?;
        finite_nonneg("duration_s", duration_s)?;
        finite_nonneg("rate_per_particle", rate_per_particle)?;
        if n_particles < 1.0 {
            return Err(Error::InvalidParameter {
                name: "n_particles",
                reason: format!("must be at least 1, got {n_particles}"),
            });
        }
        Ok(Self {
            n_particles,
            duration_s,
            rate_per_particle,
        })
    }

    /// An atom of about a hundred particles watched for 10^3 s.
    pub fn atom() -> Self {
        Self::new(100.0, DEFAULT_DURATION_S, DEFAULT_RATE_PER_PARTICLE).unwrap()
    }

    /// A macroscopic instrument of 10^25 particles over one nanosecond.
    pub fn instrument() -> Self {
        Self::new(1e25, 1e-9, DEFAULT_RATE_PER_PARTICLE).unwrap()
    }

    /// `N * lambda`, in 1/s.
    pub fn total_rate(&self) -> f64 {
        self.n_particles * self.rate_per_particle
    }

    fn exponent(&self) -> f64 {
        self.n_particles * self.duration_s * self.rate_per_particle
    }
}

/// `min(1, N T lambda)`.
pub fn grw_linear_probability(p: &GrwParams) -> f64 {
    p.exponent().min(1.0)
}

/// `1 - exp(-N lambda T)`: probability of at least one localization in a
/// Poisson process of total rate `N lambda`.
pub fn grw_exact_probability(p: &GrwParams) -> f64 {
    -(-p.exponent()).exp_m1()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GrwSimulation {
    pub trials: u64,
    pub collapsed_fraction: f64,
    /// Mean first-collapse time over the trials that collapsed in time.
    pub mean_collapse_time_s: Option<f64>,
}

/// Draws first-collapse times for `trials` independent runs.
///
/// Trials are processed in fixed-size blocks, each with its own stream, so
/// the result is the same at any thread count.
pub fn grw_simulate(p: &GrwParams, trials: u64, seed: u64) -> Result<GrwSimulation> {
    if trials == 0 {
        return Err(Error::InvalidParameter {
            name: "trials",
            reason: "must be positive".into(),
        });
    }
    let rate = p.total_rate();
    if rate < MIN_TOTAL_RATE {
        return Err(Error::InvalidParameter {
            name: "rate_per_particle",
            reason: format!("total rate {rate:e}/s is below {MIN_TOTAL_RATE:e}/s"),
        });
    }
    let exp = Exp::new(rate).map_err(|e| Error::InvalidParameter {
        name: "rate_per_particle",
        reason: e.to_string(),
    })?;
    let blocks = trials.div_ceil(TRIAL_BLOCK);
    let partials: Vec<(u64, f64)> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = rng::stream(seed, Domain::GrwTrials, &[b]);
            let n = TRIAL_BLOCK.min(trials - b * TRIAL_BLOCK);
            let mut collapsed = 0u64;
            let mut time_sum = 0.0;
            for _ in 0..n {
                let t: f64 = exp.sample(&mut rng);
                if t <= p.duration_s {
                    collapsed += 1;
                    time_sum += t;
                }
            }
            (collapsed, time_sum)
        })
        .collect();
    let (collapsed, time_sum) = partials
        .iter()
        .fold((0u64, 0.0), |(c, s), &(bc, bs)| (c + bc, s + bs));
    Ok(GrwSimulation {
        trials,
        collapsed_fraction: collapsed as f64 / trials as f64,
        mean_collapse_time_s: (collapsed > 0).then(|| time_sum / collapsed as f64),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ScaleKind {
    #[serde(rename = "micro")]
    Microscopic,
    #[serde(rename = "macro")]
    Macroscopic,
}

impl ScaleKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Microscopic => "micro",
            Self::Macroscopic => "macro",
        }
    }
}

/// How big the friend is.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FriendScale {
    kind: ScaleKind,
    grw: GrwParams,
}

impl FriendScale {
    /// Microscopic friends have at most 10^6 particles, macroscopic ones at least 10^20.
    pub fn new(kind: ScaleKind, grw: GrwParams) -> Result<Self> {
        let ok = match kind {
            ScaleKind::Microscopic => grw.n_particles <= MICRO_MAX_PARTICLES,
            ScaleKind::Macroscopic => grw.n_particles >= MACRO_MIN_PARTICLES,
        };
        if !ok {
            return Err(Error::InvalidParameter {
                name: "n_particles",
                reason: format!(
                    "{} particles is inconsistent with a {} friend",
                    grw.n_particles,
                    kind.as_str()
                ),
            });
        }
        Ok(Self { kind, grw })
    }

    pub fn microscopic() -> Self {
        Self::new(ScaleKind::Microscopic, GrwParams::atom()).unwrap()
    }

    /// An instrument observed over the default measurement duration.
    pub fn macroscopic() -> Self {
        let grw = GrwParams::new(1e25, DEFAULT_DURATION_S, DEFAULT_RATE_PER_PARTICLE).unwrap();
        Self::new(ScaleKind::Macroscopic, grw).unwrap()
    }

    pub fn of_kind(kind: ScaleKind) -> Self {
        match kind {
            ScaleKind::Microscopic => Self::microscopic(),
            ScaleKind::Macroscopic => Self::macroscopic(),
        }
    }

    pub fn kind(&self) -> ScaleKind {
        self.kind
    }

    pub fn grw(&self) -> &GrwParams {
        &self.grw
    }
}

/// One term of a superposition with its Born weight.
#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub weight: f64,
    pub state: StateVector,
    pub label: String,
}

impl Serialize for Branch {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = serializer.serialize_struct("Branch", 3)?;
        st.serialize_field("label", &self.label)?;
        st.serialize_field("weight", &self.weight)?;
        st.serialize_field("state", &self.state)?;
        st.end()
    }
}

fn local_label(index: usize) -> String {
    let (p, f) = BasisLayout::local_labels(index);
    format!("{}·{}", p.symbol(), f.symbol())
}

/// Finds the correlated basis the state lives in and returns its two
/// amplitudes with their local indices.
fn correlated_terms(state: &StateVector) -> Result<[(usize, num_complex::Complex64); 2]> {
    state.expect_space(Space::PhotonFriend)?;
    let (support, leakage) = [FriendMapping::Aligned, FriendMapping::AntiAligned]
        .into_iter()
        .map(|m| {
            let support = m.support();
            let inside: f64 = support.iter().map(|&k| state.amplitude(k).norm_sqr()).sum();
            (support, (1.0 - inside).max(0.0))
        })
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap();
    if leakage > LEAKAGE_TOLERANCE {
        return Err(Error::Leakage { leakage });
    }
    Ok(support.map(|k| (k, state.amplitude(k))))
}

/// Born-weighted collapse candidates of a correlated photon-friend state.
fn collapse_candidates(state: &StateVector) -> Result<Vec<Branch>> {
    let terms = correlated_terms(state)?;
    let total: f64 = terms.iter().map(|(_, a)| a.norm_sqr()).sum();
    Ok(terms
        .iter()
        .filter(|(_, a)| a.norm_sqr() / total > BRANCH_WEIGHT_FLOOR)
        .map(|&(k, a)| {
            let phase = a / a.norm();
            let ket = ComplexVector::basis(BasisLayout::LOCAL_DIM, k).scale(phase);
            Branch {
                weight: a.norm_sqr() / total,
                state: StateVector::new(Space::PhotonFriend, ket).expect("unit ket"),
                label: local_label(k),
            }
        })
        .collect())
}

fn select(mut candidates: Vec<Branch>, rng: &mut impl Rng) -> Branch {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let last = candidates.len() - 1;
    for (k, b) in candidates.iter().enumerate() {
        acc += b.weight;
        if u < acc {
            return candidates.swap_remove(k);
        }
    }
    candidates.swap_remove(last)
}

/// GRW collapse of a photon-friend state: one correlated term survives,
/// chosen with its Born weight.
pub fn grw_collapse_state(state: &StateVector, seed: u64) -> Result<Branch> {
    let candidates = collapse_candidates(state)?;
    Ok(select(
        candidates,
        &mut rng::stream(seed, Domain::Collapse, &[]),
    ))
}

/// Splits a photon-friend state by the friend's record. Every branch with
/// weight above [`BRANCH_WEIGHT_FLOOR`] is kept, and `sum sqrt(w) * branch`
/// recovers the input.
pub fn many_worlds_branches(state: &StateVector) -> Result<Vec<Branch>> {
    state.expect_space(Space::PhotonFriend)?;
    let mut out = Vec::new();
    for record in [Record::Fh, Record::Fv] {
        let mut component = ComplexVector::zeros(BasisLayout::LOCAL_DIM)
            .entries()
            .to_vec();
        let mut populated = Vec::new();
        for photon in [Polarization::H, Polarization::V] {
            let k = BasisLayout::local_index(photon, record);
            component[k] = state.amplitude(k);
            if component[k].norm_sqr() > 0.0 {
                populated.push(k);
            }
        }
        let component = ComplexVector::new(component)?;
        let weight = component.norm_sqr();
        if weight <= BRANCH_WEIGHT_FLOOR {
            continue;
        }
        let label = match populated.as_slice() {
            [k] => local_label(*k),
            _ => format!("*·{}", record.symbol()),
        };
        out.push(Branch {
            weight,
            state: StateVector::normalizing(Space::PhotonFriend, component)?,
            label,
        });
    }
    Ok(out)
}

/// What the pilot-wave account leaves for Wigner to work with.
#[derive(Debug, Clone, PartialEq)]
pub enum PilotWaveOutcome {
    /// Both terms remain dynamically relevant.
    Kept(StateVector),
    /// The configuration sits in one branch's support; the other term is idle.
    Collapsed(Branch),
}

pub fn pilot_wave_effective_state(
    state: &StateVector,
    scale: &FriendScale,
    seed: u64,
) -> Result<PilotWaveOutcome> {
    match scale.kind() {
        ScaleKind::Microscopic => {
            state.expect_space(Space::PhotonFriend)?;
            Ok(PilotWaveOutcome::Kept(state.clone()))
        }
        ScaleKind::Macroscopic => {
            let candidates = collapse_candidates(state)?;
            let mut rng = rng::stream(seed, Domain::PilotWave, &[]);
            Ok(PilotWaveOutcome::Collapsed(select(candidates, &mut rng)))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Backend {
    PilotWave,
    Grw,
    ManyWorlds,
}

impl Backend {
    pub const ALL: [Self; 3] = [Self::PilotWave, Self::Grw, Self::ManyWorlds];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::PilotWave => "pilot_wave",
            Self::Grw => "grw",
            Self::ManyWorlds => "many_worlds",
        }
    }
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A Born-weighted set of pure states.
pub type Ensemble = Vec<(f64, StateVector)>;

/// Splits every member of a four-subsystem ensemble by one side's friend record.
pub fn split_by_friend(ensemble: &[(f64, StateVector)], side: Side) -> Result<Ensemble> {
    let mut out = Vec::new();
    for (weight, state) in ensemble {
        state.expect_space(Space::Full)?;
        for record in [Record::Fh, Record::Fv] {
            let entries: Vec<_> = state
                .amplitudes()
                .entries()
                .iter()
                .enumerate()
                .map(|(idx, &a)| {
                    let [(_, fa), (_, fb)] = BasisLayout::labels(idx);
                    let mine = if side == Side::Alice { fa } else { fb };
                    if mine == record {
                        a
                    } else {
                        r(0.0)
                    }
                })
                .collect();
            let component = ComplexVector::new(entries)?;
            let w = component.norm_sqr();
            if w > BRANCH_WEIGHT_FLOOR {
                out.push((
                    weight * w,
                    StateVector::normalizing(Space::Full, component)?,
                ));
            }
        }
    }
    Ok(out)
}

fn split_both(state: &StateVector) -> Result<Ensemble> {
    let once = split_by_friend(&[(1.0, state.clone())], Side::Alice)?;
    split_by_friend(&once, Side::Bob)
}

/// Whether a GRW localization hits one side's friend during the measurement.
fn grw_localizes(scale: &FriendScale, side: Side, seed: u64) -> bool {
    let p = scale.grw();
    let rate = p.total_rate();
    if rate <= 0.0 || p.duration_s == 0.0 {
        return false;
    }
    let mut rng = rng::stream(seed, Domain::GrwDecision, &[side as u64]);
    let t: f64 = Exp::new(rate).expect("positive rate").sample(&mut rng);
    t <= p.duration_s
}

/// The ensemble Wigner measures after the friends have done their part,
/// according to `backend`.
pub fn effective_ensemble(
    backend: Backend,
    state: &StateVector,
    scale: &FriendScale,
    seed: u64,
) -> Result<Ensemble> {
    state.expect_space(Space::Full)?;
    let whole = vec![(1.0, state.clone())];
    match (backend, scale.kind()) {
        (Backend::PilotWave | Backend::ManyWorlds, ScaleKind::Microscopic) => Ok(whole),
        (Backend::PilotWave | Backend::ManyWorlds, ScaleKind::Macroscopic) => split_both(state),
        (Backend::Grw, _) => {
            let mut ensemble = whole;
            for side in [Side::Alice, Side::Bob] {
                if grw_localizes(scale, side, seed) {
                    ensemble = split_by_friend(&ensemble, side)?;
                }
            }
            Ok(ensemble)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BackendReports {
    pub pilot_wave: ChshReport,
    pub grw: ChshReport,
    pub many_worlds: ChshReport,
}

impl BackendReports {
    pub fn get(&self, backend: Backend) -> &ChshReport {
        match backend {
            Backend::PilotWave => &self.pilot_wave,
            Backend::Grw => &self.grw,
            Backend::ManyWorlds => &self.many_worlds,
        }
    }

    fn from_fn(mut f: impl FnMut(Backend) -> Result<ChshReport>) -> Result<Self> {
        Ok(Self {
            pilot_wave: f(Backend::PilotWave)?,
            grw: f(Backend::Grw)?,
            many_worlds: f(Backend::ManyWorlds)?,
        })
    }

    /// Largest pairwise difference of the three S values.
    pub fn s_spread(&self) -> f64 {
        let s = Backend::ALL.map(|b| self.get(b).s_value);
        let max = s.iter().copied().fold(f64::MIN, f64::max);
        let min = s.iter().copied().fold(f64::MAX, f64::min);
        max - min
    }
}

/// Tolerance for declaring the backends' exact S values equal.
pub const AGREEMENT_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AgreementReport {
    pub mode: ScaleKind,
    /// Exact reports.
    pub backends: BackendReports,
    pub all_equal: bool,
    pub sampled_backends: BackendReports,
}

/// Runs the CHSH experiment on the four-photon state under every backend.
pub fn agreement_report(
    state: &StateVector,
    scale: &FriendScale,
    shots: u64,
    seed: u64,
) -> Result<AgreementReport> {
    let ensembles: Vec<(Backend, Ensemble)> = Backend::ALL
        .into_iter()
        .map(|b| Ok((b, effective_ensemble(b, state, scale, seed)?)))
        .collect::<Result<_>>()?;
    let ensemble_of = |b: Backend| &ensembles.iter().find(|(x, _)| *x == b).unwrap().1;
    let backends = BackendReports::from_fn(|b| chsh_exact_mixture(ensemble_of(b)))?;
    let sampled_backends = BackendReports::from_fn(|b| {
        chsh_sampled_mixture(ensemble_of(b), shots, seed, Execution::Parallel)
    })?;
    Ok(AgreementReport {
        mode: scale.kind(),
        all_equal: backends.s_spread() <= AGREEMENT_TOLERANCE,
        backends,
        sampled_backends,
    })
}
