//! Simulation of the extended Wigner's-friend (Bell-Wigner) experiment.
//!
//! Two labs, Alice's and Bob's, each hold a photon and a "friend" that records
//! its polarization. Friend-level observables `A0`, `B0` read the records;
//! Wigner-level observables `A1`, `B1` measure the photon-friend pair in a
//! superposition basis. The crate computes the CHSH combination of these four
//! observables exactly and by seeded sampling, bounds it classically by
//! enumeration, and replays the experiment under three accounts of what the
//! friend's measurement does.
//!
//! ```
//! use bellwigner::{chsh, states};
//!
//! let report = chsh::chsh_exact(&states::bell_wigner_state()).unwrap();
//! assert!((report.s_value - 2.0 * 2f64.sqrt()).abs() < 1e-12);
//! assert_eq!(chsh::classical_max(), 2.0);
//! ```
//!
//! The accompanying guide lives in `book/`; its code listings are compiled and
//! run as doc-tests of this crate.

#![forbid(unsafe_code)]

pub mod chsh;
pub mod error;
pub mod interpretations;
pub mod linalg;
pub mod observables;
pub mod rng;
pub mod states;

pub use error::{Error, Result};

// mdbook cannot run listings against a crate, so every chapter is pulled in
// here and `cargo test --doc` runs them.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/states.md")]
    mod states {}
    #[doc = include_str!("../../../book/src/observables.md")]
    mod observables {}
    #[doc = include_str!("../../../book/src/chsh.md")]
    mod chsh {}
    #[doc = include_str!("../../../book/src/sampling.md")]
    mod sampling {}
    #[doc = include_str!("../../../book/src/interpretations.md")]
    mod interpretations {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
