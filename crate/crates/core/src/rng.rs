//! Deterministic random streams.
//!
//! A stream is a ChaCha8 generator keyed by a SplitMix64 hash of the user seed
//! and a tuple of stream coordinates (a domain tag plus indices such as the
//! CHSH setting pair or a trial-block number). Work split across threads draws
//! from coordinates fixed in advance, so results do not depend on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Domain tags keep streams for different purposes disjoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Domain {
    ChshSetting = 1,
    GrwTrials = 2,
    Collapse = 3,
    PilotWave = 4,
    GrwDecision = 5,
}

/// Folds the seed and coordinates into a 256-bit ChaCha key.
pub fn stream_key(seed: u64, domain: Domain, coords: &[u64]) -> [u8; 32] {
    let mut h = splitmix64(seed ^ splitmix64(domain as u64));
    for &c in coords {
        h = splitmix64(h ^ splitmix64(c.wrapping_add(GOLDEN_GAMMA)));
    }
    let mut key = [0u8; 32];
    let mut word = h;
    for chunk in key.chunks_exact_mut(8) {
        word = splitmix64(word);
        chunk.copy_from_slice(&word.to_le_bytes());
    }
    key
}

pub fn stream(seed: u64, domain: Domain, coords: &[u64]) -> StreamRng {
    ChaCha8Rng::from_seed(stream_key(seed, domain, coords))
}
