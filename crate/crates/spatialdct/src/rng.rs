//! Deterministic, parallelism-invariant random number streams.
//!
//! One master seed fans out into independent substreams keyed by integer
//! tags (role, trial, user, ...). Every consumer derives its own stream, so
//! results do not depend on scheduling order or worker count, and sweeps can
//! share common random numbers across estimator kinds.

use nalgebra::DVector;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

/// Substream role tags. Combined with trial/user/cell indices they key the
/// per-purpose streams.
pub mod role {
    pub const FADING: u64 = 0x01;
    pub const NOISE: u64 = 0x02;
    pub const PERTURB: u64 = 0x03;
    pub const GAMMA_PROBE: u64 = 0x04;
    pub const ADAPT_PROBE: u64 = 0x05;
    pub const ETA_PROBE: u64 = 0x06;
    pub const ALLOC: u64 = 0x07;
    pub const LAYOUT: u64 = 0x08;
}

#[inline]
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Factory deriving independent ChaCha12 streams from a master seed.
#[derive(Debug, Clone, Copy)]
pub struct RngFactory {
    master: u64,
}

impl RngFactory {
    pub fn new(master: u64) -> Self {
        Self { master }
    }

    pub fn master(&self) -> u64 {
        self.master
    }

    /// Derives the substream identified by `tags`. The same (master, tags)
    /// always yields the same stream.
    pub fn stream(&self, tags: &[u64]) -> ChaCha12Rng {
        let mut state = self.master ^ 0xA076_1D64_78BD_642F;
        let _ = splitmix64(&mut state);
        for &t in tags {
            state ^= t.wrapping_mul(0x9E37_79B9_7F4A_7C15);
            let _ = splitmix64(&mut state);
        }
        let mut seed = [0u8; 32];
        for chunk in seed.chunks_exact_mut(8) {
            chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
        }
        ChaCha12Rng::from_seed(seed)
    }
}

/// Draws one CN(0, 1) sample: Rayleigh modulus with uniform phase, so that
/// E[|z|^2] = 1 and real/imaginary parts are each N(0, 1/2).
#[inline]
pub fn complex_standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    // u in (0, 1] keeps the log finite.
    let u: f64 = 1.0 - rng.random::<f64>();
    let phase: f64 = rng.random::<f64>() * std::f64::consts::TAU;
    let r = (-u.ln()).sqrt();
    Complex64::new(r * phase.cos(), r * phase.sin())
}

/// Length-`n` vector with i.i.d. CN(0, 1) entries.
pub fn complex_gaussian_vector<R: Rng + ?Sized>(rng: &mut R, n: usize) -> DVector<Complex64> {
    DVector::from_fn(n, |_, _| complex_standard_normal(rng))
}
