//! Seeded randomness.
//!
//! All simulators draw from a ChaCha8 stream and turn uniforms into Gaussians
//! with the polar-free Box–Muller transform, so a seed fixes a trajectory
//! bit-for-bit on every platform with an IEEE-754 `ln`/`sin`/`cos`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type SimRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Child seed for a named pipeline stage: the first eight bytes (little
/// endian) of `SHA-256(seed.to_le_bytes() ‖ stage)`.
pub fn child_seed(seed: u64, stage: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(stage.as_bytes());
    let digest = h.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

/// Two independent `N(0, 1)` draws from two uniforms (Box–Muller).
///
/// `u1` is taken from `(0, 1]` so the logarithm is finite.
pub fn normal_pair<R: Rng + ?Sized>(rng: &mut R) -> (f64, f64) {
    let u1 = 1.0 - rng.random::<f64>();
    let u2 = rng.random::<f64>();
    let radius = (-2.0 * u1.ln()).sqrt();
    let angle = std::f64::consts::TAU * u2;
    (radius * angle.cos(), radius * angle.sin())
}

/// One `N(0, 1)` draw; consumes a full Box–Muller pair.
pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    normal_pair(rng).0
}

/// `n` standard normals, consuming `ceil(n / 2)` pairs.
pub fn normals<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    while out.len() < n {
        let (a, b) = normal_pair(rng);
        out.push(a);
        out.push(b);
    }
    out.truncate(n);
    out
}

/// Uniform draw from `[lo, hi)`.
pub fn uniform<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}
