//! Small shared helpers: deterministic RNG streams and reproducible sums.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// Splitmix64 step; used to derive independent stream keys from one run seed.
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Deterministic, platform-independent RNG for the stream identified by
/// `(seed, label, index)`. Identical arguments give identical streams, so all
/// randomness can be pre-drawn and replayed regardless of scheduling.
pub fn stream_rng(seed: u64, label: &str, index: u64) -> ChaCha12Rng {
    let mut state = seed;
    for byte in label.bytes() {
        state ^= u64::from(byte).wrapping_mul(0xff51afd7ed558ccd);
        splitmix64(&mut state);
    }
    state ^= index.wrapping_mul(0xc4ceb9fe1a85ec53);
    let mut key = [0u8; 32];
    for chunk in key.chunks_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha12Rng::from_seed(key)
}

/// Tail of the power sum, `sum_{j > s} j^(-x)` for `x > 1`: direct terms up
/// to `s + 200`, then an Euler-Maclaurin remainder. Relative accuracy is far
/// below 1e-12 over the exponents used here (x >= 1.001).
pub fn pow_tail(x: f64, s: u64) -> f64 {
    assert!(x > 1.0, "power-sum tail diverges for x <= 1");
    let cut = s + 200;
    let mut acc = 0.0;
    for j in (s + 1)..=cut {
        acc += (j as f64).powf(-x);
    }
    let a = (cut + 1) as f64;
    // integral + trapezoid + two Bernoulli corrections at t = a
    acc += a.powf(1.0 - x) / (x - 1.0);
    acc += 0.5 * a.powf(-x);
    acc += x * a.powf(-x - 1.0) / 12.0;
    acc -= x * (x + 1.0) * (x + 2.0) * a.powf(-x - 3.0) / 720.0;
    acc
}

/// Riemann zeta for real argument `x > 1` via the same Euler-Maclaurin route.
pub fn zeta(x: f64) -> f64 {
    1.0 + pow_tail(x, 1)
}

/// Pairwise summation; fixed association order makes parallel-free reductions
/// bit-reproducible and keeps rounding error at O(log n).
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        2 => xs[0] + xs[1],
        n => {
            let mid = n / 2;
            pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
        }
    }
}
