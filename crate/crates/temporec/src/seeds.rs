//! Hierarchical seed derivation.
//!
//! Every random stage of a run derives its own stream from the root seed,
//! so changing how many draws one stage makes never perturbs another.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// splitmix64 finalizer, used as a cheap seed mixer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Derive a child seed from a root seed, a stage label, and an index.
pub fn derive(root: u64, stage: &str, index: u64) -> u64 {
    let mut h = mix(root);
    for b in stage.as_bytes() {
        h = mix(h ^ u64::from(*b));
    }
    mix(h ^ index)
}

/// Seeded RNG for one (stage, index) pair.
pub fn rng(root: u64, stage: &str, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(root, stage, index))
}

/// Standard-normal draw via Box-Muller; two uniforms per call.
pub fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    use rand::Rng;
    let mut u1: f64 = rng.gen();
    while u1 <= f64::MIN_POSITIVE {
        u1 = rng.gen();
    }
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}
