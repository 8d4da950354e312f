//! Labeled random streams.
//!
//! Every consumer of randomness asks for a stream by `(root seed, label)`.
//! The derived seed depends only on those two values, so the order in which
//! links, batches or realizations are generated never changes the numbers
//! they see.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// The generator behind every stream.
pub type Stream = ChaCha8Rng;

fn fnv1a(label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of the stream `label` under `root`.
pub fn derive_seed(root: u64, label: &str) -> u64 {
    splitmix64(splitmix64(root) ^ fnv1a(label))
}

/// Independent stream for `label`.
pub fn stream(root: u64, label: &str) -> Stream {
    ChaCha8Rng::seed_from_u64(derive_seed(root, label))
}

/// One draw from the standard circular complex Gaussian CN(0, 1).
#[inline]
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Uniform phase in `[0, 2π)`.
#[inline]
pub fn uniform_phase<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.random::<f64>() * std::f64::consts::TAU
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels_separate_streams() {
        assert_ne!(derive_seed(7, "link/ai"), derive_seed(7, "link/is"));
        assert_ne!(derive_seed(7, "link/ai"), derive_seed(8, "link/ai"));
        assert_eq!(derive_seed(7, "link/ai"), derive_seed(7, "link/ai"));
    }

    #[test]
    fn complex_normal_has_unit_power() {
        let mut rng = stream(1, "t");
        let n = 200_000;
        let p: f64 = (0..n).map(|_| complex_normal(&mut rng).norm_sqr()).sum::<f64>() / n as f64;
        assert!((p - 1.0).abs() < 0.01, "{p}");
    }
}
