//! Pinned pseudo-random source.
//!
//! Every random quantity in the crate (tensor fills, scene noise, frame
//! offsets, attention weights, probe directions) comes from [`SeededRng`],
//! so results are bit-reproducible for a given seed on any platform:
//!
//! * generator: xoshiro256++ whose four state words are the first four
//!   outputs of SplitMix64 started at the 64-bit seed;
//! * `uniform()`: `(next_u64() >> 11) * 2^-53`, a double in `[0, 1)`;
//! * `uniform_in(lo, hi)`: `lo + (hi - lo) * uniform()`;
//! * `below(n)`: `x % n` for the first draw `x` with
//!   `x - x % n <= u64::MAX - (n - 1)` (rejection, exactly uniform);
//! * `normal()`: Box-Muller cosine branch,
//!   `sqrt(-2 ln(1 - u1)) * cos(2 pi u2)` with two consecutive uniforms;
//!   the sine branch is discarded.

use rand_core::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

const INV_2_POW_53: f64 = 1.0 / (1u64 << 53) as f64;

#[derive(Debug, Clone)]
pub struct SeededRng {
    inner: Xoshiro256PlusPlus,
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        Self {
            inner: Xoshiro256PlusPlus::seed_from_u64(seed),
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * INV_2_POW_53
    }

    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Uniform integer in `[0, n)`. `n` must be nonzero.
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "below(0)");
        loop {
            let x = self.next_u64();
            let r = x % n;
            if x - r <= u64::MAX - (n - 1) {
                return r;
            }
        }
    }

    pub fn normal(&mut self) -> f64 {
        let u1 = self.uniform();
        let u2 = self.uniform();
        (-2.0 * (1.0 - u1).ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_stays_in_unit_interval() {
        let mut rng = SeededRng::new(3);
        for _ in 0..10_000 {
            let u = rng.uniform();
            assert!((0.0..1.0).contains(&u));
        }
    }

    #[test]
    fn below_one_is_zero() {
        let mut rng = SeededRng::new(11);
        assert!((0..100).all(|_| rng.below(1) == 0));
    }

    #[test]
    fn normal_moments_are_plausible() {
        let mut rng = SeededRng::new(99);
        let n = 200_000;
        let xs: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 0.01, "mean {mean}");
        assert!((var - 1.0).abs() < 0.02, "var {var}");
    }
}
