//! Deterministic random number generation.
//!
//! Everything stochastic in this crate (population initialization, mutation,
//! residual waypoint sampling) draws from this splitmix64 stream so that runs
//! are reproducible bit-for-bit from a 64-bit seed, independent of platform
//! and worker count. The generator is trivially reimplementable in other
//! languages, which the cross-implementation tests rely on.

const GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn mix(mut z: u64) -> u64 {
    z ^= z >> 30;
    z = z.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z ^= z >> 27;
    z = z.wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Clone, Debug)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    /// Derives an independent stream from a pair of seeds. Used to key the
    /// per-genotype residual sampler on (global_seed, genotype_seed).
    pub fn keyed(a: u64, b: u64) -> Self {
        SplitMix64 {
            state: mix(a.wrapping_add(GAMMA)) ^ mix(b.wrapping_add(GAMMA).wrapping_mul(3)),
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GAMMA);
        mix(self.state)
    }

    /// Uniform in [0, 1), 53 bits of precision.
    pub fn uniform01(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform01()
    }

    /// Uniform integer in [0, n).
    pub fn uniform_usize(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        // Rejection-free modulo is fine here: n is always tiny relative to 2^64.
        (self.next_u64() % n as u64) as usize
    }

    /// Uniformly distributed point on the unit sphere.
    pub fn unit_vector(&mut self) -> [f64; 3] {
        let u = self.uniform(-1.0, 1.0);
        let phi = self.uniform(0.0, std::f64::consts::TAU);
        let r = (1.0 - u * u).max(0.0).sqrt();
        [r * phi.cos(), r * phi.sin(), u]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_stream() {
        let mut a = SplitMix64::new(42);
        let mut b = SplitMix64::new(42);
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn keyed_streams_differ() {
        let mut a = SplitMix64::keyed(1, 2);
        let mut b = SplitMix64::keyed(2, 1);
        assert_ne!(a.next_u64(), b.next_u64());
    }

    #[test]
    fn uniform01_in_range() {
        let mut rng = SplitMix64::new(7);
        for _ in 0..10_000 {
            let u = rng.uniform01();
            assert!((0.0..1.0).contains(&u));
        }
    }

    #[test]
    fn unit_vector_is_unit() {
        let mut rng = SplitMix64::new(9);
        for _ in 0..1000 {
            let v = rng.unit_vector();
            let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
            assert!((n - 1.0).abs() < 1e-12);
        }
    }
}
