//! Seeded, splittable pseudo-random numbers for reproducible fixtures.
//!
//! The generator is SplitMix64 driven by a counter: the k-th output is a pure
//! function of `(seed, k)`, so fixtures regenerate identically from the seed
//! alone, on any platform, in any iteration order. Child streams are derived
//! by mixing a stream tag into the seed (`split`), which keeps independent
//! consumers (weights, coordinates, per-cube scalars) decoupled.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// SplitMix64 counter generator.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    /// Derive an independent stream for `tag`.
    pub fn split(&self, tag: u64) -> SplitMix64 {
        SplitMix64::new(mix(self.state ^ tag.wrapping_mul(GOLDEN)))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN);
        mix(self.state)
    }

    /// Uniform in `[0, 1)` with 53 random bits.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[lo, hi)`.
    pub fn next_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }
}

/// Stateless value for `(seed, key)`; used where per-item determinism must not
/// depend on enumeration order (e.g. per-cube scalars).
pub fn keyed_unit(seed: u64, key: u64) -> f64 {
    (mix(seed ^ key.wrapping_mul(GOLDEN)) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}
