//! Deterministic pseudo-random number generator for reproducible runs.
//!
//! The generator is splitmix64: the state advances by the golden-gamma
//! constant and the output is a finalizer over the new state. It is tiny,
//! has no zero-seed pathology, and is trivial to re-implement, which is the
//! point: every simulation run is defined by its seed plus the documented
//! draw order, so an independent implementation can reproduce a run
//! bit-for-bit. Not cryptographically secure.
//!
//! Draw order contract (see the repository README for the full schedule):
//! uniform doubles come from the top 53 bits of `next_u64`, and ranges are
//! affine transforms `lo + (hi - lo) * next_f64()`.

/// splitmix64 sequence generator.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimRng {
    state: u64,
}

impl SimRng {
    pub const fn new(seed: u64) -> Self {
        SimRng { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in [0, 1), 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / 9_007_199_254_740_992.0)
    }

    /// Uniform in [lo, hi).
    pub fn next_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Uniform integer in [0, bound). Plain modulo; the tiny bias is
    /// irrelevant at the bounds used here and keeps the sequence easy to
    /// reproduce externally.
    pub fn next_below(&mut self, bound: u64) -> u64 {
        assert!(bound > 0, "bound must be positive");
        self.next_u64() % bound
    }
}
