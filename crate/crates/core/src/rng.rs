//! Seeded SplitMix64 stream and unbiased bounded draws.
//!
//! The whole pipeline draws randomness from this one generator so that key
//! streams, permutations and k-means seeding reproduce bit for bit on every
//! platform.

const GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Advances `state` and returns `(new_state, output)`.
#[inline]
pub fn splitmix64_next(state: u64) -> (u64, u64) {
    let state = state.wrapping_add(GAMMA);
    (state, mix(state))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn state(&self) -> u64 {
        self.state
    }

    /// The `index`-th output (0-based) of a stream seeded with `seed`,
    /// without stepping through the earlier ones.
    pub fn nth_output(seed: u64, index: u64) -> u64 {
        mix(seed.wrapping_add(GAMMA.wrapping_mul(index.wrapping_add(1))))
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        let (state, out) = splitmix64_next(self.state);
        self.state = state;
        out
    }

    /// Uniform integer in `[0, n)` by rejection: 64-bit words at or above
    /// `floor(2^64 / n) * n` are discarded.
    ///
    /// Panics if `n` is zero or does not fit in 63 bits.
    pub fn bounded_uniform(&mut self, n: u64) -> u64 {
        assert!((1..1 << 63).contains(&n), "bound {n} out of range");
        let zone = (1u128 << 64) / u128::from(n) * u128::from(n);
        loop {
            let x = self.next_u64();
            if u128::from(x) < zone {
                return x % n;
            }
        }
    }

    /// Uniform `f64` in `[0, 1)` from the top 53 bits of one draw.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}
