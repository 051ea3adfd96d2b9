//! Counter-based random numbers keyed by (seed, stream, sample index,
//! draw counter). Every draw is a pure function of its coordinates, so
//! partitioning work across threads cannot change a single bit of any
//! estimate.

/// Finalizer with full avalanche (Stafford's variant 13 of the
/// SplitMix64 mixer).
#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;
const INDEX_MULT: u64 = 0xd6e8_feb8_6659_fd93;
const COUNTER_MULT: u64 = 0xca58_5fa9_dc69_a5c9;

/// A keyed counter generator. `stream` separates logical substreams
/// (e.g. one per orbit length n); `index` is typically the sample index.
#[derive(Debug, Clone, Copy)]
pub struct CounterRng {
    key: u64,
}

impl CounterRng {
    pub fn new(seed: u64, stream: u64) -> CounterRng {
        CounterRng {
            key: mix64(seed ^ mix64(stream.wrapping_add(GOLDEN))),
        }
    }

    /// One word at (index, counter).
    #[inline]
    pub fn draw_at(&self, index: u64, counter: u64) -> u64 {
        mix64(mix64(self.key ^ index.wrapping_mul(INDEX_MULT)) ^ counter.wrapping_mul(COUNTER_MULT))
    }

    /// One word at (index, 0).
    #[inline]
    pub fn draw(&self, index: u64) -> u64 {
        self.draw_at(index, 0)
    }

    /// Uniform double strictly inside (0,1): 53 significant bits, offset
    /// half an ulp so neither endpoint can occur.
    #[inline]
    pub fn uniform_open01_at(&self, index: u64, counter: u64) -> f64 {
        let u = self.draw_at(index, counter) >> 11;
        (u as f64 + 0.5) * (1.0 / 9_007_199_254_740_992.0)
    }

    #[inline]
    pub fn uniform_open01(&self, index: u64) -> f64 {
        self.uniform_open01_at(index, 0)
    }

    /// Standard normal pair via Box–Muller from counters (c, c+1).
    pub fn normal_pair_at(&self, index: u64, counter: u64) -> (f64, f64) {
        let u1 = self.uniform_open01_at(index, counter);
        let u2 = self.uniform_open01_at(index, counter + 1);
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * u2;
        (r * theta.cos(), r * theta.sin())
    }

    pub fn normal_at(&self, index: u64, counter: u64) -> f64 {
        self.normal_pair_at(index, counter).0
    }

    /// Fill `out` with words at consecutive counters starting from
    /// `counter_base` (used for high-precision dyadic seeds).
    pub fn fill_words(&self, index: u64, counter_base: u64, out: &mut [u64]) {
        for (i, w) in out.iter_mut().enumerate() {
            *w = self.draw_at(index, counter_base + i as u64);
        }
    }
}
