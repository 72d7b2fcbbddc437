//! Counter-based random streams.
//!
//! A [`StreamRng`] is fully determined by `(seed, stream, index)`. Photon
//! histories and other independent work items each get their own substream,
//! so results do not depend on how the work is split across threads.

use rand_core::{impls, RngCore};

/// Stream tags keeping the different consumers of a seed apart.
pub mod tag {
    pub const PHOTON: u64 = 0x5048_4f54;
    pub const ALICE: u64 = 0x414c_4943;
    pub const BOB: u64 = 0x424f_4220;
    pub const DETECT: u64 = 0x4445_5443;
    pub const SIFT: u64 = 0x5349_4654;
    pub const CASCADE: u64 = 0x4341_5343;
    pub const PERMUTE: u64 = 0x5045_524d;
    pub const VERIFY: u64 = 0x5645_5246;
    pub const TOEPLITZ: u64 = 0x544f_4550;
    pub const SAMPLE: u64 = 0x534d_504c;
}

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Weyl-sequence generator keyed by a mixed `(seed, stream, index)` triple.
#[derive(Debug, Clone)]
pub struct StreamRng {
    key: u64,
    counter: u64,
}

impl StreamRng {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self::substream(seed, stream, 0)
    }

    pub fn substream(seed: u64, stream: u64, index: u64) -> Self {
        let key = mix64(seed ^ mix64(stream.wrapping_add(GOLDEN_GAMMA) ^ mix64(index)));
        Self {
            key: key | 1,
            counter: mix64(key ^ 0xd134_2543_de82_ef95),
        }
    }

    /// Derive a seed for a child component without consuming this stream.
    pub fn derive_seed(seed: u64, stream: u64, index: u64) -> u64 {
        Self::substream(seed, stream, index).next_u64()
    }
}

impl RngCore for StreamRng {
    fn next_u32(&mut self) -> u32 {
        (self.next_u64() >> 32) as u32
    }

    fn next_u64(&mut self) -> u64 {
        self.counter = self.counter.wrapping_add(self.key.wrapping_mul(GOLDEN_GAMMA) | 1);
        mix64(self.counter)
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        impls::fill_bytes_via_next(self, dst)
    }
}

/// Uniform on `[0, 1)` with 53 bits of resolution.
#[inline]
pub fn uniform<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform on `(0, 1]`.
#[inline]
pub fn uniform_open_zero<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    1.0 - uniform(rng)
}

#[inline]
pub fn bit<R: RngCore + ?Sized>(rng: &mut R) -> bool {
    rng.next_u32() & 1 == 1
}

/// Uniform integer in `[0, bound)` by rejection; `bound` must be nonzero.
pub fn below<R: RngCore + ?Sized>(rng: &mut R, bound: u64) -> u64 {
    debug_assert!(bound > 0);
    let zone = u64::MAX - (u64::MAX % bound);
    loop {
        let x = rng.next_u64();
        if x < zone {
            return x % bound;
        }
    }
}

/// Standard normal deviate (Box–Muller, one value per call).
pub fn standard_normal<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    let u1 = uniform_open_zero(rng);
    let u2 = uniform(rng);
    libm::sqrt(-2.0 * libm::log(u1)) * libm::cos(core::f64::consts::TAU * u2)
}

/// Fisher–Yates shuffle driven by `rng`.
pub fn shuffle<T, R: RngCore + ?Sized>(items: &mut [T], rng: &mut R) {
    for i in (1..items.len()).rev() {
        let j = below(rng, i as u64 + 1) as usize;
        items.swap(i, j);
    }
}
