//! Privacy amplification with a seeded Toeplitz hash over GF(2).
//!
//! For an `n`-bit input and `m`-bit output the hash matrix is
//! `T[i][j] = t[i - j + n - 1]` for a random string `t` of `n + m - 1` bits.

use alloc::vec;
use alloc::vec::Vec;

use libm::floor;
use rand_core::RngCore;

use crate::rng::{self, StreamRng};
use crate::{Bits, Error};

/// Secret-key fraction of the reconciled key used by default.
pub const DEFAULT_EXTRACTION_RATIO: f64 = 0.11;

fn pack(bits: impl ExactSizeIterator<Item = bool>) -> Vec<u64> {
    let mut words = vec![0u64; bits.len().div_ceil(64) + 1];
    for (k, b) in bits.enumerate() {
        if b {
            words[k / 64] |= 1 << (k % 64);
        }
    }
    words
}

/// Toeplitz hash of `input` down to `out_len` bits; `seed` selects the matrix.
pub fn toeplitz_hash(input: &[bool], out_len: usize, seed: u64) -> Bits {
    let n = input.len();
    if n == 0 || out_len == 0 {
        return Vec::new();
    }
    let mut source = StreamRng::new(seed, rng::tag::TOEPLITZ);
    let diag_len = n + out_len - 1;
    let mut diag = vec![0u64; diag_len.div_ceil(64) + 1];
    for w in diag.iter_mut().take(diag_len.div_ceil(64)) {
        *w = source.next_u64();
    }
    if !diag_len.is_multiple_of(64) {
        diag[diag_len / 64] &= (1u64 << (diag_len % 64)) - 1;
    }
    // out_i = XOR_k t[i + k] · x[n - 1 - k]
    let reversed = pack(input.iter().rev().copied());
    let n_words = n.div_ceil(64);
    let tail_mask = if n.is_multiple_of(64) { u64::MAX } else { (1u64 << (n % 64)) - 1 };

    (0..out_len)
        .map(|i| {
            let (base, shift) = (i / 64, (i % 64) as u32);
            let mut acc = 0u64;
            for w in 0..n_words {
                let lo = diag[base + w];
                let hi = diag[base + w + 1];
                let mut window = if shift == 0 { lo } else { (lo >> shift) | (hi << (64 - shift)) };
                if w + 1 == n_words {
                    window &= tail_mask;
                }
                acc ^= window & reversed[w];
            }
            acc.count_ones() & 1 == 1
        })
        .collect()
}

/// Output length `floor(extraction_ratio · n)`.
pub fn secret_length(reconciled_len: usize, extraction_ratio: f64) -> Result<usize, Error> {
    if !(0.0..=1.0).contains(&extraction_ratio) {
        return Err(Error::InvalidParameter("extraction ratio must be in [0, 1]"));
    }
    Ok((floor(extraction_ratio * reconciled_len as f64) as usize).min(reconciled_len))
}

/// Compress the reconciled key to its secret part.
pub fn privacy_amplify<R: RngCore + ?Sized>(reconciled: &[bool], extraction_ratio: f64, rng: &mut R) -> Result<Bits, Error> {
    let len = secret_length(reconciled.len(), extraction_ratio)?;
    Ok(toeplitz_hash(reconciled, len, rng.next_u64()))
}
