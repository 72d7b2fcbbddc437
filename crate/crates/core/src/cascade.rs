//! CASCADE information reconciliation (Bob's side).
//!
//! Pass `i` shuffles the key with a fresh shared permutation and splits it
//! into blocks of `k1 · 2^i` bits, `k1 = ceil(0.73 / qber)`. Blocks whose
//! parity disagrees with Alice's are bisected to find and flip one error.
//! Every flip toggles the parity of the blocks containing that bit in all
//! earlier passes, which may expose further errors; these are corrected
//! until no odd block remains. A final check compares random-subset
//! parities; if it fails, extra passes with the first-pass block size run
//! before checking again.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;

use libm::ceil;
use rand_core::RngCore;
use serde::{Deserialize, Serialize};

use crate::channel::{permutation, subset_parities, AliceEndpoint, ClassicalChannel, LocalChannel, Message, ProtocolError};
use crate::{Bits, Error};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CascadeParams {
    pub passes: usize,
    /// `k1 = ceil(first_block_factor / qber)`.
    pub first_block_factor: f64,
    /// Random-subset parities compared after the passes; 0 disables the check.
    pub verification_parities: u8,
    /// Passes of size `k1` added, one at a time, while the verification fails.
    pub max_extra_passes: usize,
}

impl Default for CascadeParams {
    fn default() -> Self {
        Self { passes: 4, first_block_factor: 0.73, verification_parities: 64, max_extra_passes: 4 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CascadeOutcome {
    pub reconciled: Bits,
    pub leaked_bits: u64,
    pub corrected_bits: usize,
    pub passes_run: usize,
}

pub const MIN_KEY_LEN: usize = 16;

/// First-pass block size for a QBER estimate, clamped to the key length.
pub fn first_block_size(qber_estimate: f64, factor: f64, key_len: usize) -> usize {
    (ceil(factor / qber_estimate) as usize).clamp(1, key_len.max(1))
}

struct Pass {
    perm: Vec<u32>,
    /// Position of each key index inside `perm`.
    position: Vec<u32>,
    block: usize,
}

impl Pass {
    fn block_range(&self, b: usize) -> (usize, usize) {
        let start = b * self.block;
        (start, (start + self.block).min(self.perm.len()))
    }

    fn block_of(&self, key_index: usize) -> usize {
        self.position[key_index] as usize / self.block
    }

    fn n_blocks(&self) -> usize {
        self.perm.len().div_ceil(self.block)
    }
}

struct Bob<'a, C: ClassicalChannel> {
    key: Bits,
    chan: &'a mut C,
    passes: Vec<Pass>,
    /// Alice's parities already disclosed, keyed by `(pass, start, end)`.
    alice_parity: BTreeMap<(u16, u32, u32), bool>,
    odd: BTreeSet<(usize, usize)>,
    corrected: usize,
}

impl<C: ClassicalChannel> Bob<'_, C> {
    fn alice_range_parity(&mut self, pass: usize, start: usize, end: usize) -> Result<bool, ProtocolError> {
        let key = (pass as u16, start as u32, end as u32);
        if let Some(&p) = self.alice_parity.get(&key) {
            return Ok(p);
        }
        let reply = self.chan.exchange(Message::ParityRequest { pass: key.0, start: key.1, end: key.2 })?;
        match reply {
            Some(Message::ParityResponse { parity }) => {
                self.alice_parity.insert(key, parity);
                Ok(parity)
            }
            Some(other) => Err(ProtocolError::UnexpectedMessage(other.tag())),
            None => Err(ProtocolError::Transport),
        }
    }

    fn own_parity(&self, pass: usize, start: usize, end: usize) -> bool {
        self.passes[pass].perm[start..end].iter().fold(false, |acc, &i| acc ^ self.key[i as usize])
    }

    fn start_pass(&mut self, block: usize, rng: &mut dyn RngCore) -> Result<(), ProtocolError> {
        let idx = self.passes.len();
        let seed = rng.next_u64();
        self.chan.exchange(Message::PermutationSeed { pass: idx as u16, seed })?;
        let perm = permutation(self.key.len(), seed);
        let mut position = alloc::vec![0u32; perm.len()];
        for (pos, &k) in perm.iter().enumerate() {
            position[k as usize] = pos as u32;
        }
        self.passes.push(Pass { perm, position, block });
        for b in 0..self.passes[idx].n_blocks() {
            let (s, e) = self.passes[idx].block_range(b);
            if self.alice_range_parity(idx, s, e)? != self.own_parity(idx, s, e) {
                self.odd.insert((idx, b));
            }
        }
        self.resolve_odd_blocks()
    }

    /// Bisect an odd block down to one bit and flip it.
    fn bisect(&mut self, pass: usize, block: usize) -> Result<usize, ProtocolError> {
        let (mut start, mut end) = self.passes[pass].block_range(block);
        while end - start > 1 {
            let mid = start + (end - start) / 2;
            if self.alice_range_parity(pass, start, mid)? != self.own_parity(pass, start, mid) {
                end = mid;
            } else {
                start = mid;
            }
        }
        let index = self.passes[pass].perm[start] as usize;
        self.key[index] ^= true;
        self.corrected += 1;
        Ok(index)
    }

    fn resolve_odd_blocks(&mut self) -> Result<(), ProtocolError> {
        while let Some((pass, block)) = self.odd.pop_first() {
            let flipped = self.bisect(pass, block)?;
            for other in 0..self.passes.len() {
                if other == pass {
                    continue;
                }
                let b = self.passes[other].block_of(flipped);
                if !self.odd.remove(&(other, b)) {
                    self.odd.insert((other, b));
                }
            }
        }
        Ok(())
    }

    fn verify(&mut self, count: u8, rng: &mut dyn RngCore) -> Result<bool, ProtocolError> {
        if count == 0 {
            return Ok(true);
        }
        let seed = rng.next_u64();
        match self.chan.exchange(Message::VerificationRequest { seed, count })? {
            Some(Message::VerificationResponse { parities, .. }) => Ok(parities == subset_parities(&self.key, seed, count)),
            Some(other) => Err(ProtocolError::UnexpectedMessage(other.tag())),
            None => Err(ProtocolError::Transport),
        }
    }
}

/// Reconcile `bob_key` against Alice's key on the far side of `chan`.
pub fn reconcile<C: ClassicalChannel, R: RngCore>(
    bob_key: &[bool],
    qber_estimate: f64,
    chan: &mut C,
    params: &CascadeParams,
    rng: &mut R,
) -> Result<CascadeOutcome, Error> {
    if bob_key.len() < MIN_KEY_LEN {
        return Err(Error::InvalidParameter("CASCADE needs at least 16 key bits"));
    }
    if !(qber_estimate > 0.0 && qber_estimate < 0.5) {
        return Err(Error::InvalidParameter("QBER estimate must be in (0, 0.5)"));
    }
    if params.passes == 0 {
        return Err(Error::InvalidParameter("CASCADE needs at least one pass"));
    }
    let n = bob_key.len();
    let leak_before = chan.leak().leaked_bits;
    let mut bob = Bob {
        key: bob_key.to_vec(),
        chan,
        passes: Vec::new(),
        alice_parity: BTreeMap::new(),
        odd: BTreeSet::new(),
        corrected: 0,
    };
    let k1 = first_block_size(qber_estimate, params.first_block_factor, n);
    let mut block = k1;
    for _ in 0..params.passes {
        bob.start_pass(block, rng)?;
        block = (block * 2).min(n);
    }
    let mut extra = 0;
    while !bob.verify(params.verification_parities, rng)? {
        if extra == params.max_extra_passes {
            return Err(ProtocolError::ReconciliationFailed.into());
        }
        bob.start_pass(k1, rng)?;
        extra += 1;
    }
    let leaked_bits = bob.chan.leak().leaked_bits - leak_before;
    Ok(CascadeOutcome {
        passes_run: bob.passes.len(),
        corrected_bits: bob.corrected,
        reconciled: bob.key,
        leaked_bits,
    })
}

/// In-process reconciliation with Alice behind a [`LocalChannel`].
pub fn cascade_reconcile<R: RngCore>(
    alice_key: &[bool],
    bob_key: &[bool],
    qber_estimate: f64,
    params: &CascadeParams,
    rng: &mut R,
) -> Result<CascadeOutcome, Error> {
    if alice_key.len() != bob_key.len() {
        return Err(ProtocolError::LengthMismatch.into());
    }
    let mut chan = LocalChannel::new(AliceEndpoint::new(alice_key.to_vec()));
    reconcile(bob_key, qber_estimate, &mut chan, params, rng)
}

/// Binary entropy `h₂(p)` in bits.
pub fn binary_entropy(p: f64) -> f64 {
    if p <= 0.0 || p >= 1.0 {
        return 0.0;
    }
    -p * libm::log2(p) - (1.0 - p) * libm::log2(1.0 - p)
}
