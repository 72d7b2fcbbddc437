//! Authenticated classical channel between Alice and Bob used during
//! reconciliation.
//!
//! Bob drives the exchange; Alice only answers. Every message that reveals
//! information about the key (parity responses, verification parities) is
//! charged to a [`LeakAccountant`] as it crosses the channel.
//!
//! Wire format of one frame:
//!
//! ```text
//! +----------------+-----+-----------------+
//! | len: u32 (BE)  | tag | payload         |
//! +----------------+-----+-----------------+
//! ```
//!
//! `len` counts the tag byte plus the payload. Tags: `0x01` parity request,
//! `0x02` parity response, `0x03` permutation seed, `0x04` verification.

use alloc::collections::{BTreeMap, VecDeque};
use alloc::vec::Vec;
use core::fmt;

use crate::rng::{self, StreamRng};
use crate::Bits;

pub const TAG_PARITY_REQUEST: u8 = 0x01;
pub const TAG_PARITY_RESPONSE: u8 = 0x02;
pub const TAG_PERMUTATION_SEED: u8 = 0x03;
pub const TAG_VERIFICATION: u8 = 0x04;

/// Largest accepted value of the length prefix.
pub const MAX_FRAME_LEN: u32 = 64;

const VERIFY_REQUEST: u8 = 0x00;
const VERIFY_RESPONSE: u8 = 0x01;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Message {
    /// Parity of Alice's bits at permuted positions `start..end` of `pass`.
    ParityRequest { pass: u16, start: u32, end: u32 },
    ParityResponse { parity: bool },
    /// Seed of the permutation used by `pass`.
    PermutationSeed { pass: u16, seed: u64 },
    /// Ask for `count` random-subset parities derived from `seed`.
    VerificationRequest { seed: u64, count: u8 },
    /// Bit `k` of `parities` answers subset `k`.
    VerificationResponse { count: u8, parities: u64 },
}

impl Message {
    pub fn tag(&self) -> u8 {
        match self {
            Message::ParityRequest { .. } => TAG_PARITY_REQUEST,
            Message::ParityResponse { .. } => TAG_PARITY_RESPONSE,
            Message::PermutationSeed { .. } => TAG_PERMUTATION_SEED,
            Message::VerificationRequest { .. } | Message::VerificationResponse { .. } => TAG_VERIFICATION,
        }
    }

    /// Key bits revealed by this message.
    pub fn disclosed_bits(&self) -> u64 {
        match self {
            Message::ParityResponse { .. } => 1,
            Message::VerificationResponse { count, .. } => u64::from(*count),
            _ => 0,
        }
    }

    fn payload(&self, out: &mut Vec<u8>) {
        match *self {
            Message::ParityRequest { pass, start, end } => {
                out.extend_from_slice(&pass.to_be_bytes());
                out.extend_from_slice(&start.to_be_bytes());
                out.extend_from_slice(&end.to_be_bytes());
            }
            Message::ParityResponse { parity } => out.push(parity as u8),
            Message::PermutationSeed { pass, seed } => {
                out.extend_from_slice(&pass.to_be_bytes());
                out.extend_from_slice(&seed.to_be_bytes());
            }
            Message::VerificationRequest { seed, count } => {
                out.push(VERIFY_REQUEST);
                out.push(count);
                out.extend_from_slice(&seed.to_be_bytes());
            }
            Message::VerificationResponse { count, parities } => {
                out.push(VERIFY_RESPONSE);
                out.push(count);
                out.extend_from_slice(&parities.to_be_bytes());
            }
        }
    }

    /// Append the framed encoding to `out`.
    pub fn encode_into(&self, out: &mut Vec<u8>) {
        let len_at = out.len();
        out.extend_from_slice(&[0; 4]);
        out.push(self.tag());
        self.payload(out);
        let len = (out.len() - len_at - 4) as u32;
        out[len_at..len_at + 4].copy_from_slice(&len.to_be_bytes());
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16);
        self.encode_into(&mut out);
        out
    }

    /// Decode a tag and payload (the bytes after the length prefix).
    pub fn decode_body(body: &[u8]) -> Result<Self, FrameError> {
        let (&tag, p) = body.split_first().ok_or(FrameError::Empty)?;
        let be_u16 = |b: &[u8]| u16::from_be_bytes([b[0], b[1]]);
        let be_u32 = |b: &[u8]| u32::from_be_bytes([b[0], b[1], b[2], b[3]]);
        let be_u64 = |b: &[u8]| {
            let mut w = [0u8; 8];
            w.copy_from_slice(&b[..8]);
            u64::from_be_bytes(w)
        };
        let expect = |n: usize| if p.len() == n { Ok(()) } else { Err(FrameError::BadPayload(tag)) };
        match tag {
            TAG_PARITY_REQUEST => {
                expect(10)?;
                Ok(Message::ParityRequest { pass: be_u16(p), start: be_u32(&p[2..]), end: be_u32(&p[6..]) })
            }
            TAG_PARITY_RESPONSE => {
                expect(1)?;
                match p[0] {
                    0 | 1 => Ok(Message::ParityResponse { parity: p[0] == 1 }),
                    _ => Err(FrameError::BadPayload(tag)),
                }
            }
            TAG_PERMUTATION_SEED => {
                expect(10)?;
                Ok(Message::PermutationSeed { pass: be_u16(p), seed: be_u64(&p[2..]) })
            }
            TAG_VERIFICATION => {
                expect(10)?;
                let count = p[1];
                if count > 64 {
                    return Err(FrameError::BadPayload(tag));
                }
                match p[0] {
                    VERIFY_REQUEST => Ok(Message::VerificationRequest { seed: be_u64(&p[2..]), count }),
                    VERIFY_RESPONSE => Ok(Message::VerificationResponse { count, parities: be_u64(&p[2..]) }),
                    _ => Err(FrameError::BadPayload(tag)),
                }
            }
            other => Err(FrameError::UnknownTag(other)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrameError {
    Empty,
    TooLong(u32),
    UnknownTag(u8),
    BadPayload(u8),
}

impl fmt::Display for FrameError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FrameError::Empty => f.write_str("empty frame"),
            FrameError::TooLong(n) => write!(f, "frame length {n} exceeds {MAX_FRAME_LEN}"),
            FrameError::UnknownTag(t) => write!(f, "unknown message tag {t:#04x}"),
            FrameError::BadPayload(t) => write!(f, "malformed payload for tag {t:#04x}"),
        }
    }
}

/// Incremental frame decoder for byte streams.
#[derive(Debug, Default)]
pub struct FrameDecoder {
    buf: Vec<u8>,
}

impl FrameDecoder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, bytes: &[u8]) {
        self.buf.extend_from_slice(bytes);
    }

    /// Next complete message, `Ok(None)` if more bytes are needed.
    pub fn next_message(&mut self) -> Result<Option<Message>, FrameError> {
        if self.buf.len() < 4 {
            return Ok(None);
        }
        let len = u32::from_be_bytes([self.buf[0], self.buf[1], self.buf[2], self.buf[3]]);
        if len == 0 {
            return Err(FrameError::Empty);
        }
        if len > MAX_FRAME_LEN {
            return Err(FrameError::TooLong(len));
        }
        let total = 4 + len as usize;
        if self.buf.len() < total {
            return Ok(None);
        }
        let msg = Message::decode_body(&self.buf[4..total]);
        self.buf.drain(..total);
        msg.map(Some)
    }

    pub fn buffered(&self) -> usize {
        self.buf.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProtocolError {
    LengthMismatch,
    UnexpectedMessage(u8),
    UnknownPass(u16),
    BadRange,
    /// The final verification kept failing after the extra passes.
    ReconciliationFailed,
    Frame(FrameError),
    /// The underlying transport failed or closed.
    Transport,
}

impl fmt::Display for ProtocolError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProtocolError::LengthMismatch => f.write_str("key length mismatch"),
            ProtocolError::UnexpectedMessage(t) => write!(f, "unexpected message with tag {t:#04x}"),
            ProtocolError::UnknownPass(p) => write!(f, "parity requested for unknown pass {p}"),
            ProtocolError::BadRange => f.write_str("parity range out of bounds"),
            ProtocolError::ReconciliationFailed => f.write_str("keys still differ after verification"),
            ProtocolError::Frame(e) => write!(f, "framing: {e}"),
            ProtocolError::Transport => f.write_str("transport failure"),
        }
    }
}

impl From<FrameError> for ProtocolError {
    fn from(e: FrameError) -> Self {
        ProtocolError::Frame(e)
    }
}

/// Counts messages and disclosed key bits.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LeakAccountant {
    pub leaked_bits: u64,
    pub messages: u64,
}

impl LeakAccountant {
    pub fn record(&mut self, msg: &Message) {
        self.messages += 1;
        self.leaked_bits += msg.disclosed_bits();
    }
}

/// Ordered, reliable request/response link from Bob to Alice.
pub trait ClassicalChannel {
    /// Deliver `msg` to Alice and return her reply, if the message has one.
    fn exchange(&mut self, msg: Message) -> Result<Option<Message>, ProtocolError>;

    fn leak(&self) -> LeakAccountant;
}

/// Permutation of `0..n` shared by both parties through its seed.
pub fn permutation(n: usize, seed: u64) -> Vec<u32> {
    let mut p: Vec<u32> = (0..n as u32).collect();
    rng::shuffle(&mut p, &mut StreamRng::new(seed, rng::tag::PERMUTE));
    p
}

/// Parities of `count` pseudo-random subsets of `key`, packed into a word.
/// Bit `i` of the key belongs to subset `k` when bit `k` of its mask is set.
pub fn subset_parities(key: &[bool], seed: u64, count: u8) -> u64 {
    let mut masks = StreamRng::new(seed, rng::tag::VERIFY);
    let mut acc = 0u64;
    for &b in key {
        let m = rand_core::RngCore::next_u64(&mut masks);
        if b {
            acc ^= m;
        }
    }
    if count >= 64 {
        acc
    } else {
        acc & ((1u64 << count) - 1)
    }
}

/// Alice's side of reconciliation. Her key is never modified.
#[derive(Debug, Clone)]
pub struct AliceEndpoint {
    key: Bits,
    perms: BTreeMap<u16, Vec<u32>>,
}

impl AliceEndpoint {
    pub fn new(key: Bits) -> Self {
        Self { key, perms: BTreeMap::new() }
    }

    pub fn key(&self) -> &[bool] {
        &self.key
    }

    pub fn handle(&mut self, msg: Message) -> Result<Option<Message>, ProtocolError> {
        match msg {
            Message::PermutationSeed { pass, seed } => {
                self.perms.insert(pass, permutation(self.key.len(), seed));
                Ok(None)
            }
            Message::ParityRequest { pass, start, end } => {
                let perm = self.perms.get(&pass).ok_or(ProtocolError::UnknownPass(pass))?;
                let (s, e) = (start as usize, end as usize);
                if s >= e || e > perm.len() {
                    return Err(ProtocolError::BadRange);
                }
                let parity = perm[s..e].iter().fold(false, |acc, &i| acc ^ self.key[i as usize]);
                Ok(Some(Message::ParityResponse { parity }))
            }
            Message::VerificationRequest { seed, count } => Ok(Some(Message::VerificationResponse {
                count,
                parities: subset_parities(&self.key, seed, count),
            })),
            other => Err(ProtocolError::UnexpectedMessage(other.tag())),
        }
    }
}

/// In-process channel: a pair of message queues with Alice answering inline.
#[derive(Debug)]
pub struct LocalChannel {
    alice: AliceEndpoint,
    to_alice: VecDeque<Message>,
    to_bob: VecDeque<Message>,
    leak: LeakAccountant,
}

impl LocalChannel {
    pub fn new(alice: AliceEndpoint) -> Self {
        Self { alice, to_alice: VecDeque::new(), to_bob: VecDeque::new(), leak: LeakAccountant::default() }
    }

    pub fn alice(&self) -> &AliceEndpoint {
        &self.alice
    }

    fn pump(&mut self) -> Result<(), ProtocolError> {
        while let Some(msg) = self.to_alice.pop_front() {
            if let Some(reply) = self.alice.handle(msg)? {
                self.leak.record(&reply);
                self.to_bob.push_back(reply);
            }
        }
        Ok(())
    }
}

impl ClassicalChannel for LocalChannel {
    fn exchange(&mut self, msg: Message) -> Result<Option<Message>, ProtocolError> {
        self.leak.record(&msg);
        self.to_alice.push_back(msg);
        self.pump()?;
        Ok(self.to_bob.pop_front())
    }

    fn leak(&self) -> LeakAccountant {
        self.leak
    }
}
