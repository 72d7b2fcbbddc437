//! BB84 session engine: preparation, lossy channel and detection, sifting,
//! QBER, CASCADE and privacy amplification.
//!
//! Detection model: Bob's passive beam splitter picks a basis per pulse and a
//! polarizing beam splitter feeds two detectors. The Poissonian source is
//! folded into the per-arm click probability `1 - exp(-μ T η p_arm)`, where
//! `p_arm` is the Malus projection of the channel output onto the arm's
//! analyzer, blurred by the optical error floor. Dark counts and background
//! light add independently per detector. Double clicks get a random bit.

use alloc::vec::Vec;

use libm::exp;
use rand_core::RngCore;
use serde::{Deserialize, Serialize};

use crate::cascade::{cascade_reconcile, CascadeParams};
use crate::polarization::{MuellerMatrix, StokesVector};
use crate::privacy::{privacy_amplify, DEFAULT_EXTRACTION_RATIO};
use crate::rng::{self, tag, StreamRng};
use crate::{Bits, Error};

/// Sessions with fewer sifted bits are aborted.
pub const MIN_SIFTED_BITS: usize = 256;

/// Range the QBER estimate handed to CASCADE is clamped to.
pub const CASCADE_QBER_RANGE: (f64, f64) = (1e-3, 0.49);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Basis {
    Rectilinear,
    Diagonal,
}

impl Basis {
    fn from_bit(b: bool) -> Self {
        if b {
            Basis::Diagonal
        } else {
            Basis::Rectilinear
        }
    }
}

/// Polarization state for `bit` in `basis`: H/V or +45°/−45°.
pub fn encode_state(bit: bool, basis: Basis) -> StokesVector {
    match (basis, bit) {
        (Basis::Rectilinear, false) => StokesVector::HORIZONTAL,
        (Basis::Rectilinear, true) => StokesVector::VERTICAL,
        (Basis::Diagonal, false) => StokesVector::DIAGONAL,
        (Basis::Diagonal, true) => StokesVector::ANTIDIAGONAL,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaggedBit {
    pub bit: bool,
    pub basis: Basis,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Outcome {
    Bit0,
    Bit1,
    NoClick,
    DoubleClick,
}

impl Outcome {
    pub fn clicked(self) -> bool {
        self != Outcome::NoClick
    }
}

/// How the QBER handed to CASCADE is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "method")]
pub enum QberEstimation {
    /// Use the true QBER of the full sifted key.
    #[default]
    GroundTruth,
    /// Disclose a random `fraction` of the sifted key and discard it.
    Sample { fraction: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SessionConfig {
    /// Pulse repetition frequency, Hz.
    pub pulse_rate: f64,
    pub mean_photon_number: f64,
    pub channel_transmission: f64,
    pub channel_mueller: MuellerMatrix,
    pub detector_efficiency: f64,
    /// Per detector per gate.
    pub dark_count_prob: f64,
    /// Per detector per gate.
    pub background_prob: f64,
    pub intrinsic_error: f64,
    /// `q` in the sifted-key-rate formula.
    pub sifting_factor: f64,
    pub n_pulses: u64,
    pub extraction_ratio: f64,
    pub seed: u64,
    pub qber_estimation: QberEstimation,
    pub cascade: CascadeParams,
}

impl Default for SessionConfig {
    /// 1 MHz source at μ = 0.1 with ideal detectors.
    fn default() -> Self {
        Self {
            pulse_rate: 1e6,
            mean_photon_number: 0.1,
            channel_transmission: 1.0,
            channel_mueller: MuellerMatrix::IDENTITY,
            detector_efficiency: 1.0,
            dark_count_prob: 0.0,
            background_prob: 0.0,
            intrinsic_error: 0.0,
            sifting_factor: 0.5,
            n_pulses: 1_000_000,
            extraction_ratio: DEFAULT_EXTRACTION_RATIO,
            seed: 0,
            qber_estimation: QberEstimation::GroundTruth,
            cascade: CascadeParams::default(),
        }
    }
}

fn probability(p: f64) -> bool {
    (0.0..=1.0).contains(&p)
}

impl SessionConfig {
    pub fn validate(&self) -> Result<(), Error> {
        if !(self.pulse_rate > 0.0) {
            return Err(Error::InvalidParameter("pulse_rate must be positive"));
        }
        if !(self.mean_photon_number >= 0.0) {
            return Err(Error::InvalidParameter("mean_photon_number must be non-negative"));
        }
        let probs = [
            self.channel_transmission,
            self.detector_efficiency,
            self.dark_count_prob,
            self.background_prob,
            self.sifting_factor,
            self.extraction_ratio,
        ];
        if !probs.iter().all(|&p| probability(p)) {
            return Err(Error::InvalidParameter("probabilities and ratios must be in [0, 1]"));
        }
        if !(0.0..=0.5).contains(&self.intrinsic_error) {
            return Err(Error::InvalidParameter("intrinsic_error must be in [0, 0.5]"));
        }
        if self.n_pulses == 0 {
            return Err(Error::InvalidParameter("n_pulses must be at least 1"));
        }
        if let QberEstimation::Sample { fraction } = self.qber_estimation {
            if !(fraction > 0.0 && fraction < 1.0) {
                return Err(Error::InvalidParameter("QBER sample fraction must be in (0, 1)"));
            }
        }
        Ok(())
    }

    fn noise_prob(&self) -> f64 {
        1.0 - (1.0 - self.dark_count_prob) * (1.0 - self.background_prob)
    }

    /// Click probabilities of the bit-0 and bit-1 detectors.
    pub fn arm_click_probs(&self, state: StokesVector, basis: Basis) -> [f64; 2] {
        let out = self.channel_mueller * state;
        let along = match basis {
            Basis::Rectilinear => out.s1,
            Basis::Diagonal => out.s2,
        };
        let e = self.intrinsic_error;
        let noise = self.noise_prob();
        let signal = self.mean_photon_number * self.channel_transmission * self.detector_efficiency;
        [0.5 * (out.s0 + along), 0.5 * (out.s0 - along)].map(|p| {
            let p = (p * (1.0 - 2.0 * e) + e * out.s0).max(0.0);
            let sig = 1.0 - exp(-signal * p);
            1.0 - (1.0 - sig) * (1.0 - noise)
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct KeyMaterial {
    /// Alice's bit and basis for every pulse Bob detected, with pulse index.
    pub raw_alice: Vec<(u64, TaggedBit)>,
    /// Bob's detection events (single clicks and squashed double clicks), with pulse index.
    pub raw_bob: Vec<(u64, TaggedBit)>,
    pub sifted_alice: Bits,
    pub sifted_bob: Bits,
    pub reconciled: Bits,
    pub secret: Bits,
    pub leaked_bits: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SessionStats {
    pub qber: f64,
    /// bits/s
    pub sifted_rate: f64,
    /// bits/s
    pub secure_rate: f64,
    pub detected_pulses: u64,
    pub sifted_bits: u64,
    pub wrong_bits: u64,
    pub leaked_bits: u64,
}

/// One pulse's bit and basis.
pub fn prepare_pulse<R: RngCore + ?Sized>(rng: &mut R) -> TaggedBit {
    let basis = Basis::from_bit(rng::bit(rng));
    let bit = rng::bit(rng);
    TaggedBit { bit, basis }
}

/// Alice's uniformly random bits, bases and the encoded states.
pub fn alice_prepare<R: RngCore + ?Sized>(n: usize, rng: &mut R) -> (Bits, Vec<Basis>, Vec<StokesVector>) {
    let mut bits = Vec::with_capacity(n);
    let mut bases = Vec::with_capacity(n);
    let mut states = Vec::with_capacity(n);
    for _ in 0..n {
        let p = prepare_pulse(rng);
        bits.push(p.bit);
        bases.push(p.basis);
        states.push(encode_state(p.bit, p.basis));
    }
    (bits, bases, states)
}

/// Detection of one pulse analyzed in `bob_basis`. Always consumes two uniforms.
pub fn detect_pulse<R: RngCore + ?Sized>(state: StokesVector, bob_basis: Basis, cfg: &SessionConfig, rng: &mut R) -> Outcome {
    let [p0, p1] = cfg.arm_click_probs(state, bob_basis);
    let c0 = rng::uniform(rng) < p0;
    let c1 = rng::uniform(rng) < p1;
    match (c0, c1) {
        (true, false) => Outcome::Bit0,
        (false, true) => Outcome::Bit1,
        (false, false) => Outcome::NoClick,
        (true, true) => Outcome::DoubleClick,
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Sifted {
    pub alice: Bits,
    pub bob: Bits,
    /// Pulse index of each sifted bit.
    pub positions: Vec<usize>,
}

/// Keep clicked pulses measured in Alice's basis; double clicks get a random bit.
pub fn sift<R: RngCore + ?Sized>(
    alice_bits: &[bool],
    alice_bases: &[Basis],
    bob_bases: &[Basis],
    outcomes: &[Outcome],
    rng: &mut R,
) -> Result<Sifted, Error> {
    let n = alice_bits.len();
    if alice_bases.len() != n || bob_bases.len() != n || outcomes.len() != n {
        return Err(Error::InvalidInput("sifting inputs must have equal lengths"));
    }
    let mut out = Sifted::default();
    for i in 0..n {
        if alice_bases[i] != bob_bases[i] {
            continue;
        }
        let bit = match outcomes[i] {
            Outcome::NoClick => continue,
            Outcome::Bit0 => false,
            Outcome::Bit1 => true,
            Outcome::DoubleClick => rng::bit(rng),
        };
        out.alice.push(alice_bits[i]);
        out.bob.push(bit);
        out.positions.push(i);
    }
    Ok(out)
}

pub fn count_errors(a: &[bool], b: &[bool]) -> usize {
    a.iter().zip(b).filter(|(x, y)| x != y).count()
}

/// Fraction of positions where the sifted keys disagree.
pub fn compute_qber(sifted_alice: &[bool], sifted_bob: &[bool]) -> Result<f64, Error> {
    if sifted_alice.is_empty() || sifted_alice.len() != sifted_bob.len() {
        return Err(Error::UndefinedQber);
    }
    Ok(count_errors(sifted_alice, sifted_bob) as f64 / sifted_alice.len() as f64)
}

/// Disclose a random `fraction` of the sifted positions to estimate the QBER.
/// Returns the estimate and the keys with the disclosed bits removed.
pub fn estimate_qber_sample<R: RngCore + ?Sized>(
    sifted_alice: &[bool],
    sifted_bob: &[bool],
    fraction: f64,
    rng: &mut R,
) -> Result<(f64, Bits, Bits), Error> {
    if sifted_alice.len() != sifted_bob.len() {
        return Err(Error::InvalidInput("sifted keys differ in length"));
    }
    let n = sifted_alice.len();
    let n_sample = ((fraction * n as f64) as usize).max(1).min(n);
    let mut order: Vec<usize> = (0..n).collect();
    rng::shuffle(&mut order, rng);
    let mut disclosed = alloc::vec![false; n];
    for &i in &order[..n_sample] {
        disclosed[i] = true;
    }
    let errors = order[..n_sample].iter().filter(|&&i| sifted_alice[i] != sifted_bob[i]).count();
    if n_sample == 0 {
        return Err(Error::UndefinedQber);
    }
    let keep = |key: &[bool]| key.iter().zip(&disclosed).filter(|(_, d)| !**d).map(|(b, _)| *b).collect::<Bits>();
    Ok((errors as f64 / n_sample as f64, keep(sifted_alice), keep(sifted_bob)))
}

/// Sifted key rate `k = f · μ · T · q · η / 2`.
pub fn sifted_key_rate(cfg: &SessionConfig) -> f64 {
    cfg.pulse_rate * cfg.mean_photon_number * cfg.channel_transmission * cfg.sifting_factor * cfg.detector_efficiency / 2.0
}

/// Closed-form expectation of the detection statistics for the simulated model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpectedRates {
    pub qber: f64,
    /// Sifted bits per pulse.
    pub sifted_per_pulse: f64,
    pub sifted_rate: f64,
    /// `extraction_ratio × sifted_rate`.
    pub secure_rate: f64,
}

pub fn expected_rates(cfg: &SessionConfig) -> ExpectedRates {
    const STATES: [(bool, Basis); 4] = [
        (false, Basis::Rectilinear),
        (true, Basis::Rectilinear),
        (false, Basis::Diagonal),
        (true, Basis::Diagonal),
    ];
    let (mut kept, mut wrong) = (0.0, 0.0);
    for (bit, basis) in STATES {
        let probs = cfg.arm_click_probs(encode_state(bit, basis), basis);
        let (right, err) = if bit { (probs[1], probs[0]) } else { (probs[0], probs[1]) };
        let single_wrong = err * (1.0 - right);
        let double = right * err;
        kept += right * (1.0 - err) + single_wrong + double;
        wrong += single_wrong + 0.5 * double;
    }
    // Uniform state, matching basis with probability 1/2.
    let sifted_per_pulse = kept / 8.0;
    let qber = if kept > 0.0 { wrong / kept } else { 0.0 };
    let sifted_rate = sifted_per_pulse * cfg.pulse_rate;
    ExpectedRates { qber, sifted_per_pulse, sifted_rate, secure_rate: cfg.extraction_ratio * sifted_rate }
}

/// Prepare, transmit, detect and post-process `cfg.n_pulses` pulses.
pub fn run_session(cfg: &SessionConfig) -> Result<(SessionStats, KeyMaterial), Error> {
    cfg.validate()?;
    let n = cfg.n_pulses;
    let mut alice_rng = StreamRng::new(cfg.seed, tag::ALICE);
    let mut bob_rng = StreamRng::new(cfg.seed, tag::BOB);
    let mut detect_rng = StreamRng::new(cfg.seed, tag::DETECT);
    let mut squash_rng = StreamRng::new(cfg.seed, tag::SIFT);

    let mut keys = KeyMaterial::default();
    let mut detected = 0u64;
    for index in 0..n {
        let sent = prepare_pulse(&mut alice_rng);
        let bob_basis = Basis::from_bit(rng::bit(&mut bob_rng));
        let outcome = detect_pulse(encode_state(sent.bit, sent.basis), bob_basis, cfg, &mut detect_rng);
        if !outcome.clicked() {
            continue;
        }
        keys.raw_alice.push((index, sent));
        detected += 1;
        let bit = match outcome {
            Outcome::Bit0 => false,
            Outcome::Bit1 => true,
            _ => rng::bit(&mut squash_rng),
        };
        keys.raw_bob.push((index, TaggedBit { bit, basis: bob_basis }));
        if bob_basis == sent.basis {
            keys.sifted_alice.push(sent.bit);
            keys.sifted_bob.push(bit);
        }
    }

    let duration = n as f64 / cfg.pulse_rate;
    let sifted_bits = keys.sifted_alice.len();
    let wrong_bits = count_errors(&keys.sifted_alice, &keys.sifted_bob);
    let mut stats = SessionStats {
        qber: if sifted_bits > 0 { wrong_bits as f64 / sifted_bits as f64 } else { 0.0 },
        sifted_rate: sifted_bits as f64 / duration,
        secure_rate: 0.0,
        detected_pulses: detected,
        sifted_bits: sifted_bits as u64,
        wrong_bits: wrong_bits as u64,
        leaked_bits: 0,
    };
    if sifted_bits < MIN_SIFTED_BITS {
        return Err(Error::InsufficientKey { sifted_bits, stats });
    }

    let (estimate, alice_key, bob_key) = match cfg.qber_estimation {
        QberEstimation::GroundTruth => (stats.qber, keys.sifted_alice.clone(), keys.sifted_bob.clone()),
        QberEstimation::Sample { fraction } => {
            let mut sample_rng = StreamRng::new(cfg.seed, tag::SAMPLE);
            estimate_qber_sample(&keys.sifted_alice, &keys.sifted_bob, fraction, &mut sample_rng)?
        }
    };
    let estimate = estimate.clamp(CASCADE_QBER_RANGE.0, CASCADE_QBER_RANGE.1);
    let mut cascade_rng = StreamRng::new(cfg.seed, tag::CASCADE);
    let outcome = cascade_reconcile(&alice_key, &bob_key, estimate, &cfg.cascade, &mut cascade_rng)?;

    let mut pa_rng = StreamRng::new(cfg.seed, tag::TOEPLITZ);
    keys.secret = privacy_amplify(&outcome.reconciled, cfg.extraction_ratio, &mut pa_rng)?;
    keys.reconciled = outcome.reconciled;
    keys.leaked_bits = outcome.leaked_bits;
    stats.leaked_bits = outcome.leaked_bits;
    stats.secure_rate = keys.secret.len() as f64 / duration;
    Ok((stats, keys))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Replays a fixed list of `u32` values.
    struct Scripted(Vec<u32>, usize);

    impl RngCore for Scripted {
        fn next_u32(&mut self) -> u32 {
            let v = self.0[self.1 % self.0.len()];
            self.1 += 1;
            v
        }
        fn next_u64(&mut self) -> u64 {
            u64::from(self.next_u32())
        }
        fn fill_bytes(&mut self, dst: &mut [u8]) {
            rand_core::impls::fill_bytes_via_next(self, dst)
        }
    }

    fn noiseless(n_pulses: u64) -> SessionConfig {
        SessionConfig { n_pulses, ..SessionConfig::default() }
    }

    #[test]
    fn forced_sequence_enumerates_states() {
        let mut rng = Scripted(vec![0, 0, 0, 1, 1, 0, 1, 1], 0);
        let (bits, bases, states) = alice_prepare(4, &mut rng);
        assert_eq!(bits, [false, true, false, true]);
        assert_eq!(bases, [Basis::Rectilinear, Basis::Rectilinear, Basis::Diagonal, Basis::Diagonal]);
        assert_eq!(
            states,
            [StokesVector::HORIZONTAL, StokesVector::VERTICAL, StokesVector::DIAGONAL, StokesVector::ANTIDIAGONAL]
        );
    }

    #[test]
    fn bit_and_basis_are_fair_and_independent() {
        let n = 100_000;
        let (bits, bases, _) = alice_prepare(n, &mut StreamRng::new(3, 3));
        let sigma = (0.25 / n as f64).sqrt();
        let fb = bits.iter().filter(|&&b| b).count() as f64 / n as f64;
        let fd = bases.iter().filter(|&&b| b == Basis::Diagonal).count() as f64 / n as f64;
        assert!((fb - 0.5).abs() < 4.0 * sigma && (fd - 0.5).abs() < 4.0 * sigma);
        let x: Vec<f64> = bits.iter().map(|&b| if b { 1.0 } else { -1.0 }).collect();
        let y: Vec<f64> = bases.iter().map(|&b| if b == Basis::Diagonal { 1.0 } else { -1.0 }).collect();
        let corr = x.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>() / n as f64;
        assert!(corr.abs() < 4.0 / (n as f64).sqrt());
    }

    #[test]
    fn saturated_correct_arm_always_clicks() {
        let cfg = SessionConfig { mean_photon_number: 1e6, ..SessionConfig::default() };
        let mut rng = StreamRng::new(1, 1);
        for _ in 0..1000 {
            assert_eq!(detect_pulse(StokesVector::HORIZONTAL, Basis::Rectilinear, &cfg, &mut rng), Outcome::Bit0);
        }
    }

    #[test]
    fn conjugate_basis_is_fifty_fifty() {
        let cfg = SessionConfig { mean_photon_number: 0.5, ..SessionConfig::default() };
        let [p0, p1] = cfg.arm_click_probs(StokesVector::HORIZONTAL, Basis::Diagonal);
        assert!((p0 - p1).abs() < 1e-15);
        let mut rng = StreamRng::new(2, 2);
        let (mut c0, mut c1) = (0i64, 0i64);
        for _ in 0..200_000 {
            match detect_pulse(StokesVector::HORIZONTAL, Basis::Diagonal, &cfg, &mut rng) {
                Outcome::Bit0 => c0 += 1,
                Outcome::Bit1 => c1 += 1,
                _ => {}
            }
        }
        let total = (c0 + c1) as f64;
        assert!(((c0 - c1) as f64).abs() < 4.0 * total.sqrt());
    }

    #[test]
    fn click_probability_closed_form() {
        let cfg = SessionConfig { channel_transmission: 0.198, detector_efficiency: 0.5, ..SessionConfig::default() };
        let [p0, p1] = cfg.arm_click_probs(StokesVector::HORIZONTAL, Basis::Rectilinear);
        assert!((p0 - (1.0 - (-0.0099f64).exp())).abs() < 1e-15);
        assert!((p0 - 0.00985).abs() < 1e-5);
        assert_eq!(p1, 0.0);
    }

    #[test]
    fn sift_cases() {
        let bits = [false, true, true, false];
        let bases = [Basis::Rectilinear, Basis::Diagonal, Basis::Rectilinear, Basis::Diagonal];
        let correct = [Outcome::Bit0, Outcome::Bit1, Outcome::Bit1, Outcome::Bit0];
        let mut r = StreamRng::new(0, 0);
        let s = sift(&bits, &bases, &bases, &correct, &mut r).unwrap();
        assert_eq!(s.alice, bits);
        assert_eq!(s.bob, bits);

        let none = [Outcome::NoClick; 4];
        assert!(sift(&bits, &bases, &bases, &none, &mut r).unwrap().alice.is_empty());

        let other = [Basis::Diagonal, Basis::Diagonal, Basis::Rectilinear, Basis::Rectilinear];
        let s = sift(&bits, &bases, &other, &correct, &mut r).unwrap();
        assert_eq!(s.positions, [1, 2]);

        let dbl = [Outcome::DoubleClick; 4];
        assert_eq!(sift(&bits, &bases, &bases, &dbl, &mut r).unwrap().bob.len(), 4);
        assert!(sift(&bits, &bases[..3], &bases, &correct, &mut r).is_err());
    }

    #[test]
    fn random_bases_sift_about_half() {
        let n = 100_000;
        let mut r = StreamRng::new(4, 4);
        let (bits, bases, _) = alice_prepare(n, &mut r);
        let bob: Vec<Basis> = (0..n).map(|_| Basis::from_bit(rng::bit(&mut r))).collect();
        let outcomes = vec![Outcome::Bit0; n];
        let s = sift(&bits, &bases, &bob, &outcomes, &mut r).unwrap();
        let sigma = (0.25 * n as f64).sqrt();
        assert!((s.alice.len() as f64 - n as f64 / 2.0).abs() < 4.0 * sigma);
    }

    #[test]
    fn qber_counts() {
        let a = vec![false; 200];
        let mut b = a.clone();
        for i in [3, 50, 99, 150, 199] {
            b[i] = true;
        }
        assert_eq!(compute_qber(&a, &b).unwrap(), 0.025);
        assert_eq!(compute_qber(&a, &a).unwrap(), 0.0);
        let c: Bits = a.iter().map(|x| !x).collect();
        assert_eq!(compute_qber(&a, &c).unwrap(), 1.0);
        assert_eq!(compute_qber(&[], &[]), Err(Error::UndefinedQber));
    }

    #[test]
    fn sifted_rate_formula() {
        let cfg = SessionConfig { channel_transmission: 1.0, sifting_factor: 0.5, detector_efficiency: 0.5, ..SessionConfig::default() };
        assert_eq!(sifted_key_rate(&cfg), 12_500.0);
        assert_eq!(sifted_key_rate(&SessionConfig { channel_transmission: 0.0, ..cfg.clone() }), 0.0);
        let half = SessionConfig { channel_transmission: 0.3, ..cfg.clone() };
        let full = SessionConfig { channel_transmission: 0.6, ..cfg };
        assert_eq!(sifted_key_rate(&full), 2.0 * sifted_key_rate(&half));
    }

    #[test]
    fn sample_estimator_discards_disclosed_bits() {
        let a = vec![false; 1000];
        let mut b = a.clone();
        for i in (0..1000).step_by(20) {
            b[i] = true;
        }
        let (q, ra, rb) = estimate_qber_sample(&a, &b, 0.1, &mut StreamRng::new(5, 5)).unwrap();
        assert_eq!(ra.len(), 900);
        assert_eq!(rb.len(), 900);
        assert!((0.0..0.2).contains(&q));
    }

    #[test]
    fn noiseless_lossless_session() {
        let (stats, keys) = run_session(&noiseless(20_000)).unwrap();
        assert_eq!(stats.qber, 0.0);
        assert_eq!(keys.reconciled, keys.sifted_alice);
        assert_eq!(keys.sifted_alice.len(), keys.sifted_bob.len());
        assert!(keys.sifted_alice.len() <= keys.raw_alice.len());
        assert_eq!(keys.raw_alice.len() as u64, stats.detected_pulses);
        assert!(keys.raw_alice.iter().zip(&keys.raw_bob).all(|(a, b)| a.0 == b.0));
        assert!(keys.secret.len() <= keys.reconciled.len());
        let expect = expected_rates(&noiseless(20_000));
        let per_pulse = stats.sifted_bits as f64 / 20_000.0;
        assert!((per_pulse - expect.sifted_per_pulse).abs() < 4.0 * (expect.sifted_per_pulse / 20_000.0).sqrt());
        assert!(stats.secure_rate <= stats.sifted_rate && stats.sifted_rate <= 1e6);
    }

    #[test]
    fn sessions_are_deterministic() {
        let cfg = SessionConfig { dark_count_prob: 1e-3, intrinsic_error: 0.02, seed: 77, ..noiseless(50_000) };
        assert_eq!(run_session(&cfg).unwrap(), run_session(&cfg).unwrap());
    }

    #[test]
    fn noisy_session_reconciles() {
        let cfg = SessionConfig { dark_count_prob: 1e-3, intrinsic_error: 0.02, seed: 3, ..noiseless(100_000) };
        let (stats, keys) = run_session(&cfg).unwrap();
        assert!(stats.qber > 0.0 && stats.qber < 0.1);
        assert_eq!(keys.reconciled, keys.sifted_alice);
        assert_eq!(stats.wrong_bits, count_errors(&keys.sifted_alice, &keys.sifted_bob) as u64);
        assert_eq!(stats.qber, stats.wrong_bits as f64 / stats.sifted_bits as f64);
        let expect = expected_rates(&cfg);
        let sigma = (expect.qber * (1.0 - expect.qber) / stats.sifted_bits as f64).sqrt();
        assert!((stats.qber - expect.qber).abs() < 4.0 * sigma);
    }

    #[test]
    fn sampled_estimation_session() {
        let cfg = SessionConfig {
            dark_count_prob: 1e-3,
            intrinsic_error: 0.02,
            qber_estimation: QberEstimation::Sample { fraction: 0.1 },
            ..noiseless(100_000)
        };
        let (stats, keys) = run_session(&cfg).unwrap();
        assert!(keys.reconciled.len() < stats.sifted_bits as usize);
    }

    #[test]
    fn short_sessions_abort_with_partial_stats() {
        let cfg = SessionConfig { channel_transmission: 0.01, ..noiseless(10_000) };
        match run_session(&cfg) {
            Err(Error::InsufficientKey { sifted_bits, stats }) => {
                assert!(sifted_bits < MIN_SIFTED_BITS);
                assert_eq!(stats.sifted_bits as usize, sifted_bits);
            }
            other => panic!("expected insufficient key, got {other:?}"),
        }
    }

    #[test]
    fn more_dark_counts_never_lower_qber() {
        let (mut low, mut high) = (0.0, 0.0);
        for seed in 0..20 {
            let base = SessionConfig {
                intrinsic_error: 0.01,
                detector_efficiency: 0.1,
                seed,
                ..noiseless(100_000)
            };
            low += run_session(&SessionConfig { dark_count_prob: 1e-5, ..base.clone() }).unwrap().0.qber;
            high += run_session(&SessionConfig { dark_count_prob: 5e-4, ..base }).unwrap().0.qber;
        }
        assert!(high >= low);
    }

    #[test]
    fn config_validation() {
        assert!(SessionConfig { pulse_rate: 0.0, ..SessionConfig::default() }.validate().is_err());
        assert!(SessionConfig { dark_count_prob: 1.5, ..SessionConfig::default() }.validate().is_err());
        assert!(SessionConfig { intrinsic_error: 0.6, ..SessionConfig::default() }.validate().is_err());
        assert!(SessionConfig { n_pulses: 0, ..SessionConfig::default() }.validate().is_err());
        assert!(SessionConfig::default().validate().is_ok());
    }
}
