//! Analog Monte Carlo photon transport through a homogeneous water slab.
//!
//! The source sits at `z = 0` and launches along `+z`; the receiver is the
//! plane `z = length`. Each interaction either absorbs the photon (with
//! probability `absorption / attenuation`) or scatters it with a polar angle
//! drawn from a two-term Henyey–Greenstein phase function. Polarization is
//! not tracked; only the number of scattering events matters downstream.

use core::f64::consts::TAU;

use libm::{cos, exp, log, sin, sqrt, tan};
use rand_core::RngCore;
use serde::{Deserialize, Serialize};

use crate::rng::{self, StreamRng};
use crate::Error;

/// Photons farther than this from the axis are dropped.
pub const DEFAULT_LATERAL_BOUND: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TthgParams {
    pub alpha: f64,
    pub g1: f64,
    pub g2: f64,
}

impl Default for TthgParams {
    fn default() -> Self {
        Self { alpha: 0.9, g1: 0.924, g2: -0.169 }
    }
}

impl TthgParams {
    pub fn validate(&self) -> Result<(), Error> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::InvalidParameter("TTHG alpha must be in [0, 1]"));
        }
        if !(self.g1 > -1.0 && self.g1 < 1.0 && self.g2 > -1.0 && self.g2 < 1.0) {
            return Err(Error::InvalidParameter("TTHG asymmetry must be in (-1, 1)"));
        }
        Ok(())
    }

    /// Mean scattering cosine of the mixture.
    pub fn mean_cosine(&self) -> f64 {
        self.alpha * self.g1 + (1.0 - self.alpha) * self.g2
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChannelParams {
    /// Absorption coefficient, 1/m.
    pub absorption: f64,
    /// Attenuation coefficient (absorption + scattering), 1/m.
    pub attenuation: f64,
    /// Channel length, m.
    pub length: f64,
    pub aperture_diameter: f64,
    /// Receiver acceptance half-angle, rad.
    pub fov_half_angle: f64,
    pub phase_fn: TthgParams,
    pub lateral_bound: f64,
}

impl Default for ChannelParams {
    /// The 2.37 m simulated-seawater tank with a 2.54 cm, 10° receiver.
    fn default() -> Self {
        Self {
            absorption: 0.117,
            attenuation: 0.683,
            length: 2.37,
            aperture_diameter: 0.0254,
            fov_half_angle: 5f64.to_radians(),
            phase_fn: TthgParams::default(),
            lateral_bound: DEFAULT_LATERAL_BOUND,
        }
    }
}

impl ChannelParams {
    pub fn validate(&self) -> Result<(), Error> {
        if !(self.absorption >= 0.0 && self.absorption <= self.attenuation) {
            return Err(Error::InvalidParameter("need 0 <= absorption <= attenuation"));
        }
        if !(self.length > 0.0) {
            return Err(Error::InvalidParameter("channel length must be positive"));
        }
        if !(self.aperture_diameter > 0.0) {
            return Err(Error::InvalidParameter("aperture diameter must be positive"));
        }
        if !(self.fov_half_angle > 0.0 && self.fov_half_angle <= core::f64::consts::FRAC_PI_2) {
            return Err(Error::InvalidParameter("FOV half-angle must be in (0, pi/2]"));
        }
        if !(self.lateral_bound > 0.0) {
            return Err(Error::InvalidParameter("lateral bound must be positive"));
        }
        self.phase_fn.validate()
    }

    /// Beer–Lambert transmission of unscattered light, `exp(-c L)`.
    pub fn ballistic_transmission(&self) -> f64 {
        exp(-self.attenuation * self.length)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BeamParams {
    /// 1/e² intensity radius of the waist at the source, m.
    pub waist_radius: f64,
    pub divergence_half_angle: f64,
}

impl Default for BeamParams {
    fn default() -> Self {
        Self { waist_radius: 1e-3, divergence_half_angle: 0.5e-3 }
    }
}

impl BeamParams {
    pub fn validate(&self) -> Result<(), Error> {
        if !(self.waist_radius >= 0.0 && self.divergence_half_angle >= 0.0) {
            return Err(Error::InvalidParameter("beam waist and divergence must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhotonState {
    pub position: [f64; 3],
    pub direction: [f64; 3],
    pub scatter_count: u32,
    pub alive: bool,
    /// Set when the photon terminated on the receiver plane.
    pub exited: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TransportTally {
    pub launched: u64,
    pub exited_unscattered: u64,
    pub received_unscattered: u64,
    pub received_scattered: u64,
}

impl TransportTally {
    pub fn record(&mut self, photon: &PhotonState, accepted: bool) {
        self.launched += 1;
        if photon.exited && photon.scatter_count == 0 {
            self.exited_unscattered += 1;
        }
        if accepted {
            if photon.scatter_count == 0 {
                self.received_unscattered += 1;
            } else {
                self.received_scattered += 1;
            }
        }
    }

    pub fn merge(mut self, other: Self) -> Self {
        self.launched += other.launched;
        self.exited_unscattered += other.exited_unscattered;
        self.received_unscattered += other.received_unscattered;
        self.received_scattered += other.received_scattered;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransportStats {
    pub launched: u64,
    pub received: u64,
    pub received_unscattered: u64,
    pub received_scattered: u64,
    /// Fraction of launched photons reaching the exit plane unscattered.
    pub ballistic_transmission: f64,
    pub scattered_fraction_of_received: f64,
}

impl From<TransportTally> for TransportStats {
    fn from(t: TransportTally) -> Self {
        let received = t.received_unscattered + t.received_scattered;
        Self {
            launched: t.launched,
            received,
            received_unscattered: t.received_unscattered,
            received_scattered: t.received_scattered,
            ballistic_transmission: ratio(t.exited_unscattered, t.launched),
            scattered_fraction_of_received: ratio(t.received_scattered, received),
        }
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Launch a photon from the Gaussian source.
pub fn sample_source<R: RngCore + ?Sized>(beam: &BeamParams, rng: &mut R) -> PhotonState {
    let sigma = beam.waist_radius / 2.0;
    let x = sigma * rng::standard_normal(rng);
    let y = sigma * rng::standard_normal(rng);
    let tx = beam.divergence_half_angle * rng::standard_normal(rng);
    let ty = beam.divergence_half_angle * rng::standard_normal(rng);
    PhotonState {
        position: [x, y, 0.0],
        direction: normalize([tan(tx), tan(ty), 1.0]),
        scatter_count: 0,
        alive: true,
        exited: false,
    }
}

/// Free path length `-ln(u) / attenuation`, `u` uniform on `(0, 1]`.
pub fn sample_path_length<R: RngCore + ?Sized>(attenuation: f64, rng: &mut R) -> Result<f64, Error> {
    if !(attenuation > 0.0) {
        return Err(Error::InvalidParameter("attenuation must be positive"));
    }
    Ok(path_length_from_uniform(attenuation, rng::uniform_open_zero(rng)))
}

#[inline]
pub fn path_length_from_uniform(attenuation: f64, u: f64) -> f64 {
    -log(u) / attenuation
}

/// Henyey–Greenstein inverse CDF for a uniform `u` in `[0, 1)`.
pub fn hg_cosine_from_uniform(g: f64, u: f64) -> f64 {
    if g.abs() < 1e-6 {
        return 2.0 * u - 1.0;
    }
    let frac = (1.0 - g * g) / (1.0 - g + 2.0 * g * u);
    ((1.0 + g * g - frac * frac) / (2.0 * g)).clamp(-1.0, 1.0)
}

/// Scattering cosine from the two-term Henyey–Greenstein mixture.
pub fn sample_tthg_cosine<R: RngCore + ?Sized>(p: &TthgParams, rng: &mut R) -> f64 {
    let g = if rng::uniform(rng) < p.alpha { p.g1 } else { p.g2 };
    hg_cosine_from_uniform(g, rng::uniform(rng))
}

fn normalize(v: [f64; 3]) -> [f64; 3] {
    let n = sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
    [v[0] / n, v[1] / n, v[2] / n]
}

/// Rotate `dir` by polar angle `acos(cos_theta)` and azimuth `phi`.
pub fn scatter_direction(dir: [f64; 3], cos_theta: f64, phi: f64) -> [f64; 3] {
    let sin_theta = sqrt((1.0 - cos_theta * cos_theta).max(0.0));
    let (sp, cp) = (sin(phi), cos(phi));
    let [ux, uy, uz] = dir;
    let out = if uz.abs() > 0.99999 {
        [sin_theta * cp, sin_theta * sp, cos_theta * uz.signum()]
    } else {
        let tmp = sqrt(1.0 - uz * uz);
        [
            sin_theta * (ux * uz * cp - uy * sp) / tmp + ux * cos_theta,
            sin_theta * (uy * uz * cp + ux * sp) / tmp + uy * cos_theta,
            -sin_theta * cp * tmp + uz * cos_theta,
        ]
    };
    normalize(out)
}

/// Follow a photon until it reaches the receiver plane, is absorbed, or escapes.
pub fn propagate<R: RngCore + ?Sized>(mut photon: PhotonState, ch: &ChannelParams, rng: &mut R) -> PhotonState {
    let bound2 = ch.lateral_bound * ch.lateral_bound;
    let albedo_cut = if ch.attenuation > 0.0 { ch.absorption / ch.attenuation } else { 0.0 };
    while photon.alive {
        let step = if ch.attenuation > 0.0 {
            path_length_from_uniform(ch.attenuation, rng::uniform_open_zero(rng))
        } else {
            f64::INFINITY
        };
        let [x, y, z] = photon.position;
        let [ux, uy, uz] = photon.direction;

        if uz > 0.0 && z + step * uz >= ch.length {
            let s = (ch.length - z) / uz;
            photon.position = [x + s * ux, y + s * uy, ch.length];
            photon.alive = false;
            photon.exited = true;
            break;
        }
        if step.is_infinite() {
            // Vacuum and heading away from the receiver.
            photon.alive = false;
            break;
        }
        let next = [x + step * ux, y + step * uy, z + step * uz];
        photon.position = next;
        if next[2] < 0.0 || next[0] * next[0] + next[1] * next[1] > bound2 {
            photon.alive = false;
            break;
        }
        if rng::uniform(rng) < albedo_cut {
            photon.alive = false;
            break;
        }
        let cos_theta = sample_tthg_cosine(&ch.phase_fn, rng);
        let phi = TAU * rng::uniform(rng);
        photon.direction = scatter_direction(photon.direction, cos_theta, phi);
        photon.scatter_count += 1;
    }
    photon
}

/// Aperture and field-of-view test at the receiver plane.
pub fn receiver_accept(photon: &PhotonState, ch: &ChannelParams) -> bool {
    if !photon.exited {
        return false;
    }
    let [x, y, _] = photon.position;
    let radius = ch.aperture_diameter / 2.0;
    x * x + y * y <= radius * radius && photon.direction[2] >= cos(ch.fov_half_angle)
}

/// Trace photon `index` on its own substream of `seed`.
pub fn trace_photon(ch: &ChannelParams, beam: &BeamParams, seed: u64, index: u64) -> (PhotonState, bool) {
    let mut rng = StreamRng::substream(seed, rng::tag::PHOTON, index);
    let launched = sample_source(beam, &mut rng);
    let done = propagate(launched, ch, &mut rng);
    let accepted = receiver_accept(&done, ch);
    (done, accepted)
}

/// Tally photons `range` of the run identified by `seed`.
pub fn tally_range(ch: &ChannelParams, beam: &BeamParams, seed: u64, range: core::ops::Range<u64>) -> TransportTally {
    let mut tally = TransportTally::default();
    for index in range {
        let (photon, accepted) = trace_photon(ch, beam, seed, index);
        tally.record(&photon, accepted);
    }
    tally
}

/// Serial transport run; `aqua-qkd` provides a parallel driver with identical output.
pub fn run_transport(ch: &ChannelParams, beam: &BeamParams, n_photons: u64, seed: u64) -> Result<TransportStats, Error> {
    ch.validate()?;
    beam.validate()?;
    if n_photons == 0 {
        return Err(Error::InvalidParameter("n_photons must be at least 1"));
    }
    Ok(tally_range(ch, beam, seed, 0..n_photons).into())
}
