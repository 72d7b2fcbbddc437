//! Stokes vectors, Mueller matrices and the optical elements of the
//! polarimeter train.
//!
//! Angles are measured from horizontal, counterclockwise when looking toward
//! the source. A frame rotation by `φ` acts on the Stokes vector as a rotation
//! by `2φ` in the `s1`–`s2` plane.

use core::f64::consts::PI;
use core::ops::Mul;

use libm::{cos, fmod, sin, sqrt};
use serde::{Deserialize, Serialize};

use crate::Error;

/// Absolute tolerance on `1 - |ŝ|²` for unit-normalized Stokes vectors.
pub const PHYSICALITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StokesVector {
    pub s0: f64,
    pub s1: f64,
    pub s2: f64,
    pub s3: f64,
}

impl StokesVector {
    pub const fn new(s0: f64, s1: f64, s2: f64, s3: f64) -> Self {
        Self { s0, s1, s2, s3 }
    }

    pub const HORIZONTAL: Self = Self::new(1.0, 1.0, 0.0, 0.0);
    pub const VERTICAL: Self = Self::new(1.0, -1.0, 0.0, 0.0);
    pub const DIAGONAL: Self = Self::new(1.0, 0.0, 1.0, 0.0);
    pub const ANTIDIAGONAL: Self = Self::new(1.0, 0.0, -1.0, 0.0);
    pub const UNPOLARIZED: Self = Self::new(1.0, 0.0, 0.0, 0.0);

    pub fn from_array(v: [f64; 4]) -> Self {
        Self::new(v[0], v[1], v[2], v[3])
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.s0, self.s1, self.s2, self.s3]
    }

    /// Length of the polarized part, `sqrt(s1² + s2² + s3²)`.
    pub fn polarized_intensity(&self) -> f64 {
        sqrt(self.s1 * self.s1 + self.s2 * self.s2 + self.s3 * self.s3)
    }

    pub fn degree_of_polarization(&self) -> f64 {
        self.polarized_intensity() / self.s0
    }

    /// Whether `s0 ≥ 0` and the polarized part does not exceed `s0`
    /// (within [`PHYSICALITY_TOL`] after normalization).
    pub fn is_physical(&self) -> bool {
        if self.s0 < 0.0 {
            return false;
        }
        if self.s0 == 0.0 {
            return self.polarized_intensity() == 0.0;
        }
        let b = self.bloch();
        1.0 - (b[0] * b[0] + b[1] * b[1] + b[2] * b[2]) >= -PHYSICALITY_TOL
    }

    /// Bloch vector of the unit-intensity state.
    pub fn bloch(&self) -> [f64; 3] {
        [self.s1 / self.s0, self.s2 / self.s0, self.s3 / self.s0]
    }

    pub fn normalized(&self) -> Self {
        Self::new(1.0, self.s1 / self.s0, self.s2 / self.s0, self.s3 / self.s0)
    }
}

/// 4×4 real matrix acting on Stokes vectors, indexed `m[row][col]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MuellerMatrix {
    pub m: [[f64; 4]; 4],
}

impl MuellerMatrix {
    pub const IDENTITY: Self = Self::diagonal([1.0, 1.0, 1.0, 1.0]);

    pub const fn new(m: [[f64; 4]; 4]) -> Self {
        Self { m }
    }

    pub const fn diagonal(d: [f64; 4]) -> Self {
        Self::new([
            [d[0], 0.0, 0.0, 0.0],
            [0.0, d[1], 0.0, 0.0],
            [0.0, 0.0, d[2], 0.0],
            [0.0, 0.0, 0.0, d[3]],
        ])
    }

    /// Isotropic depolarizer `diag(1, d, d, d)`.
    pub const fn depolarizer(d: f64) -> Self {
        Self::diagonal([1.0, d, d, d])
    }

    /// Stokes-frame rotation by `angle` in the `s1`–`s2` plane.
    pub fn rotation(angle: f64) -> Self {
        let (s, c) = (sin(angle), cos(angle));
        Self::new([
            [1.0, 0.0, 0.0, 0.0],
            [0.0, c, s, 0.0],
            [0.0, -s, c, 0.0],
            [0.0, 0.0, 0.0, 1.0],
        ])
    }

    /// Optical rotator turning linear polarization by `angle` (Stokes angle `2·angle`).
    pub fn rotator(angle: f64) -> Self {
        Self::rotation(-2.0 * angle)
    }

    pub fn transpose(&self) -> Self {
        let mut t = [[0.0; 4]; 4];
        for (r, row) in self.m.iter().enumerate() {
            for (c, v) in row.iter().enumerate() {
                t[c][r] = *v;
            }
        }
        Self::new(t)
    }

    pub fn scale(&self, k: f64) -> Self {
        let mut out = self.m;
        out.iter_mut().flatten().for_each(|v| *v *= k);
        Self::new(out)
    }

    /// Copy scaled so that `m[0][0] = 1`.
    pub fn normalized(&self) -> Self {
        self.scale(1.0 / self.m[0][0])
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.m
            .iter()
            .flatten()
            .zip(other.m.iter().flatten())
            .fold(0.0, |acc, (a, b)| f64::max(acc, (a - b).abs()))
    }

    /// Row-major flattening, element `(r, c)` at `4r + c`.
    pub fn to_flat(&self) -> [f64; 16] {
        let mut out = [0.0; 16];
        for (k, v) in self.m.iter().flatten().enumerate() {
            out[k] = *v;
        }
        out
    }

    pub fn from_flat(v: &[f64; 16]) -> Self {
        let mut m = [[0.0; 4]; 4];
        for (k, x) in v.iter().enumerate() {
            m[k / 4][k % 4] = *x;
        }
        Self::new(m)
    }
}

impl Default for MuellerMatrix {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl Mul<StokesVector> for MuellerMatrix {
    type Output = StokesVector;

    fn mul(self, s: StokesVector) -> StokesVector {
        mueller_apply(&self, s)
    }
}

impl Mul for MuellerMatrix {
    type Output = MuellerMatrix;

    fn mul(self, inner: MuellerMatrix) -> MuellerMatrix {
        mueller_compose(&self, &inner)
    }
}

fn wrap(x: f64, period: f64) -> f64 {
    let r = fmod(x, period);
    let r = if r < 0.0 { r + period } else { r };
    if r >= period { 0.0 } else { r }
}

/// Fast-axis angle and retardance of a linear retarder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaveplateSpec {
    pub theta: f64,
    pub delta: f64,
}

impl WaveplateSpec {
    /// Wraps `theta` into `[0, π)` and `delta` into `[0, 2π)`.
    pub fn new(theta: f64, delta: f64) -> Self {
        Self {
            theta: wrap(theta, PI),
            delta: wrap(delta, 2.0 * PI),
        }
    }

    pub fn quarter_wave(theta: f64) -> Self {
        Self::new(theta, PI / 2.0)
    }

    pub fn half_wave(theta: f64) -> Self {
        Self::new(theta, PI)
    }
}

pub fn mueller_apply(m: &MuellerMatrix, s: StokesVector) -> StokesVector {
    let v = s.to_array();
    let mut out = [0.0; 4];
    for (o, row) in out.iter_mut().zip(m.m.iter()) {
        *o = row.iter().zip(v.iter()).map(|(a, b)| a * b).sum();
    }
    StokesVector::from_array(out)
}

/// `outer · inner`: `inner` acts first.
pub fn mueller_compose(outer: &MuellerMatrix, inner: &MuellerMatrix) -> MuellerMatrix {
    let mut out = [[0.0; 4]; 4];
    for (r, row) in out.iter_mut().enumerate() {
        for (c, v) in row.iter_mut().enumerate() {
            *v = (0..4).map(|k| outer.m[r][k] * inner.m[k][c]).sum();
        }
    }
    MuellerMatrix::new(out)
}

/// Ideal linear polarizer with transmission axis at `axis_angle`.
pub fn polarizer_mueller(axis_angle: f64) -> MuellerMatrix {
    let horizontal = MuellerMatrix::new([
        [0.5, 0.5, 0.0, 0.0],
        [0.5, 0.5, 0.0, 0.0],
        [0.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, 0.0],
    ]);
    if axis_angle == 0.0 {
        return horizontal;
    }
    let twice = 2.0 * axis_angle;
    MuellerMatrix::rotation(-twice) * horizontal * MuellerMatrix::rotation(twice)
}

/// Lossless linear retarder. The first row and column are `(1, 0, 0, 0)`,
/// so intensity is preserved.
pub fn waveplate_mueller(spec: WaveplateSpec) -> MuellerMatrix {
    let (s2t, c2t) = (sin(2.0 * spec.theta), cos(2.0 * spec.theta));
    let (sd, cd) = (sin(spec.delta), cos(spec.delta));
    let a = c2t * c2t + cd * s2t * s2t;
    let b = c2t * s2t - c2t * cd * s2t;
    let c = cd * c2t * c2t + s2t * s2t;
    let d = s2t * sd;
    let e = c2t * sd;
    MuellerMatrix::new([
        [1.0, 0.0, 0.0, 0.0],
        [0.0, a, b, d],
        [0.0, b, c, -e],
        [0.0, -d, e, cd],
    ])
}

/// Quarter-wave plate at fast-axis angle `theta`.
pub fn quarter_wave_mueller(theta: f64) -> MuellerMatrix {
    waveplate_mueller(WaveplateSpec::quarter_wave(theta))
}

/// Jozsa fidelity between the (possibly mixed) states described by two
/// Stokes vectors. Both are normalized to unit intensity first.
pub fn state_fidelity(sa: StokesVector, sb: StokesVector) -> Result<f64, Error> {
    let a = unit_bloch(sa)?;
    let b = unit_bloch(sb)?;
    let dot = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
    let purity_a = (1.0 - norm2(a)).max(0.0);
    let purity_b = (1.0 - norm2(b)).max(0.0);
    let f = 0.5 * (1.0 + dot + sqrt(purity_a * purity_b));
    Ok(f.clamp(0.0, 1.0))
}

fn unit_bloch(s: StokesVector) -> Result<[f64; 3], Error> {
    if !(s.s0 > 0.0) {
        return Err(Error::NonPhysical("Stokes intensity s0 must be positive"));
    }
    let b = s.bloch();
    if 1.0 - norm2(b) < -PHYSICALITY_TOL {
        return Err(Error::NonPhysical("polarized intensity exceeds s0"));
    }
    Ok(b)
}

fn norm2(v: [f64; 3]) -> f64 {
    v[0] * v[0] + v[1] * v[1] + v[2] * v[2]
}
