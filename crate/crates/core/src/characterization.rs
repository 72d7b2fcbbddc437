//! Water-channel Mueller matrix estimation from polarimetric intensities.
//!
//! The polarimeter is `P2 · Q(θ2) · M_w · Q(θ1) · P1` with both polarizers
//! horizontal and an unpolarized source in front of `P1`. The detected
//! intensity is linear in the sixteen entries of `M_w`, so a grid of
//! `(θ1, θ2)` settings gives a linear system for the channel matrix.

use core::f64::consts::{FRAC_PI_4, FRAC_PI_8};

use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::linalg::{lstsq, Matrix};
use crate::polarization::{
    polarizer_mueller, quarter_wave_mueller, state_fidelity, MuellerMatrix, StokesVector,
};
use crate::Error;

/// Quarter-wave plate angles used at both transmitter and receiver.
pub const ANGLE_GRID: [f64; 4] = [0.0, FRAC_PI_8, FRAC_PI_4, 3.0 * FRAC_PI_8];

/// Condition numbers above this reject the measurement set.
pub const MAX_CONDITION_NUMBER: f64 = 1e8;

const INTENSITY_TOL: f64 = 1e-9;

/// The four BB84 states in the order H, V, +45°, −45°.
pub const BB84_STATES: [StokesVector; 4] = [
    StokesVector::HORIZONTAL,
    StokesVector::VERTICAL,
    StokesVector::DIAGONAL,
    StokesVector::ANTIDIAGONAL,
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolarimetricMeasurement {
    pub theta1: f64,
    pub theta2: f64,
    pub intensity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelMuellerEstimate {
    /// Normalized so that `matrix.m[0][0] == 1`.
    pub matrix: MuellerMatrix,
    pub condition_number: f64,
    pub residual_norm: f64,
}

/// Stokes vector leaving the transmitter QWP: `Q(θ1) · P1 · S_in`.
fn prepared_state(theta1: f64) -> [f64; 4] {
    (quarter_wave_mueller(theta1) * polarizer_mueller(0.0) * StokesVector::UNPOLARIZED).to_array()
}

/// Intensity row of the analyzer: first row of `P2 · Q(θ2)`.
fn analyzer_row(theta2: f64) -> [f64; 4] {
    (polarizer_mueller(0.0) * quarter_wave_mueller(theta2)).m[0]
}

/// Coefficients of the sixteen `M_w` entries (row-major) in the detected intensity.
pub fn design_row(theta1: f64, theta2: f64) -> [f64; 16] {
    let v = prepared_state(theta1);
    let r = analyzer_row(theta2);
    let mut row = [0.0; 16];
    for i in 0..4 {
        for j in 0..4 {
            row[4 * i + j] = r[i] * v[j];
        }
    }
    row
}

/// Intensity reaching the detector for channel `m_w` at the given plate angles.
pub fn predict_intensity(m_w: &MuellerMatrix, theta1: f64, theta2: f64) -> f64 {
    let v = StokesVector::from_array(prepared_state(theta1));
    let r = analyzer_row(theta2);
    let out = (*m_w * v).to_array();
    r.iter().zip(out).map(|(a, b)| a * b).sum()
}

/// Noise-free measurements of `m_w` over the full [`ANGLE_GRID`]², scaled by `scale`.
pub fn synthesize_measurements(m_w: &MuellerMatrix, scale: f64) -> Vec<PolarimetricMeasurement> {
    let mut out = Vec::with_capacity(16);
    for &theta1 in &ANGLE_GRID {
        for &theta2 in &ANGLE_GRID {
            out.push(PolarimetricMeasurement {
                theta1,
                theta2,
                intensity: scale * predict_intensity(m_w, theta1, theta2),
            });
        }
    }
    out
}

/// Least-squares estimate of `M_w` from intensity-only measurements.
pub fn estimate_mueller(measurements: &[PolarimetricMeasurement]) -> Result<ChannelMuellerEstimate, Error> {
    if measurements.iter().any(|m| !(m.intensity >= 0.0)) {
        return Err(Error::InvalidInput("intensities must be non-negative"));
    }
    let mut rows = Vec::with_capacity(16 * measurements.len());
    let mut rhs = Vec::with_capacity(measurements.len());
    for m in measurements {
        rows.extend_from_slice(&design_row(m.theta1, m.theta2));
        rhs.push(m.intensity);
    }
    solve(measurements.len(), rows, &rhs)
}

/// Estimate `M_w` from full Stokes readouts: each `(input, output)` pair
/// contributes four equations `output = M_w · input`.
pub fn estimate_mueller_from_stokes(pairs: &[(StokesVector, StokesVector)]) -> Result<ChannelMuellerEstimate, Error> {
    let mut rows = Vec::with_capacity(64 * pairs.len());
    let mut rhs = Vec::with_capacity(4 * pairs.len());
    for (input, output) in pairs {
        if input.s0 < 0.0 || output.s0 < 0.0 {
            return Err(Error::InvalidInput("Stokes intensities must be non-negative"));
        }
        let s_in = input.to_array();
        for (i, value) in output.to_array().into_iter().enumerate() {
            let mut row = [0.0; 16];
            row[4 * i..4 * i + 4].copy_from_slice(&s_in);
            rows.extend_from_slice(&row);
            rhs.push(value);
        }
    }
    solve(rhs.len(), rows, &rhs)
}

fn solve(n_rows: usize, rows: Vec<f64>, rhs: &[f64]) -> Result<ChannelMuellerEstimate, Error> {
    if n_rows < 16 {
        return Err(Error::IllConditioned { condition_number: f64::INFINITY });
    }
    let design = Matrix::from_rows(n_rows, 16, rows);
    let sol = lstsq(&design, rhs);
    if !(sol.condition_number <= MAX_CONDITION_NUMBER) {
        return Err(Error::IllConditioned { condition_number: sol.condition_number });
    }
    let mut flat = [0.0; 16];
    flat.copy_from_slice(&sol.x);
    let raw = MuellerMatrix::from_flat(&flat);
    if !(raw.m[0][0] > 0.0) {
        return Err(Error::InvalidInput("estimated m00 is not positive"));
    }
    Ok(ChannelMuellerEstimate {
        matrix: raw.normalized(),
        condition_number: sol.condition_number,
        residual_norm: sol.residual_norm,
    })
}

/// Ideal-analyzer intensities `(right, wrong)` for a BB84 state after the channel.
fn analyzer_split(m_w: &MuellerMatrix, state: StokesVector) -> Result<(f64, f64), Error> {
    let out = *m_w * state;
    let (right, wrong) = if state.s1 != 0.0 {
        let sign = state.s1.signum();
        (0.5 * (out.s0 + sign * out.s1), 0.5 * (out.s0 - sign * out.s1))
    } else {
        let sign = state.s2.signum();
        (0.5 * (out.s0 + sign * out.s2), 0.5 * (out.s0 - sign * out.s2))
    };
    if right < -INTENSITY_TOL || wrong < -INTENSITY_TOL || right + wrong <= 0.0 {
        return Err(Error::NonPhysical("channel produces negative analyzer intensity"));
    }
    Ok((right.max(0.0), wrong.max(0.0)))
}

/// Mean wrong-click probability over the four BB84 states caused by `m_w` alone.
pub fn qber_from_mueller(m_w: &MuellerMatrix) -> Result<f64, Error> {
    let mut total = 0.0;
    for state in BB84_STATES {
        let (right, wrong) = analyzer_split(m_w, state)?;
        total += wrong / (right + wrong);
    }
    Ok(total / 4.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FidelityReport {
    /// Fidelities for H, V, +45°, −45°.
    pub per_state: [f64; 4],
    pub mean: f64,
}

pub fn channel_fidelity_report(m_w: &MuellerMatrix) -> Result<FidelityReport, Error> {
    let mut per_state = [0.0; 4];
    for (f, state) in per_state.iter_mut().zip(BB84_STATES) {
        *f = state_fidelity(state, *m_w * state)?;
    }
    Ok(FidelityReport { per_state, mean: per_state.iter().sum::<f64>() / 4.0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polarization::WaveplateSpec;
    use proptest::prelude::*;

    /// Full train multiplied out explicitly.
    fn oracle_intensity(m_w: &MuellerMatrix, theta1: f64, theta2: f64) -> f64 {
        let p = polarizer_mueller(0.0);
        let system = p * quarter_wave_mueller(theta2) * *m_w * quarter_wave_mueller(theta1) * p;
        (system * StokesVector::UNPOLARIZED).s0
    }

    #[test]
    fn identity_channel_intensities() {
        let id = MuellerMatrix::IDENTITY;
        assert!((predict_intensity(&id, 0.0, 0.0) - 0.5).abs() < 1e-15);
        assert!((predict_intensity(&id, 0.0, FRAC_PI_4) - 0.25).abs() < 1e-15);
        assert!((oracle_intensity(&id, 0.0, 0.0) - 0.5).abs() < 1e-15);
        assert!((oracle_intensity(&id, 0.0, FRAC_PI_4) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn depolarizer_intensity_matches_train() {
        let dep = MuellerMatrix::diagonal([1.0, 0.0, 0.0, 0.0]);
        for &t1 in &ANGLE_GRID {
            for &t2 in &ANGLE_GRID {
                let p = predict_intensity(&dep, t1, t2);
                assert!((p - oracle_intensity(&dep, t1, t2)).abs() < 1e-15);
                assert!((p - 0.25).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn identity_round_trip() {
        let est = estimate_mueller(&synthesize_measurements(&MuellerMatrix::IDENTITY, 1.0)).unwrap();
        assert!(est.matrix.max_abs_diff(&MuellerMatrix::IDENTITY) < 1e-9);
        assert!(est.residual_norm < 1e-12);
        assert!(est.condition_number < MAX_CONDITION_NUMBER);
    }

    #[test]
    fn rotator_diattenuator_round_trip() {
        let diattenuator = MuellerMatrix::new([
            [1.0, 0.1, 0.0, 0.0],
            [0.1, 1.0, 0.0, 0.0],
            [0.0, 0.0, 0.995, 0.0],
            [0.0, 0.0, 0.0, 0.995],
        ])
        .scale(0.8);
        let m = MuellerMatrix::rotator(0.3) * diattenuator;
        let est = estimate_mueller(&synthesize_measurements(&m, 1234.0)).unwrap();
        assert!(est.matrix.max_abs_diff(&m.normalized()) < 1e-9);
    }

    #[test]
    fn weakly_depolarizing_tank_channel() {
        let m = MuellerMatrix::rotator(0.01) * MuellerMatrix::diagonal([1.0, 0.985, 0.98, 0.978]);
        let est = estimate_mueller(&synthesize_measurements(&m, 0.2)).unwrap();
        let e = est.matrix.m;
        let diag_min = (0..4).map(|i| e[i][i]).fold(f64::INFINITY, f64::min);
        let off_max = (0..4)
            .flat_map(|r| (0..4).filter(move |&c| c != r).map(move |c| (r, c)))
            .map(|(r, c)| e[r][c].abs())
            .fold(0.0, f64::max);
        assert!(diag_min > 0.976 && off_max < 0.093);
        assert!(channel_fidelity_report(&est.matrix).unwrap().mean >= 0.97);
    }

    #[test]
    fn rejects_negative_intensity() {
        let mut ms = synthesize_measurements(&MuellerMatrix::IDENTITY, 1.0);
        ms[3].intensity = -1.0;
        assert!(matches!(estimate_mueller(&ms), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn rejects_degenerate_angle_set() {
        let ms: Vec<_> = (0..16)
            .map(|k| PolarimetricMeasurement { theta1: 0.0, theta2: ANGLE_GRID[k % 4], intensity: 0.3 })
            .collect();
        assert!(matches!(estimate_mueller(&ms), Err(Error::IllConditioned { .. })));
        assert!(matches!(estimate_mueller(&ms[..8]), Err(Error::IllConditioned { .. })));
    }

    #[test]
    fn stokes_pairs_round_trip() {
        let m = MuellerMatrix::rotator(0.05) * MuellerMatrix::depolarizer(0.97);
        let inputs = [
            StokesVector::HORIZONTAL,
            StokesVector::VERTICAL,
            StokesVector::DIAGONAL,
            StokesVector::new(1.0, 0.0, 0.0, 1.0),
        ];
        let pairs: Vec<_> = inputs.iter().map(|&s| (s, m * s)).collect();
        let est = estimate_mueller_from_stokes(&pairs).unwrap();
        assert!(est.matrix.max_abs_diff(&m) < 1e-9);
        // H, V, D, A are linearly dependent: no circular component.
        let linear_only: Vec<_> = crate::characterization::BB84_STATES.iter().map(|&s| (s, m * s)).collect();
        assert!(estimate_mueller_from_stokes(&linear_only).is_err());
    }

    #[test]
    fn qber_examples() {
        assert_eq!(qber_from_mueller(&MuellerMatrix::IDENTITY).unwrap(), 0.0);
        let rot = MuellerMatrix::rotator(2f64.to_radians());
        let expect = 0.5 * (1.0 - 4f64.to_radians().cos());
        assert!((qber_from_mueller(&rot).unwrap() - expect).abs() < 1e-15);
        assert!((expect - 0.0012).abs() < 1e-4);
        let dep = MuellerMatrix::depolarizer(0.946);
        assert!((qber_from_mueller(&dep).unwrap() - 0.027).abs() < 1e-12);
    }

    #[test]
    fn qber_rejects_nonphysical() {
        let bad = MuellerMatrix::diagonal([1.0, 1.5, 1.0, 1.0]);
        assert!(matches!(qber_from_mueller(&bad), Err(Error::NonPhysical(_))));
    }

    #[test]
    fn fidelity_examples() {
        let r = channel_fidelity_report(&MuellerMatrix::IDENTITY).unwrap();
        assert_eq!(r.per_state, [1.0; 4]);
        let r = channel_fidelity_report(&MuellerMatrix::depolarizer(0.96)).unwrap();
        for f in r.per_state {
            assert!((f - 0.98).abs() < 1e-12);
        }
    }

    fn random_physical_mueller() -> impl Strategy<Value = MuellerMatrix> {
        (0.1f64..3.0, 0.0f64..1.0, 0.0f64..core::f64::consts::PI, 0.0f64..6.0, -1.0f64..1.0, 0.0f64..0.3)
            .prop_map(|(gain, d, theta, delta, rot, diat)| {
                let retarder = crate::polarization::waveplate_mueller(WaveplateSpec::new(theta, delta));
                let s = (1.0 - diat * diat).sqrt();
                let diattenuator = MuellerMatrix::new([
                    [1.0, diat, 0.0, 0.0],
                    [diat, 1.0, 0.0, 0.0],
                    [0.0, 0.0, s, 0.0],
                    [0.0, 0.0, 0.0, s],
                ]);
                (MuellerMatrix::rotator(rot) * retarder * MuellerMatrix::depolarizer(d) * diattenuator).scale(gain)
            })
    }

    proptest! {
        #[test]
        fn round_trip_random(m in random_physical_mueller()) {
            let est = estimate_mueller(&synthesize_measurements(&m, 1.0)).unwrap();
            prop_assert!(est.matrix.max_abs_diff(&m.normalized()) < 1e-9);
        }

        #[test]
        fn intensity_is_linear(a in random_physical_mueller(), b in random_physical_mueller(), t1 in 0.0f64..3.2, t2 in 0.0f64..3.2) {
            let (fa, fb) = (a.to_flat(), b.to_flat());
            let sum = MuellerMatrix::from_flat(&core::array::from_fn(|k| fa[k] + fb[k]));
            let lhs = predict_intensity(&sum, t1, t2);
            let rhs = predict_intensity(&a, t1, t2) + predict_intensity(&b, t1, t2);
            prop_assert!((lhs - rhs).abs() < 1e-12);
            prop_assert!((predict_intensity(&a, t1, t2) - oracle_intensity(&a, t1, t2)).abs() < 1e-12);
        }

        #[test]
        fn qber_scale_invariant(m in random_physical_mueller(), k in 0.01f64..100.0) {
            let q = qber_from_mueller(&m).unwrap();
            prop_assert!((q - qber_from_mueller(&m.scale(k)).unwrap()).abs() < 1e-12);
        }

        #[test]
        fn depolarizer_closed_forms(d in 0.0f64..=1.0) {
            let m = MuellerMatrix::depolarizer(d);
            prop_assert!((qber_from_mueller(&m).unwrap() - (1.0 - d) / 2.0).abs() < 1e-12);
            for f in channel_fidelity_report(&m).unwrap().per_state {
                prop_assert!((f - (1.0 + d) / 2.0).abs() < 1e-12);
            }
        }
    }
}
