//! Scenario dispatch.

use aqua_qkd_core::bb84::{run_session, SessionConfig, SessionStats};
use aqua_qkd_core::characterization::{estimate_mueller, synthesize_measurements, ChannelMuellerEstimate};
use aqua_qkd_core::transport::{ChannelParams, TransportStats};
use aqua_qkd_core::Error;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, OutputFormat, Parameters, Scenario, Sweep, TransmissionSource};
use crate::error::{AppError, Result};
use crate::format::{to_csv, to_json, Cell};
use crate::io::read_measurements_file;
use crate::parallel::run_transport_parallel;

pub const SWEEP_CSV_HEADER: [&str; 7] = [
    "attenuation_per_m",
    "absorption_per_m",
    "transmission",
    "qber",
    "sifted_rate_bps",
    "secure_rate_bps",
    "leaked_bits",
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub attenuation: f64,
    pub absorption: f64,
    pub transmission: f64,
    pub qber: f64,
    pub sifted_rate: f64,
    pub secure_rate: f64,
    pub leaked_bits: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JerlovReport {
    pub target_attenuation: f64,
    pub reference_attenuation: f64,
    pub reference_length: f64,
    pub equivalent_length: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Report {
    Mueller(ChannelMuellerEstimate),
    Transport(TransportStats),
    Session(SessionStats),
    Sweep(Vec<SweepRow>),
    Jerlov(JerlovReport),
}

/// Length of water with the same optical depth as `reference_attenuation × reference_length`.
pub fn jerlov_extrapolate(target_attenuation: f64, reference_attenuation: f64, reference_length: f64) -> Result<f64, Error> {
    if !(target_attenuation > 0.0) {
        return Err(Error::InvalidParameter("target attenuation must be positive"));
    }
    Ok(reference_attenuation * reference_length / target_attenuation)
}

fn transmission(p: &Parameters, channel: &ChannelParams, seed: u64) -> Result<f64> {
    Ok(match p.transmission {
        TransmissionSource::Analytic => channel.ballistic_transmission(),
        TransmissionSource::MonteCarlo => {
            let stats = run_transport_parallel(channel, &p.beam, p.n_photons, seed)?;
            stats.received as f64 / stats.launched as f64
        }
        TransmissionSource::Config => p.session.channel_transmission,
    })
}

fn session_for(p: &Parameters, channel_transmission: f64, seed: u64) -> SessionConfig {
    SessionConfig { channel_transmission, seed, ..p.session.clone() }
}

/// One row per grid point, in grid order. Every point shares the seed, so
/// the pulse-level randomness is common across the sweep.
pub fn run_sweep(p: &Parameters, sweep: &Sweep, seed: u64) -> Result<Vec<SweepRow>> {
    sweep
        .attenuation
        .par_iter()
        .map(|&attenuation| {
            let channel = ChannelParams { attenuation, absorption: sweep.absorption_ratio * attenuation, ..p.channel };
            let t = transmission(p, &channel, seed)?;
            let (stats, _) = run_session(&session_for(p, t, seed))?;
            Ok(SweepRow {
                attenuation,
                absorption: channel.absorption,
                transmission: t,
                qber: stats.qber,
                sifted_rate: stats.sifted_rate,
                secure_rate: stats.secure_rate,
                leaked_bits: stats.leaked_bits,
            })
        })
        .collect()
}

pub fn run_scenario(scenario: Scenario, cfg: &ExperimentConfig) -> Result<Report> {
    cfg.validate(scenario)?;
    let p = &cfg.parameters;
    let seed = cfg.seed;
    Ok(match scenario {
        Scenario::MuellerEstimate => {
            let measurements = match cfg.measurements_path() {
                Some(path) => read_measurements_file(&path)?,
                None => synthesize_measurements(&p.session.channel_mueller, 1.0),
            };
            Report::Mueller(estimate_mueller(&measurements)?)
        }
        Scenario::McChannel => Report::Transport(run_transport_parallel(&p.channel, &p.beam, p.n_photons, seed)?),
        Scenario::Bb84Run => {
            let t = transmission(p, &p.channel, seed)?;
            let (stats, _) = run_session(&session_for(p, t, seed))?;
            Report::Session(stats)
        }
        Scenario::Sweep => Report::Sweep(run_sweep(p, cfg.sweep.as_ref().expect("validated"), seed)?),
        Scenario::JerlovExtrapolate => {
            let j = p.jerlov;
            let equivalent_length = jerlov_extrapolate(j.target_attenuation, j.reference_attenuation, j.reference_length)?;
            Report::Jerlov(JerlovReport {
                target_attenuation: j.target_attenuation,
                reference_attenuation: j.reference_attenuation,
                reference_length: j.reference_length,
                equivalent_length,
            })
        }
    })
}

impl Report {
    pub fn default_format(&self) -> OutputFormat {
        match self {
            Report::Sweep(_) => OutputFormat::Csv,
            _ => OutputFormat::Json,
        }
    }

    pub fn render(&self, format: OutputFormat) -> Result<String> {
        match format {
            OutputFormat::Json => self.to_json(),
            OutputFormat::Csv => self.to_csv(),
        }
        .map_err(AppError::Encode)
    }

    fn to_json(&self) -> Result<String, String> {
        match self {
            Report::Mueller(m) => to_json(m),
            Report::Transport(t) => to_json(t),
            Report::Session(s) => to_json(s),
            Report::Sweep(rows) => to_json(rows),
            Report::Jerlov(j) => to_json(j),
        }
        .map_err(|e| e.to_string())
    }

    fn to_csv(&self) -> Result<String, String> {
        let (header, rows): (Vec<String>, Vec<Vec<Cell>>) = match self {
            Report::Mueller(m) => {
                let mut header: Vec<String> = (0..16).map(|k| format!("m{}{}", k / 4, k % 4)).collect();
                header.extend(["condition_number".into(), "residual_norm".into()]);
                let mut row: Vec<Cell> = m.matrix.to_flat().iter().map(|&x| Cell::Float(x)).collect();
                row.extend([Cell::Float(m.condition_number), Cell::Float(m.residual_norm)]);
                (header, vec![row])
            }
            Report::Transport(t) => (
                names(&[
                    "launched",
                    "received",
                    "received_unscattered",
                    "received_scattered",
                    "ballistic_transmission",
                    "scattered_fraction_of_received",
                ]),
                vec![vec![
                    Cell::Count(t.launched),
                    Cell::Count(t.received),
                    Cell::Count(t.received_unscattered),
                    Cell::Count(t.received_scattered),
                    Cell::Float(t.ballistic_transmission),
                    Cell::Float(t.scattered_fraction_of_received),
                ]],
            ),
            Report::Session(s) => (
                names(&["qber", "sifted_rate", "secure_rate", "detected_pulses", "sifted_bits", "wrong_bits", "leaked_bits"]),
                vec![vec![
                    Cell::Float(s.qber),
                    Cell::Float(s.sifted_rate),
                    Cell::Float(s.secure_rate),
                    Cell::Count(s.detected_pulses),
                    Cell::Count(s.sifted_bits),
                    Cell::Count(s.wrong_bits),
                    Cell::Count(s.leaked_bits),
                ]],
            ),
            Report::Sweep(rows) => (
                names(&SWEEP_CSV_HEADER),
                rows.iter()
                    .map(|r| {
                        vec![
                            Cell::Float(r.attenuation),
                            Cell::Float(r.absorption),
                            Cell::Float(r.transmission),
                            Cell::Float(r.qber),
                            Cell::Float(r.sifted_rate),
                            Cell::Float(r.secure_rate),
                            Cell::Count(r.leaked_bits),
                        ]
                    })
                    .collect(),
            ),
            Report::Jerlov(j) => (
                names(&["target_attenuation", "reference_attenuation", "reference_length", "equivalent_length"]),
                vec![vec![
                    Cell::Float(j.target_attenuation),
                    Cell::Float(j.reference_attenuation),
                    Cell::Float(j.reference_length),
                    Cell::Float(j.equivalent_length),
                ]],
            ),
        };
        let header: Vec<&str> = header.iter().map(String::as_str).collect();
        to_csv(&header, &rows).map_err(|e| e.to_string())
    }
}

fn names(list: &[&str]) -> Vec<String> {
    list.iter().map(|s| s.to_string()).collect()
}
