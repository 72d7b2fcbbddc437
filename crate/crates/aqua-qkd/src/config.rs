//! JSON experiment configuration.
//!
//! Keys match the field names of the core types. Everything except the
//! scenario-specific inputs has a default, so a minimal config is
//! `{"scenario": "bb84-run"}`.

use std::fs;
use std::path::{Path, PathBuf};

use aqua_qkd_core::bb84::SessionConfig;
use aqua_qkd_core::transport::{BeamParams, ChannelParams};
use serde::{Deserialize, Serialize};

use crate::error::{AppError, Result};

/// Absorption-to-attenuation ratio of the simulated seawater (0.117 / 0.683).
pub const DEFAULT_ABSORPTION_RATIO: f64 = 0.117 / 0.683;

pub const DEFAULT_N_PHOTONS: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    MuellerEstimate,
    McChannel,
    Bb84Run,
    Sweep,
    JerlovExtrapolate,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::MuellerEstimate => "mueller-estimate",
            Scenario::McChannel => "mc-channel",
            Scenario::Bb84Run => "bb84-run",
            Scenario::Sweep => "sweep",
            Scenario::JerlovExtrapolate => "jerlov-extrapolate",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

/// Where a session takes its channel transmission from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransmissionSource {
    /// `exp(-attenuation · length)` of `parameters.channel`.
    #[default]
    Analytic,
    /// Received fraction of a `run_transport` execution with `n_photons`.
    MonteCarlo,
    /// `session.channel_transmission` as written.
    Config,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct JerlovParams {
    pub target_attenuation: f64,
    pub reference_attenuation: f64,
    pub reference_length: f64,
}

impl Default for JerlovParams {
    fn default() -> Self {
        Self { target_attenuation: 0.03, reference_attenuation: 0.68, reference_length: 2.37 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Parameters {
    pub channel: ChannelParams,
    pub beam: BeamParams,
    pub session: SessionConfig,
    pub n_photons: u64,
    pub transmission: TransmissionSource,
    /// CSV of polarimetric measurements, relative to the config file.
    pub measurements_path: Option<PathBuf>,
    pub jerlov: JerlovParams,
}

impl Default for Parameters {
    fn default() -> Self {
        Self {
            channel: ChannelParams::default(),
            beam: BeamParams::default(),
            session: SessionConfig::default(),
            n_photons: DEFAULT_N_PHOTONS,
            transmission: TransmissionSource::Analytic,
            measurements_path: None,
            jerlov: JerlovParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum SweepRepr {
    List(Vec<f64>),
    Full {
        attenuation: Vec<f64>,
        #[serde(default = "default_ratio")]
        absorption_ratio: f64,
    },
}

fn default_ratio() -> f64 {
    DEFAULT_ABSORPTION_RATIO
}

/// Attenuation grid (1/m); absorption follows as `absorption_ratio × attenuation`.
/// Written either as a bare list or as `{"attenuation": [...], "absorption_ratio": r}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "SweepRepr")]
pub struct Sweep {
    pub attenuation: Vec<f64>,
    pub absorption_ratio: f64,
}

impl From<SweepRepr> for Sweep {
    fn from(r: SweepRepr) -> Self {
        match r {
            SweepRepr::List(attenuation) => Sweep { attenuation, absorption_ratio: DEFAULT_ABSORPTION_RATIO },
            SweepRepr::Full { attenuation, absorption_ratio } => Sweep { attenuation, absorption_ratio },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: Option<Scenario>,
    #[serde(default)]
    pub parameters: Parameters,
    #[serde(default)]
    pub sweep: Option<Sweep>,
    #[serde(default)]
    pub output_path: Option<PathBuf>,
    #[serde(default)]
    pub output_format: Option<OutputFormat>,
    #[serde(default)]
    pub seed: u64,
    /// Directory that relative input paths resolve against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn invalid(what: &str, e: aqua_qkd_core::Error) -> AppError {
    AppError::config(format!("{what}: {e}"))
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(AppError::config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
        let mut cfg = Self::from_json(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn measurements_path(&self) -> Option<PathBuf> {
        self.parameters.measurements_path.as_ref().map(|p| self.base_dir.join(p))
    }

    /// Check the sections the scenario uses.
    pub fn validate(&self, scenario: Scenario) -> Result<()> {
        if let Some(s) = self.scenario {
            if s != scenario {
                return Err(AppError::config(format!(
                    "config is for scenario {}, not {}",
                    s.name(),
                    scenario.name()
                )));
            }
        }
        let p = &self.parameters;
        match scenario {
            Scenario::MuellerEstimate | Scenario::JerlovExtrapolate => {}
            Scenario::McChannel => {
                p.channel.validate().map_err(|e| invalid("channel", e))?;
                p.beam.validate().map_err(|e| invalid("beam", e))?;
                check_photons(p.n_photons)?;
            }
            Scenario::Bb84Run => {
                p.session.validate().map_err(|e| invalid("session", e))?;
                if p.transmission != TransmissionSource::Config {
                    p.channel.validate().map_err(|e| invalid("channel", e))?;
                }
                if p.transmission == TransmissionSource::MonteCarlo {
                    p.beam.validate().map_err(|e| invalid("beam", e))?;
                    check_photons(p.n_photons)?;
                }
            }
            Scenario::Sweep => {
                p.session.validate().map_err(|e| invalid("session", e))?;
                if p.transmission == TransmissionSource::Config {
                    return Err(AppError::config("sweep transmission must be analytic or monte_carlo"));
                }
                if p.transmission == TransmissionSource::MonteCarlo {
                    p.beam.validate().map_err(|e| invalid("beam", e))?;
                    check_photons(p.n_photons)?;
                }
                let sweep = self.sweep.as_ref().ok_or_else(|| AppError::config("sweep scenario needs a sweep grid"))?;
                sweep.validate()?;
                for &c in &sweep.attenuation {
                    let ch = ChannelParams { attenuation: c, absorption: sweep.absorption_ratio * c, ..p.channel };
                    ch.validate().map_err(|e| invalid("sweep point", e))?;
                }
            }
        }
        Ok(())
    }
}

fn check_photons(n: u64) -> Result<()> {
    if n == 0 {
        return Err(AppError::config("n_photons must be at least 1"));
    }
    Ok(())
}

impl Sweep {
    pub fn validate(&self) -> Result<()> {
        if self.attenuation.is_empty() {
            return Err(AppError::config("sweep grid is empty"));
        }
        if !self.attenuation.iter().all(|c| c.is_finite() && *c > 0.0) {
            return Err(AppError::config("sweep attenuation values must be positive"));
        }
        if !self.attenuation.windows(2).all(|w| w[0] < w[1]) {
            return Err(AppError::config("sweep attenuation values must be strictly increasing"));
        }
        if !(0.0..=1.0).contains(&self.absorption_ratio) {
            return Err(AppError::config("absorption_ratio must be in [0, 1]"));
        }
        Ok(())
    }
}
