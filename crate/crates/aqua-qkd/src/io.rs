//! Measurement CSV input and result files.

use std::fs;
use std::io::Read;
use std::path::Path;

use aqua_qkd_core::characterization::PolarimetricMeasurement;
use serde::Deserialize;

use crate::error::{AppError, Result};

#[derive(Debug, Deserialize)]
struct MeasurementRecord {
    theta1_rad: f64,
    theta2_rad: f64,
    intensity: f64,
}

/// Parse a `theta1_rad,theta2_rad,intensity` CSV.
pub fn read_measurements<R: Read>(source: R) -> Result<Vec<PolarimetricMeasurement>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(source);
    let headers = reader.headers().map_err(AppError::config)?.clone();
    if headers.iter().collect::<Vec<_>>() != ["theta1_rad", "theta2_rad", "intensity"] {
        return Err(AppError::config("measurement CSV header must be theta1_rad,theta2_rad,intensity"));
    }
    reader
        .deserialize::<MeasurementRecord>()
        .map(|r| {
            let r = r.map_err(|e| AppError::config(format!("measurement CSV: {e}")))?;
            Ok(PolarimetricMeasurement { theta1: r.theta1_rad, theta2: r.theta2_rad, intensity: r.intensity })
        })
        .collect()
}

pub fn read_measurements_file(path: &Path) -> Result<Vec<PolarimetricMeasurement>> {
    let file = fs::File::open(path).map_err(|e| AppError::io(path, e))?;
    read_measurements(file)
}

pub fn write_measurements(measurements: &[PolarimetricMeasurement]) -> String {
    let rows: Vec<Vec<crate::format::Cell>> = measurements
        .iter()
        .map(|m| [m.theta1, m.theta2, m.intensity].map(crate::format::Cell::Float).to_vec())
        .collect();
    crate::format::to_csv(&["theta1_rad", "theta2_rad", "intensity"], &rows).expect("in-memory CSV")
}

pub fn write_output(path: &Path, content: &str) -> Result<()> {
    fs::write(path, content).map_err(|e| AppError::io(path, e))
}
