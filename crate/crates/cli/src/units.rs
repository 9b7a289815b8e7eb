//! Quantities with units at the configuration boundary.
//!
//! Frequencies are given in (2π)×MHz and stored as rad/µs, times are stored
//! in µs and angles in radians.

use std::f64::consts::{PI, TAU};

use serde::Deserialize;

use crate::error::CliError;

/// A raw TOML value that is either a bare number or a "value unit" string.
#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum Raw {
    Number(f64),
    Text(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Dim {
    Frequency,
    Time,
    Angle,
}

impl Dim {
    fn accepted(self) -> &'static str {
        match self {
            Dim::Frequency => "GHz, MHz, kHz",
            Dim::Time => "ms, us, µs, ns",
            Dim::Angle => "deg, rad",
        }
    }

    fn scale(self, unit: &str) -> Option<f64> {
        match (self, unit) {
            (Dim::Frequency, "GHz") => Some(TAU * 1e3),
            (Dim::Frequency, "MHz") => Some(TAU),
            (Dim::Frequency, "kHz") => Some(TAU * 1e-3),
            (Dim::Time, "ms") => Some(1e3),
            (Dim::Time, "us" | "µs") => Some(1.0),
            (Dim::Time, "ns") => Some(1e-3),
            (Dim::Angle, "deg" | "°") => Some(PI / 180.0),
            (Dim::Angle, "rad") => Some(1.0),
            _ => None,
        }
    }
}

/// Converts `raw` to internal units; a unit is mandatory.
pub fn quantity(raw: &Raw, dim: Dim, key: &str) -> Result<f64, CliError> {
    let text = match raw {
        Raw::Number(x) => {
            return Err(CliError::config(format!(
                "`{key}` = {x} needs a unit ({})",
                dim.accepted()
            )));
        }
        Raw::Text(t) => t.trim(),
    };
    let split = text
        .find(|ch: char| ch.is_alphabetic() || ch == 'µ' || ch == '°')
        .ok_or_else(|| {
            CliError::config(format!(
                "`{key}` = \"{text}\" needs a unit ({})",
                dim.accepted()
            ))
        })?;
    let (num, unit) = (text[..split].trim(), text[split..].trim());
    let value: f64 = num
        .parse()
        .map_err(|_| CliError::config(format!("`{key}`: cannot read a number from \"{text}\"")))?;
    if !value.is_finite() {
        return Err(CliError::config(format!("`{key}` must be finite")));
    }
    let scale = dim.scale(unit).ok_or_else(|| {
        CliError::config(format!(
            "`{key}`: unit \"{unit}\" not accepted (expected {})",
            dim.accepted()
        ))
    })?;
    Ok(value * scale)
}

/// Reads a dimensionless value.
pub fn number(raw: &Raw, key: &str) -> Result<f64, CliError> {
    match raw {
        Raw::Number(x) if x.is_finite() => Ok(*x),
        Raw::Number(_) => Err(CliError::config(format!("`{key}` must be finite"))),
        Raw::Text(t) => t
            .trim()
            .parse()
            .map_err(|_| CliError::config(format!("`{key}` is dimensionless, got \"{t}\""))),
    }
}

pub fn to_mhz(omega: f64) -> f64 {
    omega / TAU
}

pub fn to_deg(angle: f64) -> f64 {
    angle.to_degrees()
}
