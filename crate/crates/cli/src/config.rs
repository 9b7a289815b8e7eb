//! TOML scenario configuration.

use serde::Deserialize;

use bellsense::evolution::{DriveParams, PulseModel, RotationAngles, SequenceSpec, VectorField};
use bellsense::experiments::{Model, Scenario, SweepAxis};
use bellsense::fisher::NoiseSpec;
use bellsense::quantum_state::ProbeSpec;
use bellsense::readout::SpamModel;

use crate::error::CliError;
use crate::units::{number, quantity, Dim, Raw};

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigDocument {
    pub model: Option<ModelSection>,
    pub probe: Option<ProbeSection>,
    pub sequence: Option<SequenceSection>,
    pub target: Option<DriveSection>,
    pub control: Option<DriveSection>,
    pub spam: Option<SpamSection>,
    pub noise: Option<NoiseSection>,
    pub sweep: Option<SweepSection>,
    pub scaling: Option<ScalingSection>,
    pub optimize: Option<OptimizeSection>,
    pub compare: Option<CompareSection>,
    pub maps: Option<MapsSection>,
    pub ideal: Option<IdealSection>,
    pub projection: Option<ProjectionSection>,
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    NvDrive,
    IdealVectorField,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub kind: ModelKind,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeSection {
    /// Population of the polarized nuclear level, P.
    pub polarization: f64,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum RotationSpec {
    Named(String),
    Angles {
        a: Raw,
        b: Raw,
        /// Rotation angle in units of π.
        c: Raw,
    },
}

impl RotationSpec {
    pub fn resolve(&self) -> Result<RotationAngles, CliError> {
        match self {
            RotationSpec::Named(n) if n == "identity" => Ok(RotationAngles::identity()),
            RotationSpec::Named(n) if n == "uniform" => Ok(RotationAngles::uniform()),
            RotationSpec::Named(n) => Err(CliError::config(format!(
                "rotation \"{n}\" unknown (identity, uniform or {{a, b, c}})"
            ))),
            RotationSpec::Angles { a, b, c } => Ok(RotationAngles {
                a: quantity(a, Dim::Angle, "rotation.a")?,
                b: quantity(b, Dim::Angle, "rotation.b")?,
                c: number(c, "rotation.c")?,
            }),
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequenceSection {
    #[serde(default = "one")]
    pub loops: usize,
    pub dwell: Raw,
    pub hyperfine: Raw,
    pub rotation: Option<RotationSpec>,
    /// Rabi frequency of finite-duration π pulses; instantaneous when absent.
    pub pulse_rabi: Option<Raw>,
    #[serde(default = "yes")]
    pub nuclear_phase_correction: bool,
}

fn one() -> usize {
    1
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriveSection {
    pub omega: Raw,
    pub delta: Raw,
    pub phi: Raw,
}

impl DriveSection {
    fn resolve(&self, name: &str) -> Result<DriveParams, CliError> {
        Ok(DriveParams::new(
            quantity(&self.omega, Dim::Frequency, &format!("{name}.omega"))?,
            quantity(&self.delta, Dim::Frequency, &format!("{name}.delta"))?,
            quantity(&self.phi, Dim::Angle, &format!("{name}.phi"))?,
        )?)
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpamSection {
    pub zeta: f64,
    pub gamma: f64,
    pub eta: f64,
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseKind {
    Averaged,
    Projection,
    SingleShot,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    pub kind: NoiseKind,
    pub sigma: Option<f64>,
    pub shots: Option<u64>,
    pub epsilon: Option<f64>,
    /// Adds the multinomial term of this many shots to averaged noise.
    pub projection_shots: Option<u64>,
}

impl NoiseSection {
    pub fn resolve(&self) -> Result<NoiseSpec, CliError> {
        let need = |v: Option<f64>, key: &str| {
            v.ok_or_else(|| CliError::config(format!("noise.{key} is required")))
        };
        let shots = || {
            self.shots
                .ok_or_else(|| CliError::config("noise.shots is required"))
        };
        let stray = |bad: bool, key: &str| {
            if bad {
                Err(CliError::config(format!(
                    "noise.{key} does not apply to {:?} noise",
                    self.kind
                )))
            } else {
                Ok(())
            }
        };
        let spec = match self.kind {
            NoiseKind::Averaged => {
                stray(self.shots.is_some(), "shots")?;
                stray(self.epsilon.is_some(), "epsilon")?;
                NoiseSpec::Averaged {
                    sigma: need(self.sigma, "sigma")?,
                    projection_shots: self.projection_shots,
                }
            }
            NoiseKind::Projection => {
                stray(self.sigma.is_some(), "sigma")?;
                stray(self.epsilon.is_some(), "epsilon")?;
                stray(self.projection_shots.is_some(), "projection_shots")?;
                NoiseSpec::QuantumProjection { n: shots()? }
            }
            NoiseKind::SingleShot => {
                stray(self.sigma.is_some(), "sigma")?;
                stray(self.projection_shots.is_some(), "projection_shots")?;
                NoiseSpec::SingleShot {
                    n: shots()?,
                    epsilon: need(self.epsilon, "epsilon")?,
                }
            }
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum AxisName {
    Omega,
    Delta,
    Phi,
    RotationFraction,
}

impl AxisName {
    pub fn axis(self) -> SweepAxis {
        match self {
            AxisName::Omega => SweepAxis::Omega,
            AxisName::Delta => SweepAxis::Delta,
            AxisName::Phi => SweepAxis::Phi,
            AxisName::RotationFraction => SweepAxis::RotationFraction,
        }
    }

    fn read(self, raw: &Raw, key: &str) -> Result<f64, CliError> {
        match self {
            AxisName::Omega | AxisName::Delta => quantity(raw, Dim::Frequency, key),
            AxisName::Phi => quantity(raw, Dim::Angle, key),
            AxisName::RotationFraction => number(raw, key),
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub axis: AxisName,
    /// Explicit grid; alternative to start/stop/points.
    pub values: Option<Vec<Raw>>,
    pub start: Option<Raw>,
    pub stop: Option<Raw>,
    pub points: Option<usize>,
}

impl SweepSection {
    /// Grid in internal units.
    pub fn grid(&self) -> Result<Vec<f64>, CliError> {
        let grid = match (&self.values, &self.start, &self.stop, self.points) {
            (Some(v), None, None, None) => v
                .iter()
                .enumerate()
                .map(|(k, r)| self.axis.read(r, &format!("sweep.values[{k}]")))
                .collect::<Result<_, _>>()?,
            (None, Some(a), Some(b), Some(n)) => {
                let (a, b) = (
                    self.axis.read(a, "sweep.start")?,
                    self.axis.read(b, "sweep.stop")?,
                );
                match n {
                    0 => Vec::new(),
                    1 => vec![a],
                    _ => (0..n)
                        .map(|k| a + (b - a) * k as f64 / (n - 1) as f64)
                        .collect(),
                }
            }
            _ => {
                return Err(CliError::config(
                    "sweep needs either `values` or all of `start`, `stop`, `points`",
                ))
            }
        };
        if grid.is_empty() {
            return Err(CliError::config("sweep grid is empty"));
        }
        Ok(grid)
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalingSection {
    pub loops: Vec<usize>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizeSection {
    pub sigma0: f64,
    pub shots: u64,
    pub time: Raw,
    pub starts: usize,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareSection {
    pub sigma0: f64,
    pub shots: u64,
    pub time: Raw,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapsSection {
    /// Field magnitudes B_max·k/(points+1), k = 1..points, plus B = 0 when `include_zero`.
    pub b_max: Raw,
    pub t_max: Raw,
    pub points: usize,
    #[serde(default)]
    pub include_zero: bool,
    pub alpha: Raw,
    pub beta: Raw,
    pub rotation: Option<RotationSpec>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdealSection {
    pub points: usize,
    pub b_min: Raw,
    pub b_max: Raw,
    pub t_min: Raw,
    pub t_max: Raw,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProjectionSection {
    pub loops: Vec<usize>,
    pub shots: u64,
    pub sigma: f64,
}

fn require<'a, T>(section: &'a Option<T>, name: &str) -> Result<&'a T, CliError> {
    section
        .as_ref()
        .ok_or_else(|| CliError::config(format!("missing [{name}] section")))
}

impl ConfigDocument {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::config(e.message().to_string()))
    }

    pub fn section<'a, T>(&self, field: &'a Option<T>, name: &str) -> Result<&'a T, CliError> {
        require(field, name)
    }

    pub fn noise(&self) -> Result<NoiseSpec, CliError> {
        require(&self.noise, "noise")?.resolve()
    }

    /// Builds the scenario from model, probe, sequence, target, optional control, spam and noise.
    pub fn scenario(&self) -> Result<Scenario, CliError> {
        let model = match require(&self.model, "model")?.kind {
            ModelKind::NvDrive => Model::NvDrive,
            ModelKind::IdealVectorField => Model::IdealVectorField,
        };
        let probe = ProbeSpec::new(require(&self.probe, "probe")?.polarization)?;
        let seq = require(&self.sequence, "sequence")?;
        let target = require(&self.target, "target")?.resolve("target")?;
        let dwell = quantity(&seq.dwell, Dim::Time, "sequence.dwell")?;
        let hyperfine = quantity(&seq.hyperfine, Dim::Frequency, "sequence.hyperfine")?;
        let mut sequence = match &self.control {
            None => SequenceSpec::operating_at(target, seq.loops, dwell, hyperfine)?,
            Some(c) => {
                let control = c.resolve("control")?;
                let operating = bellsense::evolution::derive_control(control);
                SequenceSpec::operating_at(operating, seq.loops, dwell, hyperfine)?
            }
        };
        if let Some(r) = &seq.rotation {
            sequence.rotation = r.resolve()?;
        }
        if let Some(rabi) = &seq.pulse_rabi {
            sequence.pulses = PulseModel::FiniteDuration {
                rabi: quantity(rabi, Dim::Frequency, "sequence.pulse_rabi")?,
            };
        }
        sequence.nuclear_phase_correction = seq.nuclear_phase_correction;
        let spam = match &self.spam {
            Some(s) => Some(SpamModel::new(
                probe.polarization_population,
                s.zeta,
                s.gamma,
                s.eta,
            )?),
            None => None,
        };
        if spam.is_some() && model != Model::NvDrive {
            return Err(CliError::config(
                "[spam] applies only to the nv-drive model",
            ));
        }
        Ok(Scenario::new(
            model,
            probe,
            sequence,
            target,
            spam,
            self.noise()?,
        )?)
    }
}

/// Unit field direction helper for map angles.
pub fn map_angles(maps: &MapsSection) -> Result<(f64, f64), CliError> {
    let alpha = quantity(&maps.alpha, Dim::Angle, "maps.alpha")?;
    let beta = quantity(&maps.beta, Dim::Angle, "maps.beta")?;
    VectorField::new(1.0, alpha, beta)?;
    Ok((alpha, beta))
}
