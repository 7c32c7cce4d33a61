//! Experiment configuration schema.
//!
//! Frequencies are MHz, times ns, phases rad, coherence times µs. Unknown
//! keys are rejected everywhere.

use serde::{Deserialize, Serialize};
use stirap_core::gates::{detuned_preset, map_preset, resonant_stirap_preset};
use stirap_core::{Decoherence, DeviationAxis, DriveConfig, Level, RotationKind, SimOptions, StirapProtocol};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Campaign {
    Simulate,
    Calibrate,
    Tomography,
    Sweep,
    DeviceReport,
}

impl Campaign {
    pub fn name(self) -> &'static str {
        match self {
            Campaign::Simulate => "simulate",
            Campaign::Calibrate => "calibrate",
            Campaign::Tomography => "tomography",
            Campaign::Sweep => "sweep",
            Campaign::DeviceReport => "device-report",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub campaign: Campaign,
    /// Free-text description, written into every data file header.
    #[serde(default)]
    pub title: String,
    #[serde(default)]
    pub seed: u64,
    pub output_dir: Option<String>,
    #[serde(default)]
    pub protocol: ProtocolSpec,
    #[serde(default)]
    pub system: SystemSpec,
    pub simulate: Option<SimulateSpec>,
    pub calibrate: Option<CalibrateSpec>,
    pub tomography: Option<TomographySpec>,
    pub sweep: Option<SweepSpec>,
    pub device: Option<DeviceSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProtocolBase {
    Resonant,
    #[default]
    DetunedPi,
    DetunedHalfPi,
    /// Wider σ = 40 ns pulses used for amplitude–detuning maps.
    Map,
}

/// A built-in protocol with optional field overrides.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolSpec {
    #[serde(default)]
    pub base: ProtocolBase,
    pub amplitude_mhz: Option<f64>,
    pub pulse_duration_ns: Option<f64>,
    pub sigma_ns: Option<f64>,
    pub offset_ns: Option<f64>,
    pub single_photon_mhz: Option<f64>,
    pub two_photon_mhz: Option<f64>,
    pub counter_intuitive: Option<bool>,
    pub common_phase_rad: Option<f64>,
    pub differential_phase_rad: Option<f64>,
}

impl ProtocolSpec {
    pub fn build(&self) -> StirapProtocol {
        let mut p = match self.base {
            ProtocolBase::Resonant => resonant_stirap_preset(),
            ProtocolBase::DetunedPi => detuned_preset(RotationKind::Pi),
            ProtocolBase::DetunedHalfPi => detuned_preset(RotationKind::HalfPi),
            ProtocolBase::Map => map_preset(),
        };
        let set = |target: &mut f64, v: Option<f64>| {
            if let Some(v) = v {
                *target = v;
            }
        };
        set(&mut p.amplitude_mhz, self.amplitude_mhz);
        set(&mut p.pulse_duration_ns, self.pulse_duration_ns);
        set(&mut p.sigma_ns, self.sigma_ns);
        set(&mut p.offset_ns, self.offset_ns);
        set(&mut p.common_phase_rad, self.common_phase_rad);
        set(&mut p.differential_phase_rad, self.differential_phase_rad);
        if let Some(c) = self.counter_intuitive {
            p.counter_intuitive = c;
        }
        p.drive = DriveConfig::from_detunings(
            self.single_photon_mhz.unwrap_or(p.drive.single_photon_mhz()),
            self.two_photon_mhz.unwrap_or(p.drive.two_photon_mhz()),
        );
        p
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecoherenceKind {
    #[default]
    None,
    /// Measured device coherence times.
    Device,
    /// Times from `[system.coherence]`.
    Custom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    #[serde(default)]
    pub decoherence: DecoherenceKind,
    pub coherence: Option<Decoherence>,
    #[serde(default = "default_steps")]
    pub steps: usize,
    #[serde(default = "default_lindblad_step")]
    pub lindblad_step_ns: f64,
}

fn default_steps() -> usize {
    SimOptions::default().steps
}

fn default_lindblad_step() -> f64 {
    SimOptions::default().lindblad_step_ns
}

impl Default for SystemSpec {
    fn default() -> Self {
        Self {
            decoherence: DecoherenceKind::None,
            coherence: None,
            steps: default_steps(),
            lindblad_step_ns: default_lindblad_step(),
        }
    }
}

impl SystemSpec {
    pub fn decoherence(&self) -> Option<Decoherence> {
        match self.decoherence {
            DecoherenceKind::None => None,
            DecoherenceKind::Device => Some(Decoherence::device()),
            DecoherenceKind::Custom => self.coherence,
        }
    }

    pub fn options(&self) -> SimOptions {
        SimOptions { steps: self.steps, decoherence: self.decoherence(), lindblad_step_ns: self.lindblad_step_ns }
    }

    pub fn closed_options(&self) -> SimOptions {
        SimOptions { decoherence: None, ..self.options() }
    }
}

/// Uniform grid `points` values from `min` to `max` inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl GridSpec {
    pub fn values(&self) -> Vec<f64> {
        let n = self.points.max(2) - 1;
        (0..self.points).map(|k| self.min + (self.max - self.min) * k as f64 / n as f64).collect()
    }

    fn check(&self, key: &str) -> Result<(), CliError> {
        if self.points < 2 || !(self.min < self.max) || !self.min.is_finite() || !self.max.is_finite() {
            return Err(CliError::invalid(key, "needs min < max and at least 2 points"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSpec {
    pub initial_states: Vec<Level>,
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// Overlaps with the instantaneous eigenbasis (closed system only).
    #[serde(default)]
    pub eigen_overlaps: bool,
}

fn default_samples() -> usize {
    520
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrateSpec {
    pub rotation: RotationKind,
    pub amplitude: GridSpec,
    /// Common-phase sweep after the amplitude calibration (π/2 only).
    pub phase: Option<GridSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasurementSpec {
    #[serde(default)]
    pub alpha_g: f64,
    #[serde(default = "one")]
    pub alpha_0: f64,
    #[serde(default = "two")]
    pub alpha_1: f64,
    #[serde(default)]
    pub shot_noise_sigma: f64,
}

fn one() -> f64 {
    1.0
}

fn two() -> f64 {
    2.0
}

impl Default for MeasurementSpec {
    fn default() -> Self {
        Self { alpha_g: 0.0, alpha_0: 1.0, alpha_1: 2.0, shot_noise_sigma: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TomographySpec {
    /// Subset of `pi_from_0`, `pi_from_1`, `half_pi_from_0`, `half_pi_from_1`.
    pub targets: Option<Vec<String>>,
    #[serde(default)]
    pub measurement: MeasurementSpec,
    /// Systematic error on every pre-rotation angle, rad.
    #[serde(default)]
    pub rotation_angle_error: f64,
    pub pi_amplitude: GridSpec,
    pub half_pi_amplitude: GridSpec,
    pub phase: GridSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepKind {
    Map,
    Robustness,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub kind: SweepKind,
    // Map sweeps.
    pub delta: Option<GridSpec>,
    pub amplitude: Option<GridSpec>,
    /// Common-region tolerances.
    #[serde(default)]
    pub tolerances: Vec<f64>,
    // Robustness sweeps.
    #[serde(default)]
    pub rotations: Vec<RotationKind>,
    #[serde(default)]
    pub axes: Vec<DeviationAxis>,
    #[serde(default)]
    pub initial_states: Vec<Level>,
    pub deviation: Option<GridSpec>,
    /// Amplitude grid for the calibration preceding robustness sweeps.
    pub calibration: Option<GridSpec>,
    /// Common-phase grid for the π/2 calibration.
    pub phase: Option<GridSpec>,
    #[serde(default)]
    pub dynamical_baseline: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceSpec {
    #[serde(default = "default_levels")]
    pub levels: usize,
}

fn default_levels() -> usize {
    6
}

impl Default for DeviceSpec {
    fn default() -> Self {
        Self { levels: default_levels() }
    }
}

pub const TARGET_NAMES: [&str; 4] = ["pi_from_0", "pi_from_1", "half_pi_from_0", "half_pi_from_1"];

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let config: ExperimentConfig = toml::from_str(text).map_err(CliError::from_toml)?;
        config.validate()?;
        Ok(config)
    }

    /// Checks everything that serde cannot, before any computation runs.
    pub fn validate(&self) -> Result<(), CliError> {
        let sections = [
            ("simulate", self.simulate.is_some(), Campaign::Simulate),
            ("calibrate", self.calibrate.is_some(), Campaign::Calibrate),
            ("tomography", self.tomography.is_some(), Campaign::Tomography),
            ("sweep", self.sweep.is_some(), Campaign::Sweep),
            ("device", self.device.is_some(), Campaign::DeviceReport),
        ];
        for (key, present, owner) in sections {
            if present && owner != self.campaign {
                return Err(CliError::invalid(
                    key,
                    &format!("section is not used by campaign `{}`", self.campaign.name()),
                ));
            }
            if !present && owner == self.campaign && owner != Campaign::DeviceReport {
                return Err(CliError::invalid(key, "section is required for this campaign"));
            }
        }
        self.validate_system()?;
        let proto = self.protocol.build();
        proto.system(None).map_err(|e| CliError::invalid("protocol", &e.to_string()))?;
        match self.campaign {
            Campaign::Simulate => {
                let s = self.simulate.as_ref().expect("checked above");
                if s.initial_states.is_empty() {
                    return Err(CliError::invalid("simulate.initial_states", "must not be empty"));
                }
                if s.samples == 0 {
                    return Err(CliError::invalid("simulate.samples", "must be positive"));
                }
                if s.eigen_overlaps && self.system.decoherence().is_some() {
                    return Err(CliError::invalid("simulate.eigen_overlaps", "needs a closed system"));
                }
            }
            Campaign::Calibrate => {
                let c = self.calibrate.as_ref().expect("checked above");
                c.amplitude.check("calibrate.amplitude")?;
                if let Some(p) = &c.phase {
                    p.check("calibrate.phase")?;
                    if c.rotation != RotationKind::HalfPi {
                        return Err(CliError::invalid(
                            "calibrate.phase",
                            "phase calibration needs rotation = \"half_pi\"",
                        ));
                    }
                }
            }
            Campaign::Tomography => {
                let t = self.tomography.as_ref().expect("checked above");
                t.pi_amplitude.check("tomography.pi_amplitude")?;
                t.half_pi_amplitude.check("tomography.half_pi_amplitude")?;
                t.phase.check("tomography.phase")?;
                for name in t.targets.iter().flatten() {
                    if !TARGET_NAMES.contains(&name.as_str()) {
                        return Err(CliError::invalid("tomography.targets", &format!("unknown target `{name}`")));
                    }
                }
                let m = &t.measurement;
                stirap_core::MeasurementModel {
                    alpha_g: m.alpha_g,
                    alpha_0: m.alpha_0,
                    alpha_1: m.alpha_1,
                    shot_noise_sigma: m.shot_noise_sigma,
                }
                .validate()
                .map_err(|e| CliError::invalid("tomography.measurement", &e.to_string()))?;
            }
            Campaign::Sweep => self.validate_sweep()?,
            Campaign::DeviceReport => {
                let levels = self.device.clone().unwrap_or_default().levels;
                if levels < stirap_core::device::MIN_ORACLE_LEVELS {
                    return Err(CliError::invalid("device.levels", "needs at least 4 levels per mode"));
                }
            }
        }
        Ok(())
    }

    fn validate_system(&self) -> Result<(), CliError> {
        let s = &self.system;
        if s.steps == 0 {
            return Err(CliError::invalid("system.steps", "must be positive"));
        }
        if !(s.lindblad_step_ns > 0.0) {
            return Err(CliError::invalid("system.lindblad_step_ns", "must be positive"));
        }
        match (s.decoherence, &s.coherence) {
            (DecoherenceKind::Custom, None) => {
                return Err(CliError::invalid("system.coherence", "required when decoherence = \"custom\""))
            }
            (DecoherenceKind::Custom, Some(c)) => {
                c.validate().map_err(|e| CliError::invalid("system.coherence", &e.to_string()))?
            }
            (_, Some(_)) => {
                return Err(CliError::invalid("system.coherence", "only used when decoherence = \"custom\""))
            }
            _ => {}
        }
        Ok(())
    }

    fn validate_sweep(&self) -> Result<(), CliError> {
        let s = self.sweep.as_ref().expect("checked above");
        match s.kind {
            SweepKind::Map => {
                let delta = s.delta.as_ref().ok_or_else(|| CliError::invalid("sweep.delta", "required for maps"))?;
                let amp =
                    s.amplitude.as_ref().ok_or_else(|| CliError::invalid("sweep.amplitude", "required for maps"))?;
                delta.check("sweep.delta")?;
                amp.check("sweep.amplitude")?;
                if s.tolerances.iter().any(|t| !(*t >= 0.0)) {
                    return Err(CliError::invalid("sweep.tolerances", "must be non-negative"));
                }
            }
            SweepKind::Robustness => {
                for (key, empty) in [
                    ("sweep.rotations", s.rotations.is_empty()),
                    ("sweep.axes", s.axes.is_empty()),
                    ("sweep.initial_states", s.initial_states.is_empty()),
                ] {
                    if empty {
                        return Err(CliError::invalid(key, "must not be empty"));
                    }
                }
                if s.initial_states.contains(&Level::Ground) {
                    return Err(CliError::invalid("sweep.initial_states", "only \"0\" and \"1\" have gate targets"));
                }
                let dev = s.deviation.as_ref().ok_or_else(|| CliError::invalid("sweep.deviation", "required"))?;
                dev.check("sweep.deviation")?;
                let cal = s.calibration.as_ref().ok_or_else(|| CliError::invalid("sweep.calibration", "required"))?;
                cal.check("sweep.calibration")?;
                if s.rotations.contains(&RotationKind::HalfPi) {
                    let phase =
                        s.phase.as_ref().ok_or_else(|| CliError::invalid("sweep.phase", "required for half_pi"))?;
                    phase.check("sweep.phase")?;
                }
            }
        }
        Ok(())
    }
}
