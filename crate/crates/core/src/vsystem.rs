//! The driven V-type three-level system and its rotating-frame Hamiltonian.
//!
//! Levels are ordered (|0⟩, |g⟩, |1⟩). The pump couples |g⟩↔|0⟩ with
//! envelope `Ω₀(t)`, the Stokes pulse couples |g⟩↔|1⟩ with `Ω₁(t)`:
//!
//! ```text
//! H(t) = ½ · | 0     Ω₀    0  |
//!            | Ω₀*   2Δ    Ω₁ |
//!            | 0     Ω₁*   2δ |
//! ```

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{real, CMatrix3, CVector3, C64, ZERO};
use crate::units::angular;

/// Index of a basis level in the (|0⟩, |g⟩, |1⟩) ordering.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Level {
    #[serde(rename = "0")]
    Zero,
    #[serde(rename = "g")]
    Ground,
    #[serde(rename = "1")]
    One,
}

impl Level {
    pub const ALL: [Level; 3] = [Level::Zero, Level::Ground, Level::One];

    pub fn index(self) -> usize {
        match self {
            Level::Zero => 0,
            Level::Ground => 1,
            Level::One => 2,
        }
    }

    pub fn ket(self) -> CVector3 {
        let mut v = CVector3::zeros();
        v[self.index()] = real(1.0);
        v
    }

    pub fn label(self) -> &'static str {
        match self {
            Level::Zero => "0",
            Level::Ground => "g",
            Level::One => "1",
        }
    }

    /// The other qubit level (|0⟩ ↔ |1⟩); the ground state maps to itself.
    pub fn partner(self) -> Level {
        match self {
            Level::Zero => Level::One,
            Level::One => Level::Zero,
            Level::Ground => Level::Ground,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("pulse sigma must be positive, got {0} ns")]
    NonPositiveSigma(f64),
    #[error("pulse window must satisfy start < center < end, got start={start} center={center} end={end} (ns)")]
    BadWindow { start: f64, center: f64, end: f64 },
    #[error("peak Rabi frequency must be non-negative, got {0} MHz (carry sign in the phase)")]
    NegativePeak(f64),
    #[error("decoherence time `{name}` must be positive, got {value} µs")]
    NonPositiveTime { name: &'static str, value: f64 },
    #[error("unphysical decoherence for level |{level}⟩: T2 = {t2} µs exceeds 2·T1 = {} µs", 2.0 * t1)]
    T2ExceedsTwiceT1 { level: &'static str, t1: f64, t2: f64 },
}

/// One truncated Gaussian drive envelope.
///
/// `peak_rabi_mhz` is the Rabi frequency `Ω/2π` at the pulse center, so the
/// Hamiltonian coupling at the peak is `½·2π·peak_rabi_mhz` rad/µs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseEnvelope {
    peak_rabi_mhz: f64,
    center_ns: f64,
    sigma_ns: f64,
    phase_rad: f64,
    window_start_ns: f64,
    window_end_ns: f64,
}

impl PulseEnvelope {
    pub fn new(
        peak_rabi_mhz: f64,
        center_ns: f64,
        sigma_ns: f64,
        phase_rad: f64,
        window_start_ns: f64,
        window_end_ns: f64,
    ) -> Result<Self, ModelError> {
        if !(sigma_ns > 0.0) {
            return Err(ModelError::NonPositiveSigma(sigma_ns));
        }
        if !(window_start_ns < center_ns && center_ns < window_end_ns) {
            return Err(ModelError::BadWindow { start: window_start_ns, center: center_ns, end: window_end_ns });
        }
        if !(peak_rabi_mhz >= 0.0) {
            return Err(ModelError::NegativePeak(peak_rabi_mhz));
        }
        Ok(Self { peak_rabi_mhz, center_ns, sigma_ns, phase_rad, window_start_ns, window_end_ns })
    }

    /// Gaussian centered in a window `[start, start + duration]`.
    pub fn centered(
        peak_rabi_mhz: f64,
        window_start_ns: f64,
        duration_ns: f64,
        sigma_ns: f64,
        phase_rad: f64,
    ) -> Result<Self, ModelError> {
        Self::new(
            peak_rabi_mhz,
            window_start_ns + 0.5 * duration_ns,
            sigma_ns,
            phase_rad,
            window_start_ns,
            window_start_ns + duration_ns,
        )
    }

    pub fn peak_rabi_mhz(&self) -> f64 {
        self.peak_rabi_mhz
    }
    pub fn center_ns(&self) -> f64 {
        self.center_ns
    }
    pub fn sigma_ns(&self) -> f64 {
        self.sigma_ns
    }
    pub fn phase_rad(&self) -> f64 {
        self.phase_rad
    }
    pub fn window_ns(&self) -> (f64, f64) {
        (self.window_start_ns, self.window_end_ns)
    }

    pub fn with_peak_rabi(mut self, peak_rabi_mhz: f64) -> Result<Self, ModelError> {
        if !(peak_rabi_mhz >= 0.0) {
            return Err(ModelError::NegativePeak(peak_rabi_mhz));
        }
        self.peak_rabi_mhz = peak_rabi_mhz;
        Ok(self)
    }

    pub fn with_phase(mut self, phase_rad: f64) -> Self {
        self.phase_rad = phase_rad;
        self
    }

    pub fn contains(&self, t_ns: f64) -> bool {
        t_ns >= self.window_start_ns && t_ns <= self.window_end_ns
    }

    /// Real envelope magnitude in MHz (zero outside the window).
    pub fn magnitude(&self, t_ns: f64) -> f64 {
        if !self.contains(t_ns) {
            return 0.0;
        }
        let x = (t_ns - self.center_ns) / self.sigma_ns;
        self.peak_rabi_mhz * (-0.5 * x * x).exp()
    }

    /// Closed-form time derivative of [`magnitude`](Self::magnitude), MHz/ns.
    pub fn magnitude_derivative(&self, t_ns: f64) -> f64 {
        -(t_ns - self.center_ns) / (self.sigma_ns * self.sigma_ns) * self.magnitude(t_ns)
    }

    /// Complex envelope `Ω(t)·e^{iβ}` in MHz.
    pub fn value(&self, t_ns: f64) -> C64 {
        C64::from_polar(self.magnitude(t_ns), self.phase_rad)
    }

    /// Jump at the truncation edges relative to the peak,
    /// `exp(-(w/2σ)²/2)` for a centered window of width `w`.
    pub fn edge_discontinuity(&self) -> f64 {
        let half = (self.center_ns - self.window_start_ns).min(self.window_end_ns - self.center_ns);
        let x = half / self.sigma_ns;
        (-0.5 * x * x).exp()
    }
}

/// Free function form of [`PulseEnvelope::value`].
pub fn envelope_value(pulse: &PulseEnvelope, t_ns: f64) -> C64 {
    pulse.value(t_ns)
}

/// Pump and Stokes detunings; everything else is derived.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveConfig {
    pub delta_p_mhz: f64,
    pub delta_s_mhz: f64,
}

impl DriveConfig {
    pub fn new(delta_p_mhz: f64, delta_s_mhz: f64) -> Self {
        Self { delta_p_mhz, delta_s_mhz }
    }

    /// Build from single-photon `Δ` and two-photon `δ` detunings.
    pub fn from_detunings(single_photon_mhz: f64, two_photon_mhz: f64) -> Self {
        Self {
            delta_p_mhz: single_photon_mhz + 0.5 * two_photon_mhz,
            delta_s_mhz: single_photon_mhz - 0.5 * two_photon_mhz,
        }
    }

    pub fn resonant() -> Self {
        Self::new(0.0, 0.0)
    }

    /// `Δ = (Δp + Δs)/2`.
    pub fn single_photon_mhz(&self) -> f64 {
        0.5 * (self.delta_p_mhz + self.delta_s_mhz)
    }

    /// `δ = Δp − Δs`.
    pub fn two_photon_mhz(&self) -> f64 {
        self.delta_p_mhz - self.delta_s_mhz
    }

    pub fn with_single_photon(self, single_photon_mhz: f64) -> Self {
        Self::from_detunings(single_photon_mhz, self.two_photon_mhz())
    }

    pub fn with_two_photon(self, two_photon_mhz: f64) -> Self {
        Self::from_detunings(self.single_photon_mhz(), two_photon_mhz)
    }
}

/// Energy relaxation and Ramsey times of the two excited levels, µs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Decoherence {
    pub t1_0_us: f64,
    pub t1_1_us: f64,
    pub t2_0_us: f64,
    pub t2_1_us: f64,
}

impl Decoherence {
    /// Measured device coherences: |0⟩ lives in the bright mode
    /// (T1 = 64 µs, T2 = 106 µs), |1⟩ in the dark mode (T1 = 88 µs, T2 = 98 µs).
    pub fn device() -> Self {
        Self { t1_0_us: 64.0, t1_1_us: 88.0, t2_0_us: 106.0, t2_1_us: 98.0 }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        for (name, value) in
            [("t1_0_us", self.t1_0_us), ("t1_1_us", self.t1_1_us), ("t2_0_us", self.t2_0_us), ("t2_1_us", self.t2_1_us)]
        {
            if !(value > 0.0) {
                return Err(ModelError::NonPositiveTime { name, value });
            }
        }
        for (level, t1, t2) in [("0", self.t1_0_us, self.t2_0_us), ("1", self.t1_1_us, self.t2_1_us)] {
            if t2 > 2.0 * t1 {
                return Err(ModelError::T2ExceedsTwiceT1 { level, t1, t2 });
            }
        }
        Ok(())
    }
}

/// A time-dependent Hamiltonian in rad/µs, sampled at times in ns.
pub trait Hamiltonian: Sync {
    fn matrix_at(&self, t_ns: f64) -> CMatrix3;

    /// Times where the Hamiltonian may jump; integrators never step across them.
    fn breakpoints_ns(&self) -> Vec<f64> {
        Vec::new()
    }
}

/// Hermitian 3×3 Hamiltonian in rad/µs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HamiltonianMatrix(pub CMatrix3);

impl HamiltonianMatrix {
    pub fn matrix(&self) -> &CMatrix3 {
        &self.0
    }

    /// Pump coupling `Ω₀` (rad/µs), read back from the matrix.
    pub fn pump(&self) -> C64 {
        self.0[(0, 1)] * 2.0
    }

    /// Stokes coupling `Ω₁` (rad/µs).
    pub fn stokes(&self) -> C64 {
        self.0[(1, 2)] * 2.0
    }

    /// Single-photon detuning `Δ` (rad/µs).
    pub fn single_photon(&self) -> f64 {
        self.0[(1, 1)].re
    }

    /// Two-photon detuning `δ` (rad/µs).
    pub fn two_photon(&self) -> f64 {
        self.0[(2, 2)].re
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VSystem {
    pub pump: PulseEnvelope,
    pub stokes: PulseEnvelope,
    pub drive: DriveConfig,
    pub decoherence: Option<Decoherence>,
}

impl VSystem {
    pub fn new(
        pump: PulseEnvelope,
        stokes: PulseEnvelope,
        drive: DriveConfig,
        decoherence: Option<Decoherence>,
    ) -> Result<Self, ModelError> {
        if let Some(d) = &decoherence {
            d.validate()?;
        }
        Ok(Self { pump, stokes, drive, decoherence })
    }

    pub fn closed(self) -> Self {
        Self { decoherence: None, ..self }
    }

    /// Earliest window start and latest window end over both pulses.
    pub fn support_ns(&self) -> (f64, f64) {
        let (p0, p1) = self.pump.window_ns();
        let (s0, s1) = self.stokes.window_ns();
        (p0.min(s0), p1.max(s1))
    }

    pub fn hamiltonian_at(&self, t_ns: f64) -> HamiltonianMatrix {
        hamiltonian_at(self, t_ns)
    }
}

impl Hamiltonian for VSystem {
    fn matrix_at(&self, t_ns: f64) -> CMatrix3 {
        hamiltonian_at(self, t_ns).0
    }

    fn breakpoints_ns(&self) -> Vec<f64> {
        let (p0, p1) = self.pump.window_ns();
        let (s0, s1) = self.stokes.window_ns();
        vec![p0, p1, s0, s1]
    }
}

pub fn hamiltonian_at(sys: &VSystem, t_ns: f64) -> HamiltonianMatrix {
    let omega0 = sys.pump.value(t_ns) * angular(1.0);
    let omega1 = sys.stokes.value(t_ns) * angular(1.0);
    let delta = angular(sys.drive.single_photon_mhz());
    let delta2 = angular(sys.drive.two_photon_mhz());
    let h = 0.5;
    HamiltonianMatrix(CMatrix3::new(
        ZERO,
        omega0 * h,
        ZERO,
        omega0.conj() * h,
        real(delta),
        omega1 * h,
        ZERO,
        omega1.conj() * h,
        real(delta2),
    ))
}

/// A Lindblad jump operator `c` entering as `D[c]ρ = cρc† − ½{c†c, ρ}`.
///
/// `rate_per_us` is the physical rate of the channel; `operator` already
/// carries the square-root prefactor. Damping uses `√(1/T1)·|g⟩⟨k|`;
/// pure dephasing uses `√(2γφ)·|k⟩⟨k|` so that the |g⟩–|k⟩ coherence decays
/// at `γφ = 1/T2 − 1/(2T1)` on top of the damping contribution.
#[derive(Debug, Clone, PartialEq)]
pub struct CollapseOperator {
    pub label: String,
    pub rate_per_us: f64,
    pub operator: CMatrix3,
}

pub fn collapse_operators(sys: &VSystem) -> Result<Vec<CollapseOperator>, ModelError> {
    let Some(dec) = &sys.decoherence else {
        return Ok(Vec::new());
    };
    dec.validate()?;
    let mut ops = Vec::with_capacity(4);
    for (level, t1, t2) in [(Level::Zero, dec.t1_0_us, dec.t2_0_us), (Level::One, dec.t1_1_us, dec.t2_1_us)] {
        let k = level.index();
        let g = Level::Ground.index();
        let damping = 1.0 / t1;
        let mut op = CMatrix3::zeros();
        op[(g, k)] = real(damping.sqrt());
        ops.push(CollapseOperator { label: format!("relax_{}", level.label()), rate_per_us: damping, operator: op });

        let dephasing = (1.0 / t2 - 0.5 / t1).max(0.0);
        let mut op = CMatrix3::zeros();
        op[(k, k)] = real((2.0 * dephasing).sqrt());
        ops.push(CollapseOperator {
            label: format!("dephase_{}", level.label()),
            rate_per_us: dephasing,
            operator: op,
        });
    }
    Ok(ops)
}
