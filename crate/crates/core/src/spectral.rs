//! Mixing angles, the instantaneous eigenframe, the adiabatic-frame
//! Hamiltonian and adiabaticity margins.
//!
//! For zero two-photon detuning the eigenstates are
//!
//! ```text
//! |+⟩ = sinθ sinφ |0⟩ + cosφ |g⟩ + cosθ sinφ |1⟩      ε₊ = (Δ + √(Δ² + Ω²))/2
//! |d⟩ = cosθ |0⟩ − sinθ |1⟩                           ε_d = 0
//! |−⟩ = sinθ cosφ |0⟩ − sinφ |g⟩ + cosθ cosφ |1⟩      ε₋ = (Δ − √(Δ² + Ω²))/2
//! ```
//!
//! with `tanθ = |Ω₀|/|Ω₁|`, `tan2φ = Ω_rms/Δ`. Drive phases are absorbed by
//! the diagonal gauge `diag(e^{i arg Ω₀}, 1, e^{−i arg Ω₁})`.

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{hermitian_eigen, real, CMatrix3, CVector3, C64};
use crate::table::Table;
use crate::units::{angular, US_PER_NS};
use crate::vsystem::{hamiltonian_at, HamiltonianMatrix, VSystem};

/// Relative drive level below which the mixing angle θ is treated as undefined.
pub const ANGLE_DRIVE_THRESHOLD: f64 = 1e-6;

/// Two-photon detuning (rad/µs) below which the analytic frame is used.
const ANALYTIC_DELTA_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("mixing angle θ is undefined when both drive amplitudes vanish")]
    AngleUndefined,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixingAngles {
    pub theta: f64,
    pub phi: f64,
    /// `√(|Ω₀|² + |Ω₁|²)`, rad/µs.
    pub omega_rms: f64,
}

/// `2φ = atan(Ω_rms/Δ)` taken on the branch that keeps `ε₊ ≥ 0 ≥ ε₋`,
/// so φ → π/4 as Δ → 0 and φ ∈ (π/4, π/2) for Δ < 0.
fn phi_of(omega_rms: f64, delta: f64) -> f64 {
    if omega_rms == 0.0 && delta == 0.0 {
        return std::f64::consts::FRAC_PI_4;
    }
    0.5 * omega_rms.atan2(delta)
}

/// Mixing angles from coupling magnitudes and single-photon detuning (rad/µs).
pub fn mixing_angles(omega0: f64, omega1: f64, delta: f64) -> Result<MixingAngles, SpectralError> {
    let (a0, a1) = (omega0.abs(), omega1.abs());
    if a0 == 0.0 && a1 == 0.0 {
        return Err(SpectralError::AngleUndefined);
    }
    let omega_rms = a0.hypot(a1);
    Ok(MixingAngles { theta: a0.atan2(a1), phi: phi_of(omega_rms, delta), omega_rms })
}

impl MixingAngles {
    /// `(ε₊, ε₋)` for single-photon detuning `delta` (rad/µs).
    pub fn energies(&self, delta: f64) -> (f64, f64) {
        let root = delta.hypot(self.omega_rms);
        (0.5 * (delta + root), 0.5 * (delta - root))
    }
}

/// The real rotation matrix whose rows are |+⟩, |d⟩, |−⟩ in the
/// (|0⟩, |g⟩, |1⟩) basis.
pub fn rotation_matrix(angles: &MixingAngles) -> Matrix3<f64> {
    let (st, ct) = angles.theta.sin_cos();
    let (sp, cp) = angles.phi.sin_cos();
    Matrix3::new(
        st * sp,
        cp,
        ct * sp, //
        ct,
        0.0,
        -st, //
        st * cp,
        -sp,
        ct * cp,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FrameKind {
    Analytic,
    Numeric,
}

/// Instantaneous eigenstates in the order (|+⟩, |d⟩, |−⟩).
#[derive(Debug, Clone, PartialEq)]
pub struct EigenFrame {
    pub states: [CVector3; 3],
    /// `(ε₊, ε_d, ε₋)`, rad/µs.
    pub energies: [f64; 3],
    pub angles: Option<MixingAngles>,
    pub kind: FrameKind,
}

impl EigenFrame {
    /// `|⟨i|ψ⟩|²` for i = +, d, −.
    pub fn overlaps(&self, psi: &CVector3) -> [f64; 3] {
        self.states.map(|s| s.dotc(psi).norm_sqr())
    }

    /// Frame matrix with rows `⟨+|, ⟨d|, ⟨−|`.
    pub fn rotation(&self) -> CMatrix3 {
        CMatrix3::from_columns(&self.states).adjoint()
    }
}

/// Analytic eigenframe when δ = 0, numeric otherwise.
pub fn eigenframe(h: &HamiltonianMatrix, angles: &MixingAngles) -> EigenFrame {
    if h.two_photon().abs() > ANALYTIC_DELTA_TOL {
        return numeric_eigenframe(h, None);
    }
    let gauge = [C64::from_polar(1.0, h.pump().arg()), real(1.0), C64::from_polar(1.0, -h.stokes().arg())];
    let r = rotation_matrix(angles);
    let states = [0, 1, 2].map(|row| CVector3::from_fn(|j, _| gauge[j] * r[(row, j)]));
    let (eps_plus, eps_minus) = angles.energies(h.single_photon());
    EigenFrame { states, energies: [eps_plus, 0.0, eps_minus], angles: Some(*angles), kind: FrameKind::Analytic }
}

/// Dense Hermitian eigensolver frame. With `previous` the eigenvectors are
/// assigned to labels by maximal overlap and phase-aligned to it; without it
/// they are ordered by energy (+ highest, − lowest) and the largest component
/// of each is made real and positive.
pub fn numeric_eigenframe(h: &HamiltonianMatrix, previous: Option<&EigenFrame>) -> EigenFrame {
    let (values, vectors) = hermitian_eigen(h.matrix());
    // ascending → (+, d, −) = (2, 1, 0)
    let mut pick = [2usize, 1, 0];
    if let Some(prev) = previous {
        const PERMS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
        let score = |p: &[usize; 3]| -> f64 {
            (0..3).map(|i| prev.states[i].dotc(&vectors.column(p[i]).into_owned()).norm_sqr()).sum()
        };
        pick = PERMS.iter().copied().max_by(|a, b| score(a).total_cmp(&score(b))).unwrap_or(pick);
    }
    let states = [0, 1, 2].map(|i| {
        let v: CVector3 = vectors.column(pick[i]).into_owned();
        let reference = match previous {
            Some(prev) => prev.states[i].dotc(&v),
            None => {
                let k = (0..3).max_by(|&a, &b| v[a].norm().total_cmp(&v[b].norm())).unwrap_or(0);
                v[k]
            }
        };
        if reference.norm() > 0.0 {
            v * C64::from_polar(1.0, -reference.arg())
        } else {
            v
        }
    });
    EigenFrame {
        states,
        energies: [values[pick[0]], values[pick[1]], values[pick[2]]],
        angles: None,
        kind: FrameKind::Numeric,
    }
}

/// Walks a time grid keeping numeric eigenvectors continuous.
#[derive(Debug, Default)]
pub struct FrameTracker {
    previous: Option<EigenFrame>,
}

impl FrameTracker {
    pub fn new() -> Self {
        Self::default()
    }

    /// Frame at `t`: analytic (with the limiting-angle convention) when δ = 0,
    /// continuity-tracked numeric otherwise.
    pub fn frame(&mut self, sys: &VSystem, t_ns: f64) -> EigenFrame {
        let h = hamiltonian_at(sys, t_ns);
        let frame = if h.two_photon().abs() <= ANALYTIC_DELTA_TOL {
            eigenframe(&h, &angles_at(sys, t_ns))
        } else {
            numeric_eigenframe(&h, self.previous.as_ref())
        };
        self.previous = Some(frame.clone());
        frame
    }
}

fn drive_magnitudes(sys: &VSystem, t_ns: f64) -> (f64, f64) {
    (angular(sys.pump.magnitude(t_ns)), angular(sys.stokes.magnitude(t_ns)))
}

fn drive_threshold(sys: &VSystem) -> f64 {
    ANGLE_DRIVE_THRESHOLD * angular(sys.pump.peak_rabi_mhz().max(sys.stokes.peak_rabi_mhz()))
}

fn is_driven(sys: &VSystem, t_ns: f64) -> bool {
    let (a0, a1) = drive_magnitudes(sys, t_ns);
    let threshold = drive_threshold(sys);
    threshold > 0.0 && a0.hypot(a1) > threshold
}

/// Nearest time to `t_ns` where the drive exceeds the angle threshold.
fn nearest_driven_time(sys: &VSystem, t_ns: f64) -> Option<f64> {
    let (start, end) = sys.support_ns();
    let mut t = t_ns.clamp(start, end);
    if is_driven(sys, t) {
        return Some(t);
    }
    let mid = 0.5 * (start + end);
    let step = (end - start) / 10_000.0 * if t < mid { 1.0 } else { -1.0 };
    for _ in 0..10_000 {
        t += step;
        if is_driven(sys, t) {
            return Some(t);
        }
    }
    None
}

/// Mixing angles of the system at `t_ns`.
///
/// Where both envelopes (nearly) vanish, θ is taken from the nearest time
/// with drive above [`ANGLE_DRIVE_THRESHOLD`] of the peak, which realizes
/// θ → 0 before and θ → π/2 after a counter-intuitive sequence. φ and
/// `omega_rms` always use the actual drive at `t_ns`.
pub fn angles_at(sys: &VSystem, t_ns: f64) -> MixingAngles {
    let delta = angular(sys.drive.single_photon_mhz());
    let (a0, a1) = drive_magnitudes(sys, t_ns);
    let omega_rms = a0.hypot(a1);
    let theta = if is_driven(sys, t_ns) {
        a0.atan2(a1)
    } else {
        match nearest_driven_time(sys, t_ns) {
            Some(t) => {
                let (b0, b1) = drive_magnitudes(sys, t);
                b0.atan2(b1)
            }
            None => 0.0,
        }
    };
    MixingAngles { theta, phi: phi_of(omega_rms, delta), omega_rms }
}

/// Closed-form `(θ̇, φ̇)` in rad/µs from the Gaussian envelope derivatives.
/// Zero wherever the angle is undefined.
pub fn frame_rates(sys: &VSystem, t_ns: f64) -> (f64, f64) {
    if !is_driven(sys, t_ns) {
        return (0.0, 0.0);
    }
    let per_us = 1.0 / US_PER_NS;
    let (a0, a1) = (sys.pump.magnitude(t_ns), sys.stokes.magnitude(t_ns));
    let (d0, d1) = (sys.pump.magnitude_derivative(t_ns), sys.stokes.magnitude_derivative(t_ns));
    let r2 = a0 * a0 + a1 * a1;
    let theta_dot = (d0 * a1 - a0 * d1) / r2 * per_us;
    let rms = r2.sqrt();
    let rms_dot = angular((a0 * d0 + a1 * d1) / rms) * per_us;
    let omega = angular(rms);
    let delta = angular(sys.drive.single_photon_mhz());
    let phi_dot = 0.5 * delta * rms_dot / (delta * delta + omega * omega);
    (theta_dot, phi_dot)
}

/// `(θ̇, φ̇)` in rad/µs from central differences with step `dt_ns`.
pub fn frame_rates_fd(sys: &VSystem, t_ns: f64, dt_ns: f64) -> (f64, f64) {
    let a = angles_at(sys, t_ns + dt_ns);
    let b = angles_at(sys, t_ns - dt_ns);
    let scale = 1.0 / (2.0 * dt_ns * US_PER_NS);
    ((a.theta - b.theta) * scale, (a.phi - b.phi) * scale)
}

fn frame_rotation(sys: &VSystem, t_ns: f64) -> CMatrix3 {
    eigenframe(&hamiltonian_at(sys, t_ns), &angles_at(sys, t_ns)).rotation()
}

/// `R H R† − i R ∂ₜR†` (rad/µs) with `∂ₜR` from central differences of
/// step `dt_ns`.
///
/// With R built from the analytic frame the off-diagonal entries are
/// `(+,d) = iθ̇ sinφ`, `(+,−) = iφ̇`, `(d,−) = −iθ̇ cosφ` and the diagonal is
/// `(ε₊, 0, ε₋)`.
pub fn adiabatic_hamiltonian(sys: &VSystem, t_ns: f64, dt_ns: f64) -> CMatrix3 {
    let h = hamiltonian_at(sys, t_ns);
    let r = frame_rotation(sys, t_ns);
    let r_dot =
        (frame_rotation(sys, t_ns + dt_ns) - frame_rotation(sys, t_ns - dt_ns)) * real(1.0 / (2.0 * dt_ns * US_PER_NS));
    r * h.matrix() * r.adjoint() - r * r_dot.adjoint() * C64::new(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdiabaticityPoint {
    pub t_ns: f64,
    pub theta: f64,
    pub phi: f64,
    pub omega_rms: f64,
    pub eps_plus: f64,
    pub eps_minus: f64,
    /// `|φ̇|`, `|θ̇ sinφ|`, `|θ̇ cosφ|` (rad/µs).
    pub lhs: [f64; 3],
    /// `|ε₊ − ε₋|`, `|ε₊|`, `|ε₋|` (rad/µs).
    pub rhs: [f64; 3],
    /// `lhs / rhs`; 0 when the left side vanishes, ∞ when only the right does.
    pub ratios: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdiabaticityReport {
    pub points: Vec<AdiabaticityPoint>,
    /// `(grid index, condition index, ratio)` of the largest ratio.
    pub worst: Option<(usize, usize, f64)>,
    /// Finite-difference step used for θ̇, φ̇.
    pub dt_ns: f64,
    /// Max relative disagreement between finite-difference and closed-form
    /// rates at the most strongly driven grid point.
    pub rate_check: f64,
}

impl AdiabaticityReport {
    /// Largest ratio of condition `k` over points where `omega_rms` is at
    /// least `fraction` of its largest value on the grid.
    pub fn max_ratio_where_driven(&self, k: usize, fraction: f64) -> f64 {
        let peak = self.points.iter().map(|p| p.omega_rms).fold(0.0, f64::max);
        self.points
            .iter()
            .filter(|p| peak > 0.0 && p.omega_rms >= fraction * peak)
            .map(|p| p.ratios[k])
            .fold(0.0, f64::max)
    }

    pub fn to_table(&self, provenance: &str) -> Table {
        let mut t = Table::new(
            provenance,
            &[
                ("time_ns", "ns"),
                ("theta", "rad"),
                ("phi", "rad"),
                ("eps_plus", "rad/us"),
                ("eps_minus", "rad/us"),
                ("ratio_phi_dot", "1"),
                ("ratio_theta_dot_sin", "1"),
                ("ratio_theta_dot_cos", "1"),
            ],
        );
        for p in &self.points {
            t.push(vec![p.t_ns, p.theta, p.phi, p.eps_plus, p.eps_minus, p.ratios[0], p.ratios[1], p.ratios[2]]);
        }
        t
    }
}

fn ratio(lhs: f64, rhs: f64) -> f64 {
    if lhs == 0.0 {
        0.0
    } else if rhs == 0.0 {
        f64::INFINITY
    } else {
        lhs / rhs
    }
}

/// Evaluate the three adiabaticity conditions on `grid_ns`.
///
/// Rates come from central differences with step one tenth of the smallest
/// grid spacing; the closed-form Gaussian derivative is used once, at the
/// most strongly driven grid point, as a consistency check.
pub fn adiabaticity_margins(sys: &VSystem, grid_ns: &[f64]) -> AdiabaticityReport {
    let spacing = grid_ns.windows(2).map(|w| (w[1] - w[0]).abs()).filter(|d| *d > 0.0).fold(f64::INFINITY, f64::min);
    let dt_ns = if spacing.is_finite() { spacing / 10.0 } else { 0.01 };
    let delta = angular(sys.drive.single_photon_mhz());

    let points: Vec<AdiabaticityPoint> = grid_ns
        .iter()
        .map(|&t| {
            let angles = angles_at(sys, t);
            let (theta_dot, phi_dot) = frame_rates_fd(sys, t, dt_ns);
            let (eps_plus, eps_minus) = angles.energies(delta);
            let lhs = [phi_dot.abs(), (theta_dot * angles.phi.sin()).abs(), (theta_dot * angles.phi.cos()).abs()];
            let rhs = [(eps_plus - eps_minus).abs(), eps_plus.abs(), eps_minus.abs()];
            let ratios = [ratio(lhs[0], rhs[0]), ratio(lhs[1], rhs[1]), ratio(lhs[2], rhs[2])];
            AdiabaticityPoint {
                t_ns: t,
                theta: angles.theta,
                phi: angles.phi,
                omega_rms: angles.omega_rms,
                eps_plus,
                eps_minus,
                lhs,
                rhs,
                ratios,
            }
        })
        .collect();

    let worst = points
        .iter()
        .enumerate()
        .flat_map(|(i, p)| p.ratios.iter().enumerate().map(move |(k, r)| (i, k, *r)))
        .max_by(|a, b| a.2.total_cmp(&b.2));

    let rate_check = points
        .iter()
        .max_by(|a, b| a.omega_rms.total_cmp(&b.omega_rms))
        .filter(|p| p.omega_rms > 0.0)
        .map(|p| {
            let (ta, pa) = frame_rates(sys, p.t_ns);
            let (tf, pf) = frame_rates_fd(sys, p.t_ns, dt_ns);
            let scale = ta.abs().max(pa.abs()).max(1e-12);
            (ta - tf).abs().max((pa - pf).abs()) / scale
        })
        .unwrap_or(0.0);

    AdiabaticityReport { points, worst, dt_ns, rate_check }
}
