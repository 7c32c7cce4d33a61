//! Time evolution: piecewise-constant unitary propagation, a fixed-step
//! Lindblad integrator and population / eigenbasis-overlap traces.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{expm_hermitian, hermitian_eigen, hermiticity_defect, ket_bra, CMatrix3, CVector3, C64, I};
use crate::spectral::FrameTracker;
use crate::table::Table;
use crate::units::US_PER_NS;
use crate::vsystem::{collapse_operators, CollapseOperator, Hamiltonian, Level, ModelError, VSystem};

/// Default number of propagation steps per protocol window.
pub const DEFAULT_STEPS: usize = 2000;

/// Default largest Runge–Kutta step for the master equation, ns.
pub const DEFAULT_LINDBLAD_STEP_NS: f64 = 0.1;

/// Tolerance used to accept a density matrix as physical.
pub const PHYSICALITY_TOL: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PropagatorError {
    #[error("number of propagation steps must be at least 1")]
    ZeroSteps,
    #[error("time grid must contain at least one point and be non-decreasing")]
    BadGrid,
    #[error("state vector has zero norm")]
    ZeroNorm,
    #[error("density matrix is not physical: hermiticity defect {hermiticity:.3e}, trace {trace:.12}, min eigenvalue {min_eigenvalue:.3e}")]
    Unphysical { hermiticity: f64, trace: f64, min_eigenvalue: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Pure three-level state in the (|0⟩, |g⟩, |1⟩) basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateVector(CVector3);

impl StateVector {
    /// Normalizes `amplitudes`; fails on the zero vector.
    pub fn new(amplitudes: CVector3) -> Result<Self, PropagatorError> {
        let norm = amplitudes.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(PropagatorError::ZeroNorm);
        }
        Ok(Self(amplitudes / C64::from(norm)))
    }

    pub fn basis(level: Level) -> Self {
        Self(level.ket())
    }

    pub fn amplitudes(&self) -> &CVector3 {
        &self.0
    }

    pub fn populations(&self) -> [f64; 3] {
        [self.0[0].norm_sqr(), self.0[1].norm_sqr(), self.0[2].norm_sqr()]
    }

    pub fn norm_sqr(&self) -> f64 {
        self.0.norm_squared()
    }

    pub fn evolve(&self, u: &CMatrix3) -> Self {
        Self(u * self.0)
    }

    /// `|⟨other|self⟩|²`.
    pub fn overlap(&self, other: &StateVector) -> f64 {
        other.0.dotc(&self.0).norm_sqr()
    }

    pub fn density(&self) -> DensityMatrix {
        DensityMatrix(ket_bra(&self.0, &self.0))
    }
}

/// Three-level density matrix in the (|0⟩, |g⟩, |1⟩) basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityMatrix(CMatrix3);

impl DensityMatrix {
    /// Accepts `rho` if it is Hermitian, unit-trace and PSD within [`PHYSICALITY_TOL`].
    pub fn new(rho: CMatrix3) -> Result<Self, PropagatorError> {
        let candidate = Self(rho);
        candidate.check()?;
        Ok(candidate)
    }

    /// Wraps a matrix without validation, for estimators that may be unphysical.
    pub fn unchecked(rho: CMatrix3) -> Self {
        Self(rho)
    }

    pub fn basis(level: Level) -> Self {
        StateVector::basis(level).density()
    }

    pub fn matrix(&self) -> &CMatrix3 {
        &self.0
    }

    pub fn trace(&self) -> f64 {
        self.0.trace().re
    }

    pub fn populations(&self) -> [f64; 3] {
        [self.0[(0, 0)].re, self.0[(1, 1)].re, self.0[(2, 2)].re]
    }

    pub fn eigenvalues(&self) -> [f64; 3] {
        let (values, _) = hermitian_eigen(&self.0);
        [values[0], values[1], values[2]]
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues()[0]
    }

    pub fn purity(&self) -> f64 {
        (self.0 * self.0).trace().re
    }

    /// `⟨ψ|ρ|ψ⟩`.
    pub fn expectation(&self, psi: &StateVector) -> f64 {
        psi.0.dotc(&(self.0 * psi.0)).re
    }

    pub fn check(&self) -> Result<(), PropagatorError> {
        let hermiticity = hermiticity_defect(&self.0);
        let trace = self.trace();
        let min_eigenvalue = self.min_eigenvalue();
        let ok =
            hermiticity < PHYSICALITY_TOL && (trace - 1.0).abs() < PHYSICALITY_TOL && min_eigenvalue > -PHYSICALITY_TOL;
        if ok {
            Ok(())
        } else {
            Err(PropagatorError::Unphysical { hermiticity, trace, min_eigenvalue })
        }
    }

    pub fn evolve(&self, u: &CMatrix3) -> Self {
        Self(u * self.0 * u.adjoint())
    }
}

/// Populations (and optionally eigenbasis overlaps) sampled on a time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolutionTrace {
    pub times_ns: Vec<f64>,
    /// `(P₀, P_g, P₁)` per time point.
    pub populations: Vec<[f64; 3]>,
    /// `(|⟨+|ψ⟩|², |⟨d|ψ⟩|², |⟨−|ψ⟩|²)` per time point.
    pub overlaps: Option<Vec<[f64; 3]>>,
}

impl EvolutionTrace {
    pub fn final_populations(&self) -> [f64; 3] {
        *self.populations.last().expect("trace is never empty")
    }

    pub fn population(&self, level: Level) -> Vec<f64> {
        self.populations.iter().map(|p| p[level.index()]).collect()
    }

    pub fn to_table(&self, provenance: &str) -> Table {
        let mut columns = vec![("time_ns", "ns"), ("P0", "1"), ("Pg", "1"), ("P1", "1")];
        if self.overlaps.is_some() {
            columns.extend([("ov_plus", "1"), ("ov_dark", "1"), ("ov_minus", "1")]);
        }
        let mut table = Table::new(provenance, &columns);
        for (k, &t) in self.times_ns.iter().enumerate() {
            let mut row = vec![t];
            row.extend(self.populations[k]);
            if let Some(ov) = &self.overlaps {
                row.extend(ov[k]);
            }
            table.push(row);
        }
        table
    }
}

fn check_grid(grid_ns: &[f64]) -> Result<(), PropagatorError> {
    if grid_ns.is_empty() || grid_ns.windows(2).any(|w| !(w[1] >= w[0])) {
        return Err(PropagatorError::BadGrid);
    }
    Ok(())
}

/// Splits `[t0, t1]` at the breakpoints of `h` that fall strictly inside it.
fn segments<H: Hamiltonian + ?Sized>(h: &H, t0_ns: f64, t1_ns: f64) -> Vec<(f64, f64)> {
    let (lo, hi) = (t0_ns.min(t1_ns), t0_ns.max(t1_ns));
    let mut cuts: Vec<f64> = h.breakpoints_ns().into_iter().filter(|&b| b > lo && b < hi).collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    if t1_ns < t0_ns {
        cuts.reverse();
    }
    let mut edges = vec![t0_ns];
    edges.extend(cuts);
    edges.push(t1_ns);
    edges.windows(2).map(|w| (w[0], w[1])).collect()
}

fn midpoint_product<H: Hamiltonian + ?Sized>(h: &H, t0_ns: f64, t1_ns: f64, steps: usize, u: CMatrix3) -> CMatrix3 {
    let dt_ns = (t1_ns - t0_ns) / steps as f64;
    let dt_us = dt_ns * US_PER_NS;
    let mut u = u;
    for k in 0..steps {
        let t_mid = t0_ns + (k as f64 + 0.5) * dt_ns;
        u = expm_hermitian(&h.matrix_at(t_mid), dt_us) * u;
    }
    u
}

/// `U(t1, t0) = ∏ exp(−i H(t_mid) Δt)` over about `steps` slices.
///
/// The interval is first cut at the Hamiltonian's breakpoints and the steps
/// are shared among the pieces in proportion to their length, so window
/// edges of truncated pulses always fall on slice boundaries.
pub fn propagate_unitary<H: Hamiltonian + ?Sized>(
    h: &H,
    t0_ns: f64,
    t1_ns: f64,
    steps: usize,
) -> Result<CMatrix3, PropagatorError> {
    if steps == 0 {
        return Err(PropagatorError::ZeroSteps);
    }
    let total = (t1_ns - t0_ns).abs();
    let mut u = CMatrix3::identity();
    for (a, b) in segments(h, t0_ns, t1_ns) {
        let n = if total > 0.0 { ((steps as f64) * (b - a).abs() / total).round().max(1.0) as usize } else { steps };
        u = midpoint_product(h, a, b, n, u);
    }
    Ok(u)
}

/// Propagates `psi0` along `grid_ns`, taking `substeps` midpoint slices
/// between consecutive grid points.
pub fn population_trace<H: Hamiltonian + ?Sized>(
    h: &H,
    psi0: &StateVector,
    grid_ns: &[f64],
    substeps: usize,
) -> Result<(EvolutionTrace, Vec<StateVector>), PropagatorError> {
    check_grid(grid_ns)?;
    let mut psi = *psi0;
    let mut states = Vec::with_capacity(grid_ns.len());
    states.push(psi);
    for w in grid_ns.windows(2) {
        psi = psi.evolve(&propagate_unitary(h, w[0], w[1], substeps)?);
        states.push(psi);
    }
    let trace = EvolutionTrace {
        times_ns: grid_ns.to_vec(),
        populations: states.iter().map(StateVector::populations).collect(),
        overlaps: None,
    };
    Ok((trace, states))
}

/// Population trace plus overlaps with the continuity-tracked
/// instantaneous eigenframe at every grid point.
pub fn eigenbasis_overlap_trace(
    sys: &VSystem,
    psi0: &StateVector,
    grid_ns: &[f64],
    substeps: usize,
) -> Result<EvolutionTrace, PropagatorError> {
    let (mut trace, states) = population_trace(sys, psi0, grid_ns, substeps)?;
    let mut tracker = FrameTracker::new();
    let overlaps =
        grid_ns.iter().zip(&states).map(|(&t, psi)| tracker.frame(sys, t).overlaps(psi.amplitudes())).collect();
    trace.overlaps = Some(overlaps);
    Ok(trace)
}

/// Output of a master-equation run.
#[derive(Debug, Clone, PartialEq)]
pub struct LindbladRun {
    pub trace: EvolutionTrace,
    pub final_state: DensityMatrix,
    /// Largest `|Tr ρ − 1|` seen at any grid point.
    pub max_trace_drift: f64,
    /// Smallest eigenvalue of ρ seen at any grid point.
    pub min_eigenvalue: f64,
}

/// `dρ/dt` in rad/µs units: `−i[H, ρ] + Σ D[c]ρ`.
fn lindblad_rhs(h: &CMatrix3, collapse: &[CMatrix3], rho: &CMatrix3) -> CMatrix3 {
    let hr = h * rho;
    let mut out = (hr - hr.adjoint()) * (-I);
    for c in collapse {
        let cd = c.adjoint();
        let cdc = cd * c;
        out += c * rho * cd - (cdc * rho + rho * cdc) * C64::from(0.5);
    }
    out
}

/// Integrates the master equation with classical RK4 on the matrix form.
///
/// Each grid interval is split into equal steps no longer than `max_step_ns`.
pub fn propagate_lindblad_with<H: Hamiltonian + ?Sized>(
    h: &H,
    collapse: &[CollapseOperator],
    rho0: &DensityMatrix,
    grid_ns: &[f64],
    max_step_ns: f64,
) -> Result<LindbladRun, PropagatorError> {
    check_grid(grid_ns)?;
    rho0.check()?;
    if !(max_step_ns > 0.0) {
        return Err(PropagatorError::ZeroSteps);
    }
    let ops: Vec<CMatrix3> = collapse.iter().map(|c| c.operator).collect();
    let mut rho = *rho0.matrix();
    let mut populations = Vec::with_capacity(grid_ns.len());
    let mut max_trace_drift: f64 = 0.0;
    let mut min_eigenvalue = f64::INFINITY;
    let mut record = |rho: &CMatrix3| {
        let state = DensityMatrix(*rho);
        max_trace_drift = max_trace_drift.max((state.trace() - 1.0).abs());
        min_eigenvalue = min_eigenvalue.min(state.min_eigenvalue());
        populations.push(state.populations());
    };
    record(&rho);
    for w in grid_ns.windows(2) {
        for (a, b) in segments(h, w[0], w[1]) {
            let n = ((b - a) / max_step_ns).ceil().max(1.0) as usize;
            let dt_ns = (b - a) / n as f64;
            let dt = C64::from(dt_ns * US_PER_NS);
            let half = dt * 0.5;
            // One-sided limits at the segment ends, where H may jump.
            let inset = 1e-9 * (b - a).abs();
            let sample = |t: f64| h.matrix_at(t.clamp(a + inset, b - inset));
            for k in 0..n {
                let t = a + k as f64 * dt_ns;
                let h0 = sample(t);
                let hm = sample(t + 0.5 * dt_ns);
                let h1 = sample(t + dt_ns);
                let k1 = lindblad_rhs(&h0, &ops, &rho);
                let k2 = lindblad_rhs(&hm, &ops, &(rho + k1 * half));
                let k3 = lindblad_rhs(&hm, &ops, &(rho + k2 * half));
                let k4 = lindblad_rhs(&h1, &ops, &(rho + k3 * dt));
                rho += (k1 + k2 * C64::from(2.0) + k3 * C64::from(2.0) + k4) * (dt / 6.0);
            }
        }
        record(&rho);
    }
    Ok(LindbladRun {
        trace: EvolutionTrace { times_ns: grid_ns.to_vec(), populations, overlaps: None },
        final_state: DensityMatrix(rho),
        max_trace_drift,
        min_eigenvalue,
    })
}

/// Master-equation evolution of `sys` with its own collapse operators.
pub fn propagate_lindblad(
    sys: &VSystem,
    rho0: &DensityMatrix,
    grid_ns: &[f64],
    max_step_ns: f64,
) -> Result<LindbladRun, PropagatorError> {
    let collapse = collapse_operators(sys)?;
    propagate_lindblad_with(sys, &collapse, rho0, grid_ns, max_step_ns)
}

/// `n + 1` equally spaced points covering `[t0, t1]`.
pub fn uniform_grid(t0_ns: f64, t1_ns: f64, n: usize) -> Vec<f64> {
    let n = n.max(1);
    (0..=n).map(|k| t0_ns + (t1_ns - t0_ns) * k as f64 / n as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{max_abs, unitarity_defect};
    use crate::vsystem::{Decoherence, DriveConfig, PulseEnvelope};
    use proptest::prelude::*;

    fn detuned(peak: f64) -> VSystem {
        let stokes = PulseEnvelope::centered(peak, 0.0, 206.0, 33.0, 0.0).unwrap();
        let pump = PulseEnvelope::centered(peak, 54.0, 206.0, 33.0, 0.0).unwrap();
        VSystem::new(pump, stokes, DriveConfig::from_detunings(15.0, 0.0), None).unwrap()
    }

    fn resonant(duration: f64, sigma: f64, offset: f64, peak: f64) -> VSystem {
        let stokes = PulseEnvelope::centered(peak, 0.0, duration, sigma, 0.0).unwrap();
        let pump = PulseEnvelope::centered(peak, offset, duration, sigma, 0.0).unwrap();
        VSystem::new(pump, stokes, DriveConfig::resonant(), None).unwrap()
    }

    struct Static(CMatrix3);

    impl Hamiltonian for Static {
        fn matrix_at(&self, _t_ns: f64) -> CMatrix3 {
            self.0
        }
    }

    #[test]
    fn zero_drive_gives_identity() {
        let u = propagate_unitary(&Static(CMatrix3::zeros()), 0.0, 100.0, 10).unwrap();
        assert!(max_abs(&(u - CMatrix3::identity())) < 1e-15);
    }

    #[test]
    fn zero_steps_rejected() {
        assert_eq!(propagate_unitary(&detuned(40.0), 0.0, 1.0, 0), Err(PropagatorError::ZeroSteps));
    }

    #[test]
    fn detuned_pi_transfer_is_near_complete() {
        let sys = detuned(39.0);
        let (t0, t1) = sys.support_ns();
        let u = propagate_unitary(&sys, t0, t1, DEFAULT_STEPS).unwrap();
        assert!(unitarity_defect(&u) < 1e-9);
        let p1 = StateVector::basis(Level::Zero).evolve(&u).populations()[2];
        let fine = propagate_unitary(&sys, t0, t1, 8 * DEFAULT_STEPS).unwrap();
        let p1_fine = StateVector::basis(Level::Zero).evolve(&fine).populations()[2];
        assert!((p1 - p1_fine).abs() < 1e-6);
        assert!(p1 > 0.985, "P1 = {p1}");
    }

    #[test]
    fn midpoint_scheme_is_second_order() {
        let sys = detuned(39.0);
        let (t0, t1) = sys.support_ns();
        let reference = propagate_unitary(&sys, t0, t1, 6400).unwrap();
        let errors: Vec<f64> = [50, 100, 200]
            .iter()
            .map(|&n| max_abs(&(propagate_unitary(&sys, t0, t1, n).unwrap() - reference)))
            .collect();
        for w in errors.windows(2) {
            let ratio = w[0] / w[1];
            assert!((3.6..4.4).contains(&ratio), "ratio {ratio}");
        }
    }

    #[test]
    fn free_decay_reaches_one_over_e_at_t1() {
        let drive = PulseEnvelope::centered(0.0, 0.0, 10.0, 1.0, 0.0).unwrap();
        let sys = VSystem::new(drive, drive, DriveConfig::resonant(), Some(Decoherence::device())).unwrap();
        let grid = uniform_grid(0.0, 64_000.0, 64);
        let run = propagate_lindblad(&sys, &DensityMatrix::basis(Level::Zero), &grid, 50.0).unwrap();
        let p0 = run.final_state.populations()[0];
        assert!((p0 - (-1.0f64).exp()).abs() < 1e-9, "P0 = {p0}");
        assert!(run.max_trace_drift < 1e-8);
    }

    #[test]
    fn static_free_evolution_keeps_rho() {
        let psi = StateVector::new(CVector3::new(C64::new(0.6, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.8))).unwrap();
        let rho0 = psi.density();
        let run = propagate_lindblad_with(&Static(CMatrix3::identity()), &[], &rho0, &uniform_grid(0.0, 50.0, 5), 0.5)
            .unwrap();
        assert!(max_abs(&(run.final_state.matrix() - rho0.matrix())) < 1e-12);
    }

    #[test]
    fn closed_lindblad_matches_unitary() {
        let sys = detuned(39.0);
        let (t0, t1) = sys.support_ns();
        let rho0 = DensityMatrix::basis(Level::Zero);
        let run = propagate_lindblad(&sys, &rho0, &[t0, t1], 0.05).unwrap();
        let u = propagate_unitary(&sys, t0, t1, 40_000).unwrap();
        let expected = rho0.evolve(&u);
        let diff = max_abs(&(run.final_state.matrix() - expected.matrix()));
        assert!(diff < 1e-8, "diff {diff}");
    }

    #[test]
    fn unphysical_initial_state_rejected() {
        let mut m = CMatrix3::zeros();
        m[(0, 0)] = C64::from(1.2);
        m[(2, 2)] = C64::from(-0.2);
        let sys = detuned(10.0);
        assert!(matches!(
            propagate_lindblad(&sys, &DensityMatrix::unchecked(m), &[0.0, 1.0], 0.1),
            Err(PropagatorError::Unphysical { .. })
        ));
    }

    #[test]
    fn overlaps_are_complete() {
        let sys = detuned(39.0);
        let (t0, t1) = sys.support_ns();
        let trace =
            eigenbasis_overlap_trace(&sys, &StateVector::basis(Level::One), &uniform_grid(t0, t1, 200), 10).unwrap();
        for ov in trace.overlaps.unwrap() {
            assert!((ov.iter().sum::<f64>() - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn resonant_transfer_improves_with_duration() {
        let p1: Vec<f64> = [(200.0, 33.0, 50.0), (400.0, 66.0, 100.0), (825.0, 133.0, 206.0)]
            .iter()
            .map(|&(d, s, o)| {
                let sys = resonant(d, s, o, 20.0);
                let (t0, t1) = sys.support_ns();
                let u = propagate_unitary(&sys, t0, t1, DEFAULT_STEPS).unwrap();
                StateVector::basis(Level::Zero).evolve(&u).populations()[2]
            })
            .collect();
        assert!(p1[0] < p1[1] && p1[1] < p1[2], "{p1:?}");
        assert!(p1[2] > 0.99);
    }

    #[test]
    fn trace_table_has_overlap_columns() {
        let sys = detuned(39.0);
        let trace =
            eigenbasis_overlap_trace(&sys, &StateVector::basis(Level::Zero), &uniform_grid(0.0, 260.0, 4), 5).unwrap();
        let table = trace.to_table("test");
        assert_eq!(table.columns.len(), 7);
        assert_eq!(table.rows.len(), 5);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn unitary_for_random_protocols(
            peak in 0.0..60.0f64,
            delta in -30.0..30.0f64,
            two_photon in -5.0..5.0f64,
            phase in -3.2..3.2f64,
        ) {
            let stokes = PulseEnvelope::centered(peak, 0.0, 206.0, 33.0, phase).unwrap();
            let pump = PulseEnvelope::centered(peak, 54.0, 206.0, 33.0, -phase).unwrap();
            let sys = VSystem::new(pump, stokes, DriveConfig::from_detunings(delta, two_photon), None).unwrap();
            let u = propagate_unitary(&sys, 0.0, 260.0, 400).unwrap();
            prop_assert!(unitarity_defect(&u) < 1e-9);
        }

        #[test]
        fn common_phase_leaves_populations(beta in -3.2..3.2f64, peak in 5.0..45.0f64) {
            let sys = detuned(peak);
            let shifted = VSystem {
                pump: sys.pump.with_phase(beta),
                stokes: sys.stokes.with_phase(beta),
                ..sys
            };
            for level in [Level::Zero, Level::One] {
                let a = StateVector::basis(level).evolve(&propagate_unitary(&sys, 0.0, 260.0, 300).unwrap());
                let b = StateVector::basis(level).evolve(&propagate_unitary(&shifted, 0.0, 260.0, 300).unwrap());
                for (x, y) in a.populations().iter().zip(b.populations()) {
                    prop_assert!((x - y).abs() < 1e-10);
                }
            }
        }

        #[test]
        fn lindblad_stays_physical(peak in 0.0..40.0f64, delta in -20.0..20.0f64) {
            let stokes = PulseEnvelope::centered(peak, 0.0, 206.0, 33.0, 0.0).unwrap();
            let pump = PulseEnvelope::centered(peak, 54.0, 206.0, 33.0, 0.0).unwrap();
            let dec = Decoherence { t1_0_us: 0.5, t1_1_us: 0.7, t2_0_us: 0.4, t2_1_us: 0.9 };
            let sys = VSystem::new(pump, stokes, DriveConfig::from_detunings(delta, 0.0), Some(dec)).unwrap();
            let run = propagate_lindblad(&sys, &DensityMatrix::basis(Level::Zero), &uniform_grid(0.0, 260.0, 26), 0.2).unwrap();
            prop_assert!(run.max_trace_drift < 1e-8);
            prop_assert!(run.min_eigenvalue > -1e-8);
        }
    }
}
