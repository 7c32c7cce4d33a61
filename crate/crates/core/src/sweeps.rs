//! Parameter sweeps: amplitude–detuning transfer maps, common operating
//! regions, deviation robustness curves and a resonant dynamical-gate
//! baseline.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gates::{final_state, transfer_point, GateError, SimOptions, StirapProtocol};
use crate::linalg::{CMatrix3, C64, ZERO};
use crate::propagator::{propagate_lindblad_with, propagate_unitary, DensityMatrix, PropagatorError, StateVector};
use crate::table::Table;
use crate::units::{angular, US_PER_NS};
use crate::vsystem::{CollapseOperator, Hamiltonian, Level};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SweepError {
    #[error("axis `{name}` needs at least 2 points and min < max, got {points} points on [{min}, {max}]")]
    BadAxis { name: String, min: f64, max: f64, points: usize },
    #[error("maps are defined on different grids")]
    GridMismatch,
    #[error("frequency deviations need a nonzero reference detuning")]
    ZeroReference,
    #[error(transparent)]
    Gate(#[from] GateError),
    #[error(transparent)]
    Propagator(#[from] PropagatorError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxis {
    pub name: String,
    pub unit: String,
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl SweepAxis {
    pub fn new(name: &str, unit: &str, min: f64, max: f64, points: usize) -> Result<Self, SweepError> {
        let axis = Self { name: name.into(), unit: unit.into(), min, max, points };
        axis.validate()?;
        Ok(axis)
    }

    pub fn validate(&self) -> Result<(), SweepError> {
        if self.points < 2 || !(self.min < self.max) || !self.min.is_finite() || !self.max.is_finite() {
            return Err(SweepError::BadAxis {
                name: self.name.clone(),
                min: self.min,
                max: self.max,
                points: self.points,
            });
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        let n = self.points - 1;
        (0..self.points).map(|k| self.min + (self.max - self.min) * k as f64 / n as f64).collect()
    }
}

/// One- or two-dimensional grid; values are stored row-major with the first
/// axis outermost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub axes: Vec<SweepAxis>,
}

impl SweepGrid {
    pub fn new(axes: Vec<SweepAxis>) -> Result<Self, SweepError> {
        for a in &axes {
            a.validate()?;
        }
        Ok(Self { axes })
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.points).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Coordinates of every grid point in storage order.
    pub fn points(&self) -> Vec<Vec<f64>> {
        let values: Vec<Vec<f64>> = self.axes.iter().map(SweepAxis::values).collect();
        let mut out = vec![Vec::new()];
        for v in &values {
            out = out.into_iter().flat_map(|p| v.iter().map(move |x| [p.clone(), vec![*x]].concat())).collect();
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepMetadata {
    pub protocol: Option<StirapProtocol>,
    pub initial: Level,
    pub target: String,
    pub metric: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub grid: SweepGrid,
    pub values: Vec<f64>,
    pub metadata: SweepMetadata,
}

impl SweepResult {
    /// Value at `(i, j)` of a two-dimensional result.
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.grid.axes[1].points + j]
    }

    pub fn min(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn to_table(&self, provenance: &str) -> Table {
        let mut columns: Vec<(&str, &str)> =
            self.grid.axes.iter().map(|a| (a.name.as_str(), a.unit.as_str())).collect();
        columns.push((self.metadata.metric.as_str(), "1"));
        let mut table = Table::new(provenance, &columns);
        for (p, v) in self.grid.points().into_iter().zip(&self.values) {
            let mut row = p;
            row.push(*v);
            table.push(row);
        }
        table
    }
}

fn unit_interval(x: f64) -> f64 {
    x.clamp(0.0, 1.0)
}

/// Transfer maps from |0⟩ (`P₁`) and from |1⟩ (`P₀`) over single-photon
/// detuning (outer axis) and drive amplitude (inner axis).
#[derive(Debug, Clone, PartialEq)]
pub struct TransferMaps {
    pub from_zero: SweepResult,
    pub from_one: SweepResult,
}

pub fn amplitude_detuning_maps(
    template: &StirapProtocol,
    delta_axis: SweepAxis,
    amplitude_axis: SweepAxis,
    opts: &SimOptions,
) -> Result<TransferMaps, SweepError> {
    let grid = SweepGrid::new(vec![delta_axis, amplitude_axis])?;
    let points = grid.points();
    let transfers: Vec<(f64, f64)> = points
        .par_iter()
        .map(|p| {
            let proto =
                StirapProtocol { drive: template.drive.with_single_photon(p[0]), amplitude_mhz: p[1], ..*template };
            transfer_point(&proto, p[1], opts).map(|t| t.transfers())
        })
        .collect::<Result<_, _>>()?;
    let meta = |initial: Level, target: &str| SweepMetadata {
        protocol: Some(*template),
        initial,
        target: target.into(),
        metric: "transfer".into(),
    };
    Ok(TransferMaps {
        from_zero: SweepResult {
            grid: grid.clone(),
            values: transfers.iter().map(|t| unit_interval(t.0)).collect(),
            metadata: meta(Level::Zero, "1"),
        },
        from_one: SweepResult {
            grid,
            values: transfers.iter().map(|t| unit_interval(t.1)).collect(),
            metadata: meta(Level::One, "0"),
        },
    })
}

/// Single-initial-state view of [`amplitude_detuning_maps`].
pub fn amplitude_detuning_map(
    template: &StirapProtocol,
    delta_axis: SweepAxis,
    amplitude_axis: SweepAxis,
    initial: Level,
    opts: &SimOptions,
) -> Result<SweepResult, SweepError> {
    let maps = amplitude_detuning_maps(template, delta_axis, amplitude_axis, opts)?;
    Ok(if initial == Level::One { maps.from_one } else { maps.from_zero })
}

/// Points where a 2-D map crosses `level` between neighbouring grid points,
/// by linear interpolation along either axis.
pub fn contour_points(map: &SweepResult, level: f64) -> Vec<(f64, f64)> {
    let (a0, a1) = (map.grid.axes[0].values(), map.grid.axes[1].values());
    let mut out = Vec::new();
    let crosses = |u: f64, v: f64| (u - level) * (v - level) < 0.0 || (u == level);
    for i in 0..a0.len() {
        for j in 0..a1.len() {
            let here = map.at(i, j);
            if j + 1 < a1.len() {
                let next = map.at(i, j + 1);
                if crosses(here, next) {
                    let f = if next != here { (level - here) / (next - here) } else { 0.0 };
                    out.push((a0[i], a1[j] + f * (a1[j + 1] - a1[j])));
                }
            }
            if i + 1 < a0.len() {
                let next = map.at(i + 1, j);
                if here != level && crosses(here, next) {
                    let f = (level - here) / (next - here);
                    out.push((a0[i] + f * (a0[i + 1] - a0[i]), a1[j]));
                }
            }
        }
    }
    out
}

/// Grid mask of points where both maps lie within `tol` of `level`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionMask {
    pub level: f64,
    pub tol: f64,
    pub grid: SweepGrid,
    pub mask: Vec<bool>,
}

impl RegionMask {
    pub fn count(&self) -> usize {
        self.mask.iter().filter(|m| **m).count()
    }

    pub fn is_subset_of(&self, other: &RegionMask) -> bool {
        self.mask.iter().zip(&other.mask).all(|(a, b)| !a || *b)
    }

    pub fn intersects(&self, other: &RegionMask) -> bool {
        self.mask.iter().zip(&other.mask).any(|(a, b)| *a && *b)
    }

    /// Coordinates of the selected points.
    pub fn points(&self) -> Vec<Vec<f64>> {
        self.grid.points().into_iter().zip(&self.mask).filter(|(_, m)| **m).map(|(p, _)| p).collect()
    }
}

pub fn common_region(map0: &SweepResult, map1: &SweepResult, level: f64, tol: f64) -> Result<RegionMask, SweepError> {
    if map0.grid != map1.grid {
        return Err(SweepError::GridMismatch);
    }
    let mask = map0
        .values
        .iter()
        .zip(&map1.values)
        .map(|(a, b)| (a - level).abs() <= tol && (b - level).abs() <= tol)
        .collect();
    Ok(RegionMask { level, tol, grid: map0.grid.clone(), mask })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeviationAxis {
    /// Fractional change of the drive amplitude.
    Amplitude,
    /// Common shift of both drive frequencies, as a fraction of the
    /// reference detuning: moves Δ at fixed δ.
    Frequency,
    /// Shift of the two-photon detuning δ, as a fraction of the reference.
    TwoPhoton,
}

impl DeviationAxis {
    pub fn label(self) -> &'static str {
        match self {
            DeviationAxis::Amplitude => "amplitude_deviation",
            DeviationAxis::Frequency => "frequency_deviation",
            DeviationAxis::TwoPhoton => "two_photon_deviation",
        }
    }
}

/// Protocol with a fractional deviation applied; `reference_mhz` sets the
/// scale of frequency deviations.
pub fn apply_deviation(proto: &StirapProtocol, axis: DeviationAxis, x: f64, reference_mhz: f64) -> StirapProtocol {
    match axis {
        DeviationAxis::Amplitude => proto.with_amplitude(proto.amplitude_mhz * (1.0 + x)),
        DeviationAxis::Frequency => StirapProtocol {
            drive: proto.drive.with_single_photon(proto.drive.single_photon_mhz() + x * reference_mhz),
            ..*proto
        },
        DeviationAxis::TwoPhoton => StirapProtocol {
            drive: proto.drive.with_two_photon(proto.drive.two_photon_mhz() + x * reference_mhz),
            ..*proto
        },
    }
}

fn infidelity(rho: &DensityMatrix, target: &StateVector) -> f64 {
    unit_interval(1.0 - rho.expectation(target))
}

fn deviation_result(
    axis: DeviationAxis,
    grid: &[f64],
    values: Vec<f64>,
    protocol: Option<StirapProtocol>,
    initial: Level,
    target: &str,
) -> Result<SweepResult, SweepError> {
    let lo = grid.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = grid.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let sweep_axis = SweepAxis { name: axis.label().into(), unit: "1".into(), min: lo, max: hi, points: grid.len() };
    sweep_axis.validate()?;
    Ok(SweepResult {
        grid: SweepGrid { axes: vec![sweep_axis] },
        values,
        metadata: SweepMetadata { protocol, initial, target: target.into(), metric: "infidelity".into() },
    })
}

fn check_uniform(grid: &[f64]) -> Result<(), SweepError> {
    let bad = || SweepError::BadAxis { name: "deviation".into(), min: f64::NAN, max: f64::NAN, points: grid.len() };
    if grid.len() < 2 {
        return Err(bad());
    }
    let step = (grid[grid.len() - 1] - grid[0]) / (grid.len() - 1) as f64;
    let tol = 1e-9 * step.abs().max(1e-300);
    if !(step > 0.0) || grid.iter().enumerate().any(|(k, g)| (g - (grid[0] + step * k as f64)).abs() > tol) {
        return Err(bad());
    }
    Ok(())
}

/// State infidelity `1 − ⟨target|ρ|target⟩` versus fractional deviation.
///
/// The grid must be uniformly spaced. Frequency deviations are scaled by the
/// protocol's own single-photon detuning.
pub fn robustness_curve(
    proto: &StirapProtocol,
    axis: DeviationAxis,
    grid: &[f64],
    initial: Level,
    target: &StateVector,
    target_label: &str,
    opts: &SimOptions,
) -> Result<SweepResult, SweepError> {
    check_uniform(grid)?;
    let reference = proto.drive.single_photon_mhz();
    if axis != DeviationAxis::Amplitude && reference == 0.0 {
        return Err(SweepError::ZeroReference);
    }
    let values = grid
        .par_iter()
        .map(|&x| {
            let p = apply_deviation(proto, axis, x, reference);
            final_state(&p, &DensityMatrix::basis(initial), opts).map(|rho| infidelity(&rho, target))
        })
        .collect::<Result<Vec<f64>, _>>()?;
    deviation_result(axis, grid, values, Some(*proto), initial, target_label)
}

/// Square pulse driving |0⟩↔|1⟩ directly:
/// `H = ½Ω (e^{iφ}|0⟩⟨1| + h.c.) + d·|1⟩⟨1|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicalGate {
    /// Rotation angle, rad.
    pub angle_rad: f64,
    pub duration_ns: f64,
    /// Axis phase φ; −π/2 rotates about y.
    pub phase_rad: f64,
    /// Drive detuning, MHz.
    pub detuning_mhz: f64,
    /// Amplitude scale factor, 1 at calibration.
    pub amplitude_scale: f64,
}

impl DynamicalGate {
    /// Resonant rotation about y by `angle_rad` in `duration_ns`.
    pub fn y_rotation(angle_rad: f64, duration_ns: f64) -> Self {
        Self {
            angle_rad,
            duration_ns,
            phase_rad: -std::f64::consts::FRAC_PI_2,
            detuning_mhz: 0.0,
            amplitude_scale: 1.0,
        }
    }

    /// Calibrated Rabi frequency Ω/2π in MHz (pulse area = angle).
    pub fn rabi_mhz(&self) -> f64 {
        self.angle_rad / (2.0 * std::f64::consts::PI * self.duration_ns * US_PER_NS)
    }

    pub fn with_deviation(self, axis: DeviationAxis, x: f64, reference_mhz: f64) -> Self {
        match axis {
            DeviationAxis::Amplitude => Self { amplitude_scale: self.amplitude_scale * (1.0 + x), ..self },
            DeviationAxis::Frequency | DeviationAxis::TwoPhoton => {
                Self { detuning_mhz: self.detuning_mhz + x * reference_mhz, ..self }
            }
        }
    }
}

impl Hamiltonian for DynamicalGate {
    fn matrix_at(&self, t_ns: f64) -> CMatrix3 {
        let mut h = CMatrix3::from_element(ZERO);
        if (0.0..=self.duration_ns).contains(&t_ns) {
            let coupling = C64::from_polar(0.5 * angular(self.rabi_mhz()) * self.amplitude_scale, self.phase_rad);
            h[(0, 2)] = coupling;
            h[(2, 0)] = coupling.conj();
        }
        h[(2, 2)] = angular(self.detuning_mhz).into();
        h
    }

    fn breakpoints_ns(&self) -> Vec<f64> {
        vec![0.0, self.duration_ns]
    }
}

/// Final state of the dynamical gate, with optional decoherence channels.
pub fn dynamical_final_state(
    gate: &DynamicalGate,
    rho0: &DensityMatrix,
    collapse: &[CollapseOperator],
    opts: &SimOptions,
) -> Result<DensityMatrix, SweepError> {
    if collapse.is_empty() {
        let u = propagate_unitary(gate, 0.0, gate.duration_ns, opts.steps)?;
        Ok(rho0.evolve(&u))
    } else {
        let run = propagate_lindblad_with(gate, collapse, rho0, &[0.0, gate.duration_ns], opts.lindblad_step_ns)?;
        Ok(run.final_state)
    }
}

/// Infidelity of the resonant dynamical gate over the same deviation axis.
/// Frequency deviations shift the drive by `x · reference_mhz`, the same
/// absolute shift a STIRAP protocol with detuning `reference_mhz` sees.
#[allow(clippy::too_many_arguments)]
pub fn dynamical_baseline(
    gate: &DynamicalGate,
    axis: DeviationAxis,
    grid: &[f64],
    reference_mhz: f64,
    initial: Level,
    target: &StateVector,
    target_label: &str,
    collapse: &[CollapseOperator],
    opts: &SimOptions,
) -> Result<SweepResult, SweepError> {
    check_uniform(grid)?;
    let values = grid
        .par_iter()
        .map(|&x| {
            let g = gate.with_deviation(axis, x, reference_mhz);
            dynamical_final_state(&g, &DensityMatrix::basis(initial), collapse, opts)
                .map(|rho| infidelity(&rho, target))
        })
        .collect::<Result<Vec<f64>, _>>()?;
    deviation_result(axis, grid, values, None, initial, target_label)
}

/// Deviations where `stirap` has strictly lower infidelity than `baseline`.
pub fn stirap_advantage(stirap: &SweepResult, baseline: &SweepResult) -> Result<Vec<f64>, SweepError> {
    if stirap.grid != baseline.grid {
        return Err(SweepError::GridMismatch);
    }
    let xs = stirap.grid.axes[0].values();
    Ok(xs
        .into_iter()
        .zip(stirap.values.iter().zip(&baseline.values))
        .filter(|(_, (s, b))| s < b)
        .map(|(x, _)| x)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gates::{calibrate_amplitude, detuned_preset, map_preset, RotationKind};
    use crate::linalg::CVector3;
    use proptest::prelude::*;

    fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
        (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect()
    }

    fn ket(level: Level) -> StateVector {
        StateVector::basis(level)
    }

    fn small_maps() -> TransferMaps {
        amplitude_detuning_maps(
            &map_preset(),
            SweepAxis::new("delta", "MHz", 0.0, 40.0, 9).unwrap(),
            SweepAxis::new("amplitude", "MHz", 0.0, 40.0, 11).unwrap(),
            &SimOptions { steps: 600, ..SimOptions::closed() },
        )
        .unwrap()
    }

    #[test]
    fn axis_validation() {
        assert!(SweepAxis::new("a", "1", 0.0, 1.0, 1).is_err());
        assert!(SweepAxis::new("a", "1", 1.0, 1.0, 5).is_err());
        assert_eq!(SweepAxis::new("a", "1", 0.0, 1.0, 3).unwrap().values(), vec![0.0, 0.5, 1.0]);
    }

    #[test]
    fn grid_points_are_row_major() {
        let g = SweepGrid::new(vec![
            SweepAxis::new("a", "1", 0.0, 1.0, 2).unwrap(),
            SweepAxis::new("b", "1", 0.0, 2.0, 3).unwrap(),
        ])
        .unwrap();
        let p = g.points();
        assert_eq!(p.len(), 6);
        assert_eq!(p[1], vec![0.0, 1.0]);
        assert_eq!(p[3], vec![1.0, 0.0]);
    }

    #[test]
    fn map_shape_and_zero_amplitude_column() {
        let maps = small_maps();
        assert_eq!(maps.from_zero.values.len(), 99);
        for i in 0..9 {
            assert!(maps.from_zero.at(i, 0) < 1e-15);
            assert!(maps.from_one.at(i, 0) < 1e-15);
        }
        for v in maps.from_zero.values.iter().chain(&maps.from_one.values) {
            assert!((0.0..=1.0).contains(v));
        }
        assert!(!contour_points(&maps.from_zero, 0.5).is_empty());
        assert!(!contour_points(&maps.from_one, 0.5).is_empty());
    }

    #[test]
    fn maps_are_deterministic() {
        let a = small_maps();
        let b = small_maps();
        assert_eq!(
            a.from_zero.values.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            b.from_zero.values.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn region_mask_rules() {
        let maps = small_maps();
        let tight = common_region(&maps.from_zero, &maps.from_one, 0.5, 0.0).unwrap();
        let loose = common_region(&maps.from_zero, &maps.from_one, 0.5, 0.05).unwrap();
        assert!(tight.is_subset_of(&loose));
        let pi = common_region(&maps.from_zero, &maps.from_one, 1.0, 0.05).unwrap();
        assert!(!pi.intersects(&loose));
        let other = amplitude_detuning_maps(
            &map_preset(),
            SweepAxis::new("delta", "MHz", 0.0, 40.0, 3).unwrap(),
            SweepAxis::new("amplitude", "MHz", 0.0, 40.0, 3).unwrap(),
            &SimOptions { steps: 100, ..SimOptions::closed() },
        )
        .unwrap();
        assert_eq!(common_region(&maps.from_zero, &other.from_one, 0.5, 0.1), Err(SweepError::GridMismatch));
    }

    #[test]
    fn contour_interpolates_linearly() {
        let grid = SweepGrid::new(vec![
            SweepAxis::new("a", "1", 0.0, 1.0, 2).unwrap(),
            SweepAxis::new("b", "1", 0.0, 1.0, 2).unwrap(),
        ])
        .unwrap();
        let map = SweepResult {
            grid,
            values: vec![0.0, 1.0, 0.0, 1.0],
            metadata: SweepMetadata { protocol: None, initial: Level::Zero, target: "1".into(), metric: "m".into() },
        };
        let pts = contour_points(&map, 0.25);
        assert_eq!(pts, vec![(0.0, 0.25), (1.0, 0.25)]);
    }

    fn calibrated_pi_fine() -> StirapProtocol {
        let proto = detuned_preset(RotationKind::Pi);
        let cal =
            calibrate_amplitude(&proto, &linspace(18.0, 21.0, 61), RotationKind::Pi, &SimOptions::closed()).unwrap();
        proto.with_amplitude(cal.optimal_amplitude_mhz)
    }

    #[test]
    fn calibrated_pi_is_local_optimum() {
        let proto = calibrated_pi_fine();
        let grid = linspace(-0.05, 0.05, 11);
        let worst = |initial: Level, target: Level| {
            robustness_curve(&proto, DeviationAxis::Amplitude, &grid, initial, &ket(target), "t", &SimOptions::closed())
                .unwrap()
        };
        let a = worst(Level::Zero, Level::One);
        let b = worst(Level::One, Level::Zero);
        let combined: Vec<f64> = a.values.iter().zip(&b.values).map(|(x, y)| x.max(*y)).collect();
        let center = combined[5];
        for v in &combined {
            assert!(center <= *v + 1e-12);
        }
        // Flat band: within about twice the ≈0.011 floor over ±5%.
        for v in a.values.iter().chain(&b.values) {
            assert!(*v < 0.025, "{v}");
        }
    }

    #[test]
    fn larger_detuning_gives_high_fidelity_half_pi() {
        let proto = StirapProtocol {
            drive: detuned_preset(RotationKind::HalfPi).drive.with_single_photon(20.0),
            ..detuned_preset(RotationKind::HalfPi)
        };
        let cal =
            calibrate_amplitude(&proto, &linspace(0.0, 25.0, 61), RotationKind::HalfPi, &SimOptions::closed()).unwrap();
        let phase = crate::gates::calibrate_phase(
            &proto,
            cal.optimal_amplitude_mhz,
            &linspace(0.0, std::f64::consts::PI, 13),
            &SimOptions::closed(),
        )
        .unwrap();
        let calibrated = proto.with_amplitude(cal.optimal_amplitude_mhz).with_common_phase(phase.optimal_phase_rad);
        let curve = robustness_curve(
            &calibrated,
            DeviationAxis::Frequency,
            &linspace(-0.02, 0.02, 5),
            Level::Zero,
            &crate::gates::plus_x_target(),
            "+x",
            &SimOptions::closed(),
        )
        .unwrap();
        assert!(curve.min() < 1e-3, "{}", curve.min());
    }

    #[test]
    fn resonant_pi_pulse_transfers() {
        let gate = DynamicalGate::y_rotation(std::f64::consts::PI, 260.0);
        let rho = dynamical_final_state(&gate, &DensityMatrix::basis(Level::Zero), &[], &SimOptions::closed()).unwrap();
        assert!((rho.populations()[2] - 1.0).abs() < 1e-12);
        let half = DynamicalGate::y_rotation(std::f64::consts::FRAC_PI_2, 260.0);
        let rho = dynamical_final_state(&half, &DensityMatrix::basis(Level::Zero), &[], &SimOptions::closed()).unwrap();
        assert!(1.0 - rho.expectation(&crate::gates::plus_x_target()) < 1e-12);
    }

    #[test]
    fn baseline_beats_stirap_at_zero_but_not_everywhere() {
        let proto = calibrated_pi_fine();
        let grid = linspace(-0.1, 0.1, 11);
        let stirap = robustness_curve(
            &proto,
            DeviationAxis::Frequency,
            &grid,
            Level::Zero,
            &ket(Level::One),
            "1",
            &SimOptions::closed(),
        )
        .unwrap();
        let gate = DynamicalGate::y_rotation(std::f64::consts::PI, proto.total_window_ns());
        let baseline = dynamical_baseline(
            &gate,
            DeviationAxis::Frequency,
            &grid,
            proto.drive.single_photon_mhz(),
            Level::Zero,
            &ket(Level::One),
            "1",
            &[],
            &SimOptions::closed(),
        )
        .unwrap();
        assert!(baseline.values[5] < stirap.values[5]);
        let wins = stirap_advantage(&stirap, &baseline).unwrap();
        assert!(wins.iter().any(|x| x.abs() >= 0.03), "{wins:?}");
    }

    #[test]
    fn zero_reference_rejected_for_frequency_axis() {
        let proto = crate::gates::resonant_stirap_preset();
        let r = robustness_curve(
            &proto,
            DeviationAxis::Frequency,
            &[-0.1, 0.0, 0.1],
            Level::Zero,
            &ket(Level::One),
            "1",
            &SimOptions::closed(),
        );
        assert_eq!(r, Err(SweepError::ZeroReference));
    }

    #[test]
    fn dynamical_gate_is_hermitian_with_breakpoints() {
        let g = DynamicalGate { detuning_mhz: 0.3, ..DynamicalGate::y_rotation(1.0, 100.0) };
        let h = g.matrix_at(50.0);
        assert!(crate::linalg::hermiticity_defect(&h) < 1e-15);
        assert_eq!(g.matrix_at(150.0)[(0, 2)], ZERO);
        assert_eq!(g.breakpoints_ns(), vec![0.0, 100.0]);
        let _ = CVector3::zeros();
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn masks_grow_with_tolerance(t0 in 0.0..0.2f64, dt in 0.0..0.2f64, level in 0.0..1.0f64) {
            let grid = SweepGrid::new(vec![SweepAxis::new("a", "1", 0.0, 1.0, 20).unwrap()]).unwrap();
            let meta = SweepMetadata { protocol: None, initial: Level::Zero, target: "1".into(), metric: "m".into() };
            let a = SweepResult { grid: grid.clone(), values: (0..20).map(|k| (k as f64 * 0.37).sin().abs()).collect(), metadata: meta.clone() };
            let b = SweepResult { grid, values: (0..20).map(|k| (k as f64 * 0.21).cos().abs()).collect(), metadata: meta };
            let small = common_region(&a, &b, level, t0).unwrap();
            let large = common_region(&a, &b, level, t0 + dt).unwrap();
            prop_assert!(small.is_subset_of(&large));
        }
    }
}
