//! Two capacitively coupled transmons read out through one cavity: circuit
//! reduction to bright/dark modes, dispersive shifts, and numerical
//! diagonalization oracles for both.
//!
//! Frequencies of modes are in GHz, everything else in linear MHz.

use argmin::core::{CostFunction, Executor, State};
use argmin::solver::neldermead::NelderMead;
use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::units::{capacitance_for_charging_energy_ff, charging_energy_mhz};

/// Closest allowed approach of Δ_b to a pole of the dispersive formulas, MHz.
pub const POLE_GUARD_MHZ: f64 = 1.0;
pub const MIN_ORACLE_LEVELS: usize = 4;
pub const DEFAULT_TRANSMON_LEVELS: usize = 20;
const MHZ_PER_GHZ: f64 = 1e3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DeviceError {
    #[error("invalid circuit parameter `{field}` = {value}")]
    InvalidParameter { field: &'static str, value: f64 },
    #[error("Δ_b = {delta_mhz} MHz is within {distance_mhz} MHz of the {resonance} pole")]
    NearPole { resonance: &'static str, delta_mhz: f64, distance_mhz: f64 },
    #[error("oracle needs at least {MIN_ORACLE_LEVELS} levels per mode, got {0}")]
    TooFewLevels(usize),
    #[error("could not identify dressed state {0}")]
    Identification(String),
    #[error("fit failed: {0}")]
    Fit(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircuitParams {
    /// Pad capacitance of each transmon, fF.
    pub c_ff: f64,
    /// Coupling capacitance, fF.
    pub c_c_ff: f64,
    /// Average Josephson energy, GHz.
    pub e_j_ghz: f64,
    /// Junction asymmetry (E_J2 − E_J1)/(E_J2 + E_J1).
    pub d_j: f64,
}

impl CircuitParams {
    pub fn validate(&self) -> Result<(), DeviceError> {
        let positive = [("c_ff", self.c_ff), ("c_c_ff", self.c_c_ff), ("e_j_ghz", self.e_j_ghz)];
        for (field, value) in positive {
            if !(value > 0.0) || !value.is_finite() {
                return Err(DeviceError::InvalidParameter { field, value });
            }
        }
        if !(self.d_j.abs() < 1.0) {
            return Err(DeviceError::InvalidParameter { field: "d_j", value: self.d_j });
        }
        Ok(())
    }

    /// Bright-mode capacitance 2C + 4C_c, fF.
    pub fn c_bright_ff(&self) -> f64 {
        2.0 * self.c_ff + 4.0 * self.c_c_ff
    }

    /// Dark-mode capacitance 2C, fF.
    pub fn c_dark_ff(&self) -> f64 {
        2.0 * self.c_ff
    }

    /// Josephson energy of each mode's quadratic term, 2E_J, MHz.
    pub fn e_j_mode_mhz(&self) -> f64 {
        2.0 * self.e_j_ghz * MHZ_PER_GHZ
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeParams {
    pub omega_b_ghz: f64,
    pub omega_d_ghz: f64,
    pub alpha_b_mhz: f64,
    pub alpha_d_mhz: f64,
    pub g_zz_mhz: f64,
    pub e_cb_mhz: f64,
    pub e_cd_mhz: f64,
}

/// Bright/dark mode parameters to fourth order in the phases, with the
/// junction asymmetry dropped.
pub fn reduce_circuit(params: &CircuitParams) -> Result<ModeParams, DeviceError> {
    params.validate()?;
    let e_cb = charging_energy_mhz(params.c_bright_ff());
    let e_cd = charging_energy_mhz(params.c_dark_ff());
    let e_j = params.e_j_mode_mhz();
    let (alpha_b, alpha_d) = (e_cb, e_cd);
    let g_zz = (e_cb * e_cd).sqrt();
    Ok(ModeParams {
        omega_b_ghz: ((8.0 * e_j * e_cb).sqrt() - alpha_b - g_zz) / MHZ_PER_GHZ,
        omega_d_ghz: ((8.0 * e_j * e_cd).sqrt() - alpha_d - g_zz) / MHZ_PER_GHZ,
        alpha_b_mhz: alpha_b,
        alpha_d_mhz: alpha_d,
        g_zz_mhz: g_zz,
        e_cb_mhz: e_cb,
        e_cd_mhz: e_cd,
    })
}

/// Device values as tabulated for the measured sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviceTable {
    pub cavity_ghz: f64,
    pub omega_b_ghz: f64,
    pub omega_d_ghz: f64,
    pub alpha_b_mhz: f64,
    pub alpha_d_mhz: f64,
    pub g_zz_mhz: f64,
    pub chi_b_mhz: f64,
    pub chi_d_mhz: f64,
    pub g_b_mhz: f64,
    pub d_j: f64,
}

impl DeviceTable {
    pub fn measured() -> Self {
        Self {
            cavity_ghz: 7.205,
            omega_b_ghz: 4.361,
            omega_d_ghz: 4.792,
            alpha_b_mhz: 100.0,
            alpha_d_mhz: 130.0,
            g_zz_mhz: 180.0,
            chi_b_mhz: 1.2,
            chi_d_mhz: 1.55,
            g_b_mhz: 150.0,
            d_j: 0.01,
        }
    }

    /// Qubit-minus-cavity detuning of the bright mode, MHz.
    pub fn delta_b_mhz(&self) -> f64 {
        (self.omega_b_ghz - self.cavity_ghz) * MHZ_PER_GHZ
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircuitFit {
    pub params: CircuitParams,
    pub modes: ModeParams,
    /// Relative residuals for (α_b, α_d, g_zz, ω_b, ω_d).
    pub relative_residuals: [f64; 5],
    pub rms_residual: f64,
    pub iterations: u64,
}

struct FitProblem {
    target: DeviceTable,
    d_j: f64,
}

impl FitProblem {
    fn params(&self, x: &[f64]) -> CircuitParams {
        CircuitParams { c_ff: x[0].exp(), c_c_ff: x[1].exp(), e_j_ghz: x[2].exp(), d_j: self.d_j }
    }

    fn residuals(&self, modes: &ModeParams) -> [f64; 5] {
        let t = &self.target;
        [
            modes.alpha_b_mhz / t.alpha_b_mhz - 1.0,
            modes.alpha_d_mhz / t.alpha_d_mhz - 1.0,
            modes.g_zz_mhz / t.g_zz_mhz - 1.0,
            modes.omega_b_ghz / t.omega_b_ghz - 1.0,
            modes.omega_d_ghz / t.omega_d_ghz - 1.0,
        ]
    }
}

impl CostFunction for FitProblem {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, x: &Self::Param) -> Result<f64, argmin::core::Error> {
        let modes = reduce_circuit(&self.params(x))?;
        Ok(self.residuals(&modes).iter().map(|r| r * r).sum())
    }
}

/// Least-squares fit of (C, C_c, E_J) to the tabulated mode parameters,
/// in log coordinates so all three stay positive.
pub fn fit_circuit(target: &DeviceTable) -> Result<CircuitFit, DeviceError> {
    // Seed from the anharmonicities and the bright-mode frequency.
    let c_d = capacitance_for_charging_energy_ff(target.alpha_d_mhz);
    let c_b = capacitance_for_charging_energy_ff(target.alpha_b_mhz);
    let c = 0.5 * c_d;
    let c_c = ((c_b - c_d) / 4.0).max(0.05 * c);
    let plasma = target.omega_b_ghz * MHZ_PER_GHZ + target.alpha_b_mhz + target.g_zz_mhz;
    let e_j = plasma * plasma / (16.0 * target.alpha_b_mhz) / MHZ_PER_GHZ;
    let x0 = vec![c.ln(), c_c.ln(), e_j.ln()];
    let simplex: Vec<Vec<f64>> = std::iter::once(x0.clone())
        .chain((0..3).map(|k| {
            let mut v = x0.clone();
            v[k] += 0.1;
            v
        }))
        .collect();
    let problem = FitProblem { target: *target, d_j: target.d_j };
    let solver = NelderMead::new(simplex).with_sd_tolerance(1e-14).map_err(|e| DeviceError::Fit(e.to_string()))?;
    let result = Executor::new(problem, solver)
        .configure(|s| s.max_iters(5000))
        .run()
        .map_err(|e| DeviceError::Fit(e.to_string()))?;
    let state = result.state();
    let best = state.get_best_param().cloned().ok_or_else(|| DeviceError::Fit("no parameters".into()))?;
    let problem = FitProblem { target: *target, d_j: target.d_j };
    let params = problem.params(&best);
    let modes = reduce_circuit(&params)?;
    let relative_residuals = problem.residuals(&modes);
    let rms_residual = (relative_residuals.iter().map(|r| r * r).sum::<f64>() / 5.0).sqrt();
    Ok(CircuitFit { params, modes, relative_residuals, rms_residual, iterations: state.get_iter() })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DispersiveParams {
    pub g_b_mhz: f64,
    pub delta_b_mhz: f64,
    pub chi_b_mhz: f64,
    pub chi_d_mhz: f64,
}

/// Second-order dispersive shifts of the cavity for bright and dark
/// excitations, `Δ_b = ω_b − ω_r`.
pub fn dispersive_shifts(g_b: f64, delta_b: f64, alpha_b: f64, g_zz: f64) -> Result<DispersiveParams, DeviceError> {
    let poles = [("qubit–cavity", 0.0), ("anharmonic (α_b)", alpha_b), ("cross-Kerr (2g_zz)", 2.0 * g_zz)];
    for (resonance, pole) in poles {
        let distance = (delta_b - pole).abs();
        if distance < POLE_GUARD_MHZ {
            return Err(DeviceError::NearPole { resonance, delta_mhz: delta_b, distance_mhz: distance });
        }
    }
    let g2 = g_b * g_b;
    Ok(DispersiveParams {
        g_b_mhz: g_b,
        delta_b_mhz: delta_b,
        chi_b_mhz: 2.0 * g2 * alpha_b / (delta_b * (alpha_b - delta_b)),
        chi_d_mhz: 2.0 * g2 * g_zz / (delta_b * (2.0 * g_zz - delta_b)),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleSpectrum {
    pub levels: usize,
    /// Dressed energies (MHz) indexed by bare occupation (n_a, n_b, n_d).
    pub energies: Vec<f64>,
    pub chi_b_mhz: f64,
    pub chi_d_mhz: f64,
}

impl OracleSpectrum {
    pub fn energy(&self, na: usize, nb: usize, nd: usize) -> f64 {
        self.energies[(na * self.levels + nb) * self.levels + nd]
    }
}

/// Index of the eigenvector with the largest weight on each basis state.
fn identify(vectors: &DMatrix<f64>, values: &[f64], wanted: &[usize]) -> Result<Vec<f64>, DeviceError> {
    let mut taken = vec![false; values.len()];
    let mut out = Vec::with_capacity(wanted.len());
    for &w in wanted {
        let (best, weight) = (0..values.len())
            .filter(|k| !taken[*k])
            .map(|k| (k, vectors[(w, k)].powi(2)))
            .fold((usize::MAX, 0.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if best == usize::MAX || weight < 0.5 {
            return Err(DeviceError::Identification(format!("basis index {w} (weight {weight:.3})")));
        }
        taken[best] = true;
        out.push(values[best]);
    }
    Ok(out)
}

/// Cavity + bright + dark modes with cross-Kerr and bright-mode exchange
/// coupling, diagonalized on `levels` Fock states per mode. Energies in MHz.
pub fn exact_diagonalization_oracle(
    modes: &ModeParams,
    g_b_mhz: f64,
    omega_r_ghz: f64,
    levels: usize,
) -> Result<OracleSpectrum, DeviceError> {
    if levels < MIN_ORACLE_LEVELS {
        return Err(DeviceError::TooFewLevels(levels));
    }
    let l = levels;
    let dim = l * l * l;
    let idx = |a: usize, b: usize, d: usize| (a * l + b) * l + d;
    let (wr, wb, wd) = (omega_r_ghz * MHZ_PER_GHZ, modes.omega_b_ghz * MHZ_PER_GHZ, modes.omega_d_ghz * MHZ_PER_GHZ);
    let mut h = DMatrix::<f64>::zeros(dim, dim);
    for a in 0..l {
        for b in 0..l {
            for d in 0..l {
                let (fa, fb, fd) = (a as f64, b as f64, d as f64);
                let i = idx(a, b, d);
                h[(i, i)] = wr * fa + wb * fb - 0.5 * modes.alpha_b_mhz * fb * (fb - 1.0) + wd * fd
                    - 0.5 * modes.alpha_d_mhz * fd * (fd - 1.0)
                    - 2.0 * modes.g_zz_mhz * fb * fd;
                if a + 1 < l && b >= 1 {
                    // a† b
                    let j = idx(a + 1, b - 1, d);
                    let v = g_b_mhz * ((a + 1) as f64 * fb).sqrt();
                    h[(j, i)] = v;
                    h[(i, j)] = v;
                }
            }
        }
    }
    let eig = SymmetricEigen::new(h);
    let values: Vec<f64> = eig.eigenvalues.iter().cloned().collect();
    let mut energies = vec![f64::NAN; dim];
    let wanted: Vec<usize> = [(0, 0, 0), (1, 0, 0), (0, 1, 0), (1, 1, 0), (0, 0, 1), (1, 0, 1)]
        .iter()
        .map(|&(a, b, d)| idx(a, b, d))
        .collect();
    for (w, e) in wanted.iter().zip(identify(&eig.eigenvectors, &values, &wanted)?) {
        energies[*w] = e;
    }
    let e = |a, b, d| energies[idx(a, b, d)];
    let chi_b = e(1, 1, 0) - e(1, 0, 0) - e(0, 1, 0) + e(0, 0, 0);
    let chi_d = e(1, 0, 1) - e(1, 0, 0) - e(0, 0, 1) + e(0, 0, 0);
    Ok(OracleSpectrum { levels, energies, chi_b_mhz: chi_b, chi_d_mhz: chi_d })
}

/// Low-lying spectrum of the full cosine potential, including the
/// junction-asymmetry term `−2E_J d_J sin φ_b sin φ_d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransmonSpectrum {
    pub omega_b_ghz: f64,
    pub omega_d_ghz: f64,
    pub alpha_b_mhz: f64,
    pub alpha_d_mhz: f64,
    pub g_zz_mhz: f64,
}

/// Position, cosine, sine and squared-charge matrices of one mode in the
/// harmonic basis of its quadratic part, truncated to `n` levels after
/// being built on a larger basis.
fn mode_operators(e_c: f64, e_j_mode: f64, n: usize) -> [DMatrix<f64>; 3] {
    let big = n + 30;
    let xi = (8.0 * e_c / e_j_mode).powf(0.25) / 2f64.sqrt();
    let mut x = DMatrix::<f64>::zeros(big, big);
    let mut p = DMatrix::<f64>::zeros(big, big);
    for k in 1..big {
        let s = (k as f64).sqrt();
        x[(k - 1, k)] = s;
        x[(k, k - 1)] = s;
        // b − b†
        p[(k - 1, k)] = s;
        p[(k, k - 1)] = -s;
    }
    let phi = x * xi;
    let eig = SymmetricEigen::new(phi);
    let func = |f: fn(f64) -> f64| {
        let d = DMatrix::from_diagonal(&eig.eigenvalues.map(f));
        &eig.eigenvectors * d * eig.eigenvectors.transpose()
    };
    let cos = func(f64::cos);
    let sin = func(f64::sin);
    let n2 = -(&p * &p) / (4.0 * xi * xi);
    let cut = |m: DMatrix<f64>| m.view((0, 0), (n, n)).into_owned();
    [cut(cos), cut(sin), cut(n2)]
}

pub fn transmon_spectrum(params: &CircuitParams, levels: usize) -> Result<TransmonSpectrum, DeviceError> {
    params.validate()?;
    if levels < MIN_ORACLE_LEVELS {
        return Err(DeviceError::TooFewLevels(levels));
    }
    let e_cb = charging_energy_mhz(params.c_bright_ff());
    let e_cd = charging_energy_mhz(params.c_dark_ff());
    let e_j_mode = params.e_j_mode_mhz();
    let e_j = 0.5 * e_j_mode;
    let [cos_b, sin_b, n2_b] = mode_operators(e_cb, e_j_mode, levels);
    let [cos_d, sin_d, n2_d] = mode_operators(e_cd, e_j_mode, levels);
    let id = DMatrix::<f64>::identity(levels, levels);
    let h = n2_b.kronecker(&id) * (4.0 * e_cb) + id.kronecker(&n2_d) * (4.0 * e_cd)
        - cos_b.kronecker(&cos_d) * (2.0 * e_j)
        - sin_b.kronecker(&sin_d) * (2.0 * e_j * params.d_j);
    let eig = SymmetricEigen::new(h);
    let values: Vec<f64> = eig.eigenvalues.iter().cloned().collect();
    let idx = |b: usize, d: usize| b * levels + d;
    let wanted = [idx(0, 0), idx(1, 0), idx(0, 1), idx(1, 1), idx(2, 0), idx(0, 2)];
    let e = identify(&eig.eigenvectors, &values, &wanted)?;
    let (e00, e10, e01, e11, e20, e02) = (e[0], e[1], e[2], e[3], e[4], e[5]);
    Ok(TransmonSpectrum {
        omega_b_ghz: (e10 - e00) / MHZ_PER_GHZ,
        omega_d_ghz: (e01 - e00) / MHZ_PER_GHZ,
        alpha_b_mhz: 2.0 * (e10 - e00) - (e20 - e00),
        alpha_d_mhz: 2.0 * (e01 - e00) - (e02 - e00),
        g_zz_mhz: -0.5 * (e11 - e10 - e01 + e00),
    })
}

/// Exchange amplitude `2E_J d_J ξ_b ξ_d` between |10⟩ and |01⟩ produced by
/// the asymmetry term at lowest order, MHz.
pub fn asymmetry_exchange_mhz(params: &CircuitParams) -> f64 {
    let e_j_mode = params.e_j_mode_mhz();
    let xi = |e_c: f64| (8.0 * e_c / e_j_mode).powf(0.25) / 2f64.sqrt();
    e_j_mode * params.d_j * xi(charging_energy_mhz(params.c_bright_ff())) * xi(charging_energy_mhz(params.c_dark_ff()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub quantity: String,
    pub unit: String,
    pub model: f64,
    /// Tabulated device value, when there is one.
    pub reference: Option<f64>,
}

/// Model values next to the tabulated device values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceReport {
    pub fit: CircuitFit,
    pub rows: Vec<ReportRow>,
}

impl DeviceReport {
    pub fn row(&self, quantity: &str) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.quantity == quantity)
    }

    pub fn to_csv(&self, provenance: &str) -> String {
        let mut out = format!("# {provenance}\nquantity,unit,model,reference\n");
        for r in &self.rows {
            let reference = r.reference.map(|v| format!("{v:?}")).unwrap_or_default();
            out.push_str(&format!("{},{},{:?},{}\n", r.quantity, r.unit, r.model, reference));
        }
        out
    }
}

/// Circuit fit, reduced-model values, dispersive shifts for both detuning
/// sign conventions, the diagonalization check and the asymmetry coupling.
pub fn device_report(table: &DeviceTable, levels: usize) -> Result<DeviceReport, DeviceError> {
    let fit = fit_circuit(table)?;
    let m = &fit.modes;
    let row = |q: &str, unit: &str, model: f64, reference: Option<f64>| ReportRow {
        quantity: q.into(),
        unit: unit.into(),
        model,
        reference,
    };
    let mut rows = vec![
        row("C", "fF", fit.params.c_ff, None),
        row("C_c", "fF", fit.params.c_c_ff, None),
        row("E_J", "GHz", fit.params.e_j_ghz, None),
        row("fit_rms_relative_residual", "1", fit.rms_residual, None),
        row("omega_b", "GHz", m.omega_b_ghz, Some(table.omega_b_ghz)),
        row("omega_d", "GHz", m.omega_d_ghz, Some(table.omega_d_ghz)),
        row("alpha_b", "MHz", m.alpha_b_mhz, Some(table.alpha_b_mhz)),
        row("alpha_d", "MHz", m.alpha_d_mhz, Some(table.alpha_d_mhz)),
        row("g_zz", "MHz", m.g_zz_mhz, Some(table.g_zz_mhz)),
    ];
    // Tabulated mode values in the dispersive formulas, with Δ_b of either sign.
    for (label, delta) in [("qubit_minus_cavity", table.delta_b_mhz()), ("cavity_minus_qubit", -table.delta_b_mhz())] {
        let d = dispersive_shifts(table.g_b_mhz, delta, table.alpha_b_mhz, table.g_zz_mhz)?;
        rows.push(row(&format!("delta_b_{label}"), "MHz", delta, None));
        rows.push(row(&format!("chi_b_{label}"), "MHz", d.chi_b_mhz, Some(table.chi_b_mhz)));
        rows.push(row(&format!("chi_d_{label}"), "MHz", d.chi_d_mhz, Some(table.chi_d_mhz)));
    }
    let tabulated = ModeParams {
        omega_b_ghz: table.omega_b_ghz,
        omega_d_ghz: table.omega_d_ghz,
        alpha_b_mhz: table.alpha_b_mhz,
        alpha_d_mhz: table.alpha_d_mhz,
        g_zz_mhz: table.g_zz_mhz,
        e_cb_mhz: table.alpha_b_mhz,
        e_cd_mhz: table.alpha_d_mhz,
    };
    let oracle = exact_diagonalization_oracle(&tabulated, table.g_b_mhz, table.cavity_ghz, levels)?;
    rows.push(row("chi_b_diagonalization", "MHz", oracle.chi_b_mhz, Some(table.chi_b_mhz)));
    rows.push(row("chi_d_diagonalization", "MHz", oracle.chi_d_mhz, Some(table.chi_d_mhz)));
    let full = transmon_spectrum(&fit.params, DEFAULT_TRANSMON_LEVELS)?;
    let symmetric = transmon_spectrum(&CircuitParams { d_j: 0.0, ..fit.params }, DEFAULT_TRANSMON_LEVELS)?;
    rows.push(row("omega_b_full_cosine", "GHz", full.omega_b_ghz, Some(table.omega_b_ghz)));
    rows.push(row("omega_d_full_cosine", "GHz", full.omega_d_ghz, Some(table.omega_d_ghz)));
    rows.push(row("alpha_b_full_cosine", "MHz", full.alpha_b_mhz, Some(table.alpha_b_mhz)));
    rows.push(row("alpha_d_full_cosine", "MHz", full.alpha_d_mhz, Some(table.alpha_d_mhz)));
    rows.push(row("g_zz_full_cosine", "MHz", full.g_zz_mhz, Some(table.g_zz_mhz)));
    rows.push(row("asymmetry_exchange", "MHz", asymmetry_exchange_mhz(&fit.params), None));
    rows.push(row("asymmetry_shift_omega_b", "MHz", (full.omega_b_ghz - symmetric.omega_b_ghz) * MHZ_PER_GHZ, None));
    rows.push(row("asymmetry_shift_omega_d", "MHz", (full.omega_d_ghz - symmetric.omega_d_ghz) * MHZ_PER_GHZ, None));
    Ok(DeviceReport { fit, rows })
}
