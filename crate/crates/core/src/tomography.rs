//! Three-level state tomography: nine analysis rotations, a diagonal
//! measurement operator, linear inversion and a maximum-likelihood
//! projection onto physical states.
//!
//! Each record entry is `⟨I_k⟩ = Tr(ρ R_k M R_k†)` with
//! `M = α_g|g⟩⟨g| + α₀|0⟩⟨0| + α₁|1⟩⟨1|`.

use argmin::core::{CostFunction, Executor, Gradient, State, TerminationReason, TerminationStatus};
use argmin::solver::linesearch::MoreThuenteLineSearch;
use argmin::solver::quasinewton::LBFGS;
use nalgebra::{Cholesky, DMatrix, DVector};
use rand::rngs::StdRng;
use rand::SeedableRng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{hermitian_eigen, psd_sqrt, CMatrix3, CVector3, C64, I, ZERO};
use crate::propagator::DensityMatrix;
use crate::vsystem::Level;

/// Relative singular-value cutoff for the design-matrix rank.
pub const RANK_TOL: f64 = 1e-10;

pub const MLE_MAX_ITERS: u64 = 10_000;
pub const MLE_GRAD_TOL: f64 = 1e-10;

/// Eigenvalue floor used when seeding the MLE from an unphysical estimate.
const SEED_FLOOR: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TomographyError {
    #[error("measurement amplitudes must be pairwise distinct, got α_g={alpha_g}, α_0={alpha_0}, α_1={alpha_1}")]
    DegenerateModel { alpha_g: f64, alpha_0: f64, alpha_1: f64 },
    #[error("design matrix has rank {rank} < 8 for α_g={alpha_g}, α_0={alpha_0}, α_1={alpha_1}")]
    RankDeficient { rank: usize, alpha_g: f64, alpha_0: f64, alpha_1: f64 },
    #[error("record has {got} entries, expected {expected}")]
    RecordLength { got: usize, expected: usize },
    #[error("shot-noise sigma must be finite and non-negative, got {0}")]
    BadNoise(f64),
    #[error("optimizer failed: {0}")]
    Optimizer(String),
}

/// Readout amplitudes for |g⟩, |0⟩, |1⟩ and additive Gaussian noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasurementModel {
    pub alpha_g: f64,
    pub alpha_0: f64,
    pub alpha_1: f64,
    #[serde(default)]
    pub shot_noise_sigma: f64,
}

impl Default for MeasurementModel {
    fn default() -> Self {
        Self { alpha_g: 0.0, alpha_0: 1.0, alpha_1: 2.0, shot_noise_sigma: 0.0 }
    }
}

impl MeasurementModel {
    pub fn validate(&self) -> Result<(), TomographyError> {
        let (g, a, b) = (self.alpha_g, self.alpha_0, self.alpha_1);
        if g == a || g == b || a == b {
            return Err(TomographyError::DegenerateModel { alpha_g: g, alpha_0: a, alpha_1: b });
        }
        if !(self.shot_noise_sigma >= 0.0 && self.shot_noise_sigma.is_finite()) {
            return Err(TomographyError::BadNoise(self.shot_noise_sigma));
        }
        Ok(())
    }

    /// `M` in the (|0⟩, |g⟩, |1⟩) basis.
    pub fn operator(&self) -> CMatrix3 {
        CMatrix3::from_diagonal(&CVector3::new(self.alpha_0.into(), self.alpha_g.into(), self.alpha_1.into()))
    }

    /// Largest minus smallest amplitude.
    pub fn spread(&self) -> f64 {
        let v = [self.alpha_g, self.alpha_0, self.alpha_1];
        v.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - v.iter().cloned().fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
}

/// `exp(−iθ/2 · n·σ)` on the two-level subspace {|g⟩, |level⟩}, identity on
/// the third level.
pub fn subspace_rotation(level: Level, axis: Axis, angle: f64) -> CMatrix3 {
    let g = Level::Ground.index();
    let j = level.index();
    let (c, s) = ((0.5 * angle).cos(), (0.5 * angle).sin());
    let mut r = CMatrix3::identity();
    r[(g, g)] = c.into();
    r[(j, j)] = c.into();
    match axis {
        Axis::X => {
            r[(g, j)] = -I * s;
            r[(j, g)] = -I * s;
        }
        Axis::Y => {
            r[(g, j)] = C64::from(-s);
            r[(j, g)] = C64::from(s);
        }
    }
    r
}

pub const ROTATION_LABELS: [&str; 9] =
    ["I", "X90_g0", "Y90_g0", "X180_g0", "X90_g1", "Y90_g1", "X180_g0*X90_g1", "X180_g0*Y90_g1", "X180_g0*X180_g1"];

/// The nine analysis rotations with every rotation angle scaled by
/// `1 + angle_error`.
pub fn rotation_set_with_error(angle_error: f64) -> [CMatrix3; 9] {
    use std::f64::consts::{FRAC_PI_2, PI};
    let k = 1.0 + angle_error;
    let r = |level, axis, angle: f64| subspace_rotation(level, axis, k * angle);
    let x180_g0 = r(Level::Zero, Axis::X, PI);
    [
        CMatrix3::identity(),
        r(Level::Zero, Axis::X, FRAC_PI_2),
        r(Level::Zero, Axis::Y, FRAC_PI_2),
        x180_g0,
        r(Level::One, Axis::X, FRAC_PI_2),
        r(Level::One, Axis::Y, FRAC_PI_2),
        x180_g0 * r(Level::One, Axis::X, FRAC_PI_2),
        x180_g0 * r(Level::One, Axis::Y, FRAC_PI_2),
        x180_g0 * r(Level::One, Axis::X, PI),
    ]
}

/// Ideal analysis rotations, in the order of [`ROTATION_LABELS`].
pub fn rotation_set() -> [CMatrix3; 9] {
    rotation_set_with_error(0.0)
}

/// Measurement model together with the analysis rotations it is paired with.
#[derive(Debug, Clone, PartialEq)]
pub struct Tomography {
    pub model: MeasurementModel,
    pub rotations: [CMatrix3; 9],
}

impl Tomography {
    pub fn ideal(model: MeasurementModel) -> Result<Self, TomographyError> {
        Self::with_rotations(model, rotation_set())
    }

    pub fn with_rotations(model: MeasurementModel, rotations: [CMatrix3; 9]) -> Result<Self, TomographyError> {
        model.validate()?;
        Ok(Self { model, rotations })
    }

    /// Observables `A_k = R_k M R_k†`.
    pub fn observables(&self) -> [CMatrix3; 9] {
        let m = self.model.operator();
        self.rotations.map(|r| r * m * r.adjoint())
    }
}

/// Nine measured coefficients with their rotation labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TomographyRecord {
    pub labels: Vec<String>,
    pub values: Vec<f64>,
}

impl TomographyRecord {
    pub fn new(values: Vec<f64>) -> Result<Self, TomographyError> {
        if values.len() != 9 {
            return Err(TomographyError::RecordLength { got: values.len(), expected: 9 });
        }
        Ok(Self { labels: ROTATION_LABELS.iter().map(|s| s.to_string()).collect(), values })
    }
}

/// Noiseless traces plus, when `shot_noise_sigma > 0`, seeded Gaussian noise.
pub fn simulate_measurements(rho: &DensityMatrix, tomo: &Tomography, seed: u64) -> TomographyRecord {
    let mut values: Vec<f64> = tomo.observables().iter().map(|a| (rho.matrix() * a).trace().re).collect();
    if tomo.model.shot_noise_sigma > 0.0 {
        let mut rng = StdRng::seed_from_u64(seed);
        let noise = Normal::new(0.0, tomo.model.shot_noise_sigma).expect("validated sigma");
        for v in &mut values {
            *v += noise.sample(&mut rng);
        }
    }
    TomographyRecord::new(values).expect("nine rotations")
}

/// Gell-Mann matrices in the (|0⟩, |g⟩, |1⟩) basis.
pub fn gell_mann() -> [CMatrix3; 8] {
    let mut out = [CMatrix3::zeros(); 8];
    let mut k = 0;
    for (a, b) in [(0, 1), (0, 2), (1, 2)] {
        out[k][(a, b)] = 1.0.into();
        out[k][(b, a)] = 1.0.into();
        out[k + 1][(a, b)] = -I;
        out[k + 1][(b, a)] = I;
        k += 2;
    }
    out[6][(0, 0)] = 1.0.into();
    out[6][(1, 1)] = (-1.0).into();
    let s = 1.0 / 3f64.sqrt();
    out[7][(0, 0)] = s.into();
    out[7][(1, 1)] = s.into();
    out[7][(2, 2)] = (-2.0 * s).into();
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Linear,
    Mle,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructedState {
    pub rho: DensityMatrix,
    pub method: Method,
    /// Root-mean-square misfit of the objective the method minimized.
    pub residual: f64,
    /// False when the estimate has an eigenvalue below `−1e-10`.
    pub physical: bool,
    /// False when the optimizer stopped on its iteration cap.
    pub converged: bool,
    pub iterations: u64,
}

fn design(tomo: &Tomography) -> (DMatrix<f64>, DVector<f64>) {
    let basis = gell_mann();
    let observables = tomo.observables();
    let d = DMatrix::from_fn(9, 8, |k, a| 0.5 * (basis[a] * observables[k]).trace().re);
    let offset = DVector::from_fn(9, |k, _| observables[k].trace().re / 3.0);
    (d, offset)
}

/// Rank of the 9×8 design matrix.
pub fn design_rank(tomo: &Tomography) -> usize {
    let (d, _) = design(tomo);
    let sv = d.singular_values();
    let max = sv.max();
    sv.iter().filter(|&&s| s > RANK_TOL * max).count()
}

fn rho_from_coefficients(c: &DVector<f64>) -> CMatrix3 {
    let basis = gell_mann();
    let mut rho = CMatrix3::identity() / C64::from(3.0);
    for (a, lambda) in basis.iter().enumerate() {
        rho += lambda * C64::from(0.5 * c[a]);
    }
    rho
}

fn record_residual(rho: &CMatrix3, tomo: &Tomography, record: &TomographyRecord) -> f64 {
    let sq: f64 = tomo.observables().iter().zip(&record.values).map(|(a, v)| ((rho * a).trace().re - v).powi(2)).sum();
    (sq / 9.0).sqrt()
}

/// Least-squares Hermitian, unit-trace estimate `ρ = I/3 + ½ Σ c_a λ_a`.
pub fn linear_inversion(record: &TomographyRecord, tomo: &Tomography) -> Result<ReconstructedState, TomographyError> {
    if record.values.len() != 9 {
        return Err(TomographyError::RecordLength { got: record.values.len(), expected: 9 });
    }
    let rank = design_rank(tomo);
    if rank < 8 {
        let m = tomo.model;
        return Err(TomographyError::RankDeficient {
            rank,
            alpha_g: m.alpha_g,
            alpha_0: m.alpha_0,
            alpha_1: m.alpha_1,
        });
    }
    let (d, offset) = design(tomo);
    let rhs = DVector::from_column_slice(&record.values) - offset;
    let c = d.svd(true, true).solve(&rhs, RANK_TOL).map_err(|e| TomographyError::Optimizer(e.to_string()))?;
    let rho = rho_from_coefficients(&c);
    let residual = record_residual(&rho, tomo, record);
    let rho = DensityMatrix::unchecked(rho);
    Ok(ReconstructedState {
        physical: rho.min_eigenvalue() >= -1e-10,
        rho,
        method: Method::Linear,
        residual,
        converged: true,
        iterations: 0,
    })
}

/// What the maximum-likelihood projection is fitted to.
#[derive(Debug, Clone, Copy)]
pub enum MleTarget<'a> {
    /// Squared misfit to the measured coefficients.
    Record(&'a TomographyRecord, &'a Tomography),
    /// Squared Frobenius distance to an estimate.
    Estimate(&'a DensityMatrix),
}

/// Lower-triangular T (real diagonal) packed as 9 reals.
fn unpack(x: &[f64]) -> CMatrix3 {
    let mut t = CMatrix3::zeros();
    t[(0, 0)] = x[0].into();
    t[(1, 1)] = x[1].into();
    t[(2, 2)] = x[2].into();
    t[(1, 0)] = C64::new(x[3], x[4]);
    t[(2, 0)] = C64::new(x[5], x[6]);
    t[(2, 1)] = C64::new(x[7], x[8]);
    t
}

fn pack(t: &CMatrix3) -> Vec<f64> {
    vec![
        t[(0, 0)].re,
        t[(1, 1)].re,
        t[(2, 2)].re,
        t[(1, 0)].re,
        t[(1, 0)].im,
        t[(2, 0)].re,
        t[(2, 0)].im,
        t[(2, 1)].re,
        t[(2, 1)].im,
    ]
}

fn rho_of(t: &CMatrix3) -> CMatrix3 {
    let tt = t.adjoint() * t;
    tt / tt.trace()
}

struct MleProblem {
    observables: Vec<CMatrix3>,
    values: Vec<f64>,
    estimate: Option<CMatrix3>,
}

impl MleProblem {
    fn new(target: MleTarget<'_>) -> Self {
        match target {
            MleTarget::Record(record, tomo) => {
                Self { observables: tomo.observables().to_vec(), values: record.values.clone(), estimate: None }
            }
            MleTarget::Estimate(rho) => {
                Self { observables: Vec::new(), values: Vec::new(), estimate: Some(*rho.matrix()) }
            }
        }
    }

    /// Objective and its matrix gradient `G` with `df = Tr(G dρ)`.
    fn objective(&self, rho: &CMatrix3) -> (f64, CMatrix3) {
        match &self.estimate {
            Some(est) => {
                let diff = rho - est;
                (diff.norm_squared(), diff * C64::from(2.0))
            }
            None => {
                let mut f = 0.0;
                let mut g = CMatrix3::zeros();
                for (a, v) in self.observables.iter().zip(&self.values) {
                    let r = (rho * a).trace().re - v;
                    f += r * r;
                    g += a * C64::from(2.0 * r);
                }
                (f, g)
            }
        }
    }
}

impl CostFunction for MleProblem {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, x: &Self::Param) -> Result<f64, argmin::core::Error> {
        Ok(self.objective(&rho_of(&unpack(x))).0)
    }
}

impl Gradient for MleProblem {
    type Param = Vec<f64>;
    type Gradient = Vec<f64>;

    fn gradient(&self, x: &Self::Param) -> Result<Vec<f64>, argmin::core::Error> {
        let t = unpack(x);
        let norm = (t.adjoint() * t).trace().re;
        let rho = rho_of(&t);
        let (_, g) = self.objective(&rho);
        let p = (g * rho).trace();
        // df = Re Tr(B dT) with B = 2 (G − Tr(Gρ)) T† / N.
        let b = (g - CMatrix3::identity() * p) * t.adjoint() * C64::from(2.0 / norm);
        let d = |i: usize, j: usize| b[(j, i)];
        Ok(vec![
            d(0, 0).re,
            d(1, 1).re,
            d(2, 2).re,
            d(1, 0).re,
            -d(1, 0).im,
            d(2, 0).re,
            -d(2, 0).im,
            d(2, 1).re,
            -d(2, 1).im,
        ])
    }
}

/// Nearest physical state by eigenvalue flooring, as a T with `ρ = T†T`.
fn seed_factor(rho: &CMatrix3) -> CMatrix3 {
    let (values, vectors) = hermitian_eigen(rho);
    let floored: Vec<f64> = values.iter().map(|v| v.max(SEED_FLOOR)).collect();
    let total: f64 = floored.iter().sum();
    let mut projected = CMatrix3::zeros();
    for (k, v) in floored.iter().enumerate() {
        let col = vectors.column(k).into_owned();
        projected += col * col.adjoint() * C64::from(v / total);
    }
    // Reverse the index order so the Cholesky factor comes out as T†T with T
    // lower-triangular.
    let reverse = |m: &CMatrix3| CMatrix3::from_fn(|i, j| m[(2 - i, 2 - j)]);
    let l = Cholesky::new(reverse(&projected)).expect("floored state is positive definite").l();
    reverse(&l.adjoint())
}

/// Maximum-likelihood physical state: `ρ = T†T / Tr(T†T)` with T
/// lower-triangular, fitted by L-BFGS from the eigenvalue-floored seed.
pub fn mle_project(seed: &DensityMatrix, target: MleTarget<'_>) -> Result<ReconstructedState, TomographyError> {
    let herm = (seed.matrix() + seed.matrix().adjoint()) * C64::from(0.5);
    let herm = herm / herm.trace();
    let x0 = pack(&seed_factor(&herm));
    let problem = MleProblem::new(target);
    let solver = LBFGS::new(MoreThuenteLineSearch::new(), 10)
        .with_tolerance_grad(MLE_GRAD_TOL)
        .and_then(|s| s.with_tolerance_cost(0.0))
        .map_err(|e| TomographyError::Optimizer(e.to_string()))?;
    let result = Executor::new(problem, solver)
        .configure(|state| state.param(x0.clone()).max_iters(MLE_MAX_ITERS))
        .run()
        .map_err(|e| TomographyError::Optimizer(e.to_string()))?;
    let state = result.state();
    let best = state.get_best_param().cloned().unwrap_or(x0);
    let converged =
        !matches!(state.get_termination_status(), TerminationStatus::Terminated(TerminationReason::MaxItersReached));
    let rho = rho_of(&unpack(&best));
    let residual = (state.get_best_cost().max(0.0) / 9.0).sqrt();
    let rho = DensityMatrix::unchecked((rho + rho.adjoint()) * C64::from(0.5));
    Ok(ReconstructedState {
        physical: rho.min_eigenvalue() >= -1e-10,
        rho,
        method: Method::Mle,
        residual,
        converged,
        iterations: state.get_iter(),
    })
}

/// Linear inversion followed by the maximum-likelihood fit to the record.
pub fn reconstruct(record: &TomographyRecord, tomo: &Tomography) -> Result<ReconstructedState, TomographyError> {
    let linear = linear_inversion(record, tomo)?;
    mle_project(&linear.rho, MleTarget::Record(record, tomo))
}

/// Uhlmann fidelity `(Tr √(√ρ σ √ρ))²`, clamped to [0, 1].
pub fn state_fidelity(rho: &DensityMatrix, target: &DensityMatrix) -> f64 {
    let s = psd_sqrt(rho.matrix());
    let inner = psd_sqrt(&(s * target.matrix() * s));
    inner.trace().re.powi(2).clamp(0.0, 1.0)
}

/// Pure state with the given amplitudes (normalized).
pub fn pure(amplitudes: [C64; 3]) -> DensityMatrix {
    let v = CVector3::new(amplitudes[0], amplitudes[1], amplitudes[2]);
    let v = v / C64::from(v.norm());
    DensityMatrix::unchecked(v * v.adjoint())
}

/// The four gate targets: π from |0⟩ and |1⟩, π/2 about y from |0⟩ and |1⟩.
pub fn gate_targets() -> [(&'static str, Level, DensityMatrix); 4] {
    let one = C64::from(1.0);
    [
        ("pi_from_0", Level::Zero, pure([ZERO, ZERO, one])),
        ("pi_from_1", Level::One, pure([one, ZERO, ZERO])),
        ("half_pi_from_0", Level::Zero, pure([one, ZERO, one])),
        ("half_pi_from_1", Level::One, pure([one, ZERO, -one])),
    ]
}
