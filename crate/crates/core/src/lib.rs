//! Simulation, calibration and characterization of detuned-STIRAP single-qubit
//! gates on a driven V-type three-level system (|0⟩, |g⟩, |1⟩).

pub mod device;
pub mod gates;
pub mod linalg;
pub mod propagator;
pub mod spectral;
pub mod sweeps;
pub mod table;
pub mod tomography;
pub mod units;
pub mod vsystem;

pub use device::{CircuitParams, DeviceError, DeviceTable, DispersiveParams, ModeParams};
pub use gates::{GateError, RotationKind, SimOptions, StirapProtocol};
pub use linalg::{CMatrix3, CVector3, C64};
pub use propagator::{DensityMatrix, EvolutionTrace, PropagatorError, StateVector};
pub use spectral::SpectralError;
pub use sweeps::{DeviationAxis, SweepAxis, SweepError, SweepGrid, SweepResult};
pub use table::Table;
pub use tomography::{MeasurementModel, ReconstructedState, TomographyError, TomographyRecord};
pub use vsystem::{Decoherence, DriveConfig, Hamiltonian, Level, ModelError, PulseEnvelope, VSystem};

/// Any error raised by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Propagator(#[from] PropagatorError),
    #[error(transparent)]
    Gate(#[from] GateError),
    #[error(transparent)]
    Tomography(#[from] TomographyError),
    #[error(transparent)]
    Sweep(#[from] SweepError),
    #[error(transparent)]
    Device(#[from] DeviceError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
