//! Unit conventions.
//!
//! User-facing frequencies are linear MHz and times are ns. Hamiltonians are
//! angular frequencies in rad/µs, so a propagation step of `dt_ns` uses the
//! exponent `H · dt_ns · US_PER_NS`.

use std::f64::consts::PI;

pub const US_PER_NS: f64 = 1e-3;

/// Linear MHz → angular rad/µs.
#[inline]
pub fn angular(mhz: f64) -> f64 {
    2.0 * PI * mhz
}

/// Angular rad/µs → linear MHz.
#[inline]
pub fn linear(rad_per_us: f64) -> f64 {
    rad_per_us / (2.0 * PI)
}

/// Ratio between the Rabi frequency entering the Hamiltonian off-diagonal
/// (as `Ω/2`) and the drive amplitude quoted for pulse calibrations.
///
/// A drive amplitude `A` (MHz) produces the Rabi frequency `Ω/2π = 2A`, so
/// the Hamiltonian coupling is `2π·A`.
pub const RABI_PER_DRIVE_AMPLITUDE: f64 = 2.0;

/// Elementary charge, C (exact SI value).
pub const ELEMENTARY_CHARGE_C: f64 = 1.602_176_634e-19;

/// Planck constant, J·s (exact SI value).
pub const PLANCK_J_S: f64 = 6.626_070_15e-34;

pub const FARAD_PER_FF: f64 = 1e-15;

/// Charging energy `e²/2C` in linear MHz for a capacitance in fF.
pub fn charging_energy_mhz(capacitance_ff: f64) -> f64 {
    ELEMENTARY_CHARGE_C * ELEMENTARY_CHARGE_C / (2.0 * capacitance_ff * FARAD_PER_FF * PLANCK_J_S) * 1e-6
}

/// Capacitance in fF whose charging energy is `e_c_mhz`.
pub fn capacitance_for_charging_energy_ff(e_c_mhz: f64) -> f64 {
    charging_energy_mhz(1.0) / e_c_mhz
}
