use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use stirap_core::gates::{
    detuned_preset, final_state, map_preset, protocol_unitary, resonant_stirap_preset, transfer_point,
};
use stirap_core::propagator::propagate_lindblad;
use stirap_core::tomography::{reconstruct, simulate_measurements, Tomography};
use stirap_core::{Decoherence, DensityMatrix, Level, MeasurementModel, RotationKind, SimOptions};

fn unitary(c: &mut Criterion) {
    let proto = detuned_preset(RotationKind::Pi);
    c.bench_function("unitary_detuned_pi_2000_steps", |b| {
        b.iter(|| protocol_unitary(black_box(&proto), 2000).unwrap())
    });
}

fn lindblad(c: &mut Criterion) {
    let proto = resonant_stirap_preset();
    let sys = proto.system(Some(Decoherence::device())).unwrap();
    let rho0 = DensityMatrix::basis(Level::Zero);
    let grid = [0.0, proto.total_window_ns()];
    c.bench_function("lindblad_resonant_0p1ns", |b| {
        b.iter(|| propagate_lindblad(black_box(&sys), &rho0, &grid, 0.1).unwrap())
    });
}

fn map_point(c: &mut Criterion) {
    let proto = map_preset();
    let opts = SimOptions::closed();
    c.bench_function("map_point_both_states", |b| b.iter(|| transfer_point(black_box(&proto), 0.0, &opts).unwrap()));
}

fn mle(c: &mut Criterion) {
    let proto = detuned_preset(RotationKind::Pi).with_amplitude(19.583);
    let rho = final_state(&proto, &DensityMatrix::basis(Level::Zero), &SimOptions::with_device_decoherence()).unwrap();
    let model = MeasurementModel { alpha_g: 0.0, alpha_0: 1.0, alpha_1: 2.0, shot_noise_sigma: 0.005 };
    let tomo = Tomography::ideal(model).unwrap();
    let record = simulate_measurements(&rho, &tomo, 11);
    c.bench_function("mle_reconstruction", |b| b.iter(|| reconstruct(black_box(&record), &tomo).unwrap()));
}

criterion_group!(benches, unitary, lindblad, map_point, mle);
criterion_main!(benches);
