//! Physical invariants through the public API.

use proptest::prelude::*;
use stirap_core::gates::{detuned_preset, protocol_unitary, transfer_point};
use stirap_core::linalg::unitarity_defect;
use stirap_core::propagator::propagate_lindblad;
use stirap_core::sweeps::{apply_deviation, common_region, SweepAxis};
use stirap_core::{Decoherence, DensityMatrix, DeviationAxis, DriveConfig, Level, RotationKind, SimOptions};

fn cfg() -> ProptestConfig {
    ProptestConfig { cases: 24, ..ProptestConfig::default() }
}

proptest! {
    #![proptest_config(cfg())]

    #[test]
    fn closed_protocols_are_unitary(amp in 0.0..40.0f64, delta in -40.0..40.0f64, two in -5.0..5.0f64) {
        let proto = detuned_preset(RotationKind::Pi).with_amplitude(amp);
        let proto = stirap_core::StirapProtocol { drive: DriveConfig::from_detunings(delta, two), ..proto };
        let u = protocol_unitary(&proto, 600).unwrap();
        prop_assert!(unitarity_defect(&u) < 1e-11);
    }

    #[test]
    fn populations_are_conserved(amp in 0.0..40.0f64, delta in 0.0..40.0f64) {
        let proto = detuned_preset(RotationKind::Pi).with_amplitude(amp);
        let proto = stirap_core::StirapProtocol { drive: proto.drive.with_single_photon(delta), ..proto };
        let p = transfer_point(&proto, amp, &SimOptions { steps: 600, ..SimOptions::closed() }).unwrap();
        for pops in [p.from_zero, p.from_one] {
            prop_assert!((pops.iter().sum::<f64>() - 1.0).abs() < 1e-10);
            prop_assert!(pops.iter().all(|&x| (-1e-12..=1.0 + 1e-12).contains(&x)));
        }
    }

    #[test]
    fn lindblad_keeps_states_physical(amp in 1.0..30.0f64, scale in 0.02..1.0f64) {
        let dec = Decoherence::device();
        let dec = Decoherence {
            t1_0_us: dec.t1_0_us * scale,
            t1_1_us: dec.t1_1_us * scale,
            t2_0_us: dec.t2_0_us * scale,
            t2_1_us: dec.t2_1_us * scale,
        };
        let proto = detuned_preset(RotationKind::Pi).with_amplitude(amp);
        let sys = proto.system(Some(dec)).unwrap();
        let run = propagate_lindblad(&sys, &DensityMatrix::basis(Level::One), &[0.0, 100.0, proto.total_window_ns()], 0.2)
            .unwrap();
        prop_assert!(run.max_trace_drift < 1e-10);
        prop_assert!(run.min_eigenvalue > -1e-9);
        prop_assert!(run.final_state.purity() <= 1.0 + 1e-10);
    }

    #[test]
    fn zero_deviation_is_identity(axis_ix in 0usize..3) {
        let axis = [DeviationAxis::Amplitude, DeviationAxis::Frequency, DeviationAxis::TwoPhoton][axis_ix];
        let proto = detuned_preset(RotationKind::Pi);
        prop_assert_eq!(apply_deviation(&proto, axis, 0.0, 15.0), proto);
    }
}

#[test]
fn tighter_tolerance_gives_a_smaller_region() {
    let proto = detuned_preset(RotationKind::Pi);
    let opts = SimOptions { steps: 400, ..SimOptions::closed() };
    let maps = stirap_core::sweeps::amplitude_detuning_maps(
        &proto,
        SweepAxis::new("delta", "MHz", 5.0, 25.0, 9).unwrap(),
        SweepAxis::new("amplitude", "MHz", 10.0, 30.0, 9).unwrap(),
        &opts,
    )
    .unwrap();
    let loose = common_region(&maps.from_zero, &maps.from_one, 1.0, 5e-2).unwrap();
    let tight = common_region(&maps.from_zero, &maps.from_one, 1.0, 1e-2).unwrap();
    assert!(tight.is_subset_of(&loose));
    assert!(loose.count() > 0);
}
