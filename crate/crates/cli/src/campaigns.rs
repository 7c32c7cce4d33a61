//! Campaign runners. Each returns its artifacts in memory; writing and
//! checksumming happen in [`crate::output`].

use serde::Serialize;
use serde_json::json;
use stirap_core::device::{device_report, DeviceTable};
use stirap_core::gates::{calibrate_amplitude, calibrate_phase, final_state, protocol_trace, StirapProtocol};
use stirap_core::sweeps::{
    amplitude_detuning_maps, common_region, dynamical_baseline, robustness_curve, DynamicalGate, RegionMask,
};
use stirap_core::tomography::{
    gate_targets, reconstruct, rotation_set_with_error, simulate_measurements, state_fidelity, Tomography,
};
use stirap_core::vsystem::collapse_operators;
use stirap_core::{
    DensityMatrix, DeviationAxis, Level, MeasurementModel, RotationKind, SimOptions, StateVector, SweepAxis, Table, C64,
};

use crate::config::{Campaign, ExperimentConfig, SweepKind, SweepSpec, TARGET_NAMES};
use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Series {
    pub file: String,
    pub x: String,
    pub y: String,
    pub label: String,
}

/// One panel of the plotting recipe.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Panel {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub file: String,
    pub contents: String,
}

#[derive(Debug, Default)]
pub struct CampaignOutput {
    pub artifacts: Vec<Artifact>,
    pub panels: Vec<Panel>,
}

impl CampaignOutput {
    fn table(&mut self, file: String, table: &Table) {
        self.artifacts.push(Artifact { file, contents: table.to_csv() });
    }

    fn json(&mut self, file: &str, value: &serde_json::Value) {
        let mut contents = serde_json::to_string_pretty(value).expect("json values serialize");
        contents.push('\n');
        self.artifacts.push(Artifact { file: file.into(), contents });
    }
}

fn series(file: &str, x: &str, y: &str, label: &str) -> Series {
    Series { file: file.into(), x: x.into(), y: y.into(), label: label.into() }
}

fn panel(title: &str, x_label: &str, y_label: &str, series: Vec<Series>) -> Panel {
    Panel { title: title.into(), x_label: x_label.into(), y_label: y_label.into(), series }
}

pub fn provenance(config: &ExperimentConfig) -> String {
    let title = if config.title.is_empty() { "untitled" } else { config.title.as_str() };
    format!("{title} | campaign={} | stirap {}", config.campaign.name(), env!("CARGO_PKG_VERSION"))
}

pub fn run(config: &ExperimentConfig, seed: u64) -> Result<CampaignOutput, CliError> {
    match config.campaign {
        Campaign::Simulate => simulate(config),
        Campaign::Calibrate => calibrate(config),
        Campaign::Tomography => tomography(config, seed),
        Campaign::Sweep => {
            let spec = config.sweep.as_ref().expect("validated");
            match spec.kind {
                SweepKind::Map => sweep_map(config, spec),
                SweepKind::Robustness => sweep_robustness(config, spec),
            }
        }
        Campaign::DeviceReport => device(config),
    }
}

fn simulate(config: &ExperimentConfig) -> Result<CampaignOutput, CliError> {
    let spec = config.simulate.as_ref().expect("validated");
    let proto = config.protocol.build();
    let opts = config.system.options();
    let prov = provenance(config);
    let mut out = CampaignOutput::default();
    let mut populations = Vec::new();
    let mut overlaps = Vec::new();
    for &initial in &spec.initial_states {
        let mut trace = protocol_trace(&proto, initial, spec.samples, &opts)?;
        if !spec.eigen_overlaps {
            trace.overlaps = None;
        }
        let file = format!("trace_from_{}.csv", initial.label());
        out.table(file.clone(), &trace.to_table(&format!("{prov} | initial={}", initial.label())));
        for (col, name) in [("P0", "|0⟩"), ("Pg", "|g⟩"), ("P1", "|1⟩")] {
            populations.push(series(&file, "time_ns", col, &format!("{name} from |{}⟩", initial.label())));
        }
        if spec.eigen_overlaps {
            for (col, name) in [("ov_plus", "|+⟩"), ("ov_dark", "|d⟩"), ("ov_minus", "|−⟩")] {
                overlaps.push(series(&file, "time_ns", col, &format!("{name} from |{}⟩", initial.label())));
            }
        }
    }
    out.panels.push(panel("populations", "time (ns)", "population", populations));
    if !overlaps.is_empty() {
        out.panels.push(panel("eigenbasis overlaps", "time (ns)", "overlap", overlaps));
    }
    Ok(out)
}

fn calibrate(config: &ExperimentConfig) -> Result<CampaignOutput, CliError> {
    let spec = config.calibrate.as_ref().expect("validated");
    let proto = config.protocol.build();
    let opts = config.system.options();
    let prov = provenance(config);
    let mut out = CampaignOutput::default();
    let cal = calibrate_amplitude(&proto, &spec.amplitude.values(), spec.rotation, &opts)?;
    let mut table = Table::new(
        prov.clone(),
        &[
            ("amplitude", "MHz"),
            ("P0_from_0", "1"),
            ("Pg_from_0", "1"),
            ("P1_from_0", "1"),
            ("P0_from_1", "1"),
            ("Pg_from_1", "1"),
            ("P1_from_1", "1"),
            ("metric", "1"),
        ],
    );
    for (p, m) in cal.sweep.points.iter().zip(&cal.sweep.metric) {
        let mut row = vec![p.parameter];
        row.extend(p.from_zero);
        row.extend(p.from_one);
        row.push(*m);
        table.push(row);
    }
    out.table("amplitude_sweep.csv".into(), &table);
    let mut curves = Vec::new();
    for s in ["0", "1"] {
        for (lvl, name) in [("P0", "|0⟩"), ("Pg", "|g⟩"), ("P1", "|1⟩")] {
            curves.push(series(
                "amplitude_sweep.csv",
                "amplitude",
                &format!("{lvl}_from_{s}"),
                &format!("{name} from |{s}⟩"),
            ));
        }
    }
    out.panels.push(panel("transfer vs amplitude", "drive amplitude (MHz)", "population", curves));
    let mut summary = json!({
        "rotation": spec.rotation,
        "optimal_amplitude_mhz": cal.optimal_amplitude_mhz,
        "metric": cal.metric,
    });
    if let Some(grid) = &spec.phase {
        let phase = calibrate_phase(&proto, cal.optimal_amplitude_mhz, &grid.values(), &opts)?;
        let mut table = Table::new(prov, &[("phase", "rad"), ("overlap", "1")]);
        for (b, m) in phase.sweep.grid.iter().zip(&phase.sweep.metric) {
            table.push(vec![*b, *m]);
        }
        out.table("phase_sweep.csv".into(), &table);
        out.panels.push(panel(
            "common-phase calibration",
            "common phase β (rad)",
            "overlap with (|0⟩+|1⟩)/√2",
            vec![series("phase_sweep.csv", "phase", "overlap", "from |0⟩")],
        ));
        summary["optimal_phase_rad"] = json!(phase.optimal_phase_rad);
        summary["phase_metric"] = json!(phase.metric);
    }
    out.json("calibration.json", &summary);
    Ok(out)
}

/// π or phase-calibrated π/2 protocol, calibrated in the closed system.
fn calibrated_gate(
    proto: &StirapProtocol,
    rotation: RotationKind,
    amplitude: &[f64],
    phase: Option<&[f64]>,
    opts: &SimOptions,
) -> Result<StirapProtocol, CliError> {
    let closed = SimOptions { decoherence: None, ..*opts };
    let cal = calibrate_amplitude(proto, amplitude, rotation, &closed)?;
    let mut p = proto.with_amplitude(cal.optimal_amplitude_mhz);
    if let (RotationKind::HalfPi, Some(grid)) = (rotation, phase) {
        let ph = calibrate_phase(proto, cal.optimal_amplitude_mhz, grid, &closed)?;
        p = p.with_common_phase(ph.optimal_phase_rad);
    }
    Ok(p)
}

fn tomography(config: &ExperimentConfig, seed: u64) -> Result<CampaignOutput, CliError> {
    let spec = config.tomography.as_ref().expect("validated");
    let proto = config.protocol.build();
    let opts = config.system.options();
    let prov = provenance(config);
    let m = &spec.measurement;
    let model = MeasurementModel {
        alpha_g: m.alpha_g,
        alpha_0: m.alpha_0,
        alpha_1: m.alpha_1,
        shot_noise_sigma: m.shot_noise_sigma,
    };
    let tomo = Tomography::with_rotations(model, rotation_set_with_error(spec.rotation_angle_error))?;
    let pi = calibrated_gate(&proto, RotationKind::Pi, &spec.pi_amplitude.values(), None, &opts)?;
    let half = calibrated_gate(
        &proto,
        RotationKind::HalfPi,
        &spec.half_pi_amplitude.values(),
        Some(&spec.phase.values()),
        &opts,
    )?;
    let wanted: Vec<&str> = match &spec.targets {
        Some(t) => t.iter().map(String::as_str).collect(),
        None => TARGET_NAMES.to_vec(),
    };
    let mut out = CampaignOutput::default();
    let mut fidelities = Table::new(
        prov.clone(),
        &[("target", "index"), ("fidelity", "1"), ("purity", "1"), ("min_eigenvalue", "1"), ("residual", "1")],
    );
    let mut summary = Vec::new();
    for (k, (name, initial, target)) in gate_targets().into_iter().enumerate() {
        if !wanted.contains(&name) {
            continue;
        }
        let gate = if name.starts_with("pi") { &pi } else { &half };
        let rho = final_state(gate, &DensityMatrix::basis(initial), &opts)?;
        let record = simulate_measurements(&rho, &tomo, seed.wrapping_add(k as u64));
        let rec = reconstruct(&record, &tomo)?;
        let fidelity = state_fidelity(&rec.rho, &target);
        let mut table = Table::new(
            format!("{prov} | target={name}"),
            &[("row", "index"), ("col", "index"), ("re", "1"), ("im", "1")],
        );
        for i in 0..3 {
            for j in 0..3 {
                let v: C64 = rec.rho.matrix()[(i, j)];
                table.push(vec![i as f64, j as f64, v.re, v.im]);
            }
        }
        out.table(format!("rho_{name}.csv"), &table);
        fidelities.push(vec![k as f64, fidelity, rec.rho.purity(), rec.rho.min_eigenvalue(), rec.residual]);
        summary.push(json!({
            "target": name,
            "index": k,
            "initial": initial.label(),
            "fidelity": fidelity,
            "converged": rec.converged,
            "iterations": rec.iterations,
        }));
    }
    out.table("fidelities.csv".into(), &fidelities);
    out.panels.push(panel(
        "reconstructed fidelities",
        "target index",
        "fidelity",
        vec![series("fidelities.csv", "target", "fidelity", "fidelity")],
    ));
    out.json(
        "tomography.json",
        &json!({
            "pi_amplitude_mhz": pi.amplitude_mhz,
            "half_pi_amplitude_mhz": half.amplitude_mhz,
            "half_pi_common_phase_rad": half.common_phase_rad,
            "targets": summary,
        }),
    );
    Ok(out)
}

fn region_table(prov: &str, region: &RegionMask) -> Table {
    let mut table = Table::new(prov.to_string(), &[("delta", "MHz"), ("amplitude", "MHz")]);
    for p in region.points() {
        table.push(p);
    }
    table
}

fn sweep_map(config: &ExperimentConfig, spec: &SweepSpec) -> Result<CampaignOutput, CliError> {
    let proto = config.protocol.build();
    let opts = config.system.options();
    let prov = provenance(config);
    let (d, a) = (spec.delta.expect("validated"), spec.amplitude.expect("validated"));
    let maps = amplitude_detuning_maps(
        &proto,
        SweepAxis::new("delta", "MHz", d.min, d.max, d.points)?,
        SweepAxis::new("amplitude", "MHz", a.min, a.max, a.points)?,
        &opts,
    )?;
    let mut out = CampaignOutput::default();
    out.table("map_from_0.csv".into(), &maps.from_zero.to_table(&format!("{prov} | P1 from |0⟩")));
    out.table("map_from_1.csv".into(), &maps.from_one.to_table(&format!("{prov} | P0 from |1⟩")));
    out.panels.push(panel(
        "transfer maps",
        "single-photon detuning (MHz)",
        "drive amplitude (MHz)",
        vec![
            series("map_from_0.csv", "delta", "transfer", "P1 from |0⟩"),
            series("map_from_1.csv", "delta", "transfer", "P0 from |1⟩"),
        ],
    ));
    let mut regions = Vec::new();
    let mut region_series = Vec::new();
    for &tol in &spec.tolerances {
        for (label, level) in [("pi", 1.0), ("half_pi", 0.5)] {
            let region = common_region(&maps.from_zero, &maps.from_one, level, tol)?;
            let file = format!("region_{label}_tol_{tol:e}.csv");
            out.table(file.clone(), &region_table(&format!("{prov} | level={level} tol={tol:e}"), &region));
            region_series.push(series(&file, "delta", "amplitude", &format!("{label} within {tol:e}")));
            regions.push(json!({ "rotation": label, "level": level, "tolerance": tol, "points": region.count() }));
        }
    }
    if !region_series.is_empty() {
        out.panels.push(panel(
            "common regions",
            "single-photon detuning (MHz)",
            "drive amplitude (MHz)",
            region_series,
        ));
    }
    out.json("regions.json", &json!({ "regions": regions }));
    Ok(out)
}

fn target_state(rotation: RotationKind, initial: Level) -> StateVector {
    let sign = if initial == Level::One { -1.0 } else { 1.0 };
    match rotation {
        RotationKind::Pi => StateVector::basis(initial.partner()),
        RotationKind::HalfPi => {
            StateVector::new(Level::Zero.ket() + Level::One.ket() * C64::from(sign)).expect("nonzero state")
        }
    }
}

fn sweep_robustness(config: &ExperimentConfig, spec: &SweepSpec) -> Result<CampaignOutput, CliError> {
    let proto = config.protocol.build();
    let opts = config.system.options();
    let prov = provenance(config);
    let deviation = spec.deviation.expect("validated").values();
    let calibration = spec.calibration.expect("validated").values();
    let phase = spec.phase.map(|p| p.values());
    let collapse = match opts.decoherence {
        Some(dec) => collapse_operators(&proto.system(Some(dec))?)?,
        None => Vec::new(),
    };
    let mut out = CampaignOutput::default();
    let mut summary = Vec::new();
    for &rotation in &spec.rotations {
        let gate = calibrated_gate(&proto, rotation, &calibration, phase.as_deref(), &opts)?;
        let name = match rotation {
            RotationKind::Pi => "pi",
            RotationKind::HalfPi => "half_pi",
        };
        let angle = match rotation {
            RotationKind::Pi => std::f64::consts::PI,
            RotationKind::HalfPi => std::f64::consts::FRAC_PI_2,
        };
        let baseline_gate = DynamicalGate::y_rotation(angle, gate.total_window_ns());
        for &axis in &spec.axes {
            let mut columns: Vec<(String, &str)> = vec![("deviation".into(), "1")];
            let mut curves = Vec::new();
            for &initial in &spec.initial_states {
                let target = target_state(rotation, initial);
                let label = initial.label();
                let stirap = robustness_curve(&gate, axis, &deviation, initial, &target, name, &opts)?;
                columns.push((format!("stirap_from_{label}"), "1"));
                curves.push(stirap.values);
                if spec.dynamical_baseline {
                    let reference = gate.drive.single_photon_mhz();
                    let base = dynamical_baseline(
                        &baseline_gate,
                        axis,
                        &deviation,
                        reference,
                        initial,
                        &target,
                        name,
                        &collapse,
                        &opts,
                    )?;
                    columns.push((format!("dynamical_from_{label}"), "1"));
                    curves.push(base.values);
                }
            }
            let cols: Vec<(&str, &str)> = columns.iter().map(|(n, u)| (n.as_str(), *u)).collect();
            let mut table = Table::new(format!("{prov} | rotation={name} axis={}", axis.label()), &cols);
            for (k, x) in deviation.iter().enumerate() {
                let mut row = vec![*x];
                row.extend(curves.iter().map(|c| c[k]));
                table.push(row);
            }
            let file = format!("robustness_{name}_{}.csv", axis.label());
            out.table(file.clone(), &table);
            out.panels.push(panel(
                &format!("{name} robustness, {}", axis_title(axis)),
                &format!("{} (fractional)", axis_title(axis)),
                "state infidelity",
                columns[1..].iter().map(|(c, _)| series(&file, "deviation", c, c)).collect(),
            ));
        }
        summary.push(json!({
            "rotation": name,
            "amplitude_mhz": gate.amplitude_mhz,
            "common_phase_rad": gate.common_phase_rad,
        }));
    }
    out.json("robustness.json", &json!({ "calibrations": summary }));
    Ok(out)
}

fn axis_title(axis: DeviationAxis) -> &'static str {
    match axis {
        DeviationAxis::Amplitude => "amplitude deviation",
        DeviationAxis::Frequency => "frequency deviation",
        DeviationAxis::TwoPhoton => "two-photon deviation",
    }
}

fn device(config: &ExperimentConfig) -> Result<CampaignOutput, CliError> {
    let levels = config.device.clone().unwrap_or_default().levels;
    let report = device_report(&DeviceTable::measured(), levels)?;
    let mut out = CampaignOutput::default();
    out.artifacts.push(Artifact { file: "device_report.csv".into(), contents: report.to_csv(&provenance(config)) });
    out.json("device_fit.json", &serde_json::to_value(&report.fit).expect("fit serializes"));
    Ok(out)
}
