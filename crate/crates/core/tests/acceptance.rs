//! Acceptance suite: one test per exit criterion, each printing a
//! PASS/FAIL line with the measured values. Tolerances are pinned in the
//! constants below.

use pulsesim::calibrate::{
    calibrate_gate, CalibrateOptions, GateToCalibrate, Objective, ParamField, ParamSpec,
};
use pulsesim::circuit::{CircuitEvolveOptions, CircuitPlan, Order};
use pulsesim::device::{Coupling, DeviceSpec};
use pulsesim::effective::{
    EffectiveDevice, EffectiveEvolveOptions, EffectiveParams, EffectivePlan,
};
use pulsesim::linalg::{expm_hermitian, CMatrix, C64};
use pulsesim::metrics::{
    avg_infidelity, diamond_bounds, leakage, report_for, trajectory, unitary_diamond_distance,
};
use pulsesim::program::{
    cz_key, ideal_unitary, lower_program, run_program, Backend, CzEntry, Gate, MpEntry, Program,
    PulseTable,
};
use pulsesim::pulse::{FluxErf, FluxMw, FluxPulse};
use pulsesim::schedule::{Schedule, SegmentDrives};
use pulsesim::spectrum::{grid_search_epsilon, spectral_deviation, GridSearchSpec};
use pulsesim::subsystem::{SpectrumModel, SubsystemSpec};
use pulsesim::tensor::StateVector;
use pulsesim::TWO_PI;

// ---------------------------------------------------------------- devices

/// Two-qubit device: transmon qubits 0/1 + one coupling resonator.
/// `nj` sets the basis count of the flux-driven qubit 1; undriven
/// transmons and resonators carry four states.
fn two_qubit_device(nj_q1: usize) -> DeviceSpec {
    DeviceSpec {
        subsystems: vec![
            SubsystemSpec::tunable_transmon(1.068, 2.355, 7.064, 0.0, 4),
            SubsystemSpec::tunable_transmon(1.037, 3.612, 10.837, 0.0, nj_q1),
            SubsystemSpec::resonator(45.0, 4),
        ],
        couplings: vec![
            Coupling { a: 2, b: 0, channel: 4, g: 0.300, g_static: None },
            Coupling { a: 2, b: 1, channel: 4, g: 0.300, g_static: None },
        ],
    }
}

/// Appendix pulse parameters of the two-qubit device.
fn two_qubit_table() -> PulseTable {
    let mut t = PulseTable::default();
    t.mp.insert(
        0,
        MpEntry {
            t_d: 52.250,
            nu_d: 4.196,
            a: 0.004,
            sigma: 12.082,
            b: 0.072,
            z_pre: 0.0,
            z_post: 0.0,
            spectator_z: vec![],
        },
    );
    t.mp.insert(
        1,
        MpEntry {
            t_d: 52.950,
            nu_d: 5.195,
            a: 0.005,
            sigma: 10.000,
            b: 0.070,
            z_pre: 0.0,
            z_post: 0.0,
            spectator_z: vec![],
        },
    );
    t.cz.insert(
        cz_key(0, 1),
        CzEntry {
            t_p: 99.835,
            t_d: 125.000,
            delta_frac: 0.392,
            sigma: 1.313,
            bimodal: false,
            driven_qubit: 1,
            rz: vec![],
        },
    );
    t
}

/// Architecture-I effective device: two fixed transmons + tunable coupler.
fn arch_i_effective(static_g: (f64, f64)) -> EffectiveDevice {
    let device = DeviceSpec {
        subsystems: vec![
            SubsystemSpec { n_basis: 4, ..SubsystemSpec::fixed_transmon(1.079, 13.456, 4) },
            SubsystemSpec { n_basis: 4, ..SubsystemSpec::fixed_transmon(1.027, 20.371, 4) },
            SubsystemSpec::tunable_transmon(0.880, 17.897, 21.486, 0.15, 4),
        ],
        couplings: vec![
            Coupling { a: 2, b: 0, channel: 1, g: 0.085, g_static: Some(static_g.0) },
            Coupling { a: 2, b: 1, channel: 1, g: 0.085, g_static: Some(static_g.1) },
        ],
    };
    EffectiveDevice {
        device,
        params: vec![
            Some(EffectiveParams::Fixed { nu_q0: 5.100, alpha_q0: -0.310 }),
            Some(EffectiveParams::Fixed { nu_q0: 6.200, alpha_q0: -0.285 }),
            Some(EffectiveParams::Tunable {
                spectrum: SpectrumModel::ApproximationIi { nu_q0: 8.100, alpha_q0: -0.235 },
            }),
        ],
    }
}

/// Flux-tunable coupler of the architecture-I chip (row i = 2).
fn coupler_row2(n_basis: usize) -> SubsystemSpec {
    SubsystemSpec::tunable_transmon(0.880, 17.897, 21.486, 0.15, n_basis)
}

fn pass_fail(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

// ------------------------------------------------------------ criterion 8

#[test]
fn criterion_8_diamond_distance_engine() {
    const TOL_GAP: f64 = 1e-4;
    const TOL_VALUE: f64 = 1e-3;

    struct Rng(u64);
    impl Rng {
        fn next(&mut self) -> f64 {
            self.0 ^= self.0 << 13;
            self.0 ^= self.0 >> 7;
            self.0 ^= self.0 << 17;
            (self.0 >> 11) as f64 / (1u64 << 52) as f64 * 2.0 - 1.0
        }
        fn unitary(&mut self, n: usize, spread: f64) -> CMatrix {
            let mut h = CMatrix::zeros(n, n);
            for i in 0..n {
                for j in 0..=i {
                    let v = if i == j {
                        C64::new(self.next() * spread, 0.0)
                    } else {
                        C64::new(self.next() * spread, self.next() * spread)
                    };
                    h[(i, j)] = v;
                    h[(j, i)] = v.conj();
                }
            }
            expm_hermitian(&h, 1.0).unwrap()
        }
    }
    let mut rng = Rng(0x9e3779b97f4a7c15);

    let mut worst_gap = 0.0f64;
    let mut worst_value = 0.0f64;
    let mut failures = 0usize;
    for k in 0..50 {
        let dim = if k % 2 == 0 { 2 } else { 4 };
        // moderate spread keeps the eigenphase span below pi, where the
        // closed form is the hull-distance expression
        let u = rng.unitary(dim, 0.5);
        let m = rng.unitary(dim, 0.5);
        let v = &u * m.adjoint();
        let closed = unitary_diamond_distance(&v).unwrap();
        let b = diamond_bounds(&m, &u, TOL_GAP).unwrap();
        let gap = b.upper - b.lower;
        let dev = (b.lower - closed).abs().max((b.upper - closed).abs());
        worst_gap = worst_gap.max(gap);
        worst_value = worst_value.max(dev);
        if gap > TOL_GAP || dev > TOL_VALUE || !b.converged {
            failures += 1;
        }
    }

    // leaky instances: bounds must sandwich
    let mut sandwich_ok = true;
    for k in 0..20 {
        let dim = if k % 2 == 0 { 2 } else { 4 };
        let u = rng.unitary(dim, 0.6);
        let shrink = 0.85 + 0.1 * rng.next().abs();
        let m = rng.unitary(dim, 0.6).map(|c| c * shrink);
        let b = diamond_bounds(&m, &u, TOL_GAP).unwrap();
        if b.lower > b.upper + 1e-12 {
            sandwich_ok = false;
        }
    }

    let ok = failures == 0 && sandwich_ok;
    println!(
        "ACCEPTANCE 8 diamond-distance engine: {} (worst gap {:.2e} <= {TOL_GAP:.0e}, worst closed-form deviation {:.2e} <= {TOL_VALUE:.0e}, {} unitary failures, leaky sandwich {})",
        pass_fail(ok),
        worst_gap,
        worst_value,
        failures,
        sandwich_ok,
    );
    assert!(ok);
}

// ------------------------------------------------------------ criterion 6

#[test]
fn criterion_6_two_qubit_gate_metrics() {
    // printed reference values of the two-qubit table
    const RX90_REF: (f64, f64, f64) = (0.0093, 0.0004, 0.0004); // diamond, infidelity, leakage
    const CZ_REF: (f64, f64, f64) = (0.0290, 0.0011, 0.0008);
    const BAND: f64 = 3.0;
    const RECAL_IF_RX90: f64 = 0.002;
    const RECAL_IF_CZ: f64 = 0.004;

    let qubit_subs = [0usize, 1usize];
    let diamond_tol = 1e-3;

    // ---- RX90 on qubit 0 (no flux drive: four states everywhere)
    let device = two_qubit_device(4);
    let plan = CircuitPlan::build(&device, 1e-3).unwrap();
    let backend = Backend::Circuit(&plan, CircuitEvolveOptions { tau: 1e-3, ..Default::default() });
    let program = Program { n_qubits: 2, gates: vec![Gate::Rx90 { q: 0 }] };
    let u = ideal_unitary(&program).unwrap();

    // direct evaluation: printed parameters, virtual-z phases solved by the
    // preprocessing (no pulse-parameter changes)
    let outcome = calibrate_gate(
        &backend,
        &qubit_subs,
        2,
        &two_qubit_table(),
        GateToCalibrate::Mp { qubit: 0 },
        &[],
        &CalibrateOptions::default(),
    )
    .unwrap();
    let m_direct = run_program(&backend, &qubit_subs, &program, &outcome.table).unwrap();
    let direct = report_for(&m_direct, &u, diamond_tol).unwrap();
    let rx_direct_in_band = direct.mu_diamond_upper >= RX90_REF.0 / BAND
        && direct.mu_diamond_upper <= RX90_REF.0 * BAND
        && direct.mu_if_avg <= RX90_REF.1 * BAND
        && direct.mu_leak <= RX90_REF.2 * BAND
        && direct.mu_leak >= RX90_REF.2 / BAND;
    println!(
        "ACCEPTANCE 6a RX90 direct: {} (diamond [{:.4}, {:.4}] vs {:.4}x3, infid {:.5} vs {:.4}x3, leak {:.5} vs {:.4}x3)",
        pass_fail(rx_direct_in_band),
        direct.mu_diamond_lower,
        direct.mu_diamond_upper,
        RX90_REF.0,
        direct.mu_if_avg,
        RX90_REF.1,
        direct.mu_leak,
        RX90_REF.2,
    );

    // recalibration of amplitude-like parameters (a and the DRAG amplitude b)
    let recal = calibrate_gate(
        &backend,
        &qubit_subs,
        2,
        &two_qubit_table(),
        GateToCalibrate::Mp { qubit: 0 },
        &[
            ParamSpec { field: ParamField::MpA, scale: 0.0004, lower: 0.0, upper: 0.02 },
            ParamSpec { field: ParamField::MpB, scale: 0.02, lower: -0.2, upper: 0.2 },
        ],
        &CalibrateOptions { budget: 60, ..Default::default() },
    )
    .unwrap();
    let m_recal = run_program(&backend, &qubit_subs, &program, &recal.table).unwrap();
    let rx_recal = report_for(&m_recal, &u, diamond_tol).unwrap();
    let rx_recal_ok = rx_recal.mu_if_avg <= RECAL_IF_RX90;
    println!(
        "ACCEPTANCE 6b RX90 recalibrated: {} (infid {:.5} <= {RECAL_IF_RX90}, {} evaluations)",
        pass_fail(rx_recal_ok),
        rx_recal.mu_if_avg,
        recal.evaluations,
    );

    // ---- CZ on (0, 1): qubit 1 is flux driven and carries sixteen states
    let device_cz = two_qubit_device(16);
    let plan_cz = CircuitPlan::build(&device_cz, 1e-3).unwrap();
    let backend_cz = Backend::Circuit(&plan_cz, CircuitEvolveOptions { tau: 1e-3, ..Default::default() });
    let program_cz = Program { n_qubits: 2, gates: vec![Gate::Cz { a: 0, b: 1 }] };
    let u_cz = ideal_unitary(&program_cz).unwrap();

    let outcome_cz = calibrate_gate(
        &backend_cz,
        &qubit_subs,
        2,
        &two_qubit_table(),
        GateToCalibrate::Cz { a: 0, b: 1 },
        &[],
        &CalibrateOptions::default(),
    )
    .unwrap();
    let m_cz = run_program(&backend_cz, &qubit_subs, &program_cz, &outcome_cz.table).unwrap();
    let cz_direct = report_for(&m_cz, &u_cz, diamond_tol).unwrap();
    let cz_direct_in_band = cz_direct.mu_diamond_upper >= CZ_REF.0 / BAND
        && cz_direct.mu_diamond_upper <= CZ_REF.0 * BAND
        && cz_direct.mu_if_avg <= CZ_REF.1 * BAND
        && cz_direct.mu_leak <= CZ_REF.2 * BAND
        && cz_direct.mu_leak >= CZ_REF.2 / BAND;
    println!(
        "ACCEPTANCE 6c CZ direct: {} (diamond [{:.4}, {:.4}] vs {:.4}x3, infid {:.5} vs {:.4}x3, leak {:.5} vs {:.4}x3)",
        pass_fail(cz_direct_in_band),
        cz_direct.mu_diamond_lower,
        cz_direct.mu_diamond_upper,
        CZ_REF.0,
        cz_direct.mu_if_avg,
        CZ_REF.1,
        cz_direct.mu_leak,
        CZ_REF.2,
    );

    let recal_cz = calibrate_gate(
        &backend_cz,
        &qubit_subs,
        2,
        &two_qubit_table(),
        GateToCalibrate::Cz { a: 0, b: 1 },
        &[ParamSpec { field: ParamField::CzDelta, scale: 0.0005, lower: 0.35, upper: 0.43 }],
        &CalibrateOptions { budget: 30, ..Default::default() },
    )
    .unwrap();
    let m_cz_recal = run_program(&backend_cz, &qubit_subs, &program_cz, &recal_cz.table).unwrap();
    let cz_recal = report_for(&m_cz_recal, &u_cz, diamond_tol).unwrap();
    let cz_recal_ok = cz_recal.mu_if_avg <= RECAL_IF_CZ;
    println!(
        "ACCEPTANCE 6d CZ recalibrated: {} (infid {:.5} <= {RECAL_IF_CZ}, {} evaluations)",
        pass_fail(cz_recal_ok),
        cz_recal.mu_if_avg,
        recal_cz.evaluations,
    );

    assert!(rx_direct_in_band && rx_recal_ok && cz_direct_in_band && cz_recal_ok);
}
