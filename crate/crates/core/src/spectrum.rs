//! Flux-sweep spectroscopy: labeled energy levels with continuation
//! labeling through avoided crossings, spectral-deviation curves against
//! the approximate parametrisations, eigenstate overlap maps and the
//! grid-search suppression probe.

use rayon::prelude::*;

use crate::device::DeviceSpec;
use crate::effective::{evolve_eff, EffectiveEvolveOptions, EffectivePlan};
use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigen, CMatrix};
use crate::oracle::dense_circuit_hamiltonian;
use crate::pulse::{FluxMw, FluxPulse};
use crate::schedule::{Schedule, SegmentDrives};
use crate::subsystem::{
    build_charge_hamiltonian, spectrum_approximation, SpectrumModel, SubsystemSpec,
};
use crate::tensor::StateVector;
use crate::TWO_PI;

/// One labeled level at one flux point.
#[derive(Debug, Clone)]
pub struct LabeledLevel {
    /// Bare product-state label, subsystem digits in device order.
    pub label: Vec<usize>,
    /// Energy in GHz, device ground offset included as computed.
    pub energy: f64,
    /// Set when the continuation overlap was ambiguous at this point.
    pub tie_flagged: bool,
}

#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub phi_frac: f64,
    pub levels: Vec<LabeledLevel>,
}

/// Dense-diagonalize the truncated circuit Hamiltonian along a flux sweep
/// of one subsystem and assign bare labels by maximal-overlap continuation
/// anchored at the sorted non-interacting assignment of the first point.
pub fn flux_sweep(device: &DeviceSpec, driven: usize, phi_fracs: &[f64]) -> Result<Vec<SweepPoint>> {
    device.validate()?;
    if driven >= device.subsystems.len() {
        return Err(Error::config("flux_sweep: driven subsystem out of range"));
    }
    let dim = device.total_dim();
    if dim > crate::oracle::DENSE_DIM_CAP {
        return Err(Error::config(format!("flux_sweep: dimension {dim} exceeds the dense cap")));
    }
    if phi_fracs.is_empty() {
        return Ok(Vec::new());
    }
    let map = device.index_map()?;

    // diagonalize all grid points in parallel
    let eigs: Vec<Result<(Vec<f64>, CMatrix)>> = phi_fracs
        .par_iter()
        .map(|&frac| {
            let h = dense_circuit_hamiltonian(device, &[(driven, TWO_PI * frac)], &[])?;
            let e = hermitian_eigen(&h)?;
            Ok((e.values, e.vectors))
        })
        .collect();
    let eigs: Vec<(Vec<f64>, CMatrix)> = eigs.into_iter().collect::<Result<_>>()?;

    // anchor: bare labels sorted by the non-interacting energies at the
    // first grid point (couplings off)
    let bare = DeviceSpec { couplings: vec![], ..device.clone() };
    let h0 = dense_circuit_hamiltonian(&bare, &[(driven, TWO_PI * phi_fracs[0])], &[])?;
    let mut bare_levels: Vec<(usize, f64)> =
        (0..dim).map(|k| (k, h0[(k, k)].re)).collect();
    bare_levels.sort_by(|a, b| a.1.total_cmp(&b.1));
    // labels[j] = bare flat index assigned to sorted eigenstate j at point 0
    let mut labels: Vec<usize> = bare_levels.iter().map(|&(k, _)| k).collect();

    let mut out = Vec::with_capacity(phi_fracs.len());
    let mut prev_vectors: Option<CMatrix> = None;
    for (point, (values, vectors)) in eigs.iter().enumerate() {
        let mut ties = vec![false; dim];
        if let Some(prev) = &prev_vectors {
            // follow each previous labeled vector to its best-overlap
            // successor; resolve near-ties toward the lower index
            let mut new_labels = vec![usize::MAX; dim];
            let mut taken = vec![false; dim];
            for j_prev in 0..dim {
                let vp = prev.column(j_prev);
                let mut best = (0usize, -1.0f64);
                let mut second = -1.0f64;
                for j in 0..dim {
                    if taken[j] {
                        continue;
                    }
                    let mut ov = num_complex::Complex64::new(0.0, 0.0);
                    for r in 0..dim {
                        ov += vectors[(r, j)].conj() * vp[r];
                    }
                    let o = ov.norm_sqr();
                    if o > best.1 {
                        second = best.1;
                        best = (j, o);
                    } else if o > second {
                        second = o;
                    }
                }
                if (best.1 - second).abs() < 1e-6 {
                    ties[best.0] = true;
                }
                new_labels[best.0] = labels[j_prev];
                taken[best.0] = true;
            }
            labels = new_labels;
        }
        let levels = (0..dim)
            .map(|j| LabeledLevel {
                label: map.unflatten(labels[j]),
                energy: values[j] / TWO_PI,
                tie_flagged: ties[j],
            })
            .collect();
        out.push(SweepPoint { phi_frac: phi_fracs[point], levels });
        prev_vectors = Some(vectors.clone());
    }
    Ok(out)
}

/// One row of a spectral-deviation table.
#[derive(Debug, Clone, Copy)]
pub struct DeviationRow {
    pub phi_frac: f64,
    /// `|Δ(E¹−E⁰)|` in GHz.
    pub dev1: f64,
    /// `|Δ(E²−E⁰)|` in GHz.
    pub dev2: f64,
}

/// Deviations between the numerically exact charge-basis gaps and a
/// spectrum parametrisation, per flux point.
pub fn spectral_deviation(
    spec: &SubsystemSpec,
    model: &SpectrumModel,
    phi_fracs: &[f64],
) -> Result<Vec<DeviationRow>> {
    phi_fracs
        .par_iter()
        .map(|&frac| {
            let phi = TWO_PI * frac;
            let h = build_charge_hamiltonian(spec, phi, 0.0)?;
            let eig = hermitian_eigen(&h)?;
            let exact1 = (eig.values[1] - eig.values[0]) / TWO_PI;
            let exact2 = (eig.values[2] - eig.values[0]) / TWO_PI;
            let (nu, alpha) = spectrum_approximation(model, spec, phi)?;
            let approx1 = nu;
            let approx2 = 2.0 * nu + alpha;
            Ok(DeviationRow { phi_frac: frac, dev1: (exact1 - approx1).abs(), dev2: (exact2 - approx2).abs() })
        })
        .collect()
}

/// Overlaps `|<φ^(z)(0)|φ^(0/1)(x)>|²` between the instantaneous
/// eigenstates of a single transmon and its `t = 0` eigenbasis, swept over
/// external flux or offset charge.
#[derive(Debug, Clone)]
pub struct OverlapRow {
    pub x: f64,
    /// `overlaps[z][w]` for instantaneous state `w ∈ {0, 1}`.
    pub overlaps: Vec<[f64; 2]>,
}

pub enum OverlapParameter {
    FluxFrac,
    OffsetCharge,
}

pub fn overlap_map(
    spec: &SubsystemSpec,
    parameter: OverlapParameter,
    grid: &[f64],
    z_max: usize,
) -> Result<Vec<OverlapRow>> {
    let h0 = build_charge_hamiltonian(spec, TWO_PI * spec.phi0_frac, spec.n0)?;
    let ref_eig = hermitian_eigen(&h0)?;
    let dim = h0.nrows();
    grid.par_iter()
        .map(|&x| {
            // flux folded into the principal period: the overlap map tracks
            // the 2pi-periodic eigenstate family
            let (phi, ng) = match parameter {
                OverlapParameter::FluxFrac => {
                    let folded = x - x.round();
                    (TWO_PI * folded, spec.n0)
                }
                OverlapParameter::OffsetCharge => (TWO_PI * spec.phi0_frac, x),
            };
            let h = build_charge_hamiltonian(spec, phi, ng)?;
            let eig = hermitian_eigen(&h)?;
            let mut overlaps = Vec::with_capacity(z_max);
            for z in 0..z_max {
                let mut row = [0.0f64; 2];
                for (w, r) in row.iter_mut().enumerate() {
                    let mut ov = num_complex::Complex64::new(0.0, 0.0);
                    for k in 0..dim {
                        ov += ref_eig.vectors[(k, z)].conj() * eig.vectors[(k, w)];
                    }
                    *r = ov.norm_sqr();
                }
                overlaps.push(row);
            }
            Ok(OverlapRow { x, overlaps })
        })
        .collect()
}

/// Search-grid specification for the suppression probe.
#[derive(Debug, Clone)]
pub struct GridSearchSpec {
    /// Drive frequencies in GHz.
    pub nu_d: Vec<f64>,
    /// Pulse amplitudes δ/2π.
    pub delta_frac: Vec<f64>,
    /// Pulse duration (= scan horizon) in ns.
    pub t_d: f64,
    /// Probability sampling interval in ns.
    pub dt_sample: f64,
    /// Rise/fall time of the microwave envelope in ns.
    pub t_rf: f64,
    /// Driven subsystem.
    pub driven: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct GridSearchResult {
    /// `ε = 1 − min p^(0..0)` over the grid and the sampled times.
    pub epsilon: f64,
    pub argmin_nu_d: f64,
    pub argmin_delta: f64,
    pub argmin_t: f64,
}

/// Evaluate `ε = 1 − min p^(ground)(ν_D, δ, t)` for the adiabatic (or
/// chosen) effective model over a microwave-pulse parameter grid, with the
/// ground-state probability sampled every `dt_sample`.
pub fn grid_search_epsilon(
    plan: &EffectivePlan,
    opts: &EffectiveEvolveOptions,
    grid: &GridSearchSpec,
) -> Result<GridSearchResult> {
    if grid.nu_d.is_empty() || grid.delta_frac.is_empty() {
        return Err(Error::config("grid search: empty grid"));
    }
    let phi0 = plan.subsystem_spec(grid.driven).phi0_frac;
    let points: Vec<(f64, f64)> = grid
        .nu_d
        .iter()
        .flat_map(|&nu| grid.delta_frac.iter().map(move |&dl| (nu, dl)))
        .collect();
    let results: Vec<Result<(f64, f64, f64, f64)>> = points
        .par_iter()
        .map(|&(nu, dl)| {
            let pulse = FluxPulse::FluxMw(FluxMw {
                phi0_frac: phi0,
                delta_frac: dl,
                nu_d: nu,
                t_rf: grid.t_rf.min(grid.t_d / 2.0),
                t_d: grid.t_d,
            });
            let mut schedule = Schedule::default();
            schedule.push(grid.t_d, SegmentDrives::Flux { drives: vec![(grid.driven, pulse)] });
            let mut state = StateVector::ground(plan.index_map().clone());
            let mut min_p = 1.0f64;
            let mut argmin_t = 0.0f64;
            let mut next_sample = grid.dt_sample;
            {
                let mut obs = |t: f64, s: &StateVector| {
                    if t + 1e-12 >= next_sample {
                        let p = s.coeffs()[0].norm_sqr();
                        if p < min_p {
                            min_p = p;
                            argmin_t = t;
                        }
                        while next_sample <= t + 1e-12 {
                            next_sample += grid.dt_sample;
                        }
                    }
                };
                evolve_eff(plan, &mut state, &schedule, opts, Some(&mut obs))?;
            }
            Ok((min_p, nu, dl, argmin_t))
        })
        .collect();
    let mut best = (1.0f64, grid.nu_d[0], grid.delta_frac[0], 0.0f64);
    for r in results {
        let (p, nu, dl, t) = r?;
        if p < best.0 {
            best = (p, nu, dl, t);
        }
    }
    Ok(GridSearchResult {
        epsilon: 1.0 - best.0,
        argmin_nu_d: best.1,
        argmin_delta: best.2,
        argmin_t: best.3,
    })
}
