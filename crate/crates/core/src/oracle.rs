//! Dense reference implementations used to verify the product-formula
//! propagators: direct Kronecker assembly of the truncated model
//! Hamiltonians, the dense matrix exponential and a full-diagonalization
//! reference propagator. These are correctness oracles, not fast paths.

use crate::device::DeviceSpec;
use crate::error::{Error, Result};
use crate::linalg::{expm_hermitian, hermitian_eigen, kron_chain, CMatrix, C64};
use crate::schedule::{Schedule, SegmentDrives};
use crate::subsystem::{build_charge_hamiltonian, charge_operators, ladders, SubsystemKind};
use crate::TWO_PI;

pub const DENSE_DIM_CAP: usize = 4096;
pub const REFERENCE_DIM_CAP: usize = 1024;

/// Dense circuit Hamiltonian at the given drive values, assembled directly
/// from charge-basis projections (an independent code path from the
/// factorized plan). Energies are angular (rad/ns) with each subsystem's
/// `t = 0` ground energy subtracted.
pub fn dense_circuit_hamiltonian(
    device: &DeviceSpec,
    fluxes: &[(usize, f64)],
    charges: &[(usize, f64)],
) -> Result<CMatrix> {
    device.validate()?;
    let dim = device.total_dim();
    if dim > DENSE_DIM_CAP {
        return Err(Error::config(format!(
            "dense_circuit_hamiltonian: dimension {dim} exceeds the dense cap {DENSE_DIM_CAP}"
        )));
    }
    let n_sub = device.subsystems.len();
    let flux_of = |sub: usize| -> f64 {
        fluxes
            .iter()
            .find(|(s, _)| *s == sub)
            .map(|&(_, phi)| phi)
            .unwrap_or(TWO_PI * device.subsystems[sub].phi0_frac)
    };
    let charge_of = |sub: usize| -> f64 {
        charges.iter().find(|(s, _)| *s == sub).map(|&(_, ng)| ng).unwrap_or(0.0)
    };

    // local t-dependent Hamiltonians and interaction operators
    let mut locals: Vec<CMatrix> = Vec::with_capacity(n_sub);
    let mut int_ops: Vec<CMatrix> = Vec::with_capacity(n_sub);
    for (i, spec) in device.subsystems.iter().enumerate() {
        match spec.kind {
            SubsystemKind::FixedTransmon | SubsystemKind::TunableTransmon => {
                let h0 = build_charge_hamiltonian(spec, TWO_PI * spec.phi0_frac, spec.n0)?;
                let eig = hermitian_eigen(&h0)?;
                let full_dim = h0.nrows();
                let nb = spec.n_basis;
                let basis = CMatrix::from_fn(full_dim, nb, |r, k| eig.vectors[(r, k)]);
                let (n_op, _, _) = charge_operators(spec.n_charge);
                // full H(t) in the charge basis, with the n_g(t)^2 c-number
                // dropped on both code paths
                let mut h_t = build_charge_hamiltonian(spec, flux_of(i), spec.n0)?;
                let ng = charge_of(i);
                if ng != 0.0 {
                    let w = -2.0 * TWO_PI * spec.e_c * ng;
                    h_t += n_op.map(|v| v * w);
                }
                let mut local = basis.adjoint() * h_t * &basis;
                for k in 0..nb {
                    local[(k, k)] -= C64::new(eig.values[0], 0.0);
                }
                locals.push(local);
                int_ops.push(basis.adjoint() * &n_op * &basis);
            }
            SubsystemKind::Resonator | SubsystemKind::Tls => {
                let nb = spec.n_basis;
                let w = TWO_PI * spec.nu_r;
                let local = CMatrix::from_fn(nb, nb, |r, c| {
                    if r == c {
                        C64::new(w * r as f64, 0.0)
                    } else {
                        C64::new(0.0, 0.0)
                    }
                });
                locals.push(local);
                int_ops.push(ladders::x(nb));
            }
        }
    }

    let eye = |k: usize| CMatrix::identity(device.subsystems[k].n_basis, device.subsystems[k].n_basis);
    let embed = |sub: usize, op: &CMatrix| -> CMatrix {
        let ops: Vec<CMatrix> = (0..n_sub).map(|k| if k == sub { op.clone() } else { eye(k) }).collect();
        kron_chain(&ops)
    };
    let mut h = CMatrix::zeros(dim, dim);
    for (i, local) in locals.iter().enumerate() {
        h += embed(i, local);
    }
    for c in &device.couplings {
        let oa = embed(c.a, &int_ops[c.a]);
        let ob = embed(c.b, &int_ops[c.b]);
        h += (oa * ob).map(|v| v * TWO_PI * c.g);
    }
    Ok(h)
}

/// Dense circuit Hamiltonian at global schedule time `t`.
pub fn circuit_hamiltonian_at(device: &DeviceSpec, schedule: &Schedule, t: f64) -> Result<CMatrix> {
    let (fluxes, charges) = drives_at(device, schedule, t)?;
    dense_circuit_hamiltonian(device, &fluxes, &charges)
}

/// Evaluate all drives of the schedule at global time `t`, returning
/// per-subsystem flux values (rad) and offset charges.
pub fn drives_at(
    device: &DeviceSpec,
    schedule: &Schedule,
    t: f64,
) -> Result<(Vec<(usize, f64)>, Vec<(usize, f64)>)> {
    let mut fluxes = Vec::new();
    let mut charges = Vec::new();
    for seg in &schedule.segments {
        if t < seg.t0 || t > seg.t1 {
            continue;
        }
        let local = t - seg.t0;
        match &seg.drives {
            SegmentDrives::Idle => {}
            SegmentDrives::Charge { drives } => {
                for (sub, p) in drives {
                    charges.push((*sub, p.eval(local)));
                }
            }
            SegmentDrives::Flux { drives } => {
                for (sub, p) in drives {
                    let (phi, _) = p.eval(local, device.subsystems[*sub].phi0_frac)?;
                    fluxes.push((*sub, phi));
                }
            }
        }
        break;
    }
    Ok((fluxes, charges))
}

/// Full-diagonalization reference propagator: the ordered product of
/// `W e^{-i tau λ} W†` factors with `H` evaluated at interval midpoints.
/// Exact (up to eigensolver accuracy) for time-independent Hamiltonians.
pub fn reference_evolve(
    h_of_t: &dyn Fn(f64) -> Result<CMatrix>,
    t0: f64,
    t1: f64,
    tau: f64,
) -> Result<CMatrix> {
    if t1 <= t0 {
        return Err(Error::contract("reference_evolve: t1 must exceed t0"));
    }
    let probe = h_of_t(t0)?;
    let dim = probe.nrows();
    if dim > REFERENCE_DIM_CAP {
        return Err(Error::config(format!(
            "reference_evolve: dimension {dim} exceeds the reference cap {REFERENCE_DIM_CAP}"
        )));
    }
    let n_steps = ((t1 - t0) / tau).round().max(1.0) as usize;
    let dt = (t1 - t0) / n_steps as f64;
    let mut u = CMatrix::identity(dim, dim);
    for j in 0..n_steps {
        let tm = t0 + (j as f64 + 0.5) * dt;
        let h = h_of_t(tm)?;
        let step = expm_hermitian(&h, dt)?;
        u = step * u;
    }
    Ok(u)
}

/// Apply the reference propagator to a dense state.
pub fn reference_evolve_state(
    h_of_t: &dyn Fn(f64) -> Result<CMatrix>,
    state: &CMatrix,
    t0: f64,
    t1: f64,
    tau: f64,
) -> Result<CMatrix> {
    if t1 <= t0 {
        return Err(Error::contract("reference_evolve_state: t1 must exceed t0"));
    }
    let dim = state.nrows();
    if dim > REFERENCE_DIM_CAP {
        return Err(Error::config("reference_evolve_state: dimension exceeds the reference cap"));
    }
    let n_steps = ((t1 - t0) / tau).round().max(1.0) as usize;
    let dt = (t1 - t0) / n_steps as f64;
    let mut psi = state.clone();
    for j in 0..n_steps {
        let tm = t0 + (j as f64 + 0.5) * dt;
        let h = h_of_t(tm)?;
        let eig = hermitian_eigen(&h)?;
        let mut coeffs = eig.vectors.adjoint() * psi;
        for k in 0..dim {
            coeffs[(k, 0)] *= C64::from_polar(1.0, -dt * eig.values[k]);
        }
        psi = &eig.vectors * coeffs;
    }
    Ok(psi)
}

/// Effective-model per-subsystem instantaneous scalars (angular units),
/// consumed by [`dense_effective_hamiltonian`].
#[derive(Debug, Clone, Copy, Default)]
pub struct EffectiveLocalScalars {
    /// Transmon `ν_q(φ(t))` or resonator frequency, rad/ns.
    pub omega: f64,
    /// Transmon anharmonicity `α`, rad/ns; zero for oscillators.
    pub alpha: f64,
    /// Charge drive weight `Ω(t)`, rad/ns.
    pub drive: f64,
    /// Non-adiabatic weight on `i(c† − c)`, rad/ns.
    pub q_rate: f64,
    /// Non-adiabatic weight on `i(c†c† − cc)`, rad/ns.
    pub s_rate: f64,
}

/// Dense effective Hamiltonian assembled directly from truncated ladder
/// operators (independent of the factorized effective plan).
pub fn dense_effective_hamiltonian(
    dims: &[usize],
    locals: &[EffectiveLocalScalars],
    couplings: &[(usize, usize, f64)],
) -> Result<CMatrix> {
    if dims.len() != locals.len() {
        return Err(Error::contract("dense_effective_hamiltonian: dims/locals length mismatch"));
    }
    let dim: usize = dims.iter().product();
    if dim > DENSE_DIM_CAP {
        return Err(Error::config("dense_effective_hamiltonian: dimension exceeds the dense cap"));
    }
    let n_sub = dims.len();
    let eye = |k: usize| CMatrix::identity(dims[k], dims[k]);
    let embed = |sub: usize, op: &CMatrix| -> CMatrix {
        let ops: Vec<CMatrix> = (0..n_sub).map(|k| if k == sub { op.clone() } else { eye(k) }).collect();
        kron_chain(&ops)
    };
    let mut h = CMatrix::zeros(dim, dim);
    for (i, loc) in locals.iter().enumerate() {
        let n = dims[i];
        let mut local = CMatrix::zeros(n, n);
        for z in 0..n {
            let zf = z as f64;
            local[(z, z)] = C64::new(loc.omega * zf + loc.alpha / 2.0 * zf * (zf - 1.0), 0.0);
        }
        if loc.drive != 0.0 {
            local += ladders::x(n).map(|v| v * loc.drive);
        }
        if loc.q_rate != 0.0 {
            local += ladders::iy(n).map(|v| v * loc.q_rate);
        }
        if loc.s_rate != 0.0 {
            local += ladders::i_squeeze(n).map(|v| v * loc.s_rate);
        }
        h += embed(i, &local);
    }
    for &(a, b, g_ang) in couplings {
        let oa = embed(a, &ladders::x(dims[a]));
        let ob = embed(b, &ladders::x(dims[b]));
        h += (oa * ob).map(|v| v * g_ang);
    }
    Ok(h)
}
