//! Derivative-free optimization of pulse parameters against a gate-error
//! objective: an adaptive Nelder–Mead simplex with box-constraint
//! projection, plus the closed-form solver for per-gate virtual-z
//! correction angles.

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, C64};
use crate::program::{MpEntry, PropagationMatrix};

/// Box bounds per parameter; applied by projection.
#[derive(Debug, Clone)]
pub struct Bounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Bounds {
    pub fn unbounded(n: usize) -> Self {
        Bounds { lower: vec![f64::NEG_INFINITY; n], upper: vec![f64::INFINITY; n] }
    }

    fn project(&self, x: &mut [f64]) {
        for ((v, &lo), &hi) in x.iter_mut().zip(&self.lower).zip(&self.upper) {
            *v = v.clamp(lo, hi);
        }
    }
}

#[derive(Debug, Clone)]
pub struct NelderMeadResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    /// Best objective value after each evaluation (monotone).
    pub history: Vec<f64>,
    /// False when the evaluation budget ran out first.
    pub converged: bool,
}

/// Adaptive Nelder–Mead with deterministic initialization. `scale` sets
/// the initial simplex edge per dimension; the stop criteria are the
/// spread of simplex values falling under `ftol` or the `budget` of
/// objective evaluations.
pub fn nelder_mead(
    mut f: impl FnMut(&[f64]) -> Result<f64>,
    x0: &[f64],
    scale: &[f64],
    bounds: &Bounds,
    ftol: f64,
    budget: usize,
) -> Result<NelderMeadResult> {
    let n = x0.len();
    if n == 0 {
        return Err(Error::contract("nelder_mead: empty parameter vector"));
    }
    if scale.len() != n || bounds.lower.len() != n || bounds.upper.len() != n {
        return Err(Error::contract("nelder_mead: dimension mismatch"));
    }
    // adaptive coefficients (dimension-dependent)
    let nf = n as f64;
    let alpha = 1.0;
    let beta = 1.0 + 2.0 / nf;
    let gamma = 0.75 - 1.0 / (2.0 * nf);
    let delta = 1.0 - 1.0 / nf;

    struct EvalLog {
        evals: usize,
        best: f64,
        history: Vec<f64>,
    }
    let mut log = EvalLog { evals: 0, best: f64::INFINITY, history: Vec::new() };
    fn run_eval(
        f: &mut impl FnMut(&[f64]) -> Result<f64>,
        bounds: &Bounds,
        log: &mut EvalLog,
        x: &mut Vec<f64>,
    ) -> Result<f64> {
        bounds.project(x);
        let v = f(x)?;
        log.evals += 1;
        log.best = log.best.min(v);
        log.history.push(log.best);
        Ok(v)
    }

    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    let mut x = x0.to_vec();
    let v = run_eval(&mut f, bounds, &mut log, &mut x)?;
    simplex.push((x, v));
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] += if scale[i] != 0.0 { scale[i] } else { 0.1 };
        let v = run_eval(&mut f, bounds, &mut log, &mut x)?;
        simplex.push((x, v));
    }

    while log.evals < budget {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let spread = simplex[n].1 - simplex[0].1;
        if spread.abs() <= ftol {
            return Ok(NelderMeadResult {
                x: simplex[0].0.clone(),
                value: simplex[0].1,
                evaluations: log.evals,
                history: log.history,
                converged: true,
            });
        }
        // centroid of all but the worst
        let mut centroid = vec![0.0f64; n];
        for (xs, _) in simplex.iter().take(n) {
            for (c, v) in centroid.iter_mut().zip(xs) {
                *c += v / nf;
            }
        }
        let worst = simplex[n].clone();
        let second = simplex[n - 1].1;
        let bestv = simplex[0].1;

        let mut xr: Vec<f64> = centroid.iter().zip(&worst.0).map(|(c, w)| c + alpha * (c - w)).collect();
        let vr = run_eval(&mut f, bounds, &mut log, &mut xr)?;
        if vr < bestv {
            let mut xe: Vec<f64> = centroid.iter().zip(&worst.0).map(|(c, w)| c + beta * (c - w)).collect();
            let ve = run_eval(&mut f, bounds, &mut log, &mut xe)?;
            simplex[n] = if ve < vr { (xe, ve) } else { (xr, vr) };
        } else if vr < second {
            simplex[n] = (xr, vr);
        } else {
            // contraction
            let (mut xc, outside) = if vr < worst.1 {
                (
                    centroid.iter().zip(&worst.0).map(|(c, w)| c + gamma * (c - w)).collect::<Vec<f64>>(),
                    true,
                )
            } else {
                (
                    centroid.iter().zip(&worst.0).map(|(c, w)| c - gamma * (c - w)).collect::<Vec<f64>>(),
                    false,
                )
            };
            let vc = run_eval(&mut f, bounds, &mut log, &mut xc)?;
            let accept = if outside { vc <= vr } else { vc < worst.1 };
            if accept {
                simplex[n] = (xc, vc);
            } else {
                // shrink toward the best vertex
                let best_x = simplex[0].0.clone();
                for k in 1..=n {
                    let mut xs: Vec<f64> =
                        best_x.iter().zip(&simplex[k].0).map(|(b, x)| b + delta * (x - b)).collect();
                    let vs = run_eval(&mut f, bounds, &mut log, &mut xs)?;
                    simplex[k] = (xs, vs);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    Ok(NelderMeadResult {
        x: simplex[0].0.clone(),
        value: simplex[0].1,
        evaluations: log.evals,
        history: log.history,
        converged: false,
    })
}

/// Solved virtual-z corrections for a microwave `R^(x)(π/2)` entry.
#[derive(Debug, Clone, Default)]
pub struct MpCorrections {
    pub z_pre: f64,
    pub z_post: f64,
    pub spectator_z: Vec<(usize, f64)>,
}

/// Magnitude-weighted mean phase of an iterator of complex samples.
fn mean_phase(samples: impl Iterator<Item = C64>) -> f64 {
    let acc: C64 = samples.sum();
    if acc.norm() > 0.0 {
        acc.arg()
    } else {
        0.0
    }
}

/// Per-qubit diagonal phase slopes of `M` against `U`: `η_q` is the mean
/// of `arg[(M_zz/U_zz) conj(M_z'z'/U_z'z')]` over pairs `z, z' = z − e_q`.
fn diagonal_phase_slopes(m: &CMatrix, u: &CMatrix, n_qubits: usize) -> Vec<f64> {
    let d = 1usize << n_qubits;
    (0..n_qubits)
        .map(|q| {
            let bit = 1usize << q;
            mean_phase((0..d).filter(|z| z & bit != 0).map(|z| {
                let hi = m[(z, z)] * u[(z, z)].conj();
                let lo = m[(z ^ bit, z ^ bit)] * u[(z ^ bit, z ^ bit)].conj();
                hi * lo.conj()
            }))
        })
        .collect()
}

/// Solve the virtual-z corrections of one `R^(x)(π/2)` gate from the
/// propagation matrix of a correction-free single-gate run. The target
/// qubit gets a pre/post split resolved from the flip off-diagonals; each
/// spectator gets a post correction.
pub fn solve_mp_corrections(
    m: &PropagationMatrix,
    u: &CMatrix,
    target: usize,
    n_qubits: usize,
) -> MpCorrections {
    let d = 1usize << n_qubits;
    let slopes = diagonal_phase_slopes(&m.m, u, n_qubits);
    let bit = 1usize << target;
    // beta_dif = arg over flip entries: M_{z|bit, z&!bit} vs its mirror
    let beta_dif = mean_phase((0..d).filter(|z| z & bit == 0).map(|z| {
        let up = m.m[(z | bit, z)] * u[(z | bit, z)].conj();
        let dn = m.m[(z, z | bit)] * u[(z, z | bit)].conj();
        up * dn.conj()
    }));
    let beta_sum = slopes[target];
    let beta1 = (beta_sum + beta_dif) / 2.0;
    let beta2 = (beta_sum - beta_dif) / 2.0;
    let spectator_z = (0..n_qubits)
        .filter(|&q| q != target)
        .map(|q| (q, -slopes[q]))
        .collect();
    MpCorrections { z_pre: -beta2, z_post: -beta1, spectator_z }
}

/// Solve the per-qubit post-gate z-rotations of a `CZ` entry from a
/// correction-free single-gate run.
pub fn solve_cz_corrections(m: &PropagationMatrix, u: &CMatrix, n_qubits: usize) -> Vec<(usize, f64)> {
    let slopes = diagonal_phase_slopes(&m.m, u, n_qubits);
    slopes.iter().enumerate().map(|(q, &s)| (q, -s)).collect()
}

/// Apply solved corrections onto an entry.
pub fn apply_mp_corrections(entry: &mut MpEntry, corr: &MpCorrections) {
    entry.z_pre += corr.z_pre;
    entry.z_post += corr.z_post;
    let mut merged = std::collections::BTreeMap::new();
    for &(q, v) in entry.spectator_z.iter().chain(corr.spectator_z.iter()) {
        *merged.entry(q).or_insert(0.0) += v;
    }
    entry.spectator_z = merged.into_iter().filter(|(_, v)| v.abs() > 0.0).collect();
}

/// Apply solved microwave corrections to a single-gate propagation matrix
/// algebraically: `M ↦ D_post · M · D_pre` with the per-qubit z-phases, the
/// exact effect of storing the corrections and rerunning the gate.
pub fn corrected_m_mp(m: &CMatrix, corr: &MpCorrections, target: usize, n_qubits: usize) -> CMatrix {
    let d = 1usize << n_qubits;
    let post = |w: usize| -> f64 {
        let mut phi = if (w >> target) & 1 == 1 { corr.z_post } else { 0.0 };
        for &(q, v) in &corr.spectator_z {
            if (w >> q) & 1 == 1 {
                phi += v;
            }
        }
        phi
    };
    let mut out = m.clone();
    for w in 0..d {
        let pw = C64::from_polar(1.0, post(w));
        for z in 0..d {
            let pz = C64::from_polar(1.0, if (z >> target) & 1 == 1 { corr.z_pre } else { 0.0 });
            out[(w, z)] = pw * m[(w, z)] * pz;
        }
    }
    out
}

/// Apply solved CZ corrections (post-gate per-qubit z-rotations).
pub fn corrected_m_cz(m: &CMatrix, rz: &[(usize, f64)], n_qubits: usize) -> CMatrix {
    let d = 1usize << n_qubits;
    let mut out = m.clone();
    for w in 0..d {
        let mut phi = 0.0;
        for &(q, v) in rz {
            if (w >> q) & 1 == 1 {
                phi += v;
            }
        }
        let pw = C64::from_polar(1.0, phi);
        for z in 0..d {
            out[(w, z)] *= pw;
        }
    }
    out
}

/// Which gate entry a calibration run adjusts.
#[derive(Debug, Clone, Copy)]
pub enum GateToCalibrate {
    Mp { qubit: usize },
    Cz { a: usize, b: usize },
}

/// Tunable fields of a pulse entry, with initial simplex scale and bounds.
#[derive(Debug, Clone, Copy)]
pub struct ParamSpec {
    pub field: ParamField,
    pub scale: f64,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamField {
    MpA,
    MpB,
    MpSigma,
    MpNuD,
    CzDelta,
    CzSigma,
    CzTp,
    CzTd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    AvgInfidelity,
    DiamondUpper,
}

#[derive(Debug, Clone)]
pub struct CalibrateOptions {
    pub objective: Objective,
    pub budget: usize,
    pub ftol: f64,
    pub diamond_tol: f64,
}

impl Default for CalibrateOptions {
    fn default() -> Self {
        CalibrateOptions { objective: Objective::AvgInfidelity, budget: 200, ftol: 1e-10, diamond_tol: 1e-3 }
    }
}

#[derive(Debug, Clone)]
pub struct CalibrationOutcome {
    pub table: crate::program::PulseTable,
    pub objective: f64,
    pub evaluations: usize,
    pub converged: bool,
    pub history: Vec<f64>,
}

/// Calibrate one gate entry by Nelder–Mead over the selected pulse
/// parameters. Each objective evaluation runs the single-gate program
/// once, solves the virtual-z corrections in closed form, applies them
/// algebraically and scores the corrected matrix; the returned table
/// carries both the optimized parameters and the final corrections.
pub fn calibrate_gate(
    backend: &crate::program::Backend<'_>,
    qubit_subs: &[usize],
    n_qubits: usize,
    table: &crate::program::PulseTable,
    gate: GateToCalibrate,
    params: &[ParamSpec],
    opts: &CalibrateOptions,
) -> Result<CalibrationOutcome> {
    use crate::metrics::{avg_infidelity, diamond_bounds};
    use crate::program::{cz_key, ideal_unitary, run_program, Gate, Program, PulseTable};

    let program = match gate {
        GateToCalibrate::Mp { qubit } => Program { n_qubits, gates: vec![Gate::Rx90 { q: qubit }] },
        GateToCalibrate::Cz { a, b } => Program { n_qubits, gates: vec![Gate::Cz { a, b }] },
    };
    let u = ideal_unitary(&program)?;

    let apply_params = |table: &PulseTable, x: &[f64]| -> Result<PulseTable> {
        let mut t = table.clone();
        match gate {
            GateToCalibrate::Mp { qubit } => {
                let entry = t
                    .mp
                    .get_mut(&qubit)
                    .ok_or_else(|| Error::config(format!("no microwave entry for qubit {qubit}")))?;
                // corrections are re-solved per evaluation
                entry.z_pre = 0.0;
                entry.z_post = 0.0;
                entry.spectator_z.clear();
                for (spec, &v) in params.iter().zip(x) {
                    match spec.field {
                        ParamField::MpA => entry.a = v,
                        ParamField::MpB => entry.b = v,
                        ParamField::MpSigma => entry.sigma = v,
                        ParamField::MpNuD => entry.nu_d = v,
                        _ => return Err(Error::contract("CZ parameter on a microwave entry")),
                    }
                }
            }
            GateToCalibrate::Cz { a, b } => {
                let entry = t
                    .cz
                    .get_mut(&cz_key(a, b))
                    .ok_or_else(|| Error::config(format!("no CZ entry for pair {}", cz_key(a, b))))?;
                entry.rz.clear();
                for (spec, &v) in params.iter().zip(x) {
                    match spec.field {
                        ParamField::CzDelta => entry.delta_frac = v,
                        ParamField::CzSigma => entry.sigma = v,
                        ParamField::CzTp => entry.t_p = v,
                        ParamField::CzTd => entry.t_d = v,
                        _ => return Err(Error::contract("microwave parameter on a CZ entry")),
                    }
                }
            }
        }
        Ok(t)
    };

    let score = |t: &PulseTable| -> Result<(f64, PulseTable)> {
        let m = run_program(backend, qubit_subs, &program, t)?;
        let mut out = t.clone();
        let corrected = match gate {
            GateToCalibrate::Mp { qubit } => {
                let corr = solve_mp_corrections(&m, &u, qubit, n_qubits);
                let entry = out.mp.get_mut(&qubit).unwrap();
                apply_mp_corrections(entry, &corr);
                corrected_m_mp(&m.m, &corr, qubit, n_qubits)
            }
            GateToCalibrate::Cz { a, b } => {
                let rz = solve_cz_corrections(&m, &u, n_qubits);
                let entry = out.cz.get_mut(&cz_key(a, b)).unwrap();
                entry.rz = rz.clone();
                corrected_m_cz(&m.m, &rz, n_qubits)
            }
        };
        let value = match opts.objective {
            Objective::AvgInfidelity => avg_infidelity(&corrected, &u),
            Objective::DiamondUpper => diamond_bounds(&corrected, &u, opts.diamond_tol)?.upper,
        };
        Ok((value, out))
    };

    if params.is_empty() {
        // nothing to optimize: solve corrections once
        let (value, out) = score(table)?;
        return Ok(CalibrationOutcome {
            table: out,
            objective: value,
            evaluations: 1,
            converged: true,
            history: vec![value],
        });
    }

    let x0: Vec<f64> = {
        let mut v = Vec::with_capacity(params.len());
        for spec in params {
            let cur = match (gate, spec.field) {
                (GateToCalibrate::Mp { qubit }, ParamField::MpA) => table.mp_entry(qubit)?.a,
                (GateToCalibrate::Mp { qubit }, ParamField::MpB) => table.mp_entry(qubit)?.b,
                (GateToCalibrate::Mp { qubit }, ParamField::MpSigma) => table.mp_entry(qubit)?.sigma,
                (GateToCalibrate::Mp { qubit }, ParamField::MpNuD) => table.mp_entry(qubit)?.nu_d,
                (GateToCalibrate::Cz { a, b }, ParamField::CzDelta) => table.cz_entry(a, b)?.delta_frac,
                (GateToCalibrate::Cz { a, b }, ParamField::CzSigma) => table.cz_entry(a, b)?.sigma,
                (GateToCalibrate::Cz { a, b }, ParamField::CzTp) => table.cz_entry(a, b)?.t_p,
                (GateToCalibrate::Cz { a, b }, ParamField::CzTd) => table.cz_entry(a, b)?.t_d,
                _ => return Err(Error::contract("parameter field does not match the gate kind")),
            };
            v.push(cur);
        }
        v
    };
    let scales: Vec<f64> = params.iter().map(|p| p.scale).collect();
    let bounds = Bounds {
        lower: params.iter().map(|p| p.lower).collect(),
        upper: params.iter().map(|p| p.upper).collect(),
    };
    let objective = |x: &[f64]| -> Result<f64> {
        let t = apply_params(table, x)?;
        Ok(score(&t)?.0)
    };
    let nm = nelder_mead(objective, &x0, &scales, &bounds, opts.ftol, opts.budget)?;
    let final_table = apply_params(table, &nm.x)?;
    let (value, out) = score(&final_table)?;
    Ok(CalibrationOutcome {
        table: out,
        objective: value,
        evaluations: nm.evaluations + 1,
        converged: nm.converged,
        history: nm.history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nelder_mead_minimizes_quadratic() {
        let f = |x: &[f64]| Ok((x[0] - 0.3).powi(2) + 2.0 * (x[1] + 1.2).powi(2));
        let r = nelder_mead(f, &[0.0, 0.0], &[0.5, 0.5], &Bounds::unbounded(2), 1e-14, 500).unwrap();
        assert!(r.converged);
        assert!((r.x[0] - 0.3).abs() < 1e-6);
        assert!((r.x[1] + 1.2).abs() < 1e-6);
    }

    #[test]
    fn nelder_mead_respects_bounds() {
        let f = |x: &[f64]| Ok((x[0] + 5.0).powi(2));
        let bounds = Bounds { lower: vec![-1.0], upper: vec![1.0] };
        let r = nelder_mead(f, &[0.5], &[0.2], &bounds, 1e-12, 300).unwrap();
        assert!((r.x[0] + 1.0).abs() < 1e-6, "optimum clamps to the lower bound, got {}", r.x[0]);
    }

    #[test]
    fn history_is_monotone_best_so_far() {
        let mut flip = 1.0f64;
        let f = move |x: &[f64]| {
            flip = -flip;
            Ok(x[0] * x[0] + 0.3 * flip.max(0.0))
        };
        let r = nelder_mead(f, &[2.0], &[0.7], &Bounds::unbounded(1), 1e-12, 200).unwrap();
        assert!(r.history.windows(2).all(|w| w[1] <= w[0] + 1e-15));
    }

    #[test]
    fn determinism_fixed_start_fixed_trajectory() {
        let f = |x: &[f64]| Ok((x[0] - 1.0).powi(2) + (x[1] * x[1] - 2.0).powi(2));
        let a = nelder_mead(f, &[0.3, 0.4], &[0.2, 0.2], &Bounds::unbounded(2), 1e-13, 400).unwrap();
        let b = nelder_mead(f, &[0.3, 0.4], &[0.2, 0.2], &Bounds::unbounded(2), 1e-13, 400).unwrap();
        assert_eq!(a.history, b.history);
        assert_eq!(a.x, b.x);
    }
}
