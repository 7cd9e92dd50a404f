//! Dense complex linear algebra helpers shared by the builders, the
//! spectrum module and the oracles.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub type C64 = num_complex::Complex64;
pub type CMatrix = DMatrix<C64>;

/// Result of a Hermitian eigendecomposition, eigenvalues sorted ascending
/// and eigenvector phases fixed so the largest-magnitude component of each
/// vector is real and positive.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    /// Column `k` is the eigenvector of `values[k]`.
    pub vectors: CMatrix,
}

/// Largest absolute deviation from Hermiticity.
pub fn hermiticity_defect(m: &CMatrix) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let d = (m[(i, j)] - m[(j, i)].conj()).norm();
            if d > worst {
                worst = d;
            }
        }
    }
    worst
}

/// Eigendecomposition of a Hermitian matrix with deterministic ordering and
/// eigenvector phase convention.
pub fn hermitian_eigen(m: &CMatrix) -> Result<HermitianEigen> {
    let n = m.nrows();
    if n != m.ncols() {
        return Err(Error::contract("hermitian_eigen: matrix not square"));
    }
    let defect = hermiticity_defect(m);
    if !defect.is_finite() || defect > 1e-8 * (1.0 + m.camax()) {
        return Err(Error::numeric(format!(
            "hermitian_eigen: input not Hermitian (defect {defect:.3e})"
        )));
    }
    let se = m.clone().try_symmetric_eigen(f64::EPSILON, 10_000).ok_or_else(|| {
        Error::numeric(format!(
            "hermitian_eigen: QR iteration failed to converge (n = {n}, hermiticity defect {defect:.3e})"
        ))
    })?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| se.eigenvalues[a].total_cmp(&se.eigenvalues[b]));

    let mut values = Vec::with_capacity(n);
    let mut vectors = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        values.push(se.eigenvalues[src]);
        let col = se.eigenvectors.column(src);
        // phase convention: largest-|component| real positive
        let mut imax = 0;
        let mut amax = 0.0f64;
        for (i, c) in col.iter().enumerate() {
            let a = c.norm_sqr();
            if a > amax {
                amax = a;
                imax = i;
            }
        }
        let pivot = col[imax];
        let phase = if pivot.norm() > 0.0 {
            pivot.conj() / pivot.norm()
        } else {
            C64::new(1.0, 0.0)
        };
        for i in 0..n {
            vectors[(i, dst)] = col[i] * phase;
        }
    }
    Ok(HermitianEigen { values, vectors })
}

/// Kronecker product `a ⊗ b`; `b` indexes the fast axis, so
/// `(a ⊗ b)[(ia*nb+ib, ja*nb+jb)] = a[(ia,ja)] * b[(ib,jb)]`.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let (ra, ca) = a.shape();
    let (rb, cb) = b.shape();
    let mut out = CMatrix::zeros(ra * rb, ca * cb);
    for ia in 0..ra {
        for ja in 0..ca {
            let f = a[(ia, ja)];
            if f == C64::new(0.0, 0.0) {
                continue;
            }
            for ib in 0..rb {
                for jb in 0..cb {
                    out[(ia * rb + ib, ja * cb + jb)] = f * b[(ib, jb)];
                }
            }
        }
    }
    out
}

/// Kronecker product of per-subsystem operators with subsystem 0 on the
/// fastest-varying digit, i.e. `ops[N-1] ⊗ ... ⊗ ops[0]`.
pub fn kron_chain(ops: &[CMatrix]) -> CMatrix {
    assert!(!ops.is_empty());
    let mut acc = ops[ops.len() - 1].clone();
    for op in ops.iter().rev().skip(1) {
        acc = kron(&acc, op);
    }
    acc
}

/// `exp(-i t H)` for Hermitian `H`, via eigendecomposition.
pub fn expm_hermitian(h: &CMatrix, t: f64) -> Result<CMatrix> {
    let eig = hermitian_eigen(h)?;
    let n = h.nrows();
    let mut out = CMatrix::zeros(n, n);
    for k in 0..n {
        let ph = C64::from_polar(1.0, -t * eig.values[k]);
        let v = eig.vectors.column(k);
        for i in 0..n {
            let vi = v[i] * ph;
            for j in 0..n {
                out[(i, j)] += vi * v[j].conj();
            }
        }
    }
    Ok(out)
}

/// Largest eigenvalue of a Hermitian positive semi-definite matrix.
pub fn spectral_norm_psd(m: &CMatrix) -> Result<f64> {
    let eig = hermitian_eigen(m)?;
    Ok(eig.values.last().copied().unwrap_or(0.0).max(0.0))
}
