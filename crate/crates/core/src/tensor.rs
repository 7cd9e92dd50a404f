//! Mixed-radix tensor-product indexing, the state vector and the three
//! generic kernels every time-evolution operator is assembled from:
//! single-subsystem diagonal phases, pairwise diagonal phases and
//! single-subsystem basis transforms.
//!
//! Subsystem 0 owns the fastest-varying digit of the flattened index, so
//! a basis label tuple `(z_{N-1}, ..., z_1, z_0)` maps to
//! `z_0 + dims[0]*z_1 + dims[0]*dims[1]*z_2 + ...`. All kernels run in
//! O(total_dim · n) time and update disjoint coefficient groups
//! independently.

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, C64};

/// Index bookkeeping for a tensor-product basis over heterogeneous
/// subsystem dimensions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexMap {
    dims: Vec<usize>,
    strides: Vec<usize>,
    total: usize,
}

impl IndexMap {
    pub fn new(dims: &[usize]) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::config("IndexMap: no subsystems"));
        }
        if dims.iter().any(|&d| d < 1) {
            return Err(Error::config("IndexMap: zero-dimensional subsystem"));
        }
        let mut strides = Vec::with_capacity(dims.len());
        let mut acc = 1usize;
        for &d in dims {
            strides.push(acc);
            acc = acc.checked_mul(d).ok_or_else(|| Error::config("IndexMap: dimension overflow"))?;
        }
        Ok(IndexMap { dims: dims.to_vec(), strides, total: acc })
    }

    pub fn n_subsystems(&self) -> usize {
        self.dims.len()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn dim_of(&self, sub: usize) -> usize {
        self.dims[sub]
    }

    pub fn stride_of(&self, sub: usize) -> usize {
        self.strides[sub]
    }

    pub fn total_dim(&self) -> usize {
        self.total
    }

    /// Digit of `flat` belonging to `sub`.
    pub fn digit(&self, flat: usize, sub: usize) -> usize {
        (flat / self.strides[sub]) % self.dims[sub]
    }

    pub fn flatten(&self, digits: &[usize]) -> usize {
        debug_assert_eq!(digits.len(), self.dims.len());
        digits.iter().zip(&self.strides).map(|(&z, &s)| z * s).sum()
    }

    pub fn unflatten(&self, flat: usize) -> Vec<usize> {
        (0..self.dims.len()).map(|s| self.digit(flat, s)).collect()
    }
}

/// Dense matrix acting on one subsystem's local space. Layout is row-major.
#[derive(Debug, Clone)]
pub struct SubspaceMatrix {
    n: usize,
    data: Vec<C64>,
}

impl SubspaceMatrix {
    pub fn new(n: usize, data: Vec<C64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::config("SubspaceMatrix: data length != n*n"));
        }
        Ok(SubspaceMatrix { n, data })
    }

    pub fn from_dense(m: &CMatrix) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::config("SubspaceMatrix: matrix not square"));
        }
        let n = m.nrows();
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(m[(i, j)]);
            }
        }
        Ok(SubspaceMatrix { n, data })
    }

    pub fn identity(n: usize) -> Self {
        let mut data = vec![C64::new(0.0, 0.0); n * n];
        for i in 0..n {
            data[i * n + i] = C64::new(1.0, 0.0);
        }
        SubspaceMatrix { n, data }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn at(&self, i: usize, j: usize) -> C64 {
        self.data[i * self.n + j]
    }

    pub fn adjoint(&self) -> SubspaceMatrix {
        let n = self.n;
        let mut data = vec![C64::new(0.0, 0.0); n * n];
        for i in 0..n {
            for j in 0..n {
                data[j * n + i] = self.data[i * n + j].conj();
            }
        }
        SubspaceMatrix { n, data }
    }

    pub fn to_dense(&self) -> CMatrix {
        CMatrix::from_fn(self.n, self.n, |i, j| self.at(i, j))
    }

    /// `‖M†M − I‖_max`, the unitarity defect.
    pub fn unitarity_defect(&self) -> f64 {
        let n = self.n;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let mut acc = C64::new(0.0, 0.0);
                for k in 0..n {
                    acc += self.data[k * n + i].conj() * self.data[k * n + j];
                }
                if i == j {
                    acc -= C64::new(1.0, 0.0);
                }
                worst = worst.max(acc.norm());
            }
        }
        worst
    }
}

/// Complex amplitudes over a mixed-radix tensor-product basis.
#[derive(Debug, Clone)]
pub struct StateVector {
    map: IndexMap,
    coeffs: Vec<C64>,
}

impl StateVector {
    /// Basis state with all digits zero.
    pub fn ground(map: IndexMap) -> Self {
        let mut coeffs = vec![C64::new(0.0, 0.0); map.total_dim()];
        coeffs[0] = C64::new(1.0, 0.0);
        StateVector { map, coeffs }
    }

    /// Basis state with the given digits.
    pub fn basis_state(map: IndexMap, digits: &[usize]) -> Result<Self> {
        if digits.len() != map.n_subsystems() {
            return Err(Error::config("basis_state: digit count mismatch"));
        }
        for (s, (&z, &d)) in digits.iter().zip(map.dims()).enumerate() {
            if z >= d {
                return Err(Error::config(format!("basis_state: digit {z} out of range for subsystem {s}")));
            }
        }
        let k = map.flatten(digits);
        let mut coeffs = vec![C64::new(0.0, 0.0); map.total_dim()];
        coeffs[k] = C64::new(1.0, 0.0);
        Ok(StateVector { map, coeffs })
    }

    pub fn from_coeffs(map: IndexMap, coeffs: Vec<C64>) -> Result<Self> {
        if coeffs.len() != map.total_dim() {
            return Err(Error::config("StateVector: coefficient count mismatch"));
        }
        Ok(StateVector { map, coeffs })
    }

    pub fn map(&self) -> &IndexMap {
        &self.map
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [C64] {
        &mut self.coeffs
    }

    pub fn amplitude(&self, digits: &[usize]) -> C64 {
        self.coeffs[self.map.flatten(digits)]
    }

    pub fn probability(&self, digits: &[usize]) -> f64 {
        self.amplitude(digits).norm_sqr()
    }

    pub fn norm(&self) -> f64 {
        // compensated summation keeps the unitarity audit meaningful after
        // millions of kernel applications
        let mut sum = 0.0f64;
        let mut c = 0.0f64;
        for a in &self.coeffs {
            let y = a.norm_sqr() - c;
            let t = sum + y;
            c = (t - sum) - y;
            sum = t;
        }
        sum.sqrt()
    }

    pub fn scale(&mut self, f: C64) {
        for a in &mut self.coeffs {
            *a *= f;
        }
    }

    /// `c'_z = c_z · exp(i · scale · lambdas[z_sub])`.
    pub fn apply_diagonal_phase(&mut self, sub: usize, lambdas: &[f64], scale: f64) -> Result<()> {
        let n = self.map.dim_of(sub);
        if lambdas.len() != n {
            return Err(Error::config(format!(
                "apply_diagonal_phase: {} eigenvalues for subsystem of dimension {n}",
                lambdas.len()
            )));
        }
        let phases: Vec<C64> = lambdas.iter().map(|&l| C64::from_polar(1.0, scale * l)).collect();
        let stride = self.map.stride_of(sub);
        let block = stride * n;
        let total = self.map.total_dim();
        let c = &mut self.coeffs;
        let mut base = 0;
        while base < total {
            for (j, ph) in phases.iter().enumerate() {
                let start = base + j * stride;
                for a in &mut c[start..start + stride] {
                    *a *= ph;
                }
            }
            base += block;
        }
        Ok(())
    }

    /// `c'_z = c_z · exp(i · scale · lam_a[z_a] · lam_b[z_b])`.
    pub fn apply_pairwise_diagonal_phase(
        &mut self,
        sub_a: usize,
        sub_b: usize,
        lam_a: &[f64],
        lam_b: &[f64],
        scale: f64,
    ) -> Result<()> {
        if sub_a == sub_b {
            return Err(Error::contract("apply_pairwise_diagonal_phase: identical subsystems"));
        }
        let na = self.map.dim_of(sub_a);
        let nb = self.map.dim_of(sub_b);
        if lam_a.len() != na || lam_b.len() != nb {
            return Err(Error::config("apply_pairwise_diagonal_phase: eigenvalue ladder length mismatch"));
        }
        // order by stride so the inner loops stay contiguous
        let (slo, nlo, llo, shi, nhi, lhi) = if self.map.stride_of(sub_a) < self.map.stride_of(sub_b) {
            (self.map.stride_of(sub_a), na, lam_a, self.map.stride_of(sub_b), nb, lam_b)
        } else {
            (self.map.stride_of(sub_b), nb, lam_b, self.map.stride_of(sub_a), na, lam_a)
        };
        let mut phases = Vec::with_capacity(nhi * nlo);
        for &h in lhi {
            for &l in llo {
                phases.push(C64::from_polar(1.0, scale * h * l));
            }
        }
        let total = self.map.total_dim();
        let c = &mut self.coeffs;
        let hi_block = shi * nhi;
        let lo_block = slo * nlo;
        let mut hi_base = 0;
        while hi_base < total {
            for jhi in 0..nhi {
                let region = hi_base + jhi * shi;
                let tab = &phases[jhi * nlo..(jhi + 1) * nlo];
                let mut lo_base = region;
                while lo_base < region + shi {
                    for (jlo, ph) in tab.iter().enumerate() {
                        let start = lo_base + jlo * slo;
                        for a in &mut c[start..start + slo] {
                            *a *= ph;
                        }
                    }
                    lo_base += lo_block;
                }
            }
            hi_base += hi_block;
        }
        Ok(())
    }

    /// Precomputed-phase variant of [`Self::apply_diagonal_phase`]:
    /// `c'_z = c_z · phases[z_sub]`.
    pub fn apply_phase_table(&mut self, sub: usize, phases: &[C64]) -> Result<()> {
        let n = self.map.dim_of(sub);
        if phases.len() != n {
            return Err(Error::config("apply_phase_table: table length mismatch"));
        }
        let stride = self.map.stride_of(sub);
        let block = stride * n;
        let total = self.map.total_dim();
        let c = &mut self.coeffs;
        let mut base = 0;
        while base < total {
            for (j, ph) in phases.iter().enumerate() {
                let start = base + j * stride;
                for a in &mut c[start..start + stride] {
                    *a *= ph;
                }
            }
            base += block;
        }
        Ok(())
    }

    /// Precomputed-phase variant of [`Self::apply_pairwise_diagonal_phase`]:
    /// `c'_z = c_z · table[z_a * dims[sub_b] + z_b]`.
    pub fn apply_pairwise_phase_table(&mut self, sub_a: usize, sub_b: usize, table: &[C64]) -> Result<()> {
        if sub_a == sub_b {
            return Err(Error::contract("apply_pairwise_phase_table: identical subsystems"));
        }
        let na = self.map.dim_of(sub_a);
        let nb = self.map.dim_of(sub_b);
        if table.len() != na * nb {
            return Err(Error::config("apply_pairwise_phase_table: table size mismatch"));
        }
        // reindex so the low-stride subsystem runs over the inner table axis
        let a_is_low = self.map.stride_of(sub_a) < self.map.stride_of(sub_b);
        let (slo, nlo, shi, nhi) = if a_is_low {
            (self.map.stride_of(sub_a), na, self.map.stride_of(sub_b), nb)
        } else {
            (self.map.stride_of(sub_b), nb, self.map.stride_of(sub_a), na)
        };
        let lookup = |jhi: usize, jlo: usize| -> C64 {
            if a_is_low {
                table[jlo * nb + jhi]
            } else {
                table[jhi * nb + jlo]
            }
        };
        let total = self.map.total_dim();
        let c = &mut self.coeffs;
        let hi_block = shi * nhi;
        let lo_block = slo * nlo;
        let mut hi_base = 0;
        while hi_base < total {
            for jhi in 0..nhi {
                let region = hi_base + jhi * shi;
                let mut lo_base = region;
                while lo_base < region + shi {
                    for jlo in 0..nlo {
                        let ph = lookup(jhi, jlo);
                        let start = lo_base + jlo * slo;
                        for a in &mut c[start..start + slo] {
                            *a *= ph;
                        }
                    }
                    lo_base += lo_block;
                }
            }
            hi_base += hi_block;
        }
        Ok(())
    }

    /// For each group of `n` coefficients related by fixing all other
    /// digits, `c'_{z'} = Σ_z M[z',z] c_z`.
    pub fn apply_subspace_transform(&mut self, sub: usize, m: &SubspaceMatrix) -> Result<()> {
        let n = self.map.dim_of(sub);
        if m.n() != n {
            return Err(Error::config(format!(
                "apply_subspace_transform: {}x{} matrix on subsystem of dimension {n}",
                m.n(),
                m.n()
            )));
        }
        let stride = self.map.stride_of(sub);
        let block = stride * n;
        let total = self.map.total_dim();
        let c = &mut self.coeffs;
        let mut scratch = vec![C64::new(0.0, 0.0); n];
        let mat = &m.data;
        let mut base = 0;
        while base < total {
            for off in 0..stride {
                let group = base + off;
                for (j, s) in scratch.iter_mut().enumerate() {
                    *s = c[group + j * stride];
                }
                for zp in 0..n {
                    let row = &mat[zp * n..(zp + 1) * n];
                    let mut acc = C64::new(0.0, 0.0);
                    for (j, s) in scratch.iter().enumerate() {
                        acc += row[j] * s;
                    }
                    c[group + zp * stride] = acc;
                }
            }
            base += block;
        }
        Ok(())
    }
}

/// `Σ_z conj(a_z) b_z` with compensated summation.
pub fn inner_product(a: &StateVector, b: &StateVector) -> Result<C64> {
    if a.map != b.map {
        return Err(Error::contract("inner_product: index maps differ"));
    }
    let mut sum = C64::new(0.0, 0.0);
    let mut comp = C64::new(0.0, 0.0);
    for (x, y) in a.coeffs.iter().zip(&b.coeffs) {
        let term = x.conj() * y - comp;
        let t = sum + term;
        comp = (t - sum) - term;
        sum = t;
    }
    Ok(sum)
}
