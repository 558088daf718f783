//! Density operators, the depolarized Bell family, partial traces and
//! subsystem permutations.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::linalg::{c, hermiticity_defect, min_eigenvalue, projector, trace, CMatrix, C64};

pub const HERMITIAN_TOL: f64 = 1e-10;
pub const TRACE_TOL: f64 = 1e-10;
/// Smallest eigenvalue still accepted as positive semidefinite.
pub const POSITIVITY_TOL: f64 = 1e-9;

/// A unit-trace positive semidefinite operator on a tensor product space.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityOperator {
    matrix: CMatrix,
    dims: Vec<usize>,
}

impl DensityOperator {
    /// Validates Hermiticity, unit trace and positivity.
    pub fn new(matrix: CMatrix, dims: &[usize]) -> Result<Self> {
        let rho = Self::new_unchecked(matrix, dims)?;
        let defect = hermiticity_defect(&rho.matrix);
        if defect > HERMITIAN_TOL {
            return Err(Error::NotHermitian { deviation: defect });
        }
        let tr = trace(&rho.matrix);
        if (tr - c(1.0, 0.0)).norm() > TRACE_TOL {
            return Err(Error::InvalidState(format!("trace is {tr}")));
        }
        let lmin = min_eigenvalue(&rho.matrix);
        if lmin < -POSITIVITY_TOL {
            return Err(Error::InvalidState(format!("minimum eigenvalue {lmin:.3e}")));
        }
        Ok(rho)
    }

    /// Only checks that `dims` matches the matrix shape.
    pub fn new_unchecked(matrix: CMatrix, dims: &[usize]) -> Result<Self> {
        let total: usize = dims.iter().product();
        if dims.is_empty() || matrix.nrows() != total || matrix.ncols() != total {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} matrix for subsystem dims {dims:?}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        Ok(Self {
            matrix,
            dims: dims.to_vec(),
        })
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn trace(&self) -> f64 {
        trace(&self.matrix).re
    }

    pub fn purity(&self) -> f64 {
        (&self.matrix * &self.matrix).trace().re
    }

    pub fn min_eigenvalue(&self) -> f64 {
        min_eigenvalue(&self.matrix)
    }

    /// `Tr(op · ρ)`, real part.
    pub fn expectation(&self, op: &CMatrix) -> f64 {
        crate::linalg::trace_product(op, &self.matrix).re
    }

    /// Maximally mixed state on the given subsystems.
    pub fn maximally_mixed(dims: &[usize]) -> Result<Self> {
        let d: usize = dims.iter().product();
        Self::new(CMatrix::identity(d, d).unscale(d as f64), dims)
    }

    pub fn tensor(&self, other: &DensityOperator) -> DensityOperator {
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        DensityOperator {
            matrix: self.matrix.kronecker(&other.matrix),
            dims,
        }
    }
}

/// Projector onto (|00⟩ + |11⟩)/√2.
pub fn bell_psi_plus() -> DensityOperator {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let v = DVector::from_vec(vec![c(s, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(s, 0.0)]);
    DensityOperator {
        matrix: projector(&v),
        dims: vec![2, 2],
    }
}

/// Largest error probability for which the depolarized Bell state is positive.
pub const MAX_DEPOLARIZING_ERROR: f64 = 2.0 / 3.0;

/// `(1 − 2e)|ψ⁺⟩⟨ψ⁺| + (e/2)·𝟙`, whose matched-basis error rate is `e`.
pub fn depolarized_bell(e: f64) -> Result<DensityOperator> {
    if !(0.0..=MAX_DEPOLARIZING_ERROR).contains(&e) || !e.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "error probability {e} outside [0, 2/3]"
        )));
    }
    let bell = bell_psi_plus();
    let matrix = bell.matrix.scale(1.0 - 2.0 * e) + CMatrix::identity(4, 4).scale(e / 2.0);
    Ok(DensityOperator {
        matrix,
        dims: vec![2, 2],
    })
}

fn strides(dims: &[usize]) -> Vec<usize> {
    let mut s = vec![1; dims.len()];
    for i in (0..dims.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * dims[i + 1];
    }
    s
}

fn digits(mut idx: usize, dims: &[usize]) -> Vec<usize> {
    let mut out = vec![0; dims.len()];
    for (slot, d) in out.iter_mut().zip(dims).rev() {
        *slot = idx % d;
        idx /= d;
    }
    out
}

/// Partial trace of an arbitrary operator, keeping the listed subsystems in
/// ascending order.
pub fn partial_trace_matrix(m: &CMatrix, dims: &[usize], keep: &[usize]) -> Result<CMatrix> {
    let mut keep_sorted = keep.to_vec();
    keep_sorted.sort_unstable();
    keep_sorted.dedup();
    if keep_sorted.is_empty() || keep_sorted.len() != keep.len() {
        return Err(Error::InvalidParameter(format!(
            "keep set {keep:?} must be nonempty without repeats"
        )));
    }
    if let Some(&bad) = keep_sorted.iter().find(|&&k| k >= dims.len()) {
        return Err(Error::InvalidParameter(format!(
            "subsystem {bad} out of range for {} subsystems",
            dims.len()
        )));
    }
    let total: usize = dims.iter().product();
    if m.nrows() != total || m.ncols() != total {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} matrix for dims {dims:?}",
            m.nrows(),
            m.ncols()
        )));
    }
    let traced: Vec<usize> = (0..dims.len()).filter(|i| !keep_sorted.contains(i)).collect();
    let kept_dims: Vec<usize> = keep_sorted.iter().map(|&i| dims[i]).collect();
    let traced_dims: Vec<usize> = traced.iter().map(|&i| dims[i]).collect();
    let kept_total: usize = kept_dims.iter().product();
    let traced_total: usize = traced_dims.iter().product();
    let st = strides(dims);

    let compose = |kept: &[usize], tr: &[usize]| -> usize {
        let mut idx = 0;
        for (pos, &sys) in keep_sorted.iter().enumerate() {
            idx += kept[pos] * st[sys];
        }
        for (pos, &sys) in traced.iter().enumerate() {
            idx += tr[pos] * st[sys];
        }
        idx
    };

    let mut out = CMatrix::zeros(kept_total, kept_total);
    for r in 0..kept_total {
        let rd = digits(r, &kept_dims);
        for col in 0..kept_total {
            let cd = digits(col, &kept_dims);
            let mut acc: C64 = c(0.0, 0.0);
            for t in 0..traced_total {
                let td = digits(t, &traced_dims);
                acc += m[(compose(&rd, &td), compose(&cd, &td))];
            }
            out[(r, col)] = acc;
        }
    }
    Ok(out)
}

/// Reduced state on the subsystems in `keep`.
pub fn partial_trace(rho: &DensityOperator, keep: &[usize]) -> Result<DensityOperator> {
    let matrix = partial_trace_matrix(&rho.matrix, &rho.dims, keep)?;
    let mut keep_sorted = keep.to_vec();
    keep_sorted.sort_unstable();
    let dims: Vec<usize> = keep_sorted.iter().map(|&i| rho.dims[i]).collect();
    Ok(DensityOperator { matrix, dims })
}

/// Permutation matrix sending subsystem `order[i]` of the input to slot `i`.
pub fn permutation_matrix(dims: &[usize], order: &[usize]) -> Result<CMatrix> {
    let mut check = order.to_vec();
    check.sort_unstable();
    if check != (0..dims.len()).collect::<Vec<_>>() {
        return Err(Error::InvalidParameter(format!(
            "{order:?} is not a permutation of {} subsystems",
            dims.len()
        )));
    }
    let total: usize = dims.iter().product();
    let new_dims: Vec<usize> = order.iter().map(|&i| dims[i]).collect();
    let new_strides = strides(&new_dims);
    let mut p = CMatrix::zeros(total, total);
    for idx in 0..total {
        let old = digits(idx, dims);
        let new_idx: usize = order
            .iter()
            .enumerate()
            .map(|(slot, &sys)| old[sys] * new_strides[slot])
            .sum();
        p[(new_idx, idx)] = c(1.0, 0.0);
    }
    Ok(p)
}

/// Reorders the tensor factors of `m`: the result's `i`-th factor is the
/// input's `order[i]`-th.
pub fn permute_subsystems(m: &CMatrix, dims: &[usize], order: &[usize]) -> Result<CMatrix> {
    let p = permutation_matrix(dims, order)?;
    Ok(&p * m * p.transpose())
}

/// Exchanges A and B of a bipartite state.
pub fn swap_parties(rho: &DensityOperator) -> Result<DensityOperator> {
    if rho.dims.len() != 2 {
        return Err(Error::DimensionMismatch(format!(
            "expected a bipartite state, got dims {:?}",
            rho.dims
        )));
    }
    Ok(DensityOperator {
        matrix: permute_subsystems(&rho.matrix, &rho.dims, &[1, 0])?,
        dims: vec![rho.dims[1], rho.dims[0]],
    })
}

/// The operator `P` on A ⊗ B ⊗ B′ with `P|ijk⟩ = |ikj⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct SwapOperator {
    matrix: CMatrix,
    dims: (usize, usize),
}

impl SwapOperator {
    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn dims(&self) -> (usize, usize) {
        self.dims
    }

    /// `P·m·P`.
    pub fn conjugate(&self, m: &CMatrix) -> CMatrix {
        &self.matrix * m * &self.matrix
    }
}

pub fn swap_bbprime(dims: (usize, usize)) -> Result<SwapOperator> {
    let (da, db) = dims;
    if da < 2 || db < 2 {
        return Err(Error::InvalidDimension(format!(
            "swap needs local dims >= 2, got ({da}, {db})"
        )));
    }
    let matrix = permutation_matrix(&[da, db, db], &[0, 2, 1])?;
    Ok(SwapOperator { matrix, dims })
}
