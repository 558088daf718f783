//! Orthogonal Hermitian operator bases and coefficient expansions.
//!
//! Every basis produced here satisfies `Tr(S_j) = n δ_{j1}`, `S_j = S_j†` and
//! `Tr(S_j S_k) = n δ_{jk}`. Bipartite and tripartite operators are expanded
//! as `M = (1/d) Σ c_{kl…} S_k ⊗ S_l ⊗ …` with `c_{kl…} = Tr((S_k ⊗ S_l ⊗ …) M)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c, hermiticity_defect, kron_all, trace_product, CMatrix};

/// Relative tolerance used when accepting an input as Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-9;

/// Generalized Gell-Mann basis of an `n`-level system, scaled so that
/// `Tr(S_j S_k) = n δ_{jk}` and with the identity first.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorBasis {
    dim: usize,
    elements: Vec<CMatrix>,
}

impl OperatorBasis {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn elements(&self) -> &[CMatrix] {
        &self.elements
    }

    pub fn element(&self, k: usize) -> &CMatrix {
        &self.elements[k]
    }
}

/// Builds the basis for an `dim`-level system.
///
/// Ordering: identity, then the symmetric off-diagonal generators, then the
/// antisymmetric ones (both in row-major `(j, k)`, `j < k`), then the
/// diagonal generators of increasing size.
pub fn build_basis(dim: usize) -> Result<OperatorBasis> {
    if dim < 2 {
        return Err(Error::InvalidDimension(format!(
            "operator basis needs dim >= 2, got {dim}"
        )));
    }
    let n = dim;
    let scale = (n as f64 / 2.0).sqrt();
    let mut elements = Vec::with_capacity(n * n);
    elements.push(CMatrix::identity(n, n));

    for j in 0..n {
        for k in (j + 1)..n {
            let mut m = CMatrix::zeros(n, n);
            m[(j, k)] = c(scale, 0.0);
            m[(k, j)] = c(scale, 0.0);
            elements.push(m);
        }
    }
    for j in 0..n {
        for k in (j + 1)..n {
            let mut m = CMatrix::zeros(n, n);
            m[(j, k)] = c(0.0, -scale);
            m[(k, j)] = c(0.0, scale);
            elements.push(m);
        }
    }
    for l in 1..n {
        let norm = (2.0 / (l * (l + 1)) as f64).sqrt() * scale;
        let mut m = CMatrix::zeros(n, n);
        for j in 0..l {
            m[(j, j)] = c(norm, 0.0);
        }
        m[(l, l)] = c(-(l as f64) * norm, 0.0);
        elements.push(m);
    }
    Ok(OperatorBasis { dim, elements })
}

/// Real expansion coefficients over a tensor product of operator bases,
/// stored row-major in the multi-index (last subsystem fastest).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientVector {
    dims: Vec<usize>,
    coeffs: Vec<f64>,
}

impl CoefficientVector {
    /// All-zero coefficients for the given local dimensions.
    pub fn zeros(dims: &[usize]) -> Self {
        let len = dims.iter().map(|d| d * d).product();
        Self {
            dims: dims.to_vec(),
            coeffs: vec![0.0; len],
        }
    }

    pub fn from_vec(dims: &[usize], coeffs: Vec<f64>) -> Result<Self> {
        let len: usize = dims.iter().map(|d| d * d).product();
        if coeffs.len() != len {
            return Err(Error::DimensionMismatch(format!(
                "expected {len} coefficients for dims {dims:?}, got {}",
                coeffs.len()
            )));
        }
        Ok(Self {
            dims: dims.to_vec(),
            coeffs,
        })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.coeffs
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Flat position of a multi-index (0-based, identity = 0).
    pub fn index(&self, multi: &[usize]) -> usize {
        flat_index(&self.dims, multi)
    }

    pub fn get(&self, multi: &[usize]) -> f64 {
        self.coeffs[self.index(multi)]
    }

    pub fn set(&mut self, multi: &[usize], value: f64) {
        let i = self.index(multi);
        self.coeffs[i] = value;
    }
}

pub(crate) fn flat_index(dims: &[usize], multi: &[usize]) -> usize {
    assert_eq!(dims.len(), multi.len(), "multi-index arity");
    dims.iter().zip(multi).fold(0, |acc, (d, &k)| {
        assert!(k < d * d, "basis index {k} out of range for dim {d}");
        acc * d * d + k
    })
}

pub(crate) fn unflatten(dims: &[usize], mut flat: usize) -> Vec<usize> {
    let mut multi = vec![0; dims.len()];
    for (slot, d) in multi.iter_mut().zip(dims).rev() {
        *slot = flat % (d * d);
        flat /= d * d;
    }
    multi
}

/// `S_k ⊗ S_l ⊗ …` for a flat multi-index.
pub fn product_element(bases: &[&OperatorBasis], multi: &[usize]) -> CMatrix {
    kron_all(bases.iter().zip(multi).map(|(b, &k)| b.element(k)))
}

fn check_bases(bases: &[&OperatorBasis]) -> Result<usize> {
    if bases.is_empty() {
        return Err(Error::DimensionMismatch("no subsystem bases given".into()));
    }
    Ok(bases.iter().map(|b| b.dim()).product())
}

/// Coefficients `Tr((S_k ⊗ S_l ⊗ …) op)` of a Hermitian operator.
pub fn expand(op: &CMatrix, bases: &[&OperatorBasis]) -> Result<CoefficientVector> {
    let total = check_bases(bases)?;
    if op.nrows() != total || op.ncols() != total {
        return Err(Error::DimensionMismatch(format!(
            "operator is {}x{}, bases span dimension {total}",
            op.nrows(),
            op.ncols()
        )));
    }
    let scale = op.iter().map(|z| z.norm()).fold(1.0, f64::max);
    let defect = hermiticity_defect(op);
    if defect > HERMITIAN_TOL * scale {
        return Err(Error::NotHermitian { deviation: defect });
    }
    let dims: Vec<usize> = bases.iter().map(|b| b.dim()).collect();
    let mut out = CoefficientVector::zeros(&dims);
    for flat in 0..out.len() {
        let multi = unflatten(&dims, flat);
        let s = product_element(bases, &multi);
        out.coeffs[flat] = trace_product(&s, op).re;
    }
    Ok(out)
}

/// Inverse of [`expand`]: `(1/d) Σ c_{kl…} S_k ⊗ S_l ⊗ …`.
pub fn reconstruct(coeffs: &CoefficientVector, bases: &[&OperatorBasis]) -> Result<CMatrix> {
    let total = check_bases(bases)?;
    let dims: Vec<usize> = bases.iter().map(|b| b.dim()).collect();
    if dims != coeffs.dims {
        return Err(Error::DimensionMismatch(format!(
            "coefficients indexed by dims {:?}, bases have {dims:?}",
            coeffs.dims
        )));
    }
    let mut out = CMatrix::zeros(total, total);
    for (flat, &v) in coeffs.coeffs.iter().enumerate() {
        if v == 0.0 {
            continue;
        }
        let multi = unflatten(&dims, flat);
        out += product_element(bases, &multi).scale(v);
    }
    Ok(out.unscale(total as f64))
}
