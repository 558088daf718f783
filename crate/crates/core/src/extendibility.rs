//! Best decomposition of a class of states into a symmetric-extendible part
//! and a non-extendible remainder, as a single SDP over
//! `x = (r_kl, ẽ_kl, f_klm)`:
//!
//! * `ρ = (1/d) Σ r_kl S_k S_l` lies in the class and `ρ ⪰ 0`;
//! * `σ̃ = (1/d) Σ ẽ_kl S_k S_l` is the unnormalized extendible part and
//!   `ρ − σ̃ ⪰ 0`;
//! * `χ̃ = (1/d′) Σ_{l≥m} f_klm (S_k S_l S_m + S_k S_m S_l)` (once for
//!   `l = m`) is swap-symmetric by construction, `χ̃ ⪰ 0`, and
//!   `f_kl1 = ẽ_kl` makes `Tr_{B′} χ̃ = σ̃`.
//!
//! Minimizing `r_11 − ẽ_11` with `r_11 = 1` maximizes the extendible weight
//! over every member of the class at once.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hermitian_ops::{build_basis, flat_index, product_element, reconstruct, CoefficientVector};
use crate::linalg::{hermitian_part, max_abs_diff, min_eigenvalue, CMatrix};
use crate::protocols::{Direction, EquivalenceClassSpec};
use crate::quantum::{partial_trace_matrix, permute_subsystems, swap_bbprime, DensityOperator};
use crate::sdp::{solve, HermitianBlock, SdpProblem, SdpSettings, SdpSolution, SdpStatus};

/// Weights within this distance of 0 or 1 are treated as exactly 0 or 1.
pub const LAMBDA_TOL: f64 = 1e-6;

/// Offsets of the three coefficient groups in the SDP variable vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VariableLayout {
    /// `(kept, copied)` local dimensions.
    pub dims: (usize, usize),
    pub r_offset: usize,
    pub e_offset: usize,
    pub f_offset: usize,
    pub len: usize,
}

impl VariableLayout {
    pub fn new(dims: (usize, usize)) -> Self {
        let (a, b) = dims;
        let pair = a * a * b * b;
        let f_len = a * a * (b * b) * (b * b + 1) / 2;
        Self {
            dims,
            r_offset: 0,
            e_offset: pair,
            f_offset: 2 * pair,
            len: 2 * pair + f_len,
        }
    }

    fn sq(&self) -> (usize, usize) {
        (self.dims.0 * self.dims.0, self.dims.1 * self.dims.1)
    }

    pub fn pair_len(&self) -> usize {
        self.e_offset - self.r_offset
    }

    pub fn f_len(&self) -> usize {
        self.len - self.f_offset
    }

    pub fn r(&self, k: usize, l: usize) -> usize {
        self.r_offset + flat_index(&[self.dims.0, self.dims.1], &[k, l])
    }

    pub fn e(&self, k: usize, l: usize) -> usize {
        self.e_offset + flat_index(&[self.dims.0, self.dims.1], &[k, l])
    }

    /// Index of `f_klm`; the pair `(l, m)` is unordered.
    pub fn f(&self, k: usize, l: usize, m: usize) -> usize {
        let (_, nb) = self.sq();
        let (hi, lo) = if l >= m { (l, m) } else { (m, l) };
        let per_k = nb * (nb + 1) / 2;
        self.f_offset + k * per_k + hi * (hi + 1) / 2 + lo
    }
}

/// Builds the SDP; its optimal value is `1 − λ_max` over the class.
pub fn build_sdp(class: &EquivalenceClassSpec) -> Result<(SdpProblem, VariableLayout)> {
    let (da, db) = class.dims();
    let layout = VariableLayout::new((da, db));
    let (na, nb) = layout.sq();
    let ba = build_basis(da)?;
    let bb = build_basis(db)?;
    let d_pair = (da * db) as f64;
    let d_ext = (da * db * db) as f64;

    let mut problem = SdpProblem::new(layout.len);
    problem.set_objective_coeff(layout.r(0, 0), 1.0);
    problem.set_objective_coeff(layout.e(0, 0), -1.0);

    let mut rho = HermitianBlock::new(da * db);
    let mut rest = HermitianBlock::new(da * db);
    for k in 0..na {
        for l in 0..nb {
            let s = product_element(&[&ba, &bb], &[k, l]).unscale(d_pair);
            rho.add_term(layout.r(k, l), s.clone());
            rest.add_term(layout.r(k, l), s.clone());
            rest.add_term(layout.e(k, l), -s);
        }
    }

    let mut chi = HermitianBlock::new(da * db * db);
    for k in 0..na {
        for l in 0..nb {
            for m in 0..=l {
                let mut s = product_element(&[&ba, &bb, &bb], &[k, l, m]);
                if l != m {
                    s += product_element(&[&ba, &bb, &bb], &[k, m, l]);
                }
                chi.add_term(layout.f(k, l, m), s.unscale(d_ext));
            }
        }
    }
    problem.add_block(rho);
    problem.add_block(rest);
    problem.add_block(chi);

    for con in class.constraints() {
        let mut row = vec![0.0; layout.len];
        row[layout.r_offset..layout.e_offset].copy_from_slice(&con.coeffs);
        problem.add_equality(row, con.target);
    }
    for k in 0..na {
        for l in 0..nb {
            let mut row = vec![0.0; layout.len];
            row[layout.f(k, l, 0)] = 1.0;
            row[layout.e(k, l)] = -1.0;
            problem.add_equality(row, 0.0);
        }
    }
    Ok((problem, layout))
}

/// Solver status and residuals carried alongside a decomposition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolverDiagnostics {
    pub status: SdpStatus,
    pub objective: f64,
    pub duality_gap: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub equality_residual: f64,
    pub iterations: usize,
}

impl From<&SdpSolution> for SolverDiagnostics {
    fn from(s: &SdpSolution) -> Self {
        Self {
            status: s.status,
            objective: s.primal_objective,
            duality_gap: s.duality_gap,
            primal_residual: s.primal_residual,
            dual_residual: s.dual_residual,
            equality_residual: s.equality_residual,
            iterations: s.iterations,
        }
    }
}

/// `ρ* = λ σ_ext + (1 − λ) ρ_ne` with maximal `λ` over the class.
///
/// `rho_star`, `sigma_ext` and `rho_ne` are in A ⊗ B order. `chi` is the
/// normalized extension on (kept, copy, copy′): A ⊗ B ⊗ B′ for
/// [`Direction::Direct`], B ⊗ A ⊗ A′ for [`Direction::Reverse`].
#[derive(Debug, Clone, PartialEq)]
pub struct ExtendibilityResult {
    pub lambda_max: f64,
    pub rho_star: DensityOperator,
    pub sigma_ext: Option<DensityOperator>,
    pub rho_ne: Option<DensityOperator>,
    pub chi: Option<DensityOperator>,
    pub direction: Direction,
    pub diagnostics: SolverDiagnostics,
}

/// Projects `x` onto `{x : A x = b}` along the row space of `A`.
fn project_onto_equalities(problem: &SdpProblem, x: &[f64]) -> Vec<f64> {
    let rows: Vec<Vec<f64>> = problem.equalities().iter().map(|e| e.coeffs.clone()).collect();
    let rhs: Vec<f64> = problem.equalities().iter().map(|e| e.rhs).collect();
    let kept = match crate::sdp::independent_rows(&rows, &rhs, 1e-10) {
        crate::sdp::RowReduction::Independent(k) => k,
        crate::sdp::RowReduction::Inconsistent { .. } => return x.to_vec(),
    };
    let n = x.len();
    let a = DMatrix::from_fn(kept.len(), n, |i, j| rows[kept[i]][j]);
    let b = DVector::from_fn(kept.len(), |i, _| rhs[kept[i]]);
    let xv = DVector::from_column_slice(x);
    let resid = &a * &xv - b;
    let gram = &a * a.transpose();
    match gram.cholesky() {
        Some(ch) => {
            let w = ch.solve(&resid);
            (xv - a.transpose() * w).iter().copied().collect()
        }
        None => x.to_vec(),
    }
}

fn coefficients(x: &[f64], range: std::ops::Range<usize>, dims: &[usize]) -> Result<CoefficientVector> {
    CoefficientVector::from_vec(dims, x[range].to_vec())
}

fn extension_coefficients(x: &[f64], layout: &VariableLayout) -> Result<CoefficientVector> {
    let (da, db) = layout.dims;
    let (na, nb) = layout.sq();
    let mut cv = CoefficientVector::zeros(&[da, db, db]);
    for k in 0..na {
        for l in 0..nb {
            for m in 0..nb {
                cv.set(&[k, l, m], x[layout.f(k, l, m)]);
            }
        }
    }
    Ok(cv)
}

/// Solves the decomposition SDP with default settings.
pub fn best_extendible_decomposition(class: &EquivalenceClassSpec) -> Result<ExtendibilityResult> {
    best_extendible_decomposition_with(class, &SdpSettings::default())
}

pub fn best_extendible_decomposition_with(
    class: &EquivalenceClassSpec,
    settings: &SdpSettings,
) -> Result<ExtendibilityResult> {
    let (problem, layout) = build_sdp(class)?;
    let sol = solve(&problem, settings)?;
    match sol.status {
        SdpStatus::Optimal => {}
        SdpStatus::Infeasible => {
            return Err(Error::InconsistentData(
                "no positive semidefinite state reproduces the data".into(),
            ))
        }
        status => {
            return Err(Error::Solver {
                status,
                iterations: sol.iterations,
            })
        }
    }
    // A x = b exactly, not just to feas_tol.
    let x = project_onto_equalities(&problem, &sol.x);
    let (da, db) = layout.dims;
    let ba = build_basis(da)?;
    let bb = build_basis(db)?;

    let r = coefficients(&x, layout.r_offset..layout.e_offset, &[da, db])?;
    let e = coefficients(&x, layout.e_offset..layout.f_offset, &[da, db])?;
    let rho = hermitian_part(&reconstruct(&r, &[&ba, &bb])?);
    let sigma_tilde = hermitian_part(&reconstruct(&e, &[&ba, &bb])?);
    let chi_tilde = hermitian_part(&reconstruct(&extension_coefficients(&x, &layout)?, &[&ba, &bb, &bb])?);

    let lambda = e.get(&[0, 0]).clamp(0.0, 1.0);
    let to_ab = |m: CMatrix| -> Result<DensityOperator> {
        match class.direction() {
            Direction::Direct => DensityOperator::new_unchecked(m, &[da, db]),
            Direction::Reverse => {
                DensityOperator::new_unchecked(permute_subsystems(&m, &[da, db], &[1, 0])?, &[db, da])
            }
        }
    };

    let (sigma_ext, chi) = if lambda > LAMBDA_TOL {
        (
            Some(to_ab(sigma_tilde.unscale(lambda))?),
            Some(DensityOperator::new_unchecked(
                chi_tilde.unscale(lambda),
                &[da, db, db],
            )?),
        )
    } else {
        (None, None)
    };
    let rho_ne = if lambda < 1.0 - LAMBDA_TOL {
        let rest = &rho - &sigma_tilde;
        let tr = crate::linalg::trace(&rest).re;
        Some(to_ab(rest.unscale(tr))?)
    } else {
        None
    };
    Ok(ExtendibilityResult {
        lambda_max: lambda,
        rho_star: to_ab(rho)?,
        sigma_ext,
        rho_ne,
        chi,
        direction: class.direction(),
        diagnostics: SolverDiagnostics::from(&sol),
    })
}

/// Whether the data can come from a state with a symmetric extension.
pub fn is_extendible(class: &EquivalenceClassSpec) -> Result<bool> {
    Ok(best_extendible_decomposition(class)?.lambda_max >= 1.0 - LAMBDA_TOL)
}

pub const DECOMPOSITION_TOL: f64 = 1e-7;
pub const SWAP_TOL: f64 = 1e-9;
pub const PARTIAL_TRACE_TOL: f64 = 1e-8;
pub const MARGINAL_TOL: f64 = 1e-8;
/// Allowed negativity of the weighted parts `λσ_ext`, `(1−λ)ρ_ne`, `λχ`
/// and of `ρ*`; matches the solver's feasibility tolerance.
pub const POSITIVITY_TOL: f64 = 1e-8;

/// Max-norm residuals of the defining identities of a decomposition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExtensionReport {
    /// `‖λσ_ext + (1−λ)ρ_ne − ρ*‖`.
    pub decomposition: f64,
    /// `‖PχP − χ‖`.
    pub swap: f64,
    /// `‖Tr_{B′} χ − σ_ext‖`.
    pub partial_trace: f64,
    /// `‖Tr_{B′} χ − Tr_B χ‖`.
    pub marginal_equality: f64,
    /// Largest negativity among the weighted parts.
    pub negativity: f64,
}

impl ExtensionReport {
    pub fn passes(&self) -> bool {
        self.decomposition <= DECOMPOSITION_TOL
            && self.swap <= SWAP_TOL
            && self.partial_trace <= PARTIAL_TRACE_TOL
            && self.marginal_equality <= MARGINAL_TOL
            && self.negativity <= POSITIVITY_TOL
    }
}

/// Checks the decomposition identity, swap symmetry, partial-trace
/// consistency, equal marginals and positivity. Absent parts contribute
/// zero residual.
pub fn verify_extension(result: &ExtendibilityResult) -> Result<ExtensionReport> {
    let lambda = result.lambda_max;
    let rho = result.rho_star.matrix();
    let dims = result.rho_star.dims().to_vec();
    let mut report = ExtensionReport {
        decomposition: 0.0,
        swap: 0.0,
        partial_trace: 0.0,
        marginal_equality: 0.0,
        negativity: (-min_eigenvalue(rho)).max(0.0),
    };

    let weighted_sigma = result.sigma_ext.as_ref().map(|s| s.matrix().scale(lambda));
    let weighted_ne = result.rho_ne.as_ref().map(|r| r.matrix().scale(1.0 - lambda));
    let mut recombined = CMatrix::zeros(rho.nrows(), rho.ncols());
    if let Some(s) = &weighted_sigma {
        recombined += s;
        report.negativity = report.negativity.max(-min_eigenvalue(s));
    }
    if let Some(r) = &weighted_ne {
        recombined += r;
        report.negativity = report.negativity.max(-min_eigenvalue(r));
    }
    report.decomposition = max_abs_diff(&recombined, rho);

    if let Some(chi) = &result.chi {
        let cd = chi.dims().to_vec();
        let swap = swap_bbprime((cd[0], cd[1]))?;
        let m = chi.matrix();
        report.swap = max_abs_diff(&swap.conjugate(m), m);
        report.negativity = report.negativity.max(-lambda * min_eigenvalue(m));
        let ab = partial_trace_matrix(m, &cd, &[0, 1])?;
        let ab_prime = partial_trace_matrix(m, &cd, &[0, 2])?;
        report.marginal_equality = max_abs_diff(&ab, &ab_prime);
        if let Some(sigma) = &result.sigma_ext {
            let sigma_kept = match result.direction {
                Direction::Direct => sigma.matrix().clone(),
                Direction::Reverse => permute_subsystems(sigma.matrix(), &dims, &[1, 0])?,
            };
            report.partial_trace = max_abs_diff(&ab, &sigma_kept);
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::{bell_psi_plus, depolarized_bell};

    #[test]
    fn qubit_layout_sizes() {
        let layout = VariableLayout::new((2, 2));
        // d_A² · d_B²(d_B² + 1)/2 = 4 · 10 extension coefficients.
        assert_eq!(layout.len, 16 + 16 + 4 * 10);
        assert_eq!(layout.pair_len(), 16);
        assert_eq!(layout.f_len(), 40);
        let mut seen = std::collections::HashSet::new();
        for k in 0..4 {
            for l in 0..4 {
                for m in 0..=l {
                    assert!(seen.insert(layout.f(k, l, m)));
                    assert_eq!(layout.f(k, l, m), layout.f(k, m, l));
                }
            }
        }
        assert_eq!(seen.len(), 40);
        assert_eq!(*seen.iter().min().unwrap(), 32);
        assert_eq!(*seen.iter().max().unwrap(), 71);
    }

    #[test]
    fn objective_and_coupling() {
        let class = EquivalenceClassSpec::unconstrained((2, 2), Direction::Direct).unwrap();
        let (p, layout) = build_sdp(&class).unwrap();
        assert_eq!(p.num_vars(), 72);
        let c = p.objective();
        assert_eq!(c[layout.r(0, 0)], 1.0);
        assert_eq!(c[layout.e(0, 0)], -1.0);
        assert_eq!(c.iter().filter(|v| **v != 0.0).count(), 2);
        let coupling = p
            .equalities()
            .iter()
            .filter(|e| e.coeffs[layout.e_offset..layout.f_offset].iter().any(|v| *v != 0.0))
            .count();
        assert_eq!(coupling, 16);
        assert_eq!(p.equalities().len(), 1 + 16);
        assert_eq!(p.blocks().len(), 3);
    }

    #[test]
    fn maximally_mixed_report_is_exact() {
        let mixed = DensityOperator::maximally_mixed(&[2, 2]).unwrap();
        let chi = DensityOperator::maximally_mixed(&[2, 2, 2]).unwrap();
        let result = ExtendibilityResult {
            lambda_max: 1.0,
            rho_star: mixed.clone(),
            sigma_ext: Some(mixed),
            rho_ne: None,
            chi: Some(chi),
            direction: Direction::Direct,
            diagnostics: SolverDiagnostics {
                status: SdpStatus::Optimal,
                objective: 0.0,
                duality_gap: 0.0,
                primal_residual: 0.0,
                dual_residual: 0.0,
                equality_residual: 0.0,
                iterations: 0,
            },
        };
        let report = verify_extension(&result).unwrap();
        assert_eq!(report.decomposition, 0.0);
        assert_eq!(report.swap, 0.0);
        assert_eq!(report.partial_trace, 0.0);
        assert_eq!(report.marginal_equality, 0.0);
        assert_eq!(report.negativity, 0.0);
        assert!(report.passes());

        let mut broken = result.clone();
        let mut m = broken.chi.as_ref().unwrap().matrix().clone();
        // |001⟩⟨001| ↔ |010⟩⟨010| asymmetry of size 1e-3
        m[(1, 1)] += crate::linalg::c(1e-3, 0.0);
        m[(2, 2)] -= crate::linalg::c(1e-3, 0.0);
        broken.chi = Some(DensityOperator::new_unchecked(m, &[2, 2, 2]).unwrap());
        let report = verify_extension(&broken).unwrap();
        assert!((report.swap - 2e-3).abs() < 1e-15 || (report.swap - 1e-3).abs() < 1e-15);
        assert!(report.swap >= 1e-3);
        assert!(!report.passes());
    }

    #[test]
    fn pure_bell_state_has_no_extendible_part() {
        let class = EquivalenceClassSpec::singleton(&bell_psi_plus(), Direction::Direct).unwrap();
        let res = best_extendible_decomposition(&class).unwrap();
        assert!(res.lambda_max < LAMBDA_TOL, "λ = {}", res.lambda_max);
        assert!(res.sigma_ext.is_none());
        let ne = res.rho_ne.as_ref().unwrap();
        assert!(max_abs_diff(ne.matrix(), bell_psi_plus().matrix()) < 1e-6);
        assert!(!is_extendible(&class).unwrap());
    }

    #[test]
    fn maximally_mixed_is_extendible() {
        let class = EquivalenceClassSpec::unconstrained((2, 2), Direction::Direct).unwrap();
        let res = best_extendible_decomposition(&class).unwrap();
        assert!(res.lambda_max > 1.0 - LAMBDA_TOL);
        assert!(res.rho_ne.is_none());
        let mixed = DensityOperator::maximally_mixed(&[2, 2]).unwrap();
        let class = EquivalenceClassSpec::singleton(&mixed, Direction::Direct).unwrap();
        assert!(is_extendible(&class).unwrap());
    }

    #[test]
    fn werner_threshold() {
        // (1 − 2e)ψ⁺ + e/2·𝟙 is two-extendible exactly for e ≥ 1/6.
        let inside = EquivalenceClassSpec::singleton(&depolarized_bell(0.2).unwrap(), Direction::Direct).unwrap();
        assert!(is_extendible(&inside).unwrap());
        let outside = EquivalenceClassSpec::singleton(&depolarized_bell(0.12).unwrap(), Direction::Direct).unwrap();
        let res = best_extendible_decomposition(&outside).unwrap();
        assert!(res.lambda_max > 0.0 && res.lambda_max < 1.0);
        let report = verify_extension(&res).unwrap();
        assert!(report.passes(), "{report:?}");
    }
}
