//! `K_→ ≤ (1 − λ_max) · I^ne(A;B)`: the decomposition, re-measurement of the
//! non-extendible part, and the resulting bound, plus sweeps over the
//! channel error and the search for the point where the bound vanishes.

use std::collections::BTreeSet;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::extendibility::{best_extendible_decomposition_with, ExtendibilityResult, LAMBDA_TOL};
use crate::infotheory::JointDistribution;
use crate::protocols::{qber, simulate_observed_data, ObservedData, ProtocolSpec};
use crate::sdp::SdpSettings;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "message")]
pub enum PointStatus {
    Ok,
    Failed(String),
}

impl PointStatus {
    pub fn label(&self) -> &'static str {
        match self {
            PointStatus::Ok => "ok",
            PointStatus::Failed(_) => "failed",
        }
    }
}

/// One evaluated point of the bound.
///
/// `mutual_info_ne` is the mutual information of `ρ_ne` on matched-basis
/// outcomes, conditioned on the announced basis; `mutual_info_ne_full` uses
/// every joint outcome of the full POVMs. `raw_mutual_info` is the
/// matched-basis value for the observed data themselves.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundPoint {
    pub e: f64,
    pub qber: f64,
    pub lambda_max: f64,
    pub mutual_info_ne: f64,
    pub upper_bound: f64,
    pub mutual_info_ne_full: f64,
    pub upper_bound_full: f64,
    pub raw_mutual_info: f64,
    pub duality_gap: f64,
    pub iterations: usize,
    pub status: PointStatus,
}

impl BoundPoint {
    fn failed(e: f64, qber: f64, raw: f64, message: String) -> Self {
        Self {
            e,
            qber,
            lambda_max: f64::NAN,
            mutual_info_ne: f64::NAN,
            upper_bound: f64::NAN,
            mutual_info_ne_full: f64::NAN,
            upper_bound_full: f64::NAN,
            raw_mutual_info: raw,
            duality_gap: f64::NAN,
            iterations: 0,
            status: PointStatus::Failed(message),
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status == PointStatus::Ok
    }
}

/// `Σ_b w_b I(A;B | basis b) / Σ_b w_b` over bases measured by both sides.
pub fn matched_basis_information(data: &ObservedData) -> Result<f64> {
    let alice_bases: BTreeSet<&str> = data.alice_labels().iter().map(|l| l.basis.as_str()).collect();
    let mut total_weight = 0.0;
    let mut acc = 0.0;
    for basis in alice_bases {
        let rows: Vec<usize> = (0..data.alice_labels().len())
            .filter(|&i| data.alice_labels()[i].basis == basis)
            .collect();
        let cols: Vec<usize> = (0..data.bob_labels().len())
            .filter(|&j| data.bob_labels()[j].basis == basis)
            .collect();
        if cols.is_empty() {
            continue;
        }
        let block = DMatrix::from_fn(rows.len(), cols.len(), |i, j| data.get(rows[i], cols[j]));
        let weight: f64 = block.iter().map(|p| p.max(0.0)).sum();
        if weight <= 0.0 {
            continue;
        }
        acc += weight * JointDistribution::normalized(block)?.mutual_information();
        total_weight += weight;
    }
    if total_weight <= 0.0 {
        return Err(Error::InvalidParameter("no matched-basis outcomes".into()));
    }
    Ok(acc / total_weight)
}

/// Mutual information over all joint outcomes.
pub fn full_information(data: &ObservedData) -> Result<f64> {
    Ok(JointDistribution::normalized(data.probabilities().clone())?.mutual_information())
}

/// Runs the whole pipeline for one protocol instance with default settings.
pub fn one_way_upper_bound(protocol: &ProtocolSpec) -> Result<BoundPoint> {
    one_way_upper_bound_with(protocol, &SdpSettings::default())
}

/// Invalid input is an error; solver trouble yields a point marked failed.
pub fn one_way_upper_bound_with(protocol: &ProtocolSpec, settings: &SdpSettings) -> Result<BoundPoint> {
    let (alice, bob, data, class) = protocol.assemble()?;
    let observed_qber = qber(&data).unwrap_or(f64::NAN);
    let raw = matched_basis_information(&data).unwrap_or(f64::NAN);
    let e = protocol.error;

    let result = match best_extendible_decomposition_with(&class, settings) {
        Ok(r) => r,
        Err(err @ Error::Solver { .. }) => {
            return Ok(BoundPoint::failed(e, observed_qber, raw, err.to_string()));
        }
        Err(err) => return Err(err),
    };
    let (mi, mi_full) = non_extendible_information(&result, &(alice, bob))?;
    let weight = 1.0 - result.lambda_max;
    let (upper_bound, upper_bound_full) = if result.rho_ne.is_none() {
        (0.0, 0.0)
    } else {
        (weight * mi, weight * mi_full)
    };
    Ok(BoundPoint {
        e,
        qber: observed_qber,
        lambda_max: result.lambda_max,
        mutual_info_ne: mi,
        upper_bound,
        mutual_info_ne_full: mi_full,
        upper_bound_full,
        raw_mutual_info: raw,
        duality_gap: result.diagnostics.duality_gap,
        iterations: result.diagnostics.iterations,
        status: PointStatus::Ok,
    })
}

/// `(matched-basis, full-POVM)` mutual information of `ρ_ne`; zero when
/// there is no non-extendible part.
pub fn non_extendible_information(
    result: &ExtendibilityResult,
    povms: &(crate::protocols::Povm, crate::protocols::Povm),
) -> Result<(f64, f64)> {
    let Some(rho_ne) = &result.rho_ne else {
        return Ok((0.0, 0.0));
    };
    // Unit trace; eigenvalues may dip below zero at the 1e-9 level.
    let data = simulate_unchecked(rho_ne, povms)?;
    Ok((matched_basis_information(&data)?, full_information(&data)?))
}

fn simulate_unchecked(
    rho: &crate::quantum::DensityOperator,
    povms: &(crate::protocols::Povm, crate::protocols::Povm),
) -> Result<ObservedData> {
    let clamped = simulate_observed_data(rho, povms);
    match clamped {
        Ok(d) => Ok(d),
        Err(Error::InvalidDistribution(_)) => {
            let (a, b) = povms;
            let p = DMatrix::from_fn(a.len(), b.len(), |i, j| {
                rho.expectation(&a.elements()[i].kronecker(&b.elements()[j])).max(0.0)
            });
            let p = &p / p.sum();
            ObservedData::new(p, a.labels().to_vec(), b.labels().to_vec())
        }
        Err(e) => Err(e),
    }
}

/// Evaluates the bound at every grid value; points run in parallel and come
/// back in grid order. Per-point failures are recorded, not raised.
pub fn sweep(template: &ProtocolSpec, grid: &[f64]) -> Vec<BoundPoint> {
    sweep_with(template, grid, &SdpSettings::default())
}

pub fn sweep_with(template: &ProtocolSpec, grid: &[f64], settings: &SdpSettings) -> Vec<BoundPoint> {
    grid.par_iter()
        .map(|&e| {
            let spec = template.clone().with_error(e);
            one_way_upper_bound_with(&spec, settings)
                .unwrap_or_else(|err| BoundPoint::failed(e, f64::NAN, f64::NAN, err.to_string()))
        })
        .collect()
}

/// Threshold on `e` located by bisection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Cutoff {
    /// Midpoint of the final bracket.
    pub value: f64,
    /// Largest `e` known to be non-extendible.
    pub lower: f64,
    /// Smallest `e` known to be extendible.
    pub upper: f64,
    pub iterations: usize,
}

pub const CUTOFF_BRACKET: (f64, f64) = (0.0, 0.25);

/// Bisection on `e ∈ [0, 0.25]` for `λ_max ≥ 1 − 1e-6`.
pub fn find_cutoff(template: &ProtocolSpec, tolerance: f64) -> Result<Cutoff> {
    find_cutoff_in(template, tolerance, CUTOFF_BRACKET, &SdpSettings::default())
}

pub fn find_cutoff_in(
    template: &ProtocolSpec,
    tolerance: f64,
    bracket: (f64, f64),
    settings: &SdpSettings,
) -> Result<Cutoff> {
    if tolerance.is_nan() || tolerance <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "tolerance {tolerance} must be positive"
        )));
    }
    let extendible = |e: f64| -> Result<bool> {
        let class = template.clone().with_error(e).assemble()?.3;
        Ok(best_extendible_decomposition_with(&class, settings)?.lambda_max >= 1.0 - LAMBDA_TOL)
    };
    let (mut lo, mut hi) = bracket;
    if extendible(lo)? || !extendible(hi)? {
        return Err(Error::NotBracketed { lo, hi });
    }
    let mut iterations = 0;
    while hi - lo > 2.0 * tolerance {
        let mid = 0.5 * (lo + hi);
        if extendible(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
        iterations += 1;
    }
    Ok(Cutoff {
        value: 0.5 * (lo + hi),
        lower: lo,
        upper: hi,
        iterations,
    })
}
