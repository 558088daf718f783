//! Shannon entropy and mutual information of discrete distributions, in bits.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Entries at or above this magnitude of negativity are rejected.
pub const NEGATIVITY_TOL: f64 = 1e-12;
/// Allowed deviation of the total mass from one.
pub const NORMALIZATION_TOL: f64 = 1e-9;
/// Probabilities below this are treated as zero.
pub const CLAMP: f64 = 1e-12;

fn plogp(p: f64) -> f64 {
    if !(CLAMP..1.0).contains(&p) {
        0.0
    } else {
        -p * p.log2()
    }
}

fn check_entries(values: impl Iterator<Item = f64>) -> Result<f64> {
    let mut total = 0.0;
    for p in values {
        if !p.is_finite() || p < -NEGATIVITY_TOL {
            return Err(Error::InvalidDistribution(format!(
                "entry {p} is negative or not finite"
            )));
        }
        total += p.max(0.0);
    }
    if (total - 1.0).abs() > NORMALIZATION_TOL {
        return Err(Error::InvalidDistribution(format!("total probability {total}")));
    }
    Ok(total)
}

/// `H(p) = −Σ p log₂ p`.
pub fn shannon_entropy(dist: &[f64]) -> Result<f64> {
    check_entries(dist.iter().copied())?;
    Ok(dist.iter().map(|&p| plogp(p)).sum())
}

/// Binary entropy `h(e)`.
pub fn binary_entropy(e: f64) -> f64 {
    plogp(e) + plogp(1.0 - e)
}

/// Joint distribution `p(a_i, b_j)`; rows index Alice, columns Bob.
#[derive(Debug, Clone, PartialEq)]
pub struct JointDistribution {
    probabilities: DMatrix<f64>,
}

impl JointDistribution {
    /// Clamps tiny negatives to zero after validation.
    pub fn new(probabilities: DMatrix<f64>) -> Result<Self> {
        if probabilities.is_empty() {
            return Err(Error::InvalidDistribution("empty joint distribution".into()));
        }
        check_entries(probabilities.iter().copied())?;
        Ok(Self {
            probabilities: probabilities.map(|p| p.max(0.0)),
        })
    }

    /// Rescales nonnegative weights to unit mass.
    pub fn normalized(weights: DMatrix<f64>) -> Result<Self> {
        let clamped = weights.map(|p| if p < CLAMP { 0.0 } else { p });
        let total: f64 = clamped.sum();
        if total.is_nan() || total <= 0.0 || weights.iter().any(|&p| p < -NEGATIVITY_TOL.max(1e-9)) {
            return Err(Error::InvalidDistribution(format!(
                "cannot normalize weights with total {total}"
            )));
        }
        Self::new(clamped / total)
    }

    pub fn probabilities(&self) -> &DMatrix<f64> {
        &self.probabilities
    }

    pub fn alice_marginal(&self) -> Vec<f64> {
        self.probabilities.row_iter().map(|r| r.sum()).collect()
    }

    pub fn bob_marginal(&self) -> Vec<f64> {
        self.probabilities.column_iter().map(|c| c.sum()).collect()
    }

    pub fn transpose(&self) -> Self {
        Self {
            probabilities: self.probabilities.transpose(),
        }
    }

    pub fn entropy_alice(&self) -> f64 {
        self.alice_marginal().into_iter().map(plogp).sum()
    }

    pub fn entropy_bob(&self) -> f64 {
        self.bob_marginal().into_iter().map(plogp).sum()
    }

    pub fn joint_entropy(&self) -> f64 {
        self.probabilities.iter().map(|&p| plogp(p)).sum()
    }

    /// `I(A;B) = H(A) + H(B) − H(A,B)`.
    pub fn mutual_information(&self) -> f64 {
        self.entropy_alice() + self.entropy_bob() - self.joint_entropy()
    }
}

pub fn mutual_information(joint: &JointDistribution) -> f64 {
    joint.mutual_information()
}
