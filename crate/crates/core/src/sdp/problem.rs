use crate::error::{Error, Result};
use crate::linalg::{hermiticity_defect, CMatrix};

/// One linear matrix inequality `F₀ + Σᵢ xᵢ Fᵢ ⪰ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianBlock {
    dim: usize,
    constant: CMatrix,
    terms: Vec<(usize, CMatrix)>,
}

impl HermitianBlock {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            constant: CMatrix::zeros(dim, dim),
            terms: Vec::new(),
        }
    }

    pub fn with_constant(mut self, f0: CMatrix) -> Self {
        self.constant = f0;
        self
    }

    /// Adds `coefficient` to the matrix multiplying variable `var`.
    pub fn add_term(&mut self, var: usize, coefficient: CMatrix) {
        if let Some((_, existing)) = self.terms.iter_mut().find(|(v, _)| *v == var) {
            *existing += coefficient;
        } else {
            self.terms.push((var, coefficient));
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn constant(&self) -> &CMatrix {
        &self.constant
    }

    pub fn terms(&self) -> &[(usize, CMatrix)] {
        &self.terms
    }

    /// `F(x)` evaluated at `x`.
    pub fn evaluate(&self, x: &[f64]) -> CMatrix {
        let mut out = self.constant.clone();
        for (var, f) in &self.terms {
            out += f.scale(x[*var]);
        }
        out
    }

    pub(crate) fn is_real(&self) -> bool {
        let real = |m: &CMatrix| m.iter().all(|z| z.im == 0.0);
        real(&self.constant) && self.terms.iter().all(|(_, f)| real(f))
    }
}

/// `a·x = b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Equality {
    pub coeffs: Vec<f64>,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdpProblem {
    num_vars: usize,
    objective: Vec<f64>,
    blocks: Vec<HermitianBlock>,
    equalities: Vec<Equality>,
}

impl SdpProblem {
    pub fn new(num_vars: usize) -> Self {
        Self {
            num_vars,
            objective: vec![0.0; num_vars],
            blocks: Vec::new(),
            equalities: Vec::new(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn blocks(&self) -> &[HermitianBlock] {
        &self.blocks
    }

    pub fn equalities(&self) -> &[Equality] {
        &self.equalities
    }

    pub fn set_objective(&mut self, c: Vec<f64>) {
        self.objective = c;
    }

    pub fn set_objective_coeff(&mut self, var: usize, value: f64) {
        self.objective[var] = value;
    }

    pub fn add_block(&mut self, block: HermitianBlock) {
        self.blocks.push(block);
    }

    pub fn add_equality(&mut self, coeffs: Vec<f64>, rhs: f64) {
        self.equalities.push(Equality { coeffs, rhs });
    }

    /// Equality `x[var] = value`.
    pub fn fix_variable(&mut self, var: usize, value: f64) {
        let mut a = vec![0.0; self.num_vars];
        a[var] = 1.0;
        self.add_equality(a, value);
    }

    /// Same problem with the objective replaced by zero.
    pub fn feasibility_version(&self) -> Self {
        let mut p = self.clone();
        p.objective = vec![0.0; self.num_vars];
        p
    }

    pub fn validate(&self) -> Result<()> {
        if self.objective.len() != self.num_vars {
            return Err(Error::MalformedProblem(format!(
                "objective has {} entries for {} variables",
                self.objective.len(),
                self.num_vars
            )));
        }
        if self.objective.iter().any(|v| !v.is_finite()) {
            return Err(Error::MalformedProblem("non-finite objective".into()));
        }
        for (bi, block) in self.blocks.iter().enumerate() {
            let check = |m: &CMatrix, what: &str| -> Result<()> {
                if m.nrows() != block.dim || m.ncols() != block.dim {
                    return Err(Error::MalformedProblem(format!(
                        "block {bi}: {what} is {}x{}, declared {}",
                        m.nrows(),
                        m.ncols(),
                        block.dim
                    )));
                }
                let scale = m.iter().map(|z| z.norm()).fold(1.0, f64::max);
                if hermiticity_defect(m) > 1e-12 * scale {
                    return Err(Error::MalformedProblem(format!("block {bi}: {what} is not Hermitian")));
                }
                Ok(())
            };
            check(&block.constant, "F0")?;
            for (var, f) in &block.terms {
                if *var >= self.num_vars {
                    return Err(Error::MalformedProblem(format!(
                        "block {bi} references variable {var} of {}",
                        self.num_vars
                    )));
                }
                check(f, &format!("F_{var}"))?;
            }
        }
        for (i, eq) in self.equalities.iter().enumerate() {
            if eq.coeffs.len() != self.num_vars {
                return Err(Error::MalformedProblem(format!(
                    "equality {i} has {} coefficients for {} variables",
                    eq.coeffs.len(),
                    self.num_vars
                )));
            }
            if !eq.rhs.is_finite() || eq.coeffs.iter().any(|v| !v.is_finite()) {
                return Err(Error::MalformedProblem(format!("equality {i} is not finite")));
            }
        }
        Ok(())
    }
}
