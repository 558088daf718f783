//! Measurement sets of the four-state and six-state protocols, observed
//! statistics, and the linear constraint set describing every bipartite
//! state compatible with those statistics.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hermitian_ops::{build_basis, flat_index, reconstruct, CoefficientVector, OperatorBasis};
use crate::linalg::{c, hermiticity_defect, max_abs_diff, min_eigenvalue, projector, trace_product, CMatrix};
use crate::quantum::{depolarized_bell, DensityOperator};
use crate::sdp::{independent_rows, RowReduction};

pub const POVM_TOL: f64 = 1e-10;
/// Rank threshold for dropping redundant constraints.
pub const DEDUP_TOL: f64 = 1e-10;

/// Which party is copied in the symmetric extension.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    /// Extension to two copies of B (Alice → Bob communication).
    #[default]
    Direct,
    /// Extension to two copies of A (Bob → Alice, reverse reconciliation).
    Reverse,
}

/// Measurement basis tag and outcome value of a POVM element.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct OutcomeLabel {
    pub basis: String,
    pub value: usize,
}

impl OutcomeLabel {
    pub fn new(basis: &str, value: usize) -> Self {
        Self {
            basis: basis.to_string(),
            value,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Povm {
    elements: Vec<CMatrix>,
    labels: Vec<OutcomeLabel>,
}

impl Povm {
    /// Checks positivity of each element and completeness.
    pub fn new(elements: Vec<CMatrix>, labels: Vec<OutcomeLabel>) -> Result<Self> {
        if elements.is_empty() {
            return Err(Error::InvalidPovm("no elements".into()));
        }
        if elements.len() != labels.len() {
            return Err(Error::InvalidPovm(format!(
                "{} elements but {} labels",
                elements.len(),
                labels.len()
            )));
        }
        let d = elements[0].nrows();
        let mut sum = CMatrix::zeros(d, d);
        for (i, e) in elements.iter().enumerate() {
            if e.nrows() != d || e.ncols() != d {
                return Err(Error::InvalidPovm(format!("element {i} has the wrong shape")));
            }
            if hermiticity_defect(e) > POVM_TOL {
                return Err(Error::InvalidPovm(format!("element {i} is not Hermitian")));
            }
            if min_eigenvalue(e) < -POVM_TOL {
                return Err(Error::InvalidPovm(format!("element {i} is not positive")));
            }
            sum += e;
        }
        let defect = max_abs_diff(&sum, &CMatrix::identity(d, d));
        if defect > POVM_TOL {
            return Err(Error::InvalidPovm(format!(
                "elements sum to identity only within {defect:.3e}"
            )));
        }
        Ok(Self { elements, labels })
    }

    pub fn dim(&self) -> usize {
        self.elements[0].nrows()
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

    pub fn labels(&self) -> &[OutcomeLabel] {
        &self.labels
    }

    /// Element-wise transpose, keeping labels.
    fn transposed(&self) -> Self {
        Self {
            elements: self.elements.iter().map(|e| e.transpose()).collect(),
            labels: self.labels.clone(),
        }
    }
}

/// Qubit eigenbasis of a Pauli operator, `+1` eigenvector first.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PauliBasis {
    X,
    Y,
    Z,
}

impl PauliBasis {
    pub fn name(self) -> &'static str {
        match self {
            PauliBasis::X => "X",
            PauliBasis::Y => "Y",
            PauliBasis::Z => "Z",
        }
    }

    fn eigenvectors(self) -> [DVector<crate::linalg::C64>; 2] {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        match self {
            PauliBasis::Z => [
                DVector::from_vec(vec![c(1.0, 0.0), c(0.0, 0.0)]),
                DVector::from_vec(vec![c(0.0, 0.0), c(1.0, 0.0)]),
            ],
            PauliBasis::X => [
                DVector::from_vec(vec![c(s, 0.0), c(s, 0.0)]),
                DVector::from_vec(vec![c(s, 0.0), c(-s, 0.0)]),
            ],
            PauliBasis::Y => [
                DVector::from_vec(vec![c(s, 0.0), c(0.0, s)]),
                DVector::from_vec(vec![c(s, 0.0), c(0.0, -s)]),
            ],
        }
    }
}

/// Scaled projectors onto the eigenbases of the given Pauli operators.
pub fn pauli_povm(bases: &[(PauliBasis, f64)]) -> Result<Povm> {
    let mut elements = Vec::new();
    let mut labels = Vec::new();
    for &(basis, weight) in bases {
        for (value, v) in basis.eigenvectors().iter().enumerate() {
            elements.push(projector(v).scale(weight));
            labels.push(OutcomeLabel::new(basis.name(), value));
        }
    }
    Povm::new(elements, labels)
}

/// Alice's POVM is the transpose of Bob's: measuring half of |ψ⁺⟩ with
/// `Aᵢ` prepares `Aᵢᵀ` on the other half, so equal labels mean agreement.
fn pauli_pair(bases: &[(PauliBasis, f64)]) -> (Povm, Povm) {
    let bob = pauli_povm(bases).expect("Pauli POVMs are complete");
    (bob.transposed(), bob)
}

/// Z and X eigenbases, each chosen with probability 1/2, for both parties.
pub fn povm_four_state() -> (Povm, Povm) {
    pauli_pair(&[(PauliBasis::Z, 0.5), (PauliBasis::X, 0.5)])
}

/// Z, X and Y eigenbases, each chosen with probability 1/3, for both parties.
pub fn povm_six_state() -> (Povm, Povm) {
    let w = 1.0 / 3.0;
    pauli_pair(&[(PauliBasis::Z, w), (PauliBasis::X, w), (PauliBasis::Y, w)])
}

/// Joint outcome probabilities `p_ij`; rows follow Alice's POVM elements,
/// columns Bob's.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservedData {
    probabilities: DMatrix<f64>,
    alice_labels: Vec<OutcomeLabel>,
    bob_labels: Vec<OutcomeLabel>,
}

impl ObservedData {
    pub fn new(
        probabilities: DMatrix<f64>,
        alice_labels: Vec<OutcomeLabel>,
        bob_labels: Vec<OutcomeLabel>,
    ) -> Result<Self> {
        if probabilities.nrows() != alice_labels.len() || probabilities.ncols() != bob_labels.len() {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} probabilities for {} x {} outcomes",
                probabilities.nrows(),
                probabilities.ncols(),
                alice_labels.len(),
                bob_labels.len()
            )));
        }
        if probabilities.iter().any(|&p| !(-1e-12..=1.0 + 1e-12).contains(&p)) {
            return Err(Error::InvalidDistribution("probability outside [0, 1]".into()));
        }
        let total: f64 = probabilities.sum();
        if !probabilities.is_empty() && (total - 1.0).abs() > POVM_TOL {
            return Err(Error::InvalidDistribution(format!("probabilities sum to {total}")));
        }
        Ok(Self {
            probabilities,
            alice_labels,
            bob_labels,
        })
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.probabilities[(i, j)]
    }

    pub fn probabilities(&self) -> &DMatrix<f64> {
        &self.probabilities
    }

    pub fn alice_labels(&self) -> &[OutcomeLabel] {
        &self.alice_labels
    }

    pub fn bob_labels(&self) -> &[OutcomeLabel] {
        &self.bob_labels
    }

    /// Pairs `(i, j)` whose outcomes belong to the same basis.
    pub fn matched_pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.alice_labels.iter().enumerate().flat_map(move |(i, a)| {
            self.bob_labels
                .iter()
                .enumerate()
                .filter(move |(_, b)| a.basis == b.basis)
                .map(move |(j, _)| (i, j))
        })
    }
}

/// Born-rule statistics `p_ij = Tr((A_i ⊗ B_j) ρ)`.
pub fn simulate_observed_data(rho: &DensityOperator, povms: &(Povm, Povm)) -> Result<ObservedData> {
    let (alice, bob) = povms;
    if rho.dims().len() != 2 || rho.dims()[0] != alice.dim() || rho.dims()[1] != bob.dim() {
        return Err(Error::DimensionMismatch(format!(
            "state dims {:?} vs POVM dims ({}, {})",
            rho.dims(),
            alice.dim(),
            bob.dim()
        )));
    }
    let mut p = DMatrix::zeros(alice.len(), bob.len());
    for (i, a) in alice.elements().iter().enumerate() {
        for (j, b) in bob.elements().iter().enumerate() {
            p[(i, j)] = trace_product(&a.kronecker(b), rho.matrix()).re;
        }
    }
    ObservedData::new(p, alice.labels().to_vec(), bob.labels().to_vec())
}

/// Fraction of matched-basis outcomes with different values.
pub fn qber(data: &ObservedData) -> Result<f64> {
    let mut matched = 0.0;
    let mut errors = 0.0;
    let mut any = false;
    for (i, j) in data.matched_pairs() {
        any = true;
        let p = data.get(i, j);
        matched += p;
        if data.alice_labels[i].value != data.bob_labels[j].value {
            errors += p;
        }
    }
    if !any || matched <= 0.0 {
        return Err(Error::InvalidParameter("no matched-basis outcomes".into()));
    }
    Ok(errors / matched)
}

/// One linear equality `Σ coeffs[kl]·r_kl = target` over bipartite
/// coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassConstraint {
    pub coeffs: Vec<f64>,
    pub target: f64,
}

/// All states `ρ` with `Tr((A_i ⊗ B_j) ρ) = p_ij`, as linear equalities on
/// the expansion coefficients `r_kl`.
///
/// For [`Direction::Reverse`] the subsystems are stored exchanged: the first
/// subsystem is always the one kept, the second the one copied.
#[derive(Debug, Clone, PartialEq)]
pub struct EquivalenceClassSpec {
    dims: (usize, usize),
    direction: Direction,
    constraints: Vec<ClassConstraint>,
}

impl EquivalenceClassSpec {
    /// Only the normalization `r_11 = 1`: every state belongs.
    pub fn unconstrained(dims: (usize, usize), direction: Direction) -> Result<Self> {
        let (da, db) = dims;
        if da < 2 || db < 2 {
            return Err(Error::InvalidDimension(format!("dims {dims:?}")));
        }
        let mut norm = vec![0.0; da * da * db * db];
        norm[0] = 1.0;
        Ok(Self {
            dims,
            direction,
            constraints: vec![ClassConstraint {
                coeffs: norm,
                target: 1.0,
            }],
        })
    }

    /// Class containing exactly `rho` (given in A ⊗ B order).
    pub fn singleton(rho: &DensityOperator, direction: Direction) -> Result<Self> {
        if rho.dims().len() != 2 {
            return Err(Error::DimensionMismatch("singleton needs a bipartite state".into()));
        }
        let dims = (rho.dims()[0], rho.dims()[1]);
        let ba = build_basis(dims.0)?;
        let bb = build_basis(dims.1)?;
        let coeffs = crate::hermitian_ops::expand(rho.matrix(), &[&ba, &bb])?;
        let len = coeffs.len();
        let rows = (0..len)
            .map(|k| {
                let mut row = vec![0.0; len];
                row[k] = 1.0;
                (row, coeffs.as_slice()[k])
            })
            .collect();
        Self::from_rows(dims, direction, rows)
    }

    /// Builds the class from rows in A ⊗ B coefficient order, applying the
    /// direction relabeling and dropping redundant rows.
    fn from_rows(dims: (usize, usize), direction: Direction, rows: Vec<(Vec<f64>, f64)>) -> Result<Self> {
        let (da, db) = dims;
        let len = da * da * db * db;
        let mut all = Vec::with_capacity(rows.len() + 1);
        let mut norm = vec![0.0; len];
        norm[0] = 1.0;
        all.push((norm, 1.0));
        all.extend(rows);

        let coeffs: Vec<Vec<f64>> = all.iter().map(|(r, _)| r.clone()).collect();
        let rhs: Vec<f64> = all.iter().map(|(_, t)| *t).collect();
        let kept = match independent_rows(&coeffs, &rhs, DEDUP_TOL) {
            RowReduction::Independent(k) => k,
            RowReduction::Inconsistent { row, residual } => {
                return Err(Error::InconsistentData(format!(
                    "constraint {row} contradicts the others by {residual:.3e}"
                )))
            }
        };
        let mut constraints: Vec<ClassConstraint> = kept
            .into_iter()
            .map(|i| ClassConstraint {
                coeffs: all[i].0.clone(),
                target: all[i].1,
            })
            .collect();
        let stored_dims = match direction {
            Direction::Direct => dims,
            Direction::Reverse => {
                for con in &mut constraints {
                    con.coeffs = swap_coefficient_order(&con.coeffs, dims);
                }
                (db, da)
            }
        };
        Ok(Self {
            dims: stored_dims,
            direction,
            constraints,
        })
    }

    /// `(kept, copied)` local dimensions.
    pub fn dims(&self) -> (usize, usize) {
        self.dims
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn constraints(&self) -> &[ClassConstraint] {
        &self.constraints
    }

    pub fn num_coefficients(&self) -> usize {
        let (a, b) = self.dims;
        a * a * b * b
    }

    /// Number of independent constraints, normalization included.
    pub fn rank(&self) -> usize {
        self.constraints.len()
    }

    /// Whether the coefficient with multi-index `(k, l)` (stored order) is
    /// determined by the constraints alone.
    pub fn determines(&self, k: usize, l: usize) -> bool {
        let (a, b) = self.dims;
        let idx = flat_index(&[a, b], &[k, l]);
        let mut rows: Vec<Vec<f64>> = self.constraints.iter().map(|c| c.coeffs.clone()).collect();
        let mut unit = vec![0.0; self.num_coefficients()];
        unit[idx] = 1.0;
        rows.push(unit);
        let rhs = vec![0.0; rows.len()];
        match independent_rows(&rows, &rhs, DEDUP_TOL) {
            RowReduction::Independent(kept) => kept.len() == self.rank(),
            RowReduction::Inconsistent { .. } => true,
        }
    }

    /// Largest constraint violation of a state given in stored order.
    pub fn violation(&self, rho: &CMatrix) -> Result<f64> {
        let (a, b) = self.dims;
        let ba = build_basis(a)?;
        let bb = build_basis(b)?;
        let r = crate::hermitian_ops::expand(rho, &[&ba, &bb])?;
        Ok(self
            .constraints
            .iter()
            .map(|con| {
                let lhs: f64 = con.coeffs.iter().zip(r.as_slice()).map(|(x, y)| x * y).sum();
                (lhs - con.target).abs()
            })
            .fold(0.0, f64::max))
    }

    /// The unique compatible operator when the constraints fix every
    /// coefficient (stored order), otherwise `None`.
    pub fn unique_state(&self) -> Result<Option<CMatrix>> {
        let n = self.num_coefficients();
        if self.rank() < n {
            return Ok(None);
        }
        let a = DMatrix::from_fn(n, n, |i, j| self.constraints[i].coeffs[j]);
        let b = DVector::from_fn(n, |i, _| self.constraints[i].target);
        let Some(r) = a.lu().solve(&b) else {
            return Ok(None);
        };
        let (da, db) = self.dims;
        let cv = CoefficientVector::from_vec(&[da, db], r.iter().copied().collect())?;
        let ba = build_basis(da)?;
        let bb = build_basis(db)?;
        Ok(Some(reconstruct(&cv, &[&ba, &bb])?))
    }
}

/// Maps coefficients indexed `(k, l)` over dims `(a, b)` to `(l, k)` over
/// `(b, a)`.
pub(crate) fn swap_coefficient_order(coeffs: &[f64], dims: (usize, usize)) -> Vec<f64> {
    let (a, b) = dims;
    let mut out = vec![0.0; coeffs.len()];
    for k in 0..a * a {
        for l in 0..b * b {
            out[flat_index(&[b, a], &[l, k])] = coeffs[flat_index(&[a, b], &[k, l])];
        }
    }
    out
}

/// Custom protocols loaded from JSON.
#[derive(Debug, Clone, PartialEq)]
pub struct CustomProtocol {
    pub povms: (Povm, Povm),
    pub data: ObservedData,
    pub direction: Direction,
    pub source_constraint: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProtocolName {
    FourState,
    SixState,
    Custom,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProtocolKind {
    FourState,
    SixState,
    Custom(Box<CustomProtocol>),
}

/// A protocol instance: measurement sets, channel error `e` (ignored for
/// custom data), direction, and whether Alice's reduced state is pinned to
/// `𝟙/d_A` as in prepare-and-measure implementations.
#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolSpec {
    pub kind: ProtocolKind,
    pub error: f64,
    pub source_constraint: bool,
    pub direction: Direction,
}

impl ProtocolSpec {
    pub fn four_state(e: f64) -> Self {
        Self {
            kind: ProtocolKind::FourState,
            error: e,
            source_constraint: true,
            direction: Direction::Direct,
        }
    }

    pub fn six_state(e: f64) -> Self {
        Self {
            kind: ProtocolKind::SixState,
            error: e,
            source_constraint: true,
            direction: Direction::Direct,
        }
    }

    pub fn custom(protocol: CustomProtocol) -> Self {
        Self {
            error: f64::NAN,
            source_constraint: protocol.source_constraint,
            direction: protocol.direction,
            kind: ProtocolKind::Custom(Box::new(protocol)),
        }
    }

    /// Built-in protocol by name.
    pub fn named(name: ProtocolName, e: f64) -> Result<Self> {
        match name {
            ProtocolName::FourState => Ok(Self::four_state(e)),
            ProtocolName::SixState => Ok(Self::six_state(e)),
            ProtocolName::Custom => Err(Error::InvalidParameter(
                "custom protocols are loaded from a file".into(),
            )),
        }
    }

    pub fn with_error(mut self, e: f64) -> Self {
        self.error = e;
        self
    }

    pub fn with_source_constraint(mut self, on: bool) -> Self {
        self.source_constraint = on;
        self
    }

    pub fn with_direction(mut self, direction: Direction) -> Self {
        self.direction = direction;
        self
    }

    pub fn name(&self) -> ProtocolName {
        match self.kind {
            ProtocolKind::FourState => ProtocolName::FourState,
            ProtocolKind::SixState => ProtocolName::SixState,
            ProtocolKind::Custom(_) => ProtocolName::Custom,
        }
    }

    pub fn povms(&self) -> (Povm, Povm) {
        match &self.kind {
            ProtocolKind::FourState => povm_four_state(),
            ProtocolKind::SixState => povm_six_state(),
            ProtocolKind::Custom(c) => c.povms.clone(),
        }
    }

    /// Statistics of the depolarized Bell state, or the loaded data.
    pub fn observed_data(&self) -> Result<ObservedData> {
        match &self.kind {
            ProtocolKind::Custom(c) => Ok(c.data.clone()),
            _ => simulate_observed_data(&depolarized_bell(self.error)?, &self.povms()),
        }
    }

    /// POVMs, data and class in one go.
    pub fn assemble(&self) -> Result<(Povm, Povm, ObservedData, EquivalenceClassSpec)> {
        let povms = self.povms();
        let data = self.observed_data()?;
        let class = assemble_class(&povms, &data, self)?;
        Ok((povms.0, povms.1, data, class))
    }
}

/// Linear constraints `Σ_kl Tr(A_i S_k) Tr(B_j S_l) r_kl / d = p_ij`, the
/// normalization, and, with the source constraint, `r_k1 = Tr(S_k 𝟙/d_A)`.
pub fn assemble_class(povms: &(Povm, Povm), data: &ObservedData, spec: &ProtocolSpec) -> Result<EquivalenceClassSpec> {
    let (alice, bob) = povms;
    let (da, db) = (alice.dim(), bob.dim());
    if data.probabilities.nrows() != alice.len() || data.probabilities.ncols() != bob.len() {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} data for POVMs with {} and {} outcomes",
            data.probabilities.nrows(),
            data.probabilities.ncols(),
            alice.len(),
            bob.len()
        )));
    }
    let ba = build_basis(da)?;
    let bb = build_basis(db)?;
    let proj = |povm: &Povm, basis: &OperatorBasis| -> Vec<Vec<f64>> {
        povm.elements()
            .iter()
            .map(|e| basis.elements().iter().map(|s| trace_product(e, s).re).collect())
            .collect()
    };
    let a_coef = proj(alice, &ba);
    let b_coef = proj(bob, &bb);
    let d = (da * db) as f64;

    let mut rows = Vec::new();
    for (i, ai) in a_coef.iter().enumerate() {
        for (j, bj) in b_coef.iter().enumerate() {
            let mut row = Vec::with_capacity(ai.len() * bj.len());
            for ak in ai {
                for bl in bj {
                    row.push(ak * bl / d);
                }
            }
            rows.push((row, data.get(i, j)));
        }
    }
    if spec.source_constraint {
        let len = da * da * db * db;
        for k in 1..da * da {
            let mut row = vec![0.0; len];
            row[flat_index(&[da, db], &[k, 0])] = 1.0;
            rows.push((row, 0.0));
        }
    }
    EquivalenceClassSpec::from_rows((da, db), spec.direction, rows)
}

#[derive(Debug, Serialize, Deserialize)]
struct PovmElementFile {
    basis: String,
    value: usize,
    re: Vec<Vec<f64>>,
    #[serde(default)]
    im: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CustomProtocolFile {
    dims: [usize; 2],
    #[serde(default)]
    direction: Direction,
    #[serde(default)]
    source_constraint: bool,
    alice_povm: Vec<PovmElementFile>,
    bob_povm: Vec<PovmElementFile>,
    probabilities: Vec<Vec<f64>>,
}

fn element_matrix(e: &PovmElementFile, d: usize) -> Result<CMatrix> {
    let shape_ok = |m: &Vec<Vec<f64>>| m.len() == d && m.iter().all(|r| r.len() == d);
    if !shape_ok(&e.re) || e.im.as_ref().is_some_and(|m| !shape_ok(m)) {
        return Err(Error::ProtocolFile(format!(
            "POVM element ({}, {}) is not {d}x{d}",
            e.basis, e.value
        )));
    }
    Ok(CMatrix::from_fn(d, d, |i, j| {
        c(e.re[i][j], e.im.as_ref().map_or(0.0, |m| m[i][j]))
    }))
}

impl CustomProtocol {
    pub fn from_json(text: &str) -> Result<Self> {
        let file: CustomProtocolFile = serde_json::from_str(text).map_err(|e| Error::ProtocolFile(e.to_string()))?;
        let [da, db] = file.dims;
        if da < 2 || db < 2 {
            return Err(Error::InvalidDimension(format!("dims [{da}, {db}]")));
        }
        let build = |elems: &[PovmElementFile], d: usize| -> Result<Povm> {
            let matrices = elems.iter().map(|e| element_matrix(e, d)).collect::<Result<Vec<_>>>()?;
            let labels = elems.iter().map(|e| OutcomeLabel::new(&e.basis, e.value)).collect();
            Povm::new(matrices, labels)
        };
        let alice = build(&file.alice_povm, da)?;
        let bob = build(&file.bob_povm, db)?;
        let rows = file.probabilities.len();
        if rows != alice.len() || file.probabilities.iter().any(|r| r.len() != bob.len()) {
            return Err(Error::ProtocolFile(format!(
                "probabilities must be {} x {}",
                alice.len(),
                bob.len()
            )));
        }
        let p = DMatrix::from_fn(alice.len(), bob.len(), |i, j| file.probabilities[i][j]);
        let data = ObservedData::new(p, alice.labels().to_vec(), bob.labels().to_vec())?;
        Ok(Self {
            povms: (alice, bob),
            data,
            direction: file.direction,
            source_constraint: file.source_constraint,
        })
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::ProtocolFile(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        let encode = |p: &Povm| -> Vec<PovmElementFile> {
            p.elements()
                .iter()
                .zip(p.labels())
                .map(|(m, l)| PovmElementFile {
                    basis: l.basis.clone(),
                    value: l.value,
                    re: m.row_iter().map(|r| r.iter().map(|z| z.re).collect()).collect(),
                    im: Some(m.row_iter().map(|r| r.iter().map(|z| z.im).collect()).collect()),
                })
                .collect()
        };
        let file = CustomProtocolFile {
            dims: [self.povms.0.dim(), self.povms.1.dim()],
            direction: self.direction,
            source_constraint: self.source_constraint,
            alice_povm: encode(&self.povms.0),
            bob_povm: encode(&self.povms.1),
            probabilities: self
                .data
                .probabilities()
                .row_iter()
                .map(|r| r.iter().copied().collect())
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("serializable")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::bell_psi_plus;

    #[test]
    fn builtin_povms_are_complete() {
        for (a, b) in [povm_four_state(), povm_six_state()] {
            for p in [&a, &b] {
                let sum = p.elements().iter().fold(CMatrix::zeros(2, 2), |acc, e| acc + e);
                assert!(max_abs_diff(&sum, &CMatrix::identity(2, 2)) < 1e-12);
            }
        }
        let (_, bob) = povm_four_state();
        for e in bob.elements() {
            let ev = crate::linalg::eigenvalues(e);
            assert!(ev[0].abs() < 1e-12 && (ev[1] - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn six_state_elements_span_hermitian_space() {
        let (_, bob) = povm_six_state();
        let rows: Vec<Vec<f64>> = bob
            .elements()
            .iter()
            .map(|e| e.iter().flat_map(|z| [z.re, z.im]).collect())
            .collect();
        let rhs = vec![0.0; rows.len()];
        let RowReduction::Independent(kept) = independent_rows(&rows, &rhs, 1e-10) else {
            panic!()
        };
        assert_eq!(kept.len(), 4);
    }

    #[test]
    fn povm_validation() {
        let half = CMatrix::identity(2, 2).scale(0.5);
        assert!(Povm::new(vec![half.clone()], vec![OutcomeLabel::new("Z", 0)]).is_err());
        let mut neg = CMatrix::identity(2, 2);
        neg[(1, 1)] = c(-0.5, 0.0);
        let comp = CMatrix::identity(2, 2) - &neg;
        assert!(Povm::new(
            vec![neg, comp],
            vec![OutcomeLabel::new("Z", 0), OutcomeLabel::new("Z", 1)]
        )
        .is_err());
    }

    #[test]
    fn mixed_state_gives_uniform_statistics() {
        let rho = DensityOperator::maximally_mixed(&[2, 2]).unwrap();
        let data = simulate_observed_data(&rho, &povm_four_state()).unwrap();
        for p in data.probabilities().iter() {
            assert!((p - 1.0 / 16.0).abs() < 1e-15);
        }
        assert!((qber(&data).unwrap() - 0.5).abs() < 1e-14);
    }

    #[test]
    fn bell_state_statistics() {
        let data = simulate_observed_data(&bell_psi_plus(), &povm_six_state()).unwrap();
        assert!(qber(&data).unwrap().abs() < 1e-15);
        // Z (rows 0,1) against X (cols 2,3): uniform over the four outcomes.
        let block = data.probabilities().view((0, 2), (2, 2));
        for p in block.iter() {
            assert!((p - 1.0 / 36.0).abs() < 1e-15);
        }
        let up = DensityOperator::new(
            CMatrix::from_fn(4, 4, |i, j| c(if i == 0 && j == 0 { 1.0 } else { 0.0 }, 0.0)),
            &[2, 2],
        )
        .unwrap();
        let data = simulate_observed_data(&up, &povm_six_state()).unwrap();
        let bob_z: Vec<f64> = (0..2).map(|j| data.probabilities().column(j).sum()).collect();
        assert!((bob_z[0] - 1.0 / 3.0).abs() < 1e-15 && bob_z[1].abs() < 1e-15);
    }

    #[test]
    fn qber_equals_channel_error() {
        for e in [0.0, 0.05, 0.1, 0.146, 0.25] {
            for povms in [povm_four_state(), povm_six_state()] {
                let data = simulate_observed_data(&depolarized_bell(e).unwrap(), &povms).unwrap();
                assert!((qber(&data).unwrap() - e).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn qber_requires_matched_outcomes() {
        let p = DMatrix::from_row_slice(1, 1, &[1.0]);
        let data = ObservedData::new(p, vec![OutcomeLabel::new("Z", 0)], vec![OutcomeLabel::new("X", 0)]).unwrap();
        assert!(qber(&data).is_err());
    }

    #[test]
    fn six_state_class_is_a_singleton() {
        for e in [0.0, 0.1, 0.2] {
            let spec = ProtocolSpec::six_state(e).with_source_constraint(false);
            let (_, _, _, class) = spec.assemble().unwrap();
            assert_eq!(class.rank(), 16);
            let rho = class.unique_state().unwrap().unwrap();
            assert!(max_abs_diff(&rho, depolarized_bell(e).unwrap().matrix()) < 1e-10);
        }
    }

    #[test]
    fn four_state_leaves_y_correlations_free() {
        let y = 2;
        for (flag, rank) in [(false, 9), (true, 10)] {
            let spec = ProtocolSpec::four_state(0.1).with_source_constraint(flag);
            let (_, _, _, class) = spec.assemble().unwrap();
            assert_eq!(class.rank(), rank);
            for k in 0..4 {
                for l in 0..4 {
                    let free = (k == y || l == y) && !(flag && k == y && l == 0);
                    assert_eq!(class.determines(k, l), !free, "flag={flag} ({k},{l})");
                }
            }
            assert!(class.unique_state().unwrap().is_none());
        }
    }

    #[test]
    fn inconsistent_data_rejected() {
        let (a, b) = povm_four_state();
        let mut p = DMatrix::zeros(4, 4);
        // Perfect Z agreement and perfect Z disagreement cannot coexist with
        // X statistics claiming certainty in both bases for one outcome.
        p[(0, 0)] = 0.5;
        p[(2, 2)] = 0.5;
        p[(0, 2)] = 0.0;
        let data = ObservedData::new(p, a.labels().to_vec(), b.labels().to_vec()).unwrap();
        let spec = ProtocolSpec::four_state(0.0).with_source_constraint(true);
        assert!(matches!(
            assemble_class(&(a, b), &data, &spec),
            Err(Error::InconsistentData(_))
        ));
    }

    #[test]
    fn reverse_direction_swaps_coefficients() {
        let spec = ProtocolSpec::four_state(0.1).with_source_constraint(true);
        let direct = spec.assemble().unwrap().3;
        let reverse = spec.clone().with_direction(Direction::Reverse).assemble().unwrap().3;
        assert_eq!(reverse.direction(), Direction::Reverse);
        // Alice's Y marginal (Y,1) is pinned; after relabeling it is (1,Y).
        assert!(direct.determines(2, 0) && !direct.determines(0, 2));
        assert!(reverse.determines(0, 2) && !reverse.determines(2, 0));
    }

    #[test]
    fn custom_json_round_trip() {
        let (a, b) = povm_four_state();
        let data = simulate_observed_data(&depolarized_bell(0.07).unwrap(), &(a.clone(), b.clone())).unwrap();
        let custom = CustomProtocol {
            povms: (a, b),
            data,
            direction: Direction::Reverse,
            source_constraint: true,
        };
        let back = CustomProtocol::from_json(&custom.to_json()).unwrap();
        assert_eq!(back.direction, Direction::Reverse);
        assert!(back.source_constraint);
        assert!(max_abs_diff(&back.povms.1.elements()[3], &custom.povms.1.elements()[3]) == 0.0);
        assert!((qber(&back.data).unwrap() - 0.07).abs() < 1e-12);
        assert!(CustomProtocol::from_json("{\"dims\": [2, 2]}").is_err());
    }
}
