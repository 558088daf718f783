use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::problem::{HermitianBlock, SdpProblem};
use super::rowspace::{independent_rows, RowReduction};
use crate::error::Result;

/// Termination status of [`solve`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SdpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NumericalFailure,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SdpSettings {
    /// Relative duality gap `|p − d| / (1 + |p| + |d|)`.
    pub gap_tol: f64,
    /// Relative primal, equality and dual residuals.
    pub feas_tol: f64,
    pub max_iter: usize,
    /// Fraction of the distance to the cone boundary taken per step.
    pub step_fraction: f64,
    /// Threshold on normalized improving rays.
    pub infeasibility_tol: f64,
}

impl Default for SdpSettings {
    fn default() -> Self {
        Self {
            gap_tol: 1e-8,
            feas_tol: 1e-8,
            max_iter: 200,
            step_fraction: 0.98,
            infeasibility_tol: 1e-8,
        }
    }
}

/// Objective values and residuals at one iterate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterateRecord {
    pub iteration: usize,
    pub primal_objective: f64,
    pub dual_objective: f64,
    /// `⟨S, Z⟩` summed over blocks.
    pub complementarity: f64,
    pub primal_residual: f64,
    pub equality_residual: f64,
    pub dual_residual: f64,
}

impl IterateRecord {
    /// Primal and dual residuals both below `tol`.
    pub fn is_feasible(&self, tol: f64) -> bool {
        self.primal_residual < tol && self.equality_residual < tol && self.dual_residual < tol
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdpSolution {
    pub x: Vec<f64>,
    /// Multipliers of the equalities, in input order (zero for rows dropped
    /// as redundant).
    pub y: Vec<f64>,
    pub status: SdpStatus,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub duality_gap: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub equality_residual: f64,
    pub iterations: usize,
    pub history: Vec<IterateRecord>,
}

impl SdpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == SdpStatus::Optimal
    }
}

/// Symmetric matrix stored as a list of nonzeros (both triangles).
#[derive(Debug, Clone)]
struct SparseSym {
    entries: Vec<(usize, usize, f64)>,
}

impl SparseSym {
    fn from_dense(m: &DMatrix<f64>) -> Self {
        let mut entries = Vec::new();
        for j in 0..m.ncols() {
            for i in 0..m.nrows() {
                let v = m[(i, j)];
                if v != 0.0 {
                    entries.push((i, j, v));
                }
            }
        }
        Self { entries }
    }

    fn dot(&self, z: &DMatrix<f64>) -> f64 {
        self.entries.iter().map(|&(i, j, v)| v * z[(i, j)]).sum()
    }

    fn axpy_into(&self, alpha: f64, out: &mut DMatrix<f64>) {
        for &(i, j, v) in &self.entries {
            out[(i, j)] += alpha * v;
        }
    }
}

#[derive(Debug, Clone)]
struct RealBlock {
    n: usize,
    f0: DMatrix<f64>,
    terms: Vec<(usize, SparseSym)>,
}

pub(super) fn realify(m: &crate::linalg::CMatrix, complex: bool) -> DMatrix<f64> {
    let k = m.nrows();
    if !complex {
        return DMatrix::from_fn(k, k, |i, j| m[(i, j)].re);
    }
    let mut out = DMatrix::zeros(2 * k, 2 * k);
    for i in 0..k {
        for j in 0..k {
            let z = m[(i, j)];
            out[(i, j)] = z.re;
            out[(i + k, j + k)] = z.re;
            out[(i, j + k)] = -z.im;
            out[(i + k, j)] = z.im;
        }
    }
    out
}

impl RealBlock {
    fn from_hermitian(block: &HermitianBlock) -> Self {
        let complex = !block.is_real();
        let f0 = realify(block.constant(), complex);
        let terms = block
            .terms()
            .iter()
            .map(|(var, f)| (*var, SparseSym::from_dense(&realify(f, complex))))
            .filter(|(_, s)| !s.entries.is_empty())
            .collect();
        Self {
            n: f0.nrows(),
            f0,
            terms,
        }
    }

    fn evaluate_linear(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.n, self.n);
        for (var, f) in &self.terms {
            f.axpy_into(x[*var], &mut out);
        }
        out
    }
}

/// Real, row-reduced problem the iteration works on.
struct Model {
    n: usize,
    c: DVector<f64>,
    blocks: Vec<RealBlock>,
    a: DMatrix<f64>,
    b: DVector<f64>,
    kept_rows: Vec<usize>,
    total_equalities: usize,
}

impl Model {
    fn build(problem: &SdpProblem) -> std::result::Result<Self, usize> {
        let n = problem.num_vars();
        let rows: Vec<Vec<f64>> = problem.equalities().iter().map(|e| e.coeffs.clone()).collect();
        let rhs: Vec<f64> = problem.equalities().iter().map(|e| e.rhs).collect();
        let kept_rows = match independent_rows(&rows, &rhs, 1e-10) {
            RowReduction::Independent(k) => k,
            RowReduction::Inconsistent { row, .. } => return Err(row),
        };
        let m = kept_rows.len();
        let a = DMatrix::from_fn(m, n, |i, j| rows[kept_rows[i]][j]);
        let b = DVector::from_fn(m, |i, _| rhs[kept_rows[i]]);
        let blocks = problem.blocks().iter().map(RealBlock::from_hermitian).collect();
        Ok(Self {
            n,
            c: DVector::from_column_slice(problem.objective()),
            blocks,
            a,
            b,
            kept_rows,
            total_equalities: rows.len(),
        })
    }

    fn cone_dim(&self) -> usize {
        self.blocks.iter().map(|b| b.n).sum()
    }

    fn adjoint(&self, z: &[DMatrix<f64>]) -> DVector<f64> {
        let mut out = DVector::zeros(self.n);
        for (blk, zb) in self.blocks.iter().zip(z) {
            for (var, f) in &blk.terms {
                out[*var] += f.dot(zb);
            }
        }
        out
    }

    fn linear_map(&self, x: &DVector<f64>) -> Vec<DMatrix<f64>> {
        self.blocks.iter().map(|b| b.evaluate_linear(x)).collect()
    }

    fn schur(&self, s_inv: &[DMatrix<f64>], z: &[DMatrix<f64>]) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for ((blk, si), zb) in self.blocks.iter().zip(s_inv).zip(z) {
            let k = blk.n;
            let mut g = DMatrix::<f64>::zeros(k, k);
            for (vj, fj) in &blk.terms {
                // g = S⁻¹ Fⱼ Z
                g.fill(0.0);
                for &(a, b, v) in &fj.entries {
                    for p in 0..k {
                        let zbp = v * zb[(b, p)];
                        if zbp == 0.0 {
                            continue;
                        }
                        for q in 0..k {
                            g[(q, p)] += si[(q, a)] * zbp;
                        }
                    }
                }
                for (vi, fi) in &blk.terms {
                    let mut acc = 0.0;
                    for &(p, q, w) in &fi.entries {
                        acc += w * g[(q, p)];
                    }
                    m[(*vi, *vj)] += acc;
                }
            }
        }
        let mt = m.transpose();
        (m + mt) * 0.5
    }
}

fn frob(m: &DMatrix<f64>) -> f64 {
    m.norm()
}

fn inner(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.dot(b)
}

fn sym(m: DMatrix<f64>) -> DMatrix<f64> {
    let t = m.transpose();
    (m + t) * 0.5
}

/// Largest `α` with `x + α·d ⪰ 0`, or `None` when `x` is not positive definite.
fn max_step(x: &DMatrix<f64>, d: &DMatrix<f64>) -> Option<f64> {
    let chol = x.clone().cholesky()?;
    let l = chol.l();
    let w = l.solve_lower_triangular(d)?;
    let w = l.solve_lower_triangular(&w.transpose())?;
    let lmin = sym(w)
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    Some(if lmin < 0.0 { -1.0 / lmin } else { f64::INFINITY })
}

struct Direction {
    dx: DVector<f64>,
    dy: DVector<f64>,
    ds: Vec<DMatrix<f64>>,
    dz: Vec<DMatrix<f64>>,
}

struct Iterate {
    x: DVector<f64>,
    y: DVector<f64>,
    s: Vec<DMatrix<f64>>,
    z: Vec<DMatrix<f64>>,
}

struct Residuals {
    rp: Vec<DMatrix<f64>>,
    req: DVector<f64>,
    rd: DVector<f64>,
    primal: f64,
    equality: f64,
    dual: f64,
    pobj: f64,
    dobj: f64,
    complementarity: f64,
}

impl Model {
    fn residuals(&self, it: &Iterate) -> Residuals {
        let lin = self.linear_map(&it.x);
        let rp: Vec<DMatrix<f64>> = self
            .blocks
            .iter()
            .zip(lin)
            .zip(&it.s)
            .map(|((b, l), s)| &b.f0 + l - s)
            .collect();
        let req = &self.b - &self.a * &it.x;
        let rd = &self.c - self.adjoint(&it.z) - self.a.transpose() * &it.y;
        let f0_norm = self.blocks.iter().map(|b| frob(&b.f0).powi(2)).sum::<f64>().sqrt();
        let primal = rp.iter().map(|m| frob(m).powi(2)).sum::<f64>().sqrt() / (1.0 + f0_norm);
        let equality = req.norm() / (1.0 + self.b.norm());
        let dual = rd.norm() / (1.0 + self.c.norm());
        let pobj = self.c.dot(&it.x);
        let dobj = -self.blocks.iter().zip(&it.z).map(|(b, z)| inner(&b.f0, z)).sum::<f64>() + self.b.dot(&it.y);
        let complementarity = it.s.iter().zip(&it.z).map(|(s, z)| inner(s, z)).sum();
        Residuals {
            rp,
            req,
            rd,
            primal,
            equality,
            dual,
            pobj,
            dobj,
            complementarity,
        }
    }

    fn initial_point(&self) -> Iterate {
        let nn = self.cone_dim().max(1) as f64;
        let mut f_max: f64 = 0.0;
        let mut zeta: f64 = 0.0;
        let mut col_norm = vec![0.0f64; self.n];
        for blk in &self.blocks {
            f_max = f_max.max(frob(&blk.f0));
            for (var, f) in &blk.terms {
                let norm = f.entries.iter().map(|e| e.2 * e.2).sum::<f64>();
                col_norm[*var] += norm;
            }
        }
        for (i, cn) in col_norm.iter().enumerate() {
            let cn = cn.sqrt();
            f_max = f_max.max(cn);
            zeta = zeta.max(nn.sqrt() * (1.0 + self.c[i].abs()) / (1.0 + cn));
        }
        let xi_s = 10.0f64.max(nn.sqrt()).max(f_max);
        let xi_z = 10.0f64.max(nn.sqrt()).max(zeta);
        Iterate {
            x: DVector::zeros(self.n),
            y: DVector::zeros(self.a.nrows()),
            s: self.blocks.iter().map(|b| DMatrix::identity(b.n, b.n) * xi_s).collect(),
            z: self.blocks.iter().map(|b| DMatrix::identity(b.n, b.n) * xi_z).collect(),
        }
    }
}

enum Outcome {
    Optimal,
    Infeasible,
    Unbounded,
    Failed,
}

/// Solves the problem with an infeasible-start primal-dual path-following
/// method (HKM direction, Mehrotra predictor-corrector).
pub fn solve(problem: &SdpProblem, settings: &SdpSettings) -> Result<SdpSolution> {
    solve_inner(problem, settings, true)
}

fn solve_inner(problem: &SdpProblem, settings: &SdpSettings, classify: bool) -> Result<SdpSolution> {
    problem.validate()?;
    let model = match Model::build(problem) {
        Ok(m) => m,
        Err(_) => {
            return Ok(SdpSolution {
                x: vec![0.0; problem.num_vars()],
                y: vec![0.0; problem.equalities().len()],
                status: SdpStatus::Infeasible,
                primal_objective: f64::INFINITY,
                dual_objective: f64::INFINITY,
                duality_gap: f64::INFINITY,
                primal_residual: f64::INFINITY,
                dual_residual: f64::INFINITY,
                equality_residual: f64::INFINITY,
                iterations: 0,
                history: Vec::new(),
            })
        }
    };
    let (it, res, outcome, iterations, history) = iterate(&model, settings);

    let mut status = match outcome {
        Outcome::Optimal => SdpStatus::Optimal,
        Outcome::Infeasible => SdpStatus::Infeasible,
        Outcome::Unbounded => SdpStatus::Unbounded,
        Outcome::Failed => SdpStatus::NumericalFailure,
    };
    if status == SdpStatus::NumericalFailure && classify {
        if let Ok(phase1) = feasibility_margin(problem, settings) {
            if phase1.status == SdpStatus::Optimal && phase1.primal_objective > settings.feas_tol {
                status = SdpStatus::Infeasible;
            }
        }
    }

    let mut y_full = vec![0.0; model.total_equalities];
    for (k, &row) in model.kept_rows.iter().enumerate() {
        y_full[row] = it.y[k];
    }
    let gap = relative_gap(&res);
    Ok(SdpSolution {
        x: it.x.iter().copied().collect(),
        y: y_full,
        status,
        primal_objective: res.pobj,
        dual_objective: res.dobj,
        duality_gap: gap,
        primal_residual: res.primal,
        dual_residual: res.dual,
        equality_residual: res.equality,
        iterations,
        history,
    })
}

fn relative_gap(res: &Residuals) -> f64 {
    let denom = 1.0 + res.pobj.abs() + res.dobj.abs();
    ((res.pobj - res.dobj).abs() / denom).max(res.complementarity.abs() / denom)
}

fn iterate(model: &Model, settings: &SdpSettings) -> (Iterate, Residuals, Outcome, usize, Vec<IterateRecord>) {
    let nn = model.cone_dim().max(1) as f64;
    let m = model.a.nrows();
    let n = model.n;
    let mut it = model.initial_point();
    let mut history = Vec::new();
    let mut stalls = 0usize;

    for k in 0..=settings.max_iter {
        let res = model.residuals(&it);
        history.push(IterateRecord {
            iteration: k,
            primal_objective: res.pobj,
            dual_objective: res.dobj,
            complementarity: res.complementarity,
            primal_residual: res.primal,
            equality_residual: res.equality,
            dual_residual: res.dual,
        });

        if relative_gap(&res) < settings.gap_tol
            && res.primal < settings.feas_tol
            && res.equality < settings.feas_tol
            && res.dual < settings.feas_tol
        {
            return (it, res, Outcome::Optimal, k, history);
        }
        if let Some(outcome) = detect_ray(model, &it, &res, settings) {
            return (it, res, outcome, k, history);
        }
        if k == settings.max_iter || stalls >= 5 {
            return (it, res, Outcome::Failed, k, history);
        }

        let mu = res.complementarity / nn;
        let s_inv: Option<Vec<DMatrix<f64>>> = it.s.iter().map(|s| s.clone().cholesky().map(|c| c.inverse())).collect();
        let Some(s_inv) = s_inv else {
            return (it, res, Outcome::Failed, k, history);
        };

        let schur = model.schur(&s_inv, &it.z);
        let mut kkt = DMatrix::zeros(n + m, n + m);
        kkt.view_mut((0, 0), (n, n)).copy_from(&schur);
        kkt.view_mut((0, n), (n, m)).copy_from(&model.a.transpose());
        kkt.view_mut((n, 0), (m, n)).copy_from(&model.a);
        let lu = kkt.lu();

        // S⁻¹ Rp Z is shared by both solves.
        let rp_term: Vec<DMatrix<f64>> = s_inv
            .iter()
            .zip(&res.rp)
            .zip(&it.z)
            .map(|((si, rp), z)| si * rp * z)
            .collect();

        let solve_dir = |target: Vec<DMatrix<f64>>| -> Option<Direction> {
            // target = T = τS⁻¹ − Z − S⁻¹·corr
            let lhs: Vec<DMatrix<f64>> = target.iter().zip(&rp_term).map(|(t, r)| t - r).collect();
            let h = model.adjoint(&lhs) - &res.rd;
            let mut rhs = DVector::zeros(n + m);
            rhs.rows_mut(0, n).copy_from(&h);
            rhs.rows_mut(n, m).copy_from(&res.req);
            let u = lu.solve(&rhs)?;
            if u.iter().any(|v| !v.is_finite()) {
                return None;
            }
            let dx = u.rows(0, n).into_owned();
            let dy = -u.rows(n, m).into_owned();
            let lin = model.linear_map(&dx);
            let ds: Vec<DMatrix<f64>> = res.rp.iter().zip(lin).map(|(r, l)| r + l).collect();
            let dz: Vec<DMatrix<f64>> = target
                .into_iter()
                .zip(&s_inv)
                .zip(&ds)
                .zip(&it.z)
                .map(|(((t, si), d), z)| sym(t - si * d * z))
                .collect();
            Some(Direction { dx, dy, ds, dz })
        };

        let step_lengths = |d: &Direction| -> Option<(f64, f64)> {
            let mut ap = f64::INFINITY;
            let mut ad = f64::INFINITY;
            for (s, ds) in it.s.iter().zip(&d.ds) {
                ap = ap.min(max_step(s, ds)?);
            }
            for (z, dz) in it.z.iter().zip(&d.dz) {
                ad = ad.min(max_step(z, dz)?);
            }
            Some((ap, ad))
        };

        let predictor_target: Vec<DMatrix<f64>> = it.z.iter().map(|z| -z).collect();
        let Some(pred) = solve_dir(predictor_target) else {
            return (it, res, Outcome::Failed, k, history);
        };
        let Some((ap, ad)) = step_lengths(&pred) else {
            return (it, res, Outcome::Failed, k, history);
        };
        let (ap, ad) = (ap.min(1.0), ad.min(1.0));
        let mu_aff =
            it.s.iter()
                .zip(&pred.ds)
                .zip(it.z.iter().zip(&pred.dz))
                .map(|((s, ds), (z, dz))| inner(&(s + ds * ap), &(z + dz * ad)))
                .sum::<f64>()
                / nn;
        let sigma = if mu > 0.0 {
            (mu_aff / mu).clamp(0.0, 1.0).powi(3)
        } else {
            0.0
        };

        let corr_target: Vec<DMatrix<f64>> = s_inv
            .iter()
            .zip(&it.z)
            .zip(pred.ds.iter().zip(&pred.dz))
            .map(|((si, z), (ds, dz))| si * (sigma * mu) - z - si * (ds * dz))
            .collect();
        let Some(dir) = solve_dir(corr_target) else {
            return (it, res, Outcome::Failed, k, history);
        };
        let Some((ap, ad)) = step_lengths(&dir) else {
            return (it, res, Outcome::Failed, k, history);
        };
        let ap = (settings.step_fraction * ap).min(1.0);
        let ad = (settings.step_fraction * ad).min(1.0);

        if ap < 1e-10 && ad < 1e-10 {
            stalls += 1;
        } else {
            stalls = 0;
        }

        it.x += &dir.dx * ap;
        for (s, ds) in it.s.iter_mut().zip(&dir.ds) {
            *s = sym(&*s + ds * ap);
        }
        it.y += &dir.dy * ad;
        for (z, dz) in it.z.iter_mut().zip(&dir.dz) {
            *z = sym(&*z + dz * ad);
        }
    }
    unreachable!("loop returns at max_iter")
}

/// Normalized improving rays certifying primal or dual infeasibility.
fn detect_ray(model: &Model, it: &Iterate, res: &Residuals, settings: &SdpSettings) -> Option<Outcome> {
    let tol = settings.infeasibility_tol;
    // Primal infeasible: Z ⪰ 0 with 𝓕*(Z) + Aᵀy ≈ 0 and −⟨F₀,Z⟩ + bᵀy > 0.
    if res.dobj > 0.0 {
        let ray = &model.c - &res.rd;
        if ray.norm() / res.dobj < tol {
            return Some(Outcome::Infeasible);
        }
    }
    // Dual infeasible: 𝓕ₗ(x) ⪰ 0, A x ≈ 0, cᵀx < 0.
    if res.pobj < 0.0 {
        let scale = -res.pobj;
        let ax = &model.a * &it.x;
        if ax.norm() / scale < tol {
            let lin = model.linear_map(&it.x);
            let lmin = lin
                .into_iter()
                .map(|m| {
                    sym(m)
                        .symmetric_eigenvalues()
                        .iter()
                        .copied()
                        .fold(f64::INFINITY, f64::min)
                })
                .fold(f64::INFINITY, f64::min);
            if lmin / scale > -tol && it.x.norm() / scale < 1.0 / tol {
                return Some(Outcome::Unbounded);
            }
        }
    }
    None
}

/// Smallest uniform shift `t ≥ −1` making every block feasible:
/// `minimize t  s.t.  F⁽ᵇ⁾(x) + t·I ⪰ 0,  A x = b`.
fn feasibility_margin(problem: &SdpProblem, settings: &SdpSettings) -> Result<SdpSolution> {
    let n = problem.num_vars();
    let t = n;
    let mut aux = SdpProblem::new(n + 1);
    aux.set_objective_coeff(t, 1.0);
    for block in problem.blocks() {
        let mut b = HermitianBlock::new(block.dim()).with_constant(block.constant().clone());
        for (var, f) in block.terms() {
            b.add_term(*var, f.clone());
        }
        b.add_term(t, crate::linalg::identity(block.dim()));
        aux.add_block(b);
    }
    let mut floor = HermitianBlock::new(1).with_constant(crate::linalg::identity(1));
    floor.add_term(t, crate::linalg::identity(1));
    aux.add_block(floor);
    for eq in problem.equalities() {
        let mut coeffs = eq.coeffs.clone();
        coeffs.push(0.0);
        aux.add_equality(coeffs, eq.rhs);
    }
    solve_inner(&aux, settings, false)
}

/// Decides whether the constraint set of `problem` is nonempty; the
/// objective is ignored.
///
/// Returns `Optimal` with a feasible `x` when the smallest uniform shift
/// needed to satisfy every block is at most `feas_tol`, `Infeasible` when it
/// is larger or the equalities are inconsistent. `primal_objective` carries
/// that shift.
pub fn check_feasible(problem: &SdpProblem, settings: &SdpSettings) -> Result<SdpSolution> {
    problem.validate()?;
    let mut sol = feasibility_margin(problem, settings)?;
    if sol.status == SdpStatus::Optimal && sol.primal_objective > settings.feas_tol {
        sol.status = SdpStatus::Infeasible;
    }
    sol.x.truncate(problem.num_vars());
    Ok(sol)
}
