#![allow(dead_code)]

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use symext::extendibility::build_sdp;
use symext::linalg::{c, min_eigenvalue, CMatrix};
use symext::sdp::{check_feasible, HermitianBlock, SdpProblem, SdpSettings, SdpStatus};
use symext::EquivalenceClassSpec;

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

pub fn random_hermitian(rng: &mut StdRng, n: usize) -> CMatrix {
    let g = CMatrix::from_fn(n, n, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    (&g + g.adjoint()).scale(0.5)
}

/// `G G† / Tr(G G†)` for a random complex `G`.
pub fn random_density(rng: &mut StdRng, n: usize) -> CMatrix {
    let g = CMatrix::from_fn(n, n, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    let m = &g * g.adjoint();
    let tr = m.trace().re;
    m.unscale(tr)
}

/// Largest `λ` for which the decomposition constraints stay feasible with
/// the extendible weight pinned to `λ`, by bisection on a feasibility
/// oracle.
pub fn lambda_by_bisection(class: &EquivalenceClassSpec, tol: f64) -> f64 {
    let (problem, layout) = build_sdp(class).unwrap();
    let feasible = |lambda: f64| {
        let mut p = problem.feasibility_version();
        p.fix_variable(layout.e(0, 0), lambda);
        check_feasible(&p, &SdpSettings::default()).unwrap().status == SdpStatus::Optimal
    };
    if feasible(1.0) {
        return 1.0;
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if feasible(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

pub fn real(m: &[f64], n: usize) -> CMatrix {
    CMatrix::from_fn(n, n, |i, j| c(m[i * n + j], 0.0))
}

/// `I + Σ xᵢ Fᵢ ⪰ 0` with random symmetric `Fᵢ`, inside the box `|xᵢ| ≤ 1`.
pub struct RandomLmi {
    pub objective: [f64; 3],
    pub terms: [CMatrix; 3],
}

impl RandomLmi {
    pub fn new(seed: u64) -> Self {
        let mut rng = rng(seed);
        let mut sym = || {
            let g: Vec<f64> = (0..16).map(|_| rng.random_range(-1.0..1.0)).collect();
            let m = real(&g, 4);
            (&m + m.transpose()).scale(0.5)
        };
        let terms = [sym(), sym(), sym()];
        let mut rng = self::rng(seed ^ 0x5eed);
        let objective = [0; 3].map(|_| rng.random_range(-1.0..1.0));
        Self { objective, terms }
    }

    pub fn problem(&self) -> SdpProblem {
        let mut p = SdpProblem::new(3);
        p.set_objective(self.objective.to_vec());
        let mut lmi = HermitianBlock::new(4).with_constant(CMatrix::identity(4, 4));
        for (i, f) in self.terms.iter().enumerate() {
            lmi.add_term(i, f.clone());
        }
        p.add_block(lmi);
        for i in 0..3 {
            for sign in [1.0, -1.0] {
                let mut b = HermitianBlock::new(1).with_constant(CMatrix::identity(1, 1));
                b.add_term(i, CMatrix::from_element(1, 1, c(sign, 0.0)));
                p.add_block(b);
            }
        }
        p
    }

    pub fn feasible(&self, x: [f64; 3]) -> bool {
        if x.iter().any(|v| v.abs() > 1.0) {
            return false;
        }
        let mut m = CMatrix::identity(4, 4);
        for (f, xi) in self.terms.iter().zip(x) {
            m += f.scale(xi);
        }
        min_eigenvalue(&m) >= 0.0
    }

    pub fn value(&self, x: [f64; 3]) -> f64 {
        self.objective.iter().zip(x).map(|(c, x)| c * x).sum()
    }

    /// Exhaustive grid over the box, then repeated finer grids around the
    /// incumbent.
    pub fn grid_minimum(&self) -> f64 {
        let mut best: Option<([f64; 3], f64)> = None;
        let mut center = [0.0; 3];
        let mut half = 1.0;
        let mut steps = 40;
        for _ in 0..10 {
            let h = 2.0 * half / steps as f64;
            for i in 0..=steps {
                for j in 0..=steps {
                    for k in 0..=steps {
                        let x = [
                            center[0] - half + i as f64 * h,
                            center[1] - half + j as f64 * h,
                            center[2] - half + k as f64 * h,
                        ];
                        if self.feasible(x) {
                            let v = self.value(x);
                            if best.is_none_or(|(_, b)| v < b) {
                                best = Some((x, v));
                            }
                        }
                    }
                }
            }
            center = best.expect("origin is feasible").0;
            half = 2.0 * h;
            steps = 16;
        }
        best.unwrap().1
    }
}
