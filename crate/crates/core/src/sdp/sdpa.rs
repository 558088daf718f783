//! Sparse SDPA (`.dat-s`) export for cross-checking with external solvers.
//!
//! Layout, one item per line:
//!
//! 1. `"` comment line;
//! 2. number of variables `m`;
//! 3. number of blocks;
//! 4. block sizes separated by single spaces: realified LMI blocks in input
//!    order, then `-2k` for a diagonal block holding the `k` equalities;
//! 5. the objective `c₁ … c_m`;
//! 6. entries `matno blkno i j value`, 1-based, upper triangle `i ≤ j`,
//!    sorted by `matno` (0 = constant), then block, then `i`, then `j`.
//!
//! SDPA's convention is `Σ Fᵢ xᵢ − F₀ ⪰ 0`, so the constant matrix is
//! written negated. Each equality `a·x = b` becomes the diagonal pair
//! `a·x − b ≥ 0`, `−a·x + b ≥ 0`. Values use Rust's shortest round-trip
//! float formatting.

use std::fmt::Write;

use nalgebra::DMatrix;

use super::problem::SdpProblem;
use super::solver_realify;
use crate::error::Result;

/// Constant matrix and `(variable, coefficient)` terms of one block.
type RealifiedBlock = (DMatrix<f64>, Vec<(usize, DMatrix<f64>)>);

pub fn write_sdpa(problem: &SdpProblem) -> Result<String> {
    problem.validate()?;
    let m = problem.num_vars();
    let realified: Vec<RealifiedBlock> = problem
        .blocks()
        .iter()
        .map(|b| {
            let complex = !b.is_real();
            let f0 = solver_realify(b.constant(), complex);
            let terms = b
                .terms()
                .iter()
                .map(|(v, f)| (*v, solver_realify(f, complex)))
                .collect();
            (f0, terms)
        })
        .collect();
    let eqs = problem.equalities();
    let n_blocks = realified.len() + usize::from(!eqs.is_empty());

    let mut out = String::new();
    writeln!(out, "\"symext SDP export").unwrap();
    writeln!(out, "{m}").unwrap();
    writeln!(out, "{n_blocks}").unwrap();
    let mut sizes: Vec<String> = realified.iter().map(|(f0, _)| f0.nrows().to_string()).collect();
    if !eqs.is_empty() {
        sizes.push(format!("-{}", 2 * eqs.len()));
    }
    writeln!(out, "{}", sizes.join(" ")).unwrap();
    let c: Vec<String> = problem.objective().iter().map(|v| format!("{v}")).collect();
    writeln!(out, "{}", c.join(" ")).unwrap();

    for matno in 0..=m {
        for (bi, (f0, terms)) in realified.iter().enumerate() {
            let mat = if matno == 0 {
                Some(-f0)
            } else {
                let mut acc: Option<DMatrix<f64>> = None;
                for (_, f) in terms.iter().filter(|(v, _)| *v + 1 == matno) {
                    acc = Some(match acc {
                        Some(a) => a + f,
                        None => f.clone(),
                    });
                }
                acc
            };
            if let Some(mat) = mat {
                for i in 0..mat.nrows() {
                    for j in i..mat.ncols() {
                        let v = mat[(i, j)];
                        if v != 0.0 {
                            writeln!(out, "{matno} {} {} {} {v}", bi + 1, i + 1, j + 1).unwrap();
                        }
                    }
                }
            }
        }
        if !eqs.is_empty() {
            let blk = realified.len() + 1;
            for (k, eq) in eqs.iter().enumerate() {
                let v = if matno == 0 { eq.rhs } else { eq.coeffs[matno - 1] };
                if v != 0.0 {
                    writeln!(out, "{matno} {blk} {} {} {v}", 2 * k + 1, 2 * k + 1).unwrap();
                    writeln!(out, "{matno} {blk} {} {} {}", 2 * k + 2, 2 * k + 2, -v).unwrap();
                }
            }
        }
    }
    Ok(out)
}
