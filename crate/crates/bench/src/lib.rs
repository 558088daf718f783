//! Fixtures shared by the benchmarks.

use symext::extendibility::build_sdp;
use symext::linalg::{c, CMatrix};
use symext::protocols::ProtocolSpec;
use symext::sdp::{HermitianBlock, SdpProblem};

/// `maximize t  s.t.  diag(1, …, n) − t·I ⪰ 0`.
pub fn min_eigenvalue_problem(n: usize) -> SdpProblem {
    let mut p = SdpProblem::new(1);
    p.set_objective(vec![-1.0]);
    let diag = CMatrix::from_fn(n, n, |i, j| if i == j { c((i + 1) as f64, 0.0) } else { c(0.0, 0.0) });
    let mut b = HermitianBlock::new(n).with_constant(diag);
    b.add_term(0, CMatrix::identity(n, n).scale(-1.0));
    p.add_block(b);
    p
}

/// Decomposition SDP for a built-in protocol at error `e`.
pub fn decomposition_problem(spec: &ProtocolSpec) -> SdpProblem {
    let class = spec.assemble().expect("valid protocol").3;
    build_sdp(&class).expect("valid class").0
}
