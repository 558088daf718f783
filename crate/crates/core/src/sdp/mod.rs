//! Dense primal-dual interior-point solver for small semidefinite programs
//! in LMI form:
//!
//! ```text
//! minimize    cᵀx
//! subject to  F⁽ᵇ⁾(x) = F₀⁽ᵇ⁾ + Σᵢ xᵢ Fᵢ⁽ᵇ⁾ ⪰ 0   for every block b
//!             aⱼ·x = bⱼ
//! ```
//!
//! Blocks are complex Hermitian; they are realified internally through
//! `H ↦ [[Re H, −Im H], [Im H, Re H]]`.

mod problem;
mod rowspace;
mod sdpa;
mod solver;

use solver::realify as solver_realify;

pub use problem::{Equality, HermitianBlock, SdpProblem};
pub use rowspace::{independent_rows, RowReduction};
pub use sdpa::write_sdpa;
pub use solver::{check_feasible, solve, IterateRecord, SdpSettings, SdpSolution, SdpStatus};
