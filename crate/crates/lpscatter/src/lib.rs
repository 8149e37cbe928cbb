//! Lyapunov operators, Hardy projections and resonance bounds on discretized energy grids.
//!
//! States live in the outgoing energy representation on a quadrature grid.
//! Operators act on weighted samples `sqrt(w_i) * psi(E_i)`, so the discrete
//! inner product is the plain Euclidean one and self-adjoint operators are
//! Hermitian matrices.
//!
//! Hardy-class convention: a function analytic and square integrable in the
//! upper half plane (for example `1/(E - mu)` with `Im mu < 0`) belongs to the
//! range of `P_plus`. With evolution `exp(-iEt)` this makes `P_plus U(t) P_minus`
//! vanish for `t >= 0`.

pub mod closed_form;
pub mod error;
pub mod evolution;
pub mod grid;
pub mod hardy;
pub mod lyapunov;
pub mod operator;
pub mod packets;
pub mod resonance;
pub mod smatrix;
pub mod cli;

pub use error::{Error, Result};
pub use faer::c64;
