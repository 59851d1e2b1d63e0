//! Design and certification of structured majorizing matrices.
//!
//! Given a Hermitian PSD `H` and a fixed operator `K`, [`design::design`] finds a
//! nonnegative diagonal `d` so that `M = alpha K^H diag(d) K` majorizes `H`
//! (`M - H` is PSD) with `d` as small as possible in a weighted norm. The dual of
//! that semidefinite program is maximized by steepest ascent with an exact
//! cubic line search; the primal diagonal is read off the dual iterate.
//!
//! Around the design core sit a matrix-free operator layer ([`operator`]), the
//! classical reference majorizers ([`majorizer`]), MM and CG solvers that consume
//! majorizers ([`solvers`]), a small parallel-beam CT reconstruction ([`ct`]) and
//! reproducible experiment drivers ([`experiments`]).

pub mod ct;
pub mod design;
pub mod error;
pub mod experiments;
pub mod majorizer;
pub mod operator;
pub mod solvers;

pub use error::{Error, Result};
