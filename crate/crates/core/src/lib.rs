//! Numerical laboratory for the commutative nonassociative algebra `V(u)`
//! attached to a real cubic form `u`.
//!
//! The product of `V(u)` is defined through the Euclidean inner product by
//! `<xy, z> = u(x, y, z)`, where `u(x, y, z)` is the full polarization of `u`.
//! With that convention the gradient of `u` is `x²/2` and its Hessian is the
//! multiplication operator `L_x`, so spectral questions about `u` become
//! questions about idempotents and their Peirce decompositions.
//!
//! Module map:
//!
//! - [`cubic`]: packed symmetric trilinear storage, evaluation, product, `L_x`.
//! - [`division`], [`catalog`], [`gallery`]: division algebras, named forms,
//!   the Münzner normalizer and the closed-form counterexample gallery.
//! - [`idempotent`]: Newton multistart, variational ascent, genericity test.
//! - [`peirce`]: Peirce decomposition, fusion laws, eiconal and Münzner
//!   residuals, Clifford systems and Hurwitz–Radon bounds.
//! - [`hessian`], [`hyperbolic`], [`f5`], [`hsiang`]: the ray function
//!   `w = s<x², x>/|x|^α`, its Hessian spectra and hyperbolicity evidence.
//! - [`report`], [`cli`]: deterministic report serialization and the binary.

pub mod catalog;
pub mod cli;
pub mod cubic;
pub mod division;
pub mod f5;
pub mod gallery;
pub mod hessian;
pub mod hsiang;
pub mod hyperbolic;
pub mod idempotent;
pub mod linalg;
pub mod peirce;
pub mod report;

pub use catalog::{FormSelector, U5Variant};
pub use cubic::{AlgebraElement, CubicForm, FormError};
pub use hessian::RayFunction;
pub use idempotent::{IdempotentRecord, Origin};
pub use peirce::PeirceDecomposition;
