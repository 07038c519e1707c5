//! Numerical analysis of discrete-time Markov jump linear systems whose jump
//! parameter lives on a Borel space.
//!
//! The mode space is a finite union of labeled intervals, discretized with a
//! positive-weight quadrature rule ([`grid`]). Matrix-valued functions over
//! the modes are [`field::MatrixField`]s, and the coupling operators `E`,
//! `L_K` and `T_K` act on them through quadrature sums ([`operators`]).
//! On top of that sit the mean-square stability tests ([`stability`]), the
//! coupled difference/algebraic Riccati solvers behind the bounded real
//! lemma ([`riccati`]), and a Monte Carlo simulator ([`simulate`]).
//!
//! Node loops run on rayon when the `parallel` feature is enabled (the
//! default) and sequentially otherwise; results are identical either way.

pub mod config;
pub mod error;
pub mod field;
pub mod fixtures;
pub mod grid;
pub mod linalg;
pub mod model;
pub mod operators;
mod par;
pub mod riccati;
pub mod simulate;
pub mod stability;

pub use error::{MjlsError, Result};
pub use field::{MatrixField, OrderingCertificate};
pub use grid::{GridSpace, ModePoint, Quadrature, TransitionKernel};
pub use model::AffineModel;
pub use operators::{MjlsSystem, OperatorHandle, OperatorKind, SpectralEstimate};
