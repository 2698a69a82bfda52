//! Variational tensor-network states for blockade-constrained (PXP-type)
//! spin models on hypercubic lattices in one to three dimensions.
//!
//! The ansatz has bond dimension two and is parameterized by one angle pair
//! `(theta, phi)` per sublattice. Expectation values are available from an
//! exact transfer-matrix contraction (infinite chain, infinite helical
//! cylinder) and from a series expansion in `sin^2(theta/2)` whose counting
//! factors are enumerated by brute force.

pub mod lattice;
pub mod tensors;
pub mod insertion;
pub mod exact;
pub mod series;
pub mod expectation;
pub mod groundstate;
pub mod tdvp;
pub mod optimize;

use num_complex::Complex;
use thiserror::Error;

pub use lattice::{Boundary, Coord, Lattice, SiteGraph, Sublattice};
pub use tensors::VariationalParams;

pub type C64 = Complex<f64>;
pub type SiteTensor64 = tensors::SiteTensor<f64>;
pub type DoubleTensor64 = tensors::DoubleTensor<f64>;
pub type ReducedTensor64 = tensors::ReducedTensor<f64>;
pub type LocalAmplitudes64 = tensors::LocalAmplitudes<f64>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unsupported lattice dimension {0}")]
    UnsupportedDimension(usize),
    #[error("invalid lattice: {0}")]
    InvalidLattice(String),
    #[error("site {0:?} lies outside the lattice")]
    SiteOutOfRange(Coord),
    #[error("unknown operator kind '{0}'")]
    InvalidKind(String),
    #[error("{what}: size {size} exceeds limit {limit}")]
    SizeGuard { what: &'static str, size: u64, limit: u64 },
    #[error("power iteration did not converge: leading eigenvalues {lambda1:.6} and {lambda2:.6}")]
    Degenerate { lambda1: f64, lambda2: f64 },
    #[error("requested order {requested} exceeds the budget {limit}")]
    OrderExceeded { requested: usize, limit: usize },
    #[error("series order too low: at least {required} needed")]
    OrderTooLow { required: usize },
    #[error("backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("point ({0:.4}, {1:.4}) is outside the convergent region of the series")]
    OutsideRegime(f64, f64),
    #[error("observable has imaginary residue {0:e}")]
    NotReal(f64),
    #[error("expected a purely imaginary value, real residue {0:e}")]
    NotImaginary(f64),
    #[error("Gram element vanishes at ({0:.4}, {1:.4})")]
    SingularGram(f64, f64),
    #[error("squared leakage rate {0:e} is significantly negative")]
    NegativeLeakage(f64),
    #[error("no transition found in the scanned range")]
    NoTransition,
    #[error("orbit did not close within t = {0}")]
    NoClosure(f64),
    #[error("fit rejected: {0}")]
    Fit(String),
    #[error("optimizer failed: {0}")]
    Optimizer(String),
    #[error("counting-table cache: {0}")]
    Cache(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
