//! Regularized integrals of configuration-space correlators on an elliptic
//! curve `E = C/(Z + Z*tau)`.
//!
//! Integrands are polynomials in the atoms `wp^(m)(z_a - z_b)` (Weierstrass
//! `p`-function and derivatives) and `Zhat(z_a - z_b)` (the completed theta
//! log-derivative), paired with the normalized volume form so that a constant
//! integrates to itself. The engine integrates one variable at a time by
//! forming a formal primitive in `W = Zhat(z - z_anchor)` and summing
//! holomorphic residues; every step can be cross-checked against an
//! independent principal-value quadrature and a contour formula.
//!
//! Crate layout:
//! - [`kernel`]: numerical theta/wp/Zhat evaluation and modular constants,
//! - [`laurent`]: truncated Laurent series over a generic coefficient ring,
//! - [`expr`]: the symbolic integrand layer and its DSL,
//! - [`regint`]: the residue-based integration engine,
//! - [`pv`]: principal-value and contour oracles,
//! - [`checks`]: the named verification suites behind `ellreg check`,
//! - [`cli`] / [`report`]: command-line front end and report schema.
//!
//! ```
//! use ellreg::{expr::parse, kernel::ModularContext, regint::integrate_all_value};
//! use num_complex::Complex64;
//!
//! let ctx = ModularContext::new(Complex64::new(0.0, 2.0), None, 24)?;
//! let chain = parse("wp(1-2)*wp(2-3)")?;
//! let value = integrate_all_value(&chain, &[1, 2, 3], &ctx)?;
//! let want = ctx.eta1hat() * ctx.eta1hat();
//! assert!((value - want).norm() < 1e-12 * want.norm());
//! # Ok::<(), ellreg::Error>(())
//! ```

pub mod checks;
pub mod cli;
pub mod expr;
pub mod kernel;
pub mod laurent;
pub mod pv;
pub mod regint;
pub mod report;

use thiserror::Error;

/// One-based label of a configuration-space point `z_i`.
pub type Point = u32;

/// Default cap on jet/expansion orders, overridable per context.
pub const DEFAULT_JET_CAP: u32 = 24;

#[derive(Debug, Error)]
pub enum Error {
    #[error("im(tau) must be positive, got tau = {0}")]
    NonPositiveImaginaryPart(num_complex::Complex64),
    #[error("series cutoff {cutoff} leaves |q|^cutoff = {tail:.3e} > 1e-14")]
    CutoffTooSmall { cutoff: usize, tail: f64 },
    #[error("requested order {requested} exceeds jet cap {cap}")]
    JetCapExceeded { requested: i64, cap: u32 },
    #[error("argument {0} reduces to a lattice point")]
    PoleAtLatticePoint(num_complex::Complex64),
    #[error("series truncation leaves no representable coefficients")]
    TruncationUnderflow,
    #[error("coefficient index {index} is beyond truncation order {trunc}")]
    BeyondTruncation { index: i64, trunc: i64 },
    #[error("syntax error at byte {offset}: {message}")]
    SyntaxError { offset: usize, message: String },
    #[error("unknown symbol `{0}`")]
    UnknownSymbol(String),
    #[error("atom argument z{0}-z{0} is identically zero")]
    SelfDifference(Point),
    #[error("pole hit while evaluating {atom}: argument is on the lattice")]
    PoleHit { atom: String },
    #[error("expression has no poles in the active variable z{0}")]
    NoPoles(Point),
    #[error("expression contains Zhat(z{0}-..) and is not meromorphic in z{0}")]
    NotMeromorphic(Point),
    #[error("quadrature did not converge: {0}")]
    NonConvergence(String),
    #[error("could not translate the fundamental domain away from the poles")]
    PoleOnBoundary,
    #[error("iterated integral left a non-constant expression: {0}")]
    NonConstantResult(String),
    #[error("point z{0} was not assigned a value")]
    UnassignedPoint(Point),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
