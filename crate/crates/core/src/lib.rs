//! Parameter-wise affine, linear and subgradient selection on finite instances.
//!
//! Given a value table `f(x, y)` over finite parameters `x` and sample points
//! `y ∈ Q^n`, [`select_affine`] returns for every `x` an affine functional
//! `B(x)·y + C(x)` dominating the section `f(x, ·)`. The output for `x` depends
//! only on the section `f(x, ·)`, never on other parameters or on input order.
//! Linear dominators come from lifting the sample onto a cone ([`conelift`]),
//! subgradients from linear dominators of `-g` ([`subgradient`]), and
//! [`oracle`] checks every answer independently with exact Fourier–Motzkin
//! elimination.

pub mod cli;
pub mod conelift;
pub mod error;
pub mod hyperplane;
pub mod instances;
pub mod numerics;
pub mod oracle;
pub mod sandwich;
pub mod subgradient;

pub use error::{Error, Result};
pub use hyperplane::{
    select_affine, AffineConfig, AffineSelector, BaseRule, Instance, RecursionTrace,
};
pub use numerics::{Float, Point, PointSet, Rational, Scalar};
