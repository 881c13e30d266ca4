//! Calculus and constrained optimization for functions with infinitesimal
//! perturbations.
//!
//! * [`hyperreal`]: truncated series in named infinitesimal generators.
//! * [`expr`]: the expression DSL, its parser, evaluation, symbolic
//!   derivatives and standard shadows, plus the problem file format.
//! * [`mudiff`]: gradients from infinitesimal difference quotients.
//! * [`lagrange`]: Lagrange multiplier rules (normal and general form).
//! * [`cli`]: the `mulagrange` command-line interface.

pub mod cli;
pub mod expr;
pub mod hyperreal;
pub mod lagrange;
pub mod mudiff;

pub use expr::{parse, Expr, ProblemDef};
pub use hyperreal::{GeneratorSet, Hyperreal, Monomial, Space, Tolerance};
pub use lagrange::{classify, solve_general, solve_normal, verify, CriticalPoint, SolverOptions};
pub use mudiff::{
    directional, gradient, is_m_critical, partial, DiffConfig, Gradient, HyperPoint, Step,
};
