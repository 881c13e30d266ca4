//! Internal functions written in a small arithmetic DSL.
//!
//! An [`Expr`] is a polynomial-style expression tree over numbered
//! variables with hyperreal constants. Besides evaluation it supports exact
//! symbolic differentiation and the standard shadow (every constant replaced
//! by its standard part).

mod parse;
mod problem;

use std::fmt;

use thiserror::Error;

use crate::hyperreal::{format_significant, Hyperreal, HyperrealError, SIGNIFICANT_DIGITS};
use crate::mudiff::HyperPoint;

pub use parse::{parse, parse_at, ParseError, ParseErrorKind};
pub use problem::{ProblemDef, ProblemError};

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(Hyperreal),
    Var(usize),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Neg(Box<Expr>),
    PowInt(Box<Expr>, u32),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("variable index {index} out of range for a point of dimension {dim}")]
    Arity { index: usize, dim: usize },
    #[error(transparent)]
    Hyperreal(#[from] HyperrealError),
}

impl Expr {
    pub fn constant(value: f64) -> Self {
        Expr::Const(Hyperreal::from_real(value))
    }

    pub fn zero() -> Self {
        Self::constant(0.0)
    }

    pub fn one() -> Self {
        Self::constant(1.0)
    }

    fn is_const_value(&self, value: f64) -> bool {
        matches!(self, Expr::Const(c) if c.is_standard() && c.st() == value)
    }

    /// Largest variable index referenced, if any.
    pub fn max_var(&self) -> Option<usize> {
        match self {
            Expr::Const(_) => None,
            Expr::Var(i) => Some(*i),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.max_var().max(b.max_var())
            }
            Expr::Neg(a) | Expr::PowInt(a, _) => a.max_var(),
        }
    }

    /// Evaluates the expression at a hyperreal point. Constants are embedded
    /// into the point's space first.
    pub fn eval(&self, point: &HyperPoint) -> Result<Hyperreal, EvalError> {
        let coords = point.coords();
        Ok(match self {
            Expr::Const(c) => c.embed(point.space())?,
            Expr::Var(i) => coords.get(*i).cloned().ok_or(EvalError::Arity {
                index: *i,
                dim: coords.len(),
            })?,
            Expr::Add(a, b) => a.eval(point)?.checked_add(&b.eval(point)?)?,
            Expr::Sub(a, b) => a.eval(point)?.checked_sub(&b.eval(point)?)?,
            Expr::Mul(a, b) => a.eval(point)?.checked_mul(&b.eval(point)?)?,
            Expr::Div(a, b) => a.eval(point)?.checked_div(&b.eval(point)?)?,
            Expr::Neg(a) => -a.eval(point)?,
            Expr::PowInt(a, n) => a.eval(point)?.pow_int(*n),
        })
    }

    /// Evaluates the standard shadow at a real point: constants contribute
    /// their standard parts only.
    ///
    /// Panics if a variable index is out of range for `x`.
    pub fn eval_standard(&self, x: &[f64]) -> f64 {
        match self {
            Expr::Const(c) => c.st(),
            Expr::Var(i) => x[*i],
            Expr::Add(a, b) => a.eval_standard(x) + b.eval_standard(x),
            Expr::Sub(a, b) => a.eval_standard(x) - b.eval_standard(x),
            Expr::Mul(a, b) => a.eval_standard(x) * b.eval_standard(x),
            Expr::Div(a, b) => a.eval_standard(x) / b.eval_standard(x),
            Expr::Neg(a) => -a.eval_standard(x),
            Expr::PowInt(a, n) => powi(a.eval_standard(x), *n),
        }
    }

    /// Replaces every constant by its standard part.
    pub fn shadow(&self) -> Expr {
        match self {
            Expr::Const(c) => Expr::Const(Hyperreal::from_real(c.st())),
            Expr::Var(i) => Expr::Var(*i),
            Expr::Add(a, b) => Expr::Add(Box::new(a.shadow()), Box::new(b.shadow())),
            Expr::Sub(a, b) => Expr::Sub(Box::new(a.shadow()), Box::new(b.shadow())),
            Expr::Mul(a, b) => Expr::Mul(Box::new(a.shadow()), Box::new(b.shadow())),
            Expr::Div(a, b) => Expr::Div(Box::new(a.shadow()), Box::new(b.shadow())),
            Expr::Neg(a) => Expr::Neg(Box::new(a.shadow())),
            Expr::PowInt(a, n) => Expr::PowInt(Box::new(a.shadow()), *n),
        }
    }

    /// Exact derivative with respect to variable `var`, with trivial zero and
    /// one factors folded away.
    pub fn symbolic_diff(&self, var: usize) -> Expr {
        match self {
            Expr::Const(_) => Expr::zero(),
            Expr::Var(i) if *i == var => Expr::one(),
            Expr::Var(_) => Expr::zero(),
            Expr::Add(a, b) => add(a.symbolic_diff(var), b.symbolic_diff(var)),
            Expr::Sub(a, b) => sub(a.symbolic_diff(var), b.symbolic_diff(var)),
            Expr::Neg(a) => neg(a.symbolic_diff(var)),
            Expr::Mul(a, b) => add(
                mul(a.symbolic_diff(var), (**b).clone()),
                mul((**a).clone(), b.symbolic_diff(var)),
            ),
            Expr::Div(a, b) => {
                let (da, db) = (a.symbolic_diff(var), b.symbolic_diff(var));
                if db.is_const_value(0.0) {
                    div(da, (**b).clone())
                } else {
                    div(
                        sub(mul(da, (**b).clone()), mul((**a).clone(), db)),
                        Expr::PowInt(b.clone(), 2),
                    )
                }
            }
            Expr::PowInt(a, n) => match n {
                0 => Expr::zero(),
                1 => a.symbolic_diff(var),
                _ => {
                    let lowered = if *n == 2 {
                        (**a).clone()
                    } else {
                        Expr::PowInt(a.clone(), n - 1)
                    };
                    mul(
                        mul(Expr::constant(f64::from(*n)), lowered),
                        a.symbolic_diff(var),
                    )
                }
            },
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Add(..) | Expr::Sub(..) => 1,
            Expr::Mul(..) | Expr::Div(..) => 2,
            Expr::Neg(_) => 3,
            Expr::PowInt(..) => 4,
            Expr::Var(_) => 5,
            Expr::Const(c) => {
                let atomic = c.terms().count() <= 1
                    && c.terms().all(|(m, coeff)| {
                        (m.is_one() && coeff >= 0.0)
                            || (m.exponents().len() == 1 && m.degree() == 1 && coeff == 1.0)
                    });
                if atomic {
                    5
                } else {
                    0
                }
            }
        }
    }
}

fn powi(base: f64, n: u32) -> f64 {
    match i32::try_from(n) {
        Ok(k) => base.powi(k),
        Err(_) => base.powf(f64::from(n)),
    }
}

fn add(a: Expr, b: Expr) -> Expr {
    if a.is_const_value(0.0) {
        b
    } else if b.is_const_value(0.0) {
        a
    } else {
        Expr::Add(Box::new(a), Box::new(b))
    }
}

fn sub(a: Expr, b: Expr) -> Expr {
    if b.is_const_value(0.0) {
        a
    } else if a.is_const_value(0.0) {
        neg(b)
    } else {
        Expr::Sub(Box::new(a), Box::new(b))
    }
}

fn neg(a: Expr) -> Expr {
    if a.is_const_value(0.0) {
        a
    } else {
        Expr::Neg(Box::new(a))
    }
}

fn mul(a: Expr, b: Expr) -> Expr {
    if a.is_const_value(0.0) || b.is_const_value(0.0) {
        Expr::zero()
    } else if a.is_const_value(1.0) {
        b
    } else if b.is_const_value(1.0) {
        a
    } else {
        Expr::Mul(Box::new(a), Box::new(b))
    }
}

fn div(a: Expr, b: Expr) -> Expr {
    if a.is_const_value(0.0) || b.is_const_value(1.0) {
        a
    } else {
        Expr::Div(Box::new(a), Box::new(b))
    }
}

/// Renders an expression with variable names, inserting only the
/// parentheses needed to reparse to the same tree.
pub struct Render<'a> {
    expr: &'a Expr,
    vars: &'a [String],
}

impl Expr {
    pub fn render<'a>(&'a self, vars: &'a [String]) -> Render<'a> {
        Render { expr: self, vars }
    }
}

impl Render<'_> {
    fn child(&self, f: &mut fmt::Formatter<'_>, e: &Expr, min_prec: u8) -> fmt::Result {
        let inner = Render {
            expr: e,
            vars: self.vars,
        };
        if e.precedence() < min_prec {
            write!(f, "({inner})")
        } else {
            write!(f, "{inner}")
        }
    }
}

impl fmt::Display for Render<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.expr {
            Expr::Const(c) => {
                if c.is_standard() && c.st() >= 0.0 {
                    // Shortest representation that reparses to the same f64.
                    write!(f, "{}", c.st())
                } else {
                    write!(
                        f,
                        "{}",
                        c.render_with(|v| format_significant(v, SIGNIFICANT_DIGITS))
                    )
                }
            }
            Expr::Var(i) => match self.vars.get(*i) {
                Some(name) => f.write_str(name),
                None => write!(f, "x{i}"),
            },
            Expr::Add(a, b) => {
                self.child(f, a, 1)?;
                f.write_str(" + ")?;
                self.child(f, b, 2)
            }
            Expr::Sub(a, b) => {
                self.child(f, a, 1)?;
                f.write_str(" - ")?;
                self.child(f, b, 2)
            }
            Expr::Mul(a, b) => {
                self.child(f, a, 2)?;
                f.write_str("*")?;
                self.child(f, b, 3)
            }
            Expr::Div(a, b) => {
                self.child(f, a, 2)?;
                f.write_str("/")?;
                self.child(f, b, 3)
            }
            Expr::Neg(a) => {
                f.write_str("-")?;
                self.child(f, a, 3)
            }
            Expr::PowInt(a, n) => {
                self.child(f, a, 5)?;
                write!(f, "^{n}")
            }
        }
    }
}
