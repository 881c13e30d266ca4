//! Truncated multivariate series in named infinitesimal generators.
//!
//! A [`Hyperreal`] is a finite sum `c0 + c1*eps + c2*eps*delta + ...` where
//! every generator is an independent infinitesimal and terms above the
//! truncation order `K` (total degree) are discarded. The degree-zero
//! coefficient is the standard part. Infinite hyperreals are not
//! representable: any operation that would produce a negative total degree
//! fails with [`HyperrealError::NonunitDivisor`].

mod format;
mod monomial;

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::{Arc, OnceLock};

use thiserror::Error;

pub use format::{format_significant, SIGNIFICANT_DIGITS};
pub use monomial::Monomial;

/// Default truncation order.
pub const DEFAULT_ORDER: u32 = 4;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HyperrealError {
    #[error("invalid generator name `{0}`")]
    InvalidGenerator(String),
    #[error("duplicate generator name `{0}`")]
    DuplicateGenerator(String),
    #[error("unknown generator `{0}`")]
    UnknownGenerator(String),
    #[error("operands live in different series spaces ({left} vs {right})")]
    SpaceMismatch { left: String, right: String },
    #[error("cannot embed series over {from} into {to}")]
    IncompatibleEmbedding { from: String, to: String },
    #[error("truncation order must be positive")]
    ZeroOrder,
    #[error("division by zero")]
    DivisionByZero,
    #[error("nonunit divisor: quotient would be an infinite hyperreal")]
    NonunitDivisor,
    #[error("tolerance must be a finite nonnegative number, got {0}")]
    InvalidTolerance(f64),
}

/// True when `name` is an ASCII identifier: a letter or `_` followed by letters,
/// digits or `_`.
pub fn is_identifier(name: &str) -> bool {
    let mut chars = name.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Ordered list of infinitesimal generator names. Declaration order fixes
/// the monomial order used for rendering.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct GeneratorSet {
    names: Vec<String>,
}

impl GeneratorSet {
    pub fn new<I, S>(names: I) -> Result<Self, HyperrealError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut out: Vec<String> = Vec::new();
        for name in names {
            let name = name.into();
            if !is_identifier(&name) {
                return Err(HyperrealError::InvalidGenerator(name));
            }
            if out.contains(&name) {
                return Err(HyperrealError::DuplicateGenerator(name));
            }
            out.push(name);
        }
        Ok(Self { names: out })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn is_prefix_of(&self, other: &Self) -> bool {
        other.names.starts_with(&self.names)
    }

    /// Appends a generator whose name starts with `base` and does not clash
    /// with existing names (`h`, then `h1`, `h2`, ...). Returns the new set
    /// and the index of the fresh generator.
    pub fn with_fresh(&self, base: &str) -> (Self, usize) {
        let name = std::iter::once(base.to_string())
            .chain((1..).map(|k| format!("{base}{k}")))
            .find(|n| self.index_of(n).is_none())
            .expect("unbounded candidate list");
        let mut names = self.names.clone();
        names.push(name);
        let index = names.len() - 1;
        (Self { names }, index)
    }
}

impl fmt::Display for GeneratorSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}]", self.names.join(", "))
    }
}

/// Closeness threshold realizing `≈` on floating coefficients:
/// `a ≈ b` iff `|st(a - b)| <= tol`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Tolerance(f64);

impl Tolerance {
    pub const DEFAULT: f64 = 1e-9;

    pub fn new(tol: f64) -> Result<Self, HyperrealError> {
        if tol.is_finite() && tol >= 0.0 {
            Ok(Self(tol))
        } else {
            Err(HyperrealError::InvalidTolerance(tol))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl Default for Tolerance {
    fn default() -> Self {
        Self(Self::DEFAULT)
    }
}

/// A generator set together with a truncation order: the ring every
/// [`Hyperreal`] lives in. Cheap to clone.
#[derive(Debug, Clone)]
pub struct Space {
    generators: Arc<GeneratorSet>,
    order: u32,
}

impl Space {
    pub fn new(generators: GeneratorSet, order: u32) -> Result<Self, HyperrealError> {
        if order == 0 {
            return Err(HyperrealError::ZeroOrder);
        }
        Ok(Self {
            generators: Arc::new(generators),
            order,
        })
    }

    /// The space of plain reals: no generators.
    pub fn standard() -> Self {
        static STANDARD: OnceLock<Space> = OnceLock::new();
        STANDARD
            .get_or_init(|| Space {
                generators: Arc::new(GeneratorSet::default()),
                order: DEFAULT_ORDER,
            })
            .clone()
    }

    pub fn generators(&self) -> &GeneratorSet {
        &self.generators
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn with_order(&self, order: u32) -> Result<Self, HyperrealError> {
        if order == 0 {
            return Err(HyperrealError::ZeroOrder);
        }
        Ok(Self {
            generators: Arc::clone(&self.generators),
            order,
        })
    }

    pub fn zero(&self) -> Hyperreal {
        Hyperreal {
            space: self.clone(),
            terms: BTreeMap::new(),
        }
    }

    pub fn real(&self, value: f64) -> Hyperreal {
        self.term(Monomial::one(), value)
    }

    /// `coefficient * monomial`, or zero when the monomial exceeds the order.
    pub fn term(&self, monomial: Monomial, coefficient: f64) -> Hyperreal {
        let mut x = self.zero();
        if coefficient != 0.0 && monomial.degree() <= self.order {
            x.terms.insert(monomial, coefficient);
        }
        x
    }

    /// The generator called `name`, to the first power.
    pub fn generator(&self, name: &str) -> Result<Hyperreal, HyperrealError> {
        let index = self
            .generators
            .index_of(name)
            .ok_or_else(|| HyperrealError::UnknownGenerator(name.to_string()))?;
        Ok(self.term(Monomial::generator(index, 1), 1.0))
    }

    pub fn from_terms(&self, terms: impl IntoIterator<Item = (Monomial, f64)>) -> Hyperreal {
        let mut x = self.zero();
        for (m, c) in terms {
            if m.degree() <= self.order {
                *x.terms.entry(m).or_insert(0.0) += c;
            }
        }
        x.prune();
        x
    }

    fn describe(&self) -> String {
        format!("{} K={}", self.generators, self.order)
    }
}

impl PartialEq for Space {
    fn eq(&self, other: &Self) -> bool {
        self.order == other.order
            && (Arc::ptr_eq(&self.generators, &other.generators)
                || self.generators == other.generators)
    }
}

/// A finite hyperreal as a truncated series over a [`Space`].
#[derive(Debug, Clone)]
pub struct Hyperreal {
    space: Space,
    terms: BTreeMap<Monomial, f64>,
}

impl Hyperreal {
    /// A plain real in the generator-free space; embeds into any space.
    pub fn from_real(value: f64) -> Self {
        Space::standard().real(value)
    }

    pub fn space(&self) -> &Space {
        &self.space
    }

    /// Nonzero terms in canonical order (standard part first).
    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, f64)> + '_ {
        self.terms.iter().map(|(m, &c)| (m, c))
    }

    pub fn coefficient(&self, monomial: &Monomial) -> f64 {
        self.terms.get(monomial).copied().unwrap_or(0.0)
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Standard part: the coefficient of the unit monomial.
    pub fn st(&self) -> f64 {
        self.coefficient(&Monomial::one())
    }

    /// True when there is no standard part beyond float noise.
    pub fn is_infinitesimal(&self, tol: Tolerance) -> bool {
        self.st().abs() <= tol.value()
    }

    /// `self ≈ other`: the difference is infinitesimal.
    pub fn approx_eq(&self, other: &Self, tol: Tolerance) -> Result<bool, HyperrealError> {
        Ok(self.checked_sub(other)?.is_infinitesimal(tol))
    }

    /// True when the value is a plain real (no infinitesimal terms).
    pub fn is_standard(&self) -> bool {
        self.terms.keys().all(Monomial::is_one)
    }

    /// Smallest total degree among the terms, `None` for zero.
    pub fn min_degree(&self) -> Option<u32> {
        self.terms.keys().map(Monomial::degree).min()
    }

    /// Drops every term above `order` and relabels the value with that order.
    pub fn truncate(&self, order: u32) -> Result<Self, HyperrealError> {
        let space = self.space.with_order(order)?;
        let terms = self
            .terms
            .iter()
            .filter(|(m, _)| m.degree() <= order)
            .map(|(m, &c)| (m.clone(), c))
            .collect();
        Ok(Self { space, terms })
    }

    /// Re-expresses the value in `target`, whose generator list must extend
    /// this one's. Terms above the target order are dropped.
    pub fn embed(&self, target: &Space) -> Result<Self, HyperrealError> {
        if !self.space.generators.is_prefix_of(&target.generators) {
            return Err(HyperrealError::IncompatibleEmbedding {
                from: self.space.describe(),
                to: target.describe(),
            });
        }
        let terms = self
            .terms
            .iter()
            .filter(|(m, _)| m.degree() <= target.order)
            .map(|(m, &c)| (m.clone(), c))
            .collect();
        Ok(Self {
            space: target.clone(),
            terms,
        })
    }

    fn check_space(&self, other: &Self) -> Result<(), HyperrealError> {
        if self.space == other.space {
            Ok(())
        } else {
            Err(HyperrealError::SpaceMismatch {
                left: self.space.describe(),
                right: other.space.describe(),
            })
        }
    }

    fn prune(&mut self) {
        self.terms.retain(|_, c| *c != 0.0);
    }

    pub fn checked_add(&self, other: &Self) -> Result<Self, HyperrealError> {
        self.check_space(other)?;
        let mut out = self.clone();
        for (m, &c) in &other.terms {
            *out.terms.entry(m.clone()).or_insert(0.0) += c;
        }
        out.prune();
        Ok(out)
    }

    pub fn checked_sub(&self, other: &Self) -> Result<Self, HyperrealError> {
        self.check_space(other)?;
        let mut out = self.clone();
        for (m, &c) in &other.terms {
            *out.terms.entry(m.clone()).or_insert(0.0) -= c;
        }
        out.prune();
        Ok(out)
    }

    pub fn checked_mul(&self, other: &Self) -> Result<Self, HyperrealError> {
        self.check_space(other)?;
        let order = self.space.order;
        let mut out = self.space.zero();
        for (ma, &ca) in &self.terms {
            let da = ma.degree();
            for (mb, &cb) in &other.terms {
                if da + mb.degree() > order {
                    continue;
                }
                *out.terms.entry(ma.mul(mb)).or_insert(0.0) += ca * cb;
            }
        }
        out.prune();
        Ok(out)
    }

    /// Quotient `self / divisor`.
    ///
    /// A divisor with nonzero standard part `c` is inverted as
    /// `c⁻¹ Σ (−u)ʲ` with `u = divisor/c − 1`. A divisor that is a single
    /// monomial divides by exponent shift, provided every term of `self` is
    /// divisible by it. Anything else would be infinite.
    pub fn checked_div(&self, divisor: &Self) -> Result<Self, HyperrealError> {
        self.check_space(divisor)?;
        if divisor.is_zero() {
            return Err(HyperrealError::DivisionByZero);
        }
        let c = divisor.st();
        if c != 0.0 {
            let one = self.space.real(1.0);
            let u = divisor.scale(1.0 / c).checked_sub(&one)?;
            let minus_u = -&u;
            let mut power = one.clone();
            let mut inverse = one;
            for _ in 0..self.space.order {
                power = power.checked_mul(&minus_u)?;
                if power.is_zero() {
                    break;
                }
                inverse = inverse.checked_add(&power)?;
            }
            return Ok(self.checked_mul(&inverse)?.scale(1.0 / c));
        }
        if divisor.terms.len() != 1 {
            return Err(HyperrealError::NonunitDivisor);
        }
        let (m, &c) = divisor.terms.iter().next().expect("one term");
        let mut out = self.space.zero();
        for (t, &a) in &self.terms {
            let q = t.div(m).ok_or(HyperrealError::NonunitDivisor)?;
            out.terms.insert(q, a / c);
        }
        out.prune();
        Ok(out)
    }

    pub fn scale(&self, factor: f64) -> Self {
        let mut out = self.clone();
        for c in out.terms.values_mut() {
            *c *= factor;
        }
        out.prune();
        out
    }

    pub fn pow_int(&self, exponent: u32) -> Self {
        let mut result = self.space.real(1.0);
        let mut base = self.clone();
        let mut e = exponent;
        while e > 0 {
            if e & 1 == 1 {
                result = result.checked_mul(&base).expect("same space");
            }
            e >>= 1;
            if e > 0 {
                base = base.checked_mul(&base).expect("same space");
            }
        }
        result
    }

    /// Renders the value with coefficients formatted by `coefficient`.
    pub fn render_with(&self, coefficient: impl Fn(f64) -> String) -> String {
        if self.terms.is_empty() {
            return "0".to_string();
        }
        let names = self.space.generators.names();
        let mut out = String::new();
        for (i, (m, &c)) in self.terms.iter().enumerate() {
            let magnitude = if i == 0 {
                c
            } else {
                out.push_str(if c < 0.0 { " - " } else { " + " });
                c.abs()
            };
            let factors: Vec<String> = m
                .exponents()
                .iter()
                .map(|&(g, e)| match e {
                    1 => names[g].clone(),
                    _ => format!("{}^{e}", names[g]),
                })
                .collect();
            if factors.is_empty() {
                out.push_str(&coefficient(magnitude));
            } else if magnitude == 1.0 {
                out.push_str(&factors.join("*"));
            } else if magnitude == -1.0 {
                out.push('-');
                out.push_str(&factors.join("*"));
            } else {
                out.push_str(&coefficient(magnitude));
                out.push('*');
                out.push_str(&factors.join("*"));
            }
        }
        out
    }
}

impl PartialEq for Hyperreal {
    /// Structural equality: same space and identical term maps.
    fn eq(&self, other: &Self) -> bool {
        self.space == other.space && self.terms == other.terms
    }
}

impl fmt::Display for Hyperreal {
    /// Canonical rendering, e.g. `4 + 4*eps - 3*delta`, with 12 significant
    /// digits per coefficient.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render_with(|c| format_significant(c, SIGNIFICANT_DIGITS)))
    }
}

impl Neg for &Hyperreal {
    type Output = Hyperreal;

    fn neg(self) -> Hyperreal {
        self.scale(-1.0)
    }
}

impl Neg for Hyperreal {
    type Output = Hyperreal;

    fn neg(self) -> Hyperreal {
        self.scale(-1.0)
    }
}

macro_rules! binary_op {
    ($trait:ident, $method:ident, $checked:ident) => {
        /// Panics when the operands live in different spaces; use the
        /// `checked_*` method to get an error instead.
        impl $trait<&Hyperreal> for &Hyperreal {
            type Output = Hyperreal;

            fn $method(self, rhs: &Hyperreal) -> Hyperreal {
                self.$checked(rhs).unwrap_or_else(|e| panic!("{e}"))
            }
        }

        impl $trait<Hyperreal> for Hyperreal {
            type Output = Hyperreal;

            fn $method(self, rhs: Hyperreal) -> Hyperreal {
                (&self).$method(&rhs)
            }
        }

        impl $trait<&Hyperreal> for Hyperreal {
            type Output = Hyperreal;

            fn $method(self, rhs: &Hyperreal) -> Hyperreal {
                (&self).$method(rhs)
            }
        }
    };
}

binary_op!(Add, add, checked_add);
binary_op!(Sub, sub, checked_sub);
binary_op!(Mul, mul, checked_mul);

impl Mul<f64> for &Hyperreal {
    type Output = Hyperreal;

    fn mul(self, rhs: f64) -> Hyperreal {
        self.scale(rhs)
    }
}
