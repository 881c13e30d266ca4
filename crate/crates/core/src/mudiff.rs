//! Gradients from infinitesimal difference quotients.
//!
//! A partial derivative of `f` at a nearstandard point `x` is the exact
//! truncated-series quotient `(f(x + ε e_i) − f(x)) / ε` for an
//! infinitesimal step `ε`. The result is meaningful only up to an
//! infinitesimal, so gradients are compared with `approx_eq`, never
//! structurally.

use thiserror::Error;

use crate::expr::{EvalError, Expr};
use crate::hyperreal::{Hyperreal, HyperrealError, Monomial, Space, Tolerance};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DiffError {
    #[error("coordinate index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },
    #[error("step generator `{0}` is not declared")]
    UnknownStepGenerator(String),
    #[error("step power must be positive")]
    ZeroStepPower,
    #[error("points have different dimensions ({0} vs {1})")]
    DimensionMismatch(usize, usize),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Hyperreal(#[from] HyperrealError),
}

/// A point of `*R^n` with finite coordinates, all in one [`Space`].
#[derive(Debug, Clone, PartialEq)]
pub struct HyperPoint {
    space: Space,
    coords: Vec<Hyperreal>,
}

impl HyperPoint {
    /// Builds a point from coordinates that must share `space`.
    pub fn new(space: &Space, coords: Vec<Hyperreal>) -> Result<Self, HyperrealError> {
        let coords = coords
            .into_iter()
            .map(|c| {
                if c.space() == space {
                    Ok(c)
                } else {
                    c.embed(space)
                }
            })
            .collect::<Result<_, _>>()?;
        Ok(Self {
            space: space.clone(),
            coords,
        })
    }

    /// A point with plain real coordinates.
    pub fn from_standard(space: &Space, xs: &[f64]) -> Self {
        Self {
            space: space.clone(),
            coords: xs.iter().map(|&x| space.real(x)).collect(),
        }
    }

    pub fn space(&self) -> &Space {
        &self.space
    }

    pub fn coords(&self) -> &[Hyperreal] {
        &self.coords
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn standard_parts(&self) -> Vec<f64> {
        self.coords.iter().map(Hyperreal::st).collect()
    }

    pub fn embed(&self, target: &Space) -> Result<Self, HyperrealError> {
        Ok(Self {
            space: target.clone(),
            coords: self
                .coords
                .iter()
                .map(|c| c.embed(target))
                .collect::<Result<_, _>>()?,
        })
    }

    /// `self + factor * direction`, coordinatewise.
    fn shifted(&self, direction: &HyperPoint, factor: &Hyperreal) -> Result<Self, HyperrealError> {
        let coords = self
            .coords
            .iter()
            .zip(&direction.coords)
            .map(|(x, u)| x.checked_add(&u.checked_mul(factor)?))
            .collect::<Result<_, _>>()?;
        Ok(Self {
            space: self.space.clone(),
            coords,
        })
    }

    fn shifted_axis(&self, index: usize, step: &Hyperreal) -> Result<Self, HyperrealError> {
        let mut out = self.clone();
        out.coords[index] = out.coords[index].checked_add(step)?;
        Ok(out)
    }
}

/// Which infinitesimal serves as the difference-quotient step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Step {
    /// A new generator (named `h`, or `h1`, `h2`, ... on clashes) appended
    /// to the point's generator set, raised to `power`.
    Fresh { power: u32 },
    /// A generator already declared in the point's space.
    Generator { name: String, power: u32 },
}

impl Default for Step {
    fn default() -> Self {
        Step::Fresh { power: 1 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiffConfig {
    pub step: Step,
    /// Assumed lower bound on admissible step sizes. Recorded, never
    /// checked: the representation does not order distinct generators.
    pub delta_f: f64,
    pub tolerance: Tolerance,
}

impl Default for DiffConfig {
    fn default() -> Self {
        Self {
            step: Step::default(),
            delta_f: 0.0,
            tolerance: Tolerance::default(),
        }
    }
}

impl DiffConfig {
    pub fn with_tolerance(tolerance: Tolerance) -> Self {
        Self {
            tolerance,
            ..Self::default()
        }
    }
}

/// The step monomial and the enlarged space the quotient is computed in.
#[derive(Debug, Clone)]
struct ResolvedStep {
    /// Generators of the input plus (possibly) the fresh step generator,
    /// truncated at `K + power` so the quotient keeps every degree up to `K`.
    work: Space,
    base_order: u32,
    monomial: Monomial,
    value: Hyperreal,
}

impl ResolvedStep {
    fn new(space: &Space, step: &Step) -> Result<Self, DiffError> {
        let (generators, index, power) = match step {
            Step::Fresh { power } => {
                let (g, i) = space.generators().with_fresh("h");
                (g, i, *power)
            }
            Step::Generator { name, power } => {
                let i = space
                    .generators()
                    .index_of(name)
                    .ok_or_else(|| DiffError::UnknownStepGenerator(name.clone()))?;
                (space.generators().clone(), i, *power)
            }
        };
        if power == 0 {
            return Err(DiffError::ZeroStepPower);
        }
        let base_order = space.order();
        let work = Space::new(generators, base_order + power)?;
        let monomial = Monomial::generator(index, power);
        let value = work.term(monomial.clone(), 1.0);
        Ok(Self {
            work,
            base_order,
            monomial,
            value,
        })
    }

    /// `(f(moved) − f(base)) / step`, truncated back to the input order.
    fn quotient(
        &self,
        f: &Expr,
        base: &HyperPoint,
        moved: &HyperPoint,
    ) -> Result<Hyperreal, DiffError> {
        let numerator = f.eval(moved)?.checked_sub(&f.eval(base)?)?;
        Ok(numerator
            .checked_div(&self.value)?
            .truncate(self.base_order)?)
    }
}

/// A gradient vector: one hyperreal partial per coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    partials: Vec<Hyperreal>,
    step_used: Monomial,
}

impl Gradient {
    pub fn partials(&self) -> &[Hyperreal] {
        &self.partials
    }

    pub fn step_used(&self) -> &Monomial {
        &self.step_used
    }

    pub fn len(&self) -> usize {
        self.partials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.partials.is_empty()
    }

    /// Space the partials live in (the input generators plus the step).
    pub fn space(&self) -> Option<&Space> {
        self.partials.first().map(Hyperreal::space)
    }

    pub fn standard_parts(&self) -> Vec<f64> {
        self.partials.iter().map(Hyperreal::st).collect()
    }

    /// `∇f · u`, with `u` embedded into the gradient's space.
    pub fn dot(&self, u: &HyperPoint) -> Result<Hyperreal, DiffError> {
        if u.len() != self.len() {
            return Err(DiffError::DimensionMismatch(self.len(), u.len()));
        }
        let Some(space) = self.space() else {
            return Ok(Hyperreal::from_real(0.0));
        };
        let mut acc = space.zero();
        for (p, c) in self.partials.iter().zip(u.coords()) {
            acc = acc.checked_add(&p.checked_mul(&c.embed(space)?)?)?;
        }
        Ok(acc)
    }

    /// Componentwise `≈` against hyperreals that embed into this gradient's space.
    pub fn approx_eq(&self, other: &[Hyperreal], tol: Tolerance) -> Result<bool, DiffError> {
        if other.len() != self.len() {
            return Err(DiffError::DimensionMismatch(self.len(), other.len()));
        }
        for (p, q) in self.partials.iter().zip(other) {
            let (p, q) = common_space(p, q)?;
            if !p.approx_eq(&q, tol)? {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

/// Embeds two values into whichever of their generator sets extends the
/// other, at the smaller truncation order.
pub fn common_space(
    a: &Hyperreal,
    b: &Hyperreal,
) -> Result<(Hyperreal, Hyperreal), HyperrealError> {
    let order = a.space().order().min(b.space().order());
    let target = if b.space().generators().is_prefix_of(a.space().generators()) {
        a.space().with_order(order)?
    } else {
        b.space().with_order(order)?
    };
    Ok((a.embed(&target)?, b.embed(&target)?))
}

/// The `index`-th mu-partial of `f` at `x`.
pub fn partial(
    f: &Expr,
    x: &HyperPoint,
    index: usize,
    cfg: &DiffConfig,
) -> Result<Hyperreal, DiffError> {
    if index >= x.len() {
        return Err(DiffError::IndexOutOfRange {
            index,
            dim: x.len(),
        });
    }
    let step = ResolvedStep::new(x.space(), &cfg.step)?;
    let base = x.embed(&step.work)?;
    let moved = base.shifted_axis(index, &step.value)?;
    step.quotient(f, &base, &moved)
}

pub fn gradient(f: &Expr, x: &HyperPoint, cfg: &DiffConfig) -> Result<Gradient, DiffError> {
    let step = ResolvedStep::new(x.space(), &cfg.step)?;
    let base = x.embed(&step.work)?;
    let partials = (0..x.len())
        .map(|i| {
            let moved = base.shifted_axis(i, &step.value)?;
            step.quotient(f, &base, &moved)
        })
        .collect::<Result<_, _>>()?;
    Ok(Gradient {
        partials,
        step_used: step.monomial,
    })
}

/// `(f(x + ε u) − f(x)) / ε` for a finite direction `u`.
pub fn directional(
    f: &Expr,
    x: &HyperPoint,
    u: &HyperPoint,
    cfg: &DiffConfig,
) -> Result<Hyperreal, DiffError> {
    if u.len() != x.len() {
        return Err(DiffError::DimensionMismatch(x.len(), u.len()));
    }
    let step = ResolvedStep::new(x.space(), &cfg.step)?;
    let base = x.embed(&step.work)?;
    let direction = u.embed(&step.work)?;
    let moved = base.shifted(&direction, &step.value)?;
    step.quotient(f, &base, &moved)
}

/// True iff every partial of `f` at `x` is infinitesimal.
pub fn is_m_critical(f: &Expr, x: &HyperPoint, cfg: &DiffConfig) -> Result<bool, DiffError> {
    Ok(gradient(f, x, cfg)?
        .partials()
        .iter()
        .all(|p| p.is_infinitesimal(cfg.tolerance)))
}
