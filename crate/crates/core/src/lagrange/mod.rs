//! Lagrange multiplier rules for internal functions with side conditions.
//!
//! The m-critical points of a hyperreal problem are exactly the standard
//! critical points of its shadow, so candidates are found by solving the
//! shadow stationarity system with multistart damped Newton, then lifted
//! back and checked against the full hyperreal residual.

mod newton;

use std::cmp::Ordering;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::expr::{Expr, ProblemDef};
use crate::hyperreal::{Hyperreal, Tolerance};
use crate::mudiff::{gradient, DiffConfig, DiffError, HyperPoint};

pub use newton::{Failure, NewtonSystem, Root, MAX_HALVINGS};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error("too many constraints: {m} constraints for {n} variables (need m < n)")]
    TooManyConstraints { m: usize, n: usize },
    #[error("the general Lagrange rule needs at least one constraint")]
    NoConstraints,
    #[error("invalid solver options: {0}")]
    InvalidOptions(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    /// Number of Newton starting points.
    pub seeds: usize,
    /// Starting points are drawn uniformly from `[-seed_box, seed_box]` in every unknown.
    pub seed_box: f64,
    pub max_iter: usize,
    /// Max-norm residual at which Newton stops.
    pub newton_tol: f64,
    /// Roots closer than this in max-norm on `x` are merged.
    pub dedup_radius: f64,
    pub rng_seed: u64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            seeds: 64,
            seed_box: 2.0,
            max_iter: 50,
            newton_tol: 1e-12,
            dedup_radius: 1e-6,
            rng_seed: 0,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<(), SolveError> {
        let bad = |msg: &str| Err(SolveError::InvalidOptions(msg.to_string()));
        if self.seeds == 0 {
            return bad("seeds must be positive");
        }
        if !(self.seed_box > 0.0 && self.seed_box.is_finite()) {
            return bad("seed_box must be positive");
        }
        if self.max_iter == 0 {
            return bad("max_iter must be positive");
        }
        if self.newton_tol.is_nan() || self.newton_tol <= 0.0 {
            return bad("newton_tol must be positive");
        }
        if self.dedup_radius.is_nan() || self.dedup_radius <= self.newton_tol {
            return bad("dedup_radius must exceed newton_tol");
        }
        Ok(())
    }
}

/// Stationarity system of the augmented function.
///
/// Unknowns are ordered `x_1..x_n`, then `μ` (general form only), then
/// `λ_1..λ_m`. The residuals are `∂F/∂x_i` and `∂F/∂λ_j = g_j`, all taken
/// from the shadow of `F`.
#[derive(Debug, Clone)]
pub struct AugmentedSystem {
    n: usize,
    m: usize,
    general: bool,
    augmented: Expr,
    residuals: Vec<Expr>,
    normalization: Option<Expr>,
}

impl AugmentedSystem {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn is_general(&self) -> bool {
        self.general
    }

    /// `F = f + Σ λ_j g_j`, or `μ f + Σ λ_j g_j` in general form.
    pub fn augmented(&self) -> &Expr {
        &self.augmented
    }

    /// The `n + m` stationarity residuals.
    pub fn residuals(&self) -> &[Expr] {
        &self.residuals
    }

    /// `μ² + Σ λ_j² − 1` in general form.
    pub fn normalization(&self) -> Option<&Expr> {
        self.normalization.as_ref()
    }

    pub fn unknowns(&self) -> usize {
        self.n + self.m + usize::from(self.general)
    }

    fn mu_index(&self) -> Option<usize> {
        self.general.then_some(self.n)
    }

    fn lambda_index(&self, j: usize) -> usize {
        self.n + usize::from(self.general) + j
    }

    fn equations(&self) -> Vec<Expr> {
        self.residuals
            .iter()
            .cloned()
            .chain(self.normalization.clone())
            .collect()
    }
}

pub fn build_augmented(p: &ProblemDef, general: bool) -> Result<AugmentedSystem, SolveError> {
    let (n, m) = (p.n(), p.m());
    if m >= n {
        return Err(SolveError::TooManyConstraints { m, n });
    }
    let offset = n + usize::from(general);
    let var = |i: usize| Box::new(Expr::Var(i));
    let mut augmented = if general {
        Expr::Mul(var(n), Box::new(p.objective().clone()))
    } else {
        p.objective().clone()
    };
    for (j, g) in p.constraints().iter().enumerate() {
        augmented = Expr::Add(
            Box::new(augmented),
            Box::new(Expr::Mul(var(offset + j), Box::new(g.clone()))),
        );
    }
    let shadow = augmented.shadow();
    let residuals = (0..n)
        .chain(offset..offset + m)
        .map(|i| shadow.symbolic_diff(i))
        .collect();
    let normalization = general.then(|| {
        let mut sum = Expr::PowInt(var(n), 2);
        for j in 0..m {
            sum = Expr::Add(Box::new(sum), Box::new(Expr::PowInt(var(offset + j), 2)));
        }
        Expr::Sub(Box::new(sum), Box::new(Expr::one()))
    });
    Ok(AugmentedSystem {
        n,
        m,
        general,
        augmented,
        residuals,
        normalization,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Classification {
    CandidateMin,
    CandidateMax,
    /// Both extremes coincide (e.g. a single candidate).
    CandidateMinMax,
    Unclassified,
}

impl Classification {
    pub fn is_min(self) -> bool {
        matches!(self, Self::CandidateMin | Self::CandidateMinMax)
    }

    pub fn is_max(self) -> bool {
        matches!(self, Self::CandidateMax | Self::CandidateMinMax)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::CandidateMin => "candidate-min",
            Self::CandidateMax => "candidate-max",
            Self::CandidateMinMax => "candidate-min-max",
            Self::Unclassified => "unclassified",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriticalPoint {
    /// Standard coordinates of the candidate.
    pub point: Vec<f64>,
    /// Objective multiplier; `1` in normal form.
    pub mu: f64,
    pub lambda: Vec<f64>,
    /// Max-norm of the standard parts of the lifted hyperreal residual.
    pub residual_norm: f64,
    /// Standard part of the objective at `point`.
    pub objective_st: f64,
    /// `|μ| <= tol` after normalization.
    pub abnormal: bool,
    /// Constraint gradients of the shadow are linearly dependent at the
    /// point (for one constraint: `∇st(g) = 0`).
    pub degenerate_constraints: bool,
    pub classification: Classification,
}

impl CriticalPoint {
    /// Multipliers rescaled so that `μ² + Σ λ_j² = 1`.
    pub fn normalized_multipliers(&self) -> (f64, Vec<f64>) {
        let norm = (self.mu * self.mu + self.lambda.iter().map(|l| l * l).sum::<f64>()).sqrt();
        if norm == 0.0 {
            return (self.mu, self.lambda.clone());
        }
        (
            self.mu / norm,
            self.lambda.iter().map(|l| l / norm).collect(),
        )
    }

    /// `λ_j / μ`, or `None` for abnormal points.
    pub fn multiplier_ratios(&self) -> Option<Vec<f64>> {
        (self.mu != 0.0 && !self.abnormal)
            .then(|| self.lambda.iter().map(|l| l / self.mu).collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    /// Verified candidates sorted by `objective_st` ascending.
    pub points: Vec<CriticalPoint>,
    pub seeds_tried: usize,
    pub seeds_converged: usize,
    pub diagnostics: Vec<String>,
}

/// Normal form: `∇f + Σ λ_j ∇g_j ≈ 0`, `g_j ≈ 0`.
pub fn solve_normal(p: &ProblemDef, opts: &SolverOptions) -> Result<SolveReport, SolveError> {
    let system = build_augmented(p, false)?;
    solve_system(p, &system, opts)
}

/// General form: `μ ∇f + Σ λ_j ∇g_j ≈ 0`, `g_j ≈ 0`, with
/// `μ² + Σ λ_j² = 1` so that the multipliers are not all infinitesimal.
pub fn solve_general(p: &ProblemDef, opts: &SolverOptions) -> Result<SolveReport, SolveError> {
    if p.m() == 0 {
        return Err(SolveError::NoConstraints);
    }
    let system = build_augmented(p, true)?;
    solve_system(p, &system, opts)
}

fn solve_system(
    p: &ProblemDef,
    system: &AugmentedSystem,
    opts: &SolverOptions,
) -> Result<SolveReport, SolveError> {
    opts.validate()?;
    let tol = p.tolerance();
    let newton = NewtonSystem::new(system.equations());
    let dim = newton.dim();

    let mut rng = ChaCha8Rng::seed_from_u64(opts.rng_seed);
    let starts: Vec<Vec<f64>> = (0..opts.seeds)
        .map(|_| {
            (0..dim)
                .map(|_| rng.gen_range(-opts.seed_box..=opts.seed_box))
                .collect()
        })
        .collect();

    let mut diagnostics = Vec::new();
    let mut failures = [0usize; 4];
    let mut roots: Vec<Root> = Vec::new();
    for start in &starts {
        match newton.solve(start, opts.max_iter, opts.newton_tol) {
            Ok(mut root) => {
                canonicalize_signs(system, &mut root.z, tol);
                roots.push(root);
            }
            Err(f) => failures[f as usize] += 1,
        }
    }
    let seeds_converged = roots.len();
    if failures[Failure::Singular as usize] > 0 {
        diagnostics.push(format!(
            "{} seed(s) abandoned at a singular Jacobian",
            failures[Failure::Singular as usize]
        ));
    }

    // Merge re-found roots, keeping the representative with the smaller residual.
    let mut unique: Vec<Root> = Vec::new();
    for root in roots {
        let close = unique.iter_mut().find(|u| {
            u.z[..system.n]
                .iter()
                .zip(&root.z[..system.n])
                .all(|(a, b)| (a - b).abs() <= opts.dedup_radius)
        });
        match close {
            Some(existing) => {
                if root.residual < existing.residual {
                    *existing = root;
                }
            }
            None => unique.push(root),
        }
    }

    let cfg = DiffConfig::with_tolerance(tol);
    let mut points = Vec::new();
    for root in unique {
        let candidate = critical_point_from(p, system, &root.z);
        match verify(p, &candidate, &cfg) {
            Ok(residual) if residual <= tol.value() => points.push(CriticalPoint {
                residual_norm: residual,
                ..candidate
            }),
            Ok(residual) => diagnostics.push(format!(
                "dropped root {:?}: lifted residual {residual:e} exceeds tolerance",
                candidate.point
            )),
            Err(e) => diagnostics.push(format!("dropped root {:?}: {e}", candidate.point)),
        }
    }
    points.sort_by(compare_points);

    if points.is_empty() {
        diagnostics.push(format!(
            "no critical point found from {} seed(s)",
            opts.seeds
        ));
    }
    let degenerate = points.iter().filter(|c| c.degenerate_constraints).count();
    if degenerate > 0 {
        diagnostics.push(format!(
            "{degenerate} point(s) have linearly dependent constraint gradients"
        ));
    }
    Ok(SolveReport {
        points,
        seeds_tried: opts.seeds,
        seeds_converged,
        diagnostics,
    })
}

fn compare_points(a: &CriticalPoint, b: &CriticalPoint) -> Ordering {
    a.objective_st.total_cmp(&b.objective_st).then_with(|| {
        a.point
            .iter()
            .zip(&b.point)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(Ordering::Equal)
    })
}

/// Flips the multiplier signs so that the first non-negligible multiplier
/// (`μ`, else `λ_1`, ...) is positive. Only the general form is scale-free.
fn canonicalize_signs(system: &AugmentedSystem, z: &mut [f64], tol: Tolerance) {
    let Some(mu) = system.mu_index() else { return };
    let multipliers = mu..mu + 1 + system.m;
    let lead = z[multipliers.clone()]
        .iter()
        .copied()
        .find(|v| v.abs() > tol.value());
    if lead.is_some_and(|v| v < 0.0) {
        for v in &mut z[multipliers] {
            *v = -*v;
        }
    }
}

fn critical_point_from(p: &ProblemDef, system: &AugmentedSystem, z: &[f64]) -> CriticalPoint {
    let tol = p.tolerance().value();
    let point = z[..system.n].to_vec();
    let mu = system.mu_index().map_or(1.0, |i| z[i]);
    let lambda: Vec<f64> = (0..system.m).map(|j| z[system.lambda_index(j)]).collect();
    CriticalPoint {
        objective_st: p.objective().eval_standard(&point),
        abnormal: system.general && mu.abs() <= tol,
        degenerate_constraints: constraints_degenerate(p, &point, tol),
        residual_norm: f64::INFINITY,
        classification: Classification::Unclassified,
        point,
        mu,
        lambda,
    }
}

/// True when the shadow constraint gradients at `x` have rank below `m`.
///
/// Roots where the gradients vanish are singular for Newton and are only
/// located to about the square root of the residual accuracy, hence the
/// `sqrt(tol)` threshold on the smallest singular value.
fn constraints_degenerate(p: &ProblemDef, x: &[f64], tol: f64) -> bool {
    let (n, m) = (p.n(), p.m());
    if m == 0 {
        return false;
    }
    let shadows: Vec<Expr> = p.constraints().iter().map(Expr::shadow).collect();
    let jac = DMatrix::from_fn(m, n, |j, i| shadows[j].symbolic_diff(i).eval_standard(x));
    let sv = jac.singular_values();
    let smallest = sv.iter().copied().fold(f64::INFINITY, f64::min);
    let largest = sv.iter().copied().fold(0.0, f64::max);
    smallest <= tol.sqrt() * largest.max(1.0)
}

/// Lifts the candidate to a hyperreal point and returns the max-norm of the
/// standard parts of `μ ∇f + Σ λ_j ∇g_j` and of every `g_j`, computed with
/// difference-quotient gradients of the original (unshadowed) expressions.
pub fn verify(p: &ProblemDef, c: &CriticalPoint, cfg: &DiffConfig) -> Result<f64, DiffError> {
    let x = HyperPoint::from_standard(p.space(), &c.point);
    let grad_f = gradient(p.objective(), &x, cfg)?;
    let mut residual: Vec<Hyperreal> = grad_f.partials().iter().map(|d| d.scale(c.mu)).collect();
    let mut worst: f64 = 0.0;
    for (g, &lambda) in p.constraints().iter().zip(&c.lambda) {
        let grad_g = gradient(g, &x, cfg)?;
        for (r, d) in residual.iter_mut().zip(grad_g.partials()) {
            *r = r.checked_add(&d.scale(lambda))?;
        }
        worst = worst.max(g.eval(&x)?.st().abs());
    }
    Ok(residual.iter().map(|r| r.st().abs()).fold(worst, f64::max))
}

/// Labels the candidates with the smallest and largest objective standard
/// parts (ties within `tol`). Labels compare found candidates only; they are
/// not extremality proofs.
pub fn classify(points: &[CriticalPoint], tol: Tolerance) -> Vec<CriticalPoint> {
    let Some(min) = points.iter().map(|c| c.objective_st).min_by(f64::total_cmp) else {
        return Vec::new();
    };
    let max = points
        .iter()
        .map(|c| c.objective_st)
        .max_by(f64::total_cmp)
        .unwrap_or(min);
    points
        .iter()
        .map(|c| {
            let is_min = (c.objective_st - min).abs() <= tol.value();
            let is_max = (c.objective_st - max).abs() <= tol.value();
            let classification = match (is_min, is_max) {
                (true, true) => Classification::CandidateMinMax,
                (true, false) => Classification::CandidateMin,
                (false, true) => Classification::CandidateMax,
                (false, false) => Classification::Unclassified,
            };
            CriticalPoint {
                classification,
                ..c.clone()
            }
        })
        .collect()
}
