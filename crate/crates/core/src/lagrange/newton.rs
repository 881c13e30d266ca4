//! Damped Newton iteration on a square system of expression residuals.

use nalgebra::{DMatrix, DVector};

use crate::expr::Expr;

/// Maximum number of step halvings per Newton iteration.
pub const MAX_HALVINGS: usize = 30;

/// A square nonlinear system `R(z) = 0` with its symbolic Jacobian.
#[derive(Debug, Clone)]
pub struct NewtonSystem {
    equations: Vec<Expr>,
    jacobian: Vec<Vec<Expr>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Failure {
    Singular,
    Stalled,
    Diverged,
    MaxIterations,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Root {
    pub z: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
}

impl NewtonSystem {
    /// `equations` must have one entry per unknown.
    pub fn new(equations: Vec<Expr>) -> Self {
        let n = equations.len();
        let jacobian = equations
            .iter()
            .map(|e| (0..n).map(|j| e.symbolic_diff(j)).collect())
            .collect();
        Self {
            equations,
            jacobian,
        }
    }

    pub fn dim(&self) -> usize {
        self.equations.len()
    }

    pub fn equations(&self) -> &[Expr] {
        &self.equations
    }

    pub fn residual(&self, z: &[f64]) -> DVector<f64> {
        DVector::from_iterator(
            self.dim(),
            self.equations.iter().map(|e| e.eval_standard(z)),
        )
    }

    pub fn jacobian(&self, z: &[f64]) -> DMatrix<f64> {
        let n = self.dim();
        DMatrix::from_fn(n, n, |i, j| self.jacobian[i][j].eval_standard(z))
    }

    /// Runs damped Newton from `start`: full steps are halved until the
    /// max-norm of the residual decreases. Converged when that norm is at
    /// most `tol`.
    pub fn solve(&self, start: &[f64], max_iter: usize, tol: f64) -> Result<Root, Failure> {
        let mut z = DVector::from_column_slice(start);
        let mut r = self.residual(z.as_slice());
        let mut norm = r.amax();
        for iteration in 0..=max_iter {
            if !norm.is_finite() {
                return Err(Failure::Diverged);
            }
            if norm <= tol {
                return Ok(Root {
                    z: z.as_slice().to_vec(),
                    residual: norm,
                    iterations: iteration,
                });
            }
            if iteration == max_iter {
                break;
            }
            let jac = self.jacobian(z.as_slice());
            let step = jac.lu().solve(&(-&r)).ok_or(Failure::Singular)?;
            if !step.iter().all(|v| v.is_finite()) {
                return Err(Failure::Singular);
            }
            let mut t = 1.0;
            let mut accepted = false;
            for _ in 0..=MAX_HALVINGS {
                let trial = &z + &step * t;
                let trial_r = self.residual(trial.as_slice());
                let trial_norm = trial_r.amax();
                if trial_norm < norm {
                    z = trial;
                    r = trial_r;
                    norm = trial_norm;
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            if !accepted {
                return Err(Failure::Stalled);
            }
        }
        Err(Failure::MaxIterations)
    }
}
