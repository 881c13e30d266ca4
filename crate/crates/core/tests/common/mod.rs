//! Helpers shared by the integration and acceptance tests: a seeded random
//! expression generator and an independent linear solver for KKT oracles.
#![allow(dead_code)]

use mulagrange::hyperreal::{GeneratorSet, Hyperreal, Space};
use mulagrange::mudiff::{gradient, DiffConfig, HyperPoint};
use mulagrange::Expr;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const VARS: [&str; 3] = ["x", "y", "z"];

pub fn vars() -> Vec<String> {
    VARS.iter().map(|s| s.to_string()).collect()
}

pub fn space() -> Space {
    Space::new(GeneratorSet::new(["eps", "delta"]).unwrap(), 4).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn problem_path(name: &str) -> String {
    format!("{}/problems/{name}", env!("CARGO_MANIFEST_DIR"))
}

/// Random expression trees shaped like parser output: nonnegative real
/// literals, generator literals, variables, and the DSL operators.
pub struct ExprGen<'a> {
    pub space: &'a Space,
    pub n_vars: usize,
    pub max_depth: u32,
    /// Allow division by `c + var^2` (always a unit at finite points).
    pub rational: bool,
}

impl ExprGen<'_> {
    pub fn polynomial(space: &Space) -> ExprGen<'_> {
        ExprGen {
            space,
            n_vars: VARS.len(),
            max_depth: 3,
            rational: false,
        }
    }

    pub fn rational(space: &Space) -> ExprGen<'_> {
        ExprGen {
            rational: true,
            ..ExprGen::polynomial(space)
        }
    }

    fn literal(&self, rng: &mut impl Rng) -> Expr {
        let v: f64 = rng.gen_range(0.0..2.0);
        Expr::Const(Hyperreal::from_real((v * 1000.0).round() / 1000.0))
    }

    fn leaf(&self, rng: &mut impl Rng) -> Expr {
        let names = self.space.generators().names();
        match rng.gen_range(0..10) {
            0..=4 => Expr::Var(rng.gen_range(0..self.n_vars)),
            5..=7 => self.literal(rng),
            _ if names.is_empty() => self.literal(rng),
            _ => Expr::Const(
                self.space
                    .generator(&names[rng.gen_range(0..names.len())])
                    .unwrap(),
            ),
        }
    }

    pub fn gen(&self, rng: &mut impl Rng) -> Expr {
        self.node(rng, self.max_depth)
    }

    fn node(&self, rng: &mut impl Rng, depth: u32) -> Expr {
        if depth == 0 || rng.gen_bool(0.25) {
            return self.leaf(rng);
        }
        let b = |e: Expr| Box::new(e);
        match rng.gen_range(0..9) {
            0 | 1 => Expr::Add(b(self.node(rng, depth - 1)), b(self.node(rng, depth - 1))),
            2 => Expr::Sub(b(self.node(rng, depth - 1)), b(self.node(rng, depth - 1))),
            3 | 4 => Expr::Mul(b(self.node(rng, depth - 1)), b(self.node(rng, depth - 1))),
            5 => Expr::Neg(b(self.node(rng, depth - 1))),
            // Powers only of shallow subtrees keep magnitudes moderate.
            6 => Expr::PowInt(b(self.node(rng, depth.min(2) - 1)), rng.gen_range(0..=3)),
            7 => {
                let num = self.node(rng, depth - 1);
                let den = if self.rational {
                    let var = Expr::Var(rng.gen_range(0..self.n_vars));
                    Expr::Add(
                        b(Expr::Const(Hyperreal::from_real(rng.gen_range(0.5..2.0)))),
                        b(Expr::PowInt(b(var), 2)),
                    )
                } else {
                    Expr::Const(Hyperreal::from_real(rng.gen_range(0.5..2.0)))
                };
                Expr::Div(b(num), b(den))
            }
            _ => {
                // Perturbed coefficient (c + generator) * subtree.
                let c = Expr::Add(b(self.literal(rng)), b(self.leaf_generator(rng)));
                Expr::Mul(b(c), b(self.node(rng, depth - 1)))
            }
        }
    }

    fn leaf_generator(&self, rng: &mut impl Rng) -> Expr {
        let names = self.space.generators().names();
        if names.is_empty() {
            return self.literal(rng);
        }
        Expr::Const(
            self.space
                .generator(&names[rng.gen_range(0..names.len())])
                .unwrap(),
        )
    }
}

pub fn standard_point(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.5..1.5)).collect()
}

/// A finite hyperreal `c + a*eps + b*delta + d*eps*delta` with random coefficients.
pub fn finite_hyperreal(rng: &mut impl Rng, space: &Space, standard: f64) -> Hyperreal {
    let mut x = space.real(standard);
    for name in space.generators().names() {
        let g = space.generator(name).unwrap();
        x = x + g.scale(rng.gen_range(-2.0..2.0));
    }
    x
}

/// Standard point plus a random infinitesimal displacement in every coordinate.
pub fn nearby_point(rng: &mut impl Rng, space: &Space, standard: &[f64]) -> HyperPoint {
    let coords = standard
        .iter()
        .map(|&s| finite_hyperreal(rng, space, s))
        .collect();
    HyperPoint::new(space, coords).unwrap()
}

/// Rejects test cases whose values or gradient exceed `limit` in magnitude,
/// where an absolute tolerance of 1e-9 would fall below float resolution.
pub fn well_scaled(f: &Expr, x: &HyperPoint, limit: f64) -> bool {
    let Ok(v) = f.eval(x) else { return false };
    let Ok(g) = gradient(f, x, &DiffConfig::default()) else {
        return false;
    };
    v.st().abs() <= limit && g.standard_parts().iter().all(|p| p.abs() <= limit)
}

/// Gaussian elimination with partial pivoting; `a` is row-major `n x n`.
pub fn solve_linear(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-14 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let factor = a[row][col] / a[col][col];
            let (top, bottom) = a.split_at_mut(row);
            for (dst, src) in bottom[0][col..].iter_mut().zip(&top[col][col..]) {
                *dst -= factor * src;
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let tail: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - tail) / a[row][row];
    }
    Some(x)
}

/// `min ½xᵀQx + cᵀx + eps*x₁  s.t.  aᵀx = b` as problem-file text plus its
/// closed-form KKT solution `(x, λ)` from `[Q a; aᵀ 0][x; λ] = [−c; b]`.
pub struct QuadraticProblem {
    pub text: String,
    pub x: Vec<f64>,
    pub lambda: f64,
}

pub fn random_quadratic(rng: &mut impl Rng) -> QuadraticProblem {
    let n = rng.gen_range(2..=3);
    let names = &VARS[..n];
    // Q = AᵀA + I is symmetric positive definite.
    let a_mat: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    let q: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    (0..n).map(|k| a_mat[k][i] * a_mat[k][j]).sum::<f64>()
                        + if i == j { 1.0 } else { 0.0 }
                })
                .collect()
        })
        .collect();
    let c: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
    let mut a: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    a[0] += if a[0] >= 0.0 { 0.5 } else { -0.5 };
    let b: f64 = rng.gen_range(-1.0..1.0);

    let mut objective = Vec::new();
    for i in 0..n {
        objective.push(format!("{}*{}^2", 0.5 * q[i][i], names[i]));
        for j in i + 1..n {
            objective.push(format!("{}*{}*{}", q[i][j], names[i], names[j]));
        }
        objective.push(format!("{}*{}", c[i], names[i]));
    }
    objective.push(format!("eps*{}", names[0]));
    let constraint: Vec<String> = (0..n).map(|i| format!("{}*{}", a[i], names[i])).collect();
    let text = format!(
        "generators: eps\nvars: {}\nobjective: {}\nconstraint: {} - {}\n",
        names.join(", "),
        objective.join(" + "),
        constraint.join(" + "),
        b
    );

    let mut kkt = vec![vec![0.0; n + 1]; n + 1];
    let mut rhs = vec![0.0; n + 1];
    for i in 0..n {
        kkt[i][..n].copy_from_slice(&q[i]);
        kkt[i][n] = a[i];
        kkt[n][i] = a[i];
        rhs[i] = -c[i];
    }
    rhs[n] = b;
    let sol = solve_linear(kkt, rhs)
        .expect("KKT matrix of an SPD objective with a nonzero constraint is regular");
    QuadraticProblem {
        text,
        x: sol[..n].to_vec(),
        lambda: sol[n],
    }
}
