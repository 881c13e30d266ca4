use std::str::FromStr;

use thiserror::Error;

use super::{parse_at, Expr, ParseError};
use crate::hyperreal::{
    is_identifier, GeneratorSet, HyperrealError, Space, Tolerance, DEFAULT_ORDER,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProblemError {
    #[error("line {line}: expected `key: value`")]
    MalformedLine { line: usize },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: duplicate key `{key}`")]
    DuplicateKey { line: usize, key: String },
    #[error("missing required key `{0}`")]
    MissingKey(&'static str),
    #[error("line {line}: invalid value for `{key}`: {reason}")]
    InvalidValue {
        line: usize,
        key: &'static str,
        reason: String,
    },
    #[error("invalid variable name `{0}`")]
    InvalidVariable(String),
    #[error("duplicate variable `{0}`")]
    DuplicateVariable(String),
    #[error("`{0}` is declared both as a variable and as a generator")]
    NameClash(String),
    #[error("at least one variable is required")]
    NoVariables,
    #[error("too many constraints: {m} constraints for {n} variables (need m < n)")]
    TooManyConstraints { m: usize, n: usize },
    #[error("expression refers to variable index {index} but only {n} variables are declared")]
    VariableOutOfRange { index: usize, n: usize },
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Hyperreal(#[from] HyperrealError),
}

/// A constrained problem: extremize `objective` subject to every
/// `constraint ≈ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemDef {
    space: Space,
    vars: Vec<String>,
    objective: Expr,
    constraints: Vec<Expr>,
    tolerance: Tolerance,
}

impl ProblemDef {
    pub fn new(
        space: Space,
        vars: Vec<String>,
        objective: Expr,
        constraints: Vec<Expr>,
        tolerance: Tolerance,
    ) -> Result<Self, ProblemError> {
        validate_vars(&vars, space.generators())?;
        let (n, m) = (vars.len(), constraints.len());
        if m >= n {
            return Err(ProblemError::TooManyConstraints { m, n });
        }
        for e in std::iter::once(&objective).chain(&constraints) {
            if let Some(index) = e.max_var().filter(|&i| i >= n) {
                return Err(ProblemError::VariableOutOfRange { index, n });
            }
        }
        Ok(Self {
            space,
            vars,
            objective,
            constraints,
            tolerance,
        })
    }

    /// Parses the line-oriented problem file format:
    ///
    /// ```text
    /// generators: eps, delta
    /// vars: x, y, z
    /// objective: x*y*z + eps
    /// constraint: x^2 + 2*(y+delta)^2 + 3*z^2 - 1
    /// trunc: 4
    /// tol: 1e-9
    /// ```
    pub fn parse_file(text: &str) -> Result<Self, ProblemError> {
        let mut generators = None;
        let mut vars = None;
        let mut objective = None;
        let mut constraints = Vec::new();
        let mut trunc = None;
        let mut tol = None;

        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("");
            if content.trim().is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once(':')
                .ok_or(ProblemError::MalformedLine { line })?;
            let key = key.trim();
            // 1-based column of the first non-blank character of the value
            let value_col = key_prefix_len(content) + 1 + leading_ws(value) + 1;
            let value_trim = value.trim();
            let once = |slot: &Option<(usize, String)>| match slot {
                Some(_) => Err(ProblemError::DuplicateKey {
                    line,
                    key: key.to_string(),
                }),
                None => Ok(Some((line, value_trim.to_string()))),
            };
            match key {
                "generators" => generators = once(&generators)?,
                "vars" => vars = once(&vars)?,
                "trunc" => trunc = once(&trunc)?,
                "tol" => tol = once(&tol)?,
                "objective" => {
                    if objective.is_some() {
                        return Err(ProblemError::DuplicateKey {
                            line,
                            key: key.to_string(),
                        });
                    }
                    objective = Some((line, value_col, value_trim.to_string()));
                }
                "constraint" => constraints.push((line, value_col, value_trim.to_string())),
                _ => {
                    return Err(ProblemError::UnknownKey {
                        line,
                        key: key.to_string(),
                    })
                }
            }
        }

        let (_, gen_text) = generators.ok_or(ProblemError::MissingKey("generators"))?;
        let (vars_line, vars_text) = vars.ok_or(ProblemError::MissingKey("vars"))?;
        let (obj_line, obj_col, obj_text) =
            objective.ok_or(ProblemError::MissingKey("objective"))?;

        let order = match trunc {
            None => DEFAULT_ORDER,
            Some((line, v)) => match v.parse::<u32>() {
                Ok(k) if k > 0 => k,
                _ => {
                    return Err(ProblemError::InvalidValue {
                        line,
                        key: "trunc",
                        reason: format!("expected a positive integer, found `{v}`"),
                    })
                }
            },
        };
        let tolerance = match tol {
            None => Tolerance::default(),
            Some((line, v)) => v
                .parse::<f64>()
                .ok()
                .and_then(|t| Tolerance::new(t).ok())
                .ok_or_else(|| ProblemError::InvalidValue {
                    line,
                    key: "tol",
                    reason: format!("expected a nonnegative number, found `{v}`"),
                })?,
        };

        let space = Space::new(GeneratorSet::new(split_list(&gen_text))?, order)?;
        let vars: Vec<String> = split_list(&vars_text);
        if vars.is_empty() {
            return Err(ProblemError::InvalidValue {
                line: vars_line,
                key: "vars",
                reason: "at least one variable is required".into(),
            });
        }
        validate_vars(&vars, space.generators())?;

        let objective = parse_at(&obj_text, &vars, &space, obj_line, obj_col)?;
        let constraints = constraints
            .iter()
            .map(|(line, col, text)| parse_at(text, &vars, &space, *line, *col))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(space, vars, objective, constraints, tolerance)
    }

    pub fn space(&self) -> &Space {
        &self.space
    }

    pub fn vars(&self) -> &[String] {
        &self.vars
    }

    pub fn objective(&self) -> &Expr {
        &self.objective
    }

    pub fn constraints(&self) -> &[Expr] {
        &self.constraints
    }

    pub fn tolerance(&self) -> Tolerance {
        self.tolerance
    }

    pub fn with_tolerance(mut self, tolerance: Tolerance) -> Self {
        self.tolerance = tolerance;
        self
    }

    /// Number of variables.
    pub fn n(&self) -> usize {
        self.vars.len()
    }

    /// Number of side conditions.
    pub fn m(&self) -> usize {
        self.constraints.len()
    }
}

impl FromStr for ProblemDef {
    type Err = ProblemError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::parse_file(s)
    }
}

fn split_list(text: &str) -> Vec<String> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(String::from)
        .collect()
}

fn leading_ws(s: &str) -> usize {
    s.chars().take_while(|c| c.is_whitespace()).count()
}

fn key_prefix_len(content: &str) -> usize {
    content.chars().take_while(|&c| c != ':').count()
}

fn validate_vars(vars: &[String], generators: &GeneratorSet) -> Result<(), ProblemError> {
    if vars.is_empty() {
        return Err(ProblemError::NoVariables);
    }
    for (i, v) in vars.iter().enumerate() {
        if !is_identifier(v) {
            return Err(ProblemError::InvalidVariable(v.clone()));
        }
        if vars[..i].contains(v) {
            return Err(ProblemError::DuplicateVariable(v.clone()));
        }
        if generators.index_of(v).is_some() {
            return Err(ProblemError::NameClash(v.clone()));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::ParseErrorKind;

    const EXAMPLE: &str = "\
# constrained example
generators: eps, delta
vars: x, y, z
objective: x*y*z + eps
constraint: x^2 + 2*(y+delta)^2 + 3*z^2 - 1   # ellipsoid
trunc: 4
tol: 1e-9
";

    #[test]
    fn parses_full_file() {
        let p: ProblemDef = EXAMPLE.parse().unwrap();
        assert_eq!(p.vars(), &["x", "y", "z"]);
        assert_eq!(p.space().generators().names(), &["eps", "delta"]);
        assert_eq!(p.space().order(), 4);
        assert_eq!(p.m(), 1);
        assert_eq!(p.tolerance().value(), 1e-9);
    }

    #[test]
    fn defaults_for_optional_keys() {
        let p =
            ProblemDef::parse_file("generators: eps\nvars: x, y\nobjective: x + eps*y\n").unwrap();
        assert_eq!(p.space().order(), DEFAULT_ORDER);
        assert_eq!(p.tolerance(), Tolerance::default());
        assert_eq!(p.m(), 0);
    }

    #[test]
    fn empty_generator_list_is_allowed() {
        let p = ProblemDef::parse_file(
            "generators:\nvars: x, y\nobjective: x^2+y^2\nconstraint: x+y-2\n",
        )
        .unwrap();
        assert!(p.space().generators().is_empty());
    }

    #[test]
    fn rejects_unknown_and_duplicate_keys() {
        let err =
            ProblemDef::parse_file("generators: eps\nvars: x\nobjective: x\nfoo: 1\n").unwrap_err();
        assert_eq!(
            err,
            ProblemError::UnknownKey {
                line: 4,
                key: "foo".into()
            }
        );
        let err = ProblemDef::parse_file("generators: eps\nvars: x\nvars: y\nobjective: x\n")
            .unwrap_err();
        assert_eq!(
            err,
            ProblemError::DuplicateKey {
                line: 3,
                key: "vars".into()
            }
        );
        let err = ProblemDef::parse_file("generators: eps\nvars: x\nobjective x\n").unwrap_err();
        assert_eq!(err, ProblemError::MalformedLine { line: 3 });
    }

    #[test]
    fn rejects_missing_keys() {
        assert_eq!(
            ProblemDef::parse_file("vars: x\nobjective: x\n").unwrap_err(),
            ProblemError::MissingKey("generators")
        );
        assert_eq!(
            ProblemDef::parse_file("generators: e\nobjective: x\n").unwrap_err(),
            ProblemError::MissingKey("vars")
        );
        assert_eq!(
            ProblemDef::parse_file("generators: e\nvars: x\n").unwrap_err(),
            ProblemError::MissingKey("objective")
        );
    }

    #[test]
    fn rejects_too_many_constraints() {
        let err = ProblemDef::parse_file(
            "generators:\nvars: x, y\nobjective: x\nconstraint: x\nconstraint: y\n",
        )
        .unwrap_err();
        assert_eq!(err, ProblemError::TooManyConstraints { m: 2, n: 2 });
    }

    #[test]
    fn rejects_bad_values_and_names() {
        let err = ProblemDef::parse_file("generators: eps\nvars: x\nobjective: x\ntrunc: 0\n")
            .unwrap_err();
        assert!(matches!(
            err,
            ProblemError::InvalidValue {
                line: 4,
                key: "trunc",
                ..
            }
        ));
        let err = ProblemDef::parse_file("generators: eps\nvars: x\nobjective: x\ntol: -1\n")
            .unwrap_err();
        assert!(matches!(
            err,
            ProblemError::InvalidValue {
                line: 4,
                key: "tol",
                ..
            }
        ));
        let err =
            ProblemDef::parse_file("generators: eps\nvars: eps\nobjective: eps\n").unwrap_err();
        assert_eq!(err, ProblemError::NameClash("eps".into()));
        let err =
            ProblemDef::parse_file("generators: eps\nvars: x, x\nobjective: x\n").unwrap_err();
        assert_eq!(err, ProblemError::DuplicateVariable("x".into()));
        let err = ProblemDef::parse_file("generators: e e\nvars: x\nobjective: x\n").unwrap_err();
        assert!(matches!(
            err,
            ProblemError::Hyperreal(HyperrealError::InvalidGenerator(_))
        ));
    }

    #[test]
    fn expression_errors_carry_file_positions() {
        let err = ProblemDef::parse_file("generators: eps\nvars: x, y\nobjective:  x + * y\n")
            .unwrap_err();
        match err {
            ProblemError::Parse(e) => {
                assert_eq!((e.line, e.column), (3, 17));
                assert_eq!(e.kind, ParseErrorKind::UnexpectedToken("*".into()));
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
