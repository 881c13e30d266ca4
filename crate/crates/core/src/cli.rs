//! Command-line front end.
//!
//! Every record is one JSON object per line (`--table` switches `solve` and
//! `grad` to aligned text). Exit codes: 0 success with results, 1 success
//! without results, 2 user error.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use crate::expr::ProblemDef;
use crate::hyperreal::{format_significant, Tolerance, SIGNIFICANT_DIGITS};
use crate::lagrange::{
    classify, solve_general, solve_normal, CriticalPoint, SolveError, SolverOptions,
};
use crate::mudiff::{gradient, DiffConfig, HyperPoint, Step};

pub const EXIT_OK: i32 = 0;
pub const EXIT_NO_RESULTS: i32 = 1;
pub const EXIT_USER_ERROR: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "mulagrange",
    version,
    about = "Gradients and Lagrange multipliers for hyperreal-perturbed functions"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print the gradient of the objective at a standard point.
    Grad {
        file: PathBuf,
        /// `x=1,y=2,z=0`, or values in variable order: `1,2,0`.
        #[arg(long, allow_hyphen_values = true)]
        at: String,
        /// Use a declared generator as the step instead of a fresh `h`.
        #[arg(long)]
        step: Option<String>,
        #[arg(long, default_value_t = 1)]
        step_power: u32,
        #[command(flatten)]
        format: FormatArgs,
    },
    /// Find constrained critical points with Lagrange multipliers.
    Solve {
        file: PathBuf,
        /// Use the general rule `μ∇f + Σλ∇g ≈ 0` (detects abnormal points).
        #[arg(long)]
        general: bool,
        #[arg(long, default_value_t = SolverOptions::default().seeds)]
        seeds: usize,
        /// Overrides the problem file's `tol`.
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long, default_value_t = SolverOptions::default().rng_seed)]
        rng_seed: u64,
        #[arg(long, default_value_t = SolverOptions::default().seed_box)]
        seed_box: f64,
        #[arg(long, default_value_t = SolverOptions::default().max_iter)]
        max_iter: usize,
        #[command(flatten)]
        format: FormatArgs,
    },
    /// Parse and validate a problem file.
    Check { file: PathBuf },
}

#[derive(Debug, Args)]
#[group(multiple = false)]
struct FormatArgs {
    /// JSON lines (default).
    #[arg(long)]
    json: bool,
    /// Human-readable table.
    #[arg(long)]
    table: bool,
}

#[derive(Debug)]
struct UserError(String);

impl<E: std::fmt::Display> From<E> for UserError {
    fn from(e: E) -> Self {
        Self(e.to_string())
    }
}

/// Parses `args` (including the program name) and runs the command,
/// writing records to `out` and error messages to `err`. Returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() {
                EXIT_USER_ERROR
            } else {
                EXIT_OK
            };
            let target: &mut dyn Write = if e.use_stderr() { err } else { out };
            let _ = write!(target, "{}", e.render());
            return code;
        }
    };
    let result = match cli.command {
        Command::Grad {
            file,
            at,
            step,
            step_power,
            format,
        } => cmd_grad(&file, &at, step, step_power, format.table, out),
        Command::Solve {
            file,
            general,
            seeds,
            tol,
            rng_seed,
            seed_box,
            max_iter,
            format,
        } => {
            let opts = SolverOptions {
                seeds,
                rng_seed,
                seed_box,
                max_iter,
                ..SolverOptions::default()
            };
            cmd_solve(&file, general, tol, &opts, format.table, out)
        }
        Command::Check { file } => cmd_check(&file, out),
    };
    match result {
        Ok(code) => code,
        Err(UserError(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_USER_ERROR
        }
    }
}

fn load(file: &Path) -> Result<ProblemDef, UserError> {
    let text =
        std::fs::read_to_string(file).map_err(|e| UserError(format!("{}: {e}", file.display())))?;
    ProblemDef::parse_file(&text).map_err(|e| UserError(format!("{}: {e}", file.display())))
}

/// Parses `x=1,y=2` (any order, every variable exactly once) or `1,2` (variable order).
fn parse_assignment(text: &str, vars: &[String]) -> Result<Vec<f64>, UserError> {
    let parts: Vec<&str> = text
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .collect();
    let number = |s: &str| {
        s.trim()
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| UserError(format!("`{s}` is not a finite real number")))
    };
    if parts.iter().all(|p| !p.contains('=')) {
        if parts.len() != vars.len() {
            return Err(UserError(format!(
                "--at gives {} value(s) for {} variable(s)",
                parts.len(),
                vars.len()
            )));
        }
        return parts.iter().map(|p| number(p)).collect();
    }
    let mut values: Vec<Option<f64>> = vec![None; vars.len()];
    for part in parts {
        let (name, value) = part
            .split_once('=')
            .ok_or_else(|| UserError(format!("expected `name=value`, found `{part}`")))?;
        let name = name.trim();
        let index = vars
            .iter()
            .position(|v| v == name)
            .ok_or_else(|| UserError(format!("unknown variable `{name}` in --at")))?;
        if values[index].replace(number(value)?).is_some() {
            return Err(UserError(format!(
                "variable `{name}` assigned twice in --at"
            )));
        }
    }
    values
        .into_iter()
        .zip(vars)
        .map(|(v, name)| v.ok_or_else(|| UserError(format!("missing variable `{name}` in --at"))))
        .collect()
}

#[derive(Serialize)]
struct PartialRecord<'a> {
    var: &'a str,
    value: String,
    st: f64,
}

#[derive(Serialize)]
struct GradientRecord<'a> {
    kind: &'static str,
    vars: &'a [String],
    at: Vec<f64>,
    step: String,
    partials: Vec<PartialRecord<'a>>,
}

fn cmd_grad(
    file: &Path,
    at: &str,
    step: Option<String>,
    step_power: u32,
    table: bool,
    out: &mut dyn Write,
) -> Result<i32, UserError> {
    let problem = load(file)?;
    let coords = parse_assignment(at, problem.vars())?;
    let cfg = DiffConfig {
        step: match step {
            Some(name) => Step::Generator {
                name,
                power: step_power,
            },
            None => Step::Fresh { power: step_power },
        },
        tolerance: problem.tolerance(),
        ..DiffConfig::default()
    };
    let x = HyperPoint::from_standard(problem.space(), &coords);
    let grad = gradient(problem.objective(), &x, &cfg)?;
    let step_text = grad
        .space()
        .map(|s| s.term(grad.step_used().clone(), 1.0).to_string())
        .unwrap_or_default();
    let record = GradientRecord {
        kind: "gradient",
        vars: problem.vars(),
        at: coords,
        step: step_text,
        partials: problem
            .vars()
            .iter()
            .zip(grad.partials())
            .map(|(v, p)| PartialRecord {
                var: v,
                value: p.to_string(),
                st: p.st(),
            })
            .collect(),
    };
    if table {
        writeln!(
            out,
            "{:<12} {:>20}  value (step {})",
            "var", "st", record.step
        )?;
        for p in &record.partials {
            writeln!(out, "{:<12} {:>20}  {}", p.var, fmt_num(p.st), p.value)?;
        }
    } else {
        writeln!(out, "{}", serde_json::to_string(&record)?)?;
    }
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct CriticalPointRecord<'a> {
    kind: &'static str,
    vars: &'a [String],
    point: &'a [f64],
    mu: f64,
    lambda: &'a [f64],
    residual: f64,
    objective: f64,
    objective_rendered: String,
    abnormal: bool,
    degenerate_constraints: bool,
    classification: &'static str,
}

fn cmd_solve(
    file: &Path,
    general: bool,
    tol: Option<f64>,
    opts: &SolverOptions,
    table: bool,
    out: &mut dyn Write,
) -> Result<i32, UserError> {
    let mut problem = load(file)?;
    if let Some(t) = tol {
        problem = problem.with_tolerance(Tolerance::new(t)?);
    }
    let report = if general {
        solve_general(&problem, opts)
    } else {
        solve_normal(&problem, opts)
    }
    .map_err(|e| match e {
        SolveError::TooManyConstraints { .. } => UserError("too many constraints".into()),
        other => UserError(other.to_string()),
    })?;
    let points = classify(&report.points, problem.tolerance());
    let rendered: Vec<String> = points
        .iter()
        .map(|c| render_objective(&problem, c))
        .collect::<Result<_, _>>()?;

    if table {
        write_table(out, &problem, &points, &rendered)?;
    } else {
        for (c, objective_rendered) in points.iter().zip(rendered) {
            let record = CriticalPointRecord {
                kind: "critical-point",
                vars: problem.vars(),
                point: &c.point,
                mu: c.mu,
                lambda: &c.lambda,
                residual: c.residual_norm,
                objective: c.objective_st,
                objective_rendered,
                abnormal: c.abnormal,
                degenerate_constraints: c.degenerate_constraints,
                classification: c.classification.as_str(),
            };
            writeln!(out, "{}", serde_json::to_string(&record)?)?;
        }
    }
    let status = if points.is_empty() {
        "no-results"
    } else {
        "ok"
    };
    let summary = json!({
        "kind": "diagnostic",
        "status": status,
        "form": if general { "general" } else { "normal" },
        "points": points.len(),
        "seeds": report.seeds_tried,
        "converged": report.seeds_converged,
        "messages": report.diagnostics,
    });
    if table {
        writeln!(
            out,
            "# {status}: {} point(s), {}/{} seeds converged",
            points.len(),
            report.seeds_converged,
            report.seeds_tried
        )?;
        for m in &report.diagnostics {
            writeln!(out, "# {m}")?;
        }
    } else {
        writeln!(out, "{summary}")?;
    }
    Ok(if points.is_empty() {
        EXIT_NO_RESULTS
    } else {
        EXIT_OK
    })
}

fn render_objective(problem: &ProblemDef, c: &CriticalPoint) -> Result<String, UserError> {
    let x = HyperPoint::from_standard(problem.space(), &c.point);
    Ok(problem.objective().eval(&x)?.to_string())
}

fn fmt_num(v: f64) -> String {
    format_significant(v, SIGNIFICANT_DIGITS)
}

fn write_table(
    out: &mut dyn Write,
    problem: &ProblemDef,
    points: &[CriticalPoint],
    rendered: &[String],
) -> std::io::Result<()> {
    let coords = |vals: &[f64]| {
        vals.iter()
            .map(|v| fmt_num(*v))
            .collect::<Vec<_>>()
            .join(", ")
    };
    writeln!(
        out,
        "{:<18} {:<44} {:<12} {:<30} {:>10}  flags",
        "classification",
        format!("({})", problem.vars().join(", ")),
        "mu",
        "lambda",
        "residual",
    )?;
    for (c, obj) in points.iter().zip(rendered) {
        let mut flags = Vec::new();
        if c.abnormal {
            flags.push("abnormal");
        }
        if c.degenerate_constraints {
            flags.push("degenerate");
        }
        writeln!(
            out,
            "{:<18} {:<44} {:<12} {:<30} {:>10.3e}  {}",
            c.classification.as_str(),
            format!("({})", coords(&c.point)),
            fmt_num(c.mu),
            format!("[{}]", coords(&c.lambda)),
            c.residual_norm,
            flags.join(",")
        )?;
        writeln!(out, "{:<18} f = {obj}", "")?;
    }
    Ok(())
}

fn cmd_check(file: &Path, out: &mut dyn Write) -> Result<i32, UserError> {
    let problem = load(file)?;
    let record = json!({
        "kind": "diagnostic",
        "status": "ok",
        "generators": problem.space().generators().names(),
        "vars": problem.vars(),
        "objective": problem.objective().render(problem.vars()).to_string(),
        "constraints": problem
            .constraints()
            .iter()
            .map(|g| g.render(problem.vars()).to_string())
            .collect::<Vec<_>>(),
        "trunc": problem.space().order(),
        "tol": problem.tolerance().value(),
    });
    writeln!(out, "{record}")?;
    Ok(EXIT_OK)
}
