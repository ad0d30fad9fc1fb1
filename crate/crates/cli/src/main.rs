use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use nalgebra::DMatrix;
use rankmoa::analysis::{analyze, AnalysisOptions, AnalysisReport};
use rankmoa::linalg::{to_rows, Mat};
use rankmoa::oracle::{run_suite, SUITES};
use rankmoa::problems::{builtin, load_problem, save_problem, ProblemFile, BUILTIN_NAMES};
use rankmoa::second_order::SecondOrderOptions;
use rankmoa::solver::{format_log, random_start, solve, SolverConfig};
use rankmoa::Error;

const SEED_ENV: &str = "RANKMOA_SEED";

#[derive(Parser)]
#[command(name = "rankmoa", version, about = "Optimality analysis for rank-constrained problems with affine constraints")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Classify a point: feasibility, qualification, first- and second-order conditions.
    Analyze {
        problem: PathBuf,
        /// Named point in the problem file, or a JSON file holding a row-major matrix.
        #[arg(long)]
        point: String,
        #[arg(long)]
        alpha: Option<f64>,
        /// Overrides the problem file's stationarity tolerance.
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        json: bool,
        /// Exit with status 3 when no qualification certifies the intersection rule.
        #[arg(long)]
        strict: bool,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the projected-gradient solver and write x.json, report.json and log.csv.
    Solve {
        problem: PathBuf,
        /// `rand`, a named point, or a JSON matrix file. Defaults to the zero matrix.
        #[arg(long)]
        x0: Option<String>,
        #[arg(long, default_value_t = 0.5)]
        alpha: f64,
        #[arg(long, default_value_t = 10_000)]
        iters: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "rankmoa-out")]
        out: PathBuf,
    },
    /// Run a named oracle suite; exits nonzero on any violation.
    Oracle {
        suite: String,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Write a built-in problem file.
    Export { name: String, path: PathBuf },
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Self { code, message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Parse { .. } | Error::Io(_) => 2,
            Error::Divergence { .. } => 4,
            _ => 1,
        };
        Self::new(code, e.to_string())
    }
}

fn seed_of(flag: Option<u64>) -> Result<u64, Failure> {
    if let Some(s) = flag {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| Failure::new(2, format!("{SEED_ENV} must be an unsigned integer, got '{v}'"))),
        Err(_) => Ok(0),
    }
}

fn read_matrix(path: &Path, shape: (usize, usize)) -> Result<Mat, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::new(2, format!("cannot read {}: {e}", path.display())))?;
    let rows: Vec<Vec<f64>> = serde_json::from_str(&text)
        .map_err(|e| Failure::new(2, format!("{}: expected a JSON array of rows: {e}", path.display())))?;
    let (m, n) = shape;
    if rows.len() != m || rows.iter().any(|r| r.len() != n) {
        return Err(Failure::new(2, format!("{}: expected a {m}x{n} matrix", path.display())));
    }
    Ok(DMatrix::from_fn(m, n, |i, j| rows[i][j]))
}

fn resolve_point(file: &ProblemFile, label_or_path: &str) -> Result<Mat, Failure> {
    if let Some(x) = file.point(label_or_path) {
        return Ok(x.clone());
    }
    let path = Path::new(label_or_path);
    if path.exists() {
        return read_matrix(path, file.problem.shape());
    }
    let labels: Vec<&str> = file.points.iter().map(|(l, _)| l.as_str()).collect();
    Err(Failure::new(2, format!("no point '{label_or_path}': not a label ({}) or a file", labels.join(", "))))
}

fn load(path: &Path) -> Result<ProblemFile, Failure> {
    load_problem(path).map_err(|e| match e {
        Error::Io(io) => Failure::new(2, format!("cannot read {}: {io}", path.display())),
        other => Failure::new(2, format!("{}: {other}", path.display())),
    })
}

fn fmt_vec(v: &[f64]) -> String {
    let items: Vec<String> = v.iter().map(|x| format!("{x:.6e}")).collect();
    format!("[{}]", items.join(", "))
}

fn first_order_verdict(rep: &AnalysisReport) -> &'static str {
    let st = &rep.stationarity;
    match (st.feasible, st.is_f, st.is_m) {
        (false, _, _) => "infeasible",
        (true, true, _) => "F-stationary",
        (true, false, true) => "M-stationary, not F-stationary",
        (true, false, false) => "not M-stationary at the tested multipliers",
    }
}

fn render_text(label: &str, rep: &AnalysisReport) -> String {
    let st = &rep.stationarity;
    let mut out = String::new();
    let (m, n) = rep.shape;
    let _ = writeln!(out, "problem: {} objective, {m}x{n}, r = {}", rep.objective, rep.r);
    let _ = writeln!(out, "point: {label}, f = {:.6e}", rep.objective_value);
    let _ = writeln!(
        out,
        "feasibility: residual {:.3e} ({})",
        st.feasibility_residual,
        if st.feasible { "feasible" } else { "infeasible" }
    );
    let _ = writeln!(out, "singular values: {} (rank {})", fmt_vec(&rep.singular_values), rep.rank);
    if let Some(q) = &st.qualification {
        let _ = writeln!(
            out,
            "qualification: s = {}, l = {}, T-rank {} ({}), R-rank {} ({}), intersection rule {}",
            q.s,
            q.l,
            q.t_rank,
            if q.assumption1 { "independent" } else { "dependent" },
            q.r_rank,
            if q.assumption2 { "independent" } else { "dependent" },
            serde_json::to_value(q.intersection_rule_case).map(|v| v.as_str().unwrap_or("").to_string()).unwrap_or_default(),
        );
        for w in &q.warnings {
            let _ = writeln!(out, "  warning: {w}");
        }
    }
    let _ = writeln!(out, "first order: {}", first_order_verdict(rep));
    let _ = writeln!(out, "  multiplier y = {}", fmt_vec(&st.y));
    let _ = writeln!(out, "  F residual {:.3e}", st.f_residual);
    if st.is_m && !st.is_f {
        let _ = writeln!(out, "  M multiplier = {}", fmt_vec(&st.m_multiplier));
    }
    if let (Some(alpha), Some(ok)) = (st.alpha_tested, st.is_alpha) {
        let _ = writeln!(
            out,
            "  alpha = {alpha}: {}alpha-stationary (beta = {})",
            if ok { "" } else { "not " },
            st.beta
        );
    }
    if let Some(so) = &rep.second_order {
        let eig = |e: Option<f64>| e.map_or("n/a".to_string(), |v| format!("{v:.6e}"));
        let _ = writeln!(
            out,
            "second order ({:?} case, dim {}): min eig {}, necessary {}, sufficient {}",
            so.case,
            so.basis_dim,
            eig(so.min_eig),
            if so.necessary_ok { "ok" } else { "violated" },
            if so.sufficient_ok { "ok" } else { "not established" }
        );
        if so.alternate_sign_min_eig.is_some() {
            let _ = writeln!(out, "  alternate curvature sign: min eig {}", eig(so.alternate_sign_min_eig));
        }
        if so.cone_samples_tested > 0 {
            let _ = writeln!(
                out,
                "  sampled cone subspaces: {} tested, {} violations",
                so.cone_samples_tested, so.cone_violations
            );
        }
        let _ = writeln!(out, "  {}", so.verdict);
    }
    if st.classification.is_empty() {
        let _ = writeln!(out, "conclusions: none");
    } else {
        let _ = writeln!(out, "conclusions:");
        for c in &st.classification {
            let _ = writeln!(out, "  - {}", c.describe());
        }
    }
    out
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Analyze { problem, point, alpha, tol, json, strict, seed } => {
            let mut file = load(&problem)?;
            if let Some(t) = tol {
                let rank_tol = file.problem.rank_tol;
                file.problem = file.problem.clone().with_tolerances(rank_tol, t)?;
            }
            let x = resolve_point(&file, &point)?;
            let opts = AnalysisOptions {
                alpha,
                second_order: SecondOrderOptions { seed: seed_of(seed)?, ..Default::default() },
            };
            let rep = analyze(&file.problem, &x, &opts)?;
            if json {
                let mut value = serde_json::to_value(&rep).map_err(|e| Failure::new(1, e.to_string()))?;
                value["point"] = serde_json::Value::String(point.clone());
                println!("{}", serde_json::to_string_pretty(&value).expect("serializable"));
            } else {
                print!("{}", render_text(&point, &rep));
            }
            if strict && !rep.certified {
                return Err(Failure::new(3, "no qualification certifies the intersection rule at this point"));
            }
            Ok(())
        }
        Command::Solve { problem, x0, alpha, iters, seed, out } => {
            let file = load(&problem)?;
            let prob = &file.problem;
            let cfg = SolverConfig { alpha, max_iters: iters, seed: seed_of(seed)?, ..Default::default() };
            let start = match x0.as_deref() {
                None => Mat::zeros(prob.shape().0, prob.shape().1),
                Some("rand") => random_start(prob, &cfg)?,
                Some(other) => resolve_point(&file, other)?,
            };
            let outcome = solve(prob, &start, &cfg)?;
            fs::create_dir_all(&out)
                .map_err(|e| Failure::new(1, format!("cannot create {}: {e}", out.display())))?;
            let write = |name: &str, body: String| {
                let path = out.join(name);
                fs::write(&path, body).map_err(|e| Failure::new(1, format!("cannot write {}: {e}", path.display())))
            };
            write("x.json", serde_json::to_string_pretty(&to_rows(&outcome.x)).expect("serializable"))?;
            let report = serde_json::json!({
                "iterations": outcome.iterations,
                "converged": outcome.converged,
                "objective_value": prob.objective.value(&outcome.x),
                "stationarity": outcome.report,
            });
            write("report.json", serde_json::to_string_pretty(&report).expect("serializable"))?;
            write("log.csv", format_log(&outcome.log))?;
            println!(
                "{} after {} iterations, f = {:.6e}, {}; wrote {}",
                if outcome.converged { "converged" } else { "stopped" },
                outcome.iterations,
                prob.objective.value(&outcome.x),
                if outcome.report.is_f { "F-stationary" } else { "not F-stationary" },
                out.display()
            );
            Ok(())
        }
        Command::Oracle { suite, seed } => {
            if !SUITES.contains(&suite.as_str()) {
                return Err(Failure::new(2, format!("unknown suite '{suite}' (expected one of {})", SUITES.join(", "))));
            }
            let rep = run_suite(&suite, seed_of(seed)?)?;
            println!("suite {}: {} checks, {} violations", rep.suite, rep.checks, rep.violations.len());
            for v in &rep.violations {
                println!("  violation: {v}");
            }
            if rep.passed() {
                Ok(())
            } else {
                Err(Failure::new(1, format!("suite {suite} reported violations")))
            }
        }
        Command::Export { name, path } => {
            if !BUILTIN_NAMES.contains(&name.as_str()) {
                return Err(Failure::new(
                    2,
                    format!("unknown built-in problem '{name}' (expected one of {})", BUILTIN_NAMES.join(", ")),
                ));
            }
            save_problem(&builtin(&name)?, &path)?;
            println!("wrote {}", path.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_file_must_be_rectangular_and_shaped() {
        let dir = std::env::temp_dir().join(format!("rankmoa-cli-unit-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let path = dir.join("x.json");
        fs::write(&path, "[[1.0, 2.0], [3.0, 4.0]]").unwrap();
        let x = read_matrix(&path, (2, 2)).ok().unwrap();
        assert_eq!(x[(1, 0)], 3.0);
        assert_eq!(read_matrix(&path, (2, 3)).err().unwrap().code, 2);
        fs::write(&path, "[[1.0, 2.0], [3.0]]").unwrap();
        assert_eq!(read_matrix(&path, (2, 2)).err().unwrap().code, 2);
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn seed_flag_wins_over_default() {
        assert_eq!(seed_of(Some(7)).ok(), Some(7));
    }
}
