//! Command-line front end.
//!
//! Subcommands: `solve | verify | eval | expand | demo-poincare`, all driven
//! by a TOML configuration file (see [`config`]).
//!
//! Exit codes (exhaustive):
//!
//! * `0` — success;
//! * `1` — usage, configuration, or I/O error;
//! * `2` — the solve failed (non-convergence, ball escape, `|q|` below the
//!   mode threshold);
//! * `3` — a requested check failed (`verify`, or `solve --strict` when the
//!   configured mode's hypotheses do not pass on the grid).
//!
//! Outputs are JSON on stdout (`schema: 1`) unless `[output]` paths are
//! configured; `solve` additionally writes the solution field as CSV with
//! the fixed columns `re_z,im_z,re_y,im_y,iters`. Nothing volatile
//! (timestamps, durations) is ever emitted, so identical inputs produce
//! byte-identical outputs regardless of worker count.

pub mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use num_complex::Complex64;
use serde::Serialize;

use crate::extend::{evaluate_at, poincare_residual, ContinuationResult};
use crate::operator::TheoremMode;
use crate::series::{check_cj_bounds, enumerate_monomials, BoundReport, SeriesCoefficients};
use crate::solver::{picard_solve, IterationReport, SolutionField, SolverError, Start};
use crate::verify::{
    check_hypotheses, check_numeric_lemmas, default_lemma_ranges, HypothesisReport, LemmaReport,
};
use config::{load_config, LoadedProblem};

#[derive(Parser)]
#[command(
    name = "qpicard",
    version,
    about = "Contraction-mapping solver and verification toolkit for first-order q-difference equations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the configured instance over its grid (CSV field + JSON report)
    Solve {
        #[arg(long)]
        config: PathBuf,
        /// Exit 3 if the configured mode's hypotheses fail on the grid
        #[arg(long)]
        strict: bool,
        /// Override the CSV output path
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker thread count (defaults to one per core)
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Hypothesis gate, coefficient-bound, and inequality reports
    Verify {
        #[arg(long)]
        config: PathBuf,
    },
    /// Evaluate the continued solution at a point
    Eval {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, num_args = 2, value_names = ["RE", "IM"], required = true, allow_negative_numbers = true)]
        point: Vec<f64>,
        #[arg(long, default_value_t = 64)]
        max_steps: u32,
    },
    /// Print expansion coefficients as monomial lists, or numerically at a point
    Expand {
        #[arg(long)]
        config: PathBuf,
        /// Highest power of y to expand
        #[arg(long)]
        order: u32,
        #[arg(long, num_args = 2, value_names = ["RE", "IM"], allow_negative_numbers = true)]
        point: Option<Vec<f64>>,
    },
    /// Residual demo for the classical Laurent solution f(qz) = q z^2 f(z)
    DemoPoincare {
        #[arg(long, default_value_t = 2.0)]
        q_re: f64,
        #[arg(long, default_value_t = 0.0)]
        q_im: f64,
        /// Truncation order N of the Laurent sum
        #[arg(long, default_value_t = 20)]
        order: u32,
        /// Number of sample points on the unit circle
        #[arg(long, default_value_t = 100)]
        samples: u32,
    },
}

pub fn main_entry() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let _ = e.print();
            return if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            };
        }
    };
    let code = match cli.command {
        Command::Solve {
            config,
            strict,
            out,
            workers,
        } => cmd_solve(&config, strict, out, workers),
        Command::Verify { config } => cmd_verify(&config),
        Command::Eval {
            config,
            point,
            max_steps,
        } => cmd_eval(&config, Complex64::new(point[0], point[1]), max_steps),
        Command::Expand {
            config,
            order,
            point,
        } => cmd_expand(
            &config,
            order,
            point.map(|p| Complex64::new(p[0], p[1])),
        ),
        Command::DemoPoincare {
            q_re,
            q_im,
            order,
            samples,
        } => cmd_demo_poincare(Complex64::new(q_re, q_im), order, samples),
    };
    ExitCode::from(code)
}

fn load(path: &Path) -> Result<LoadedProblem, u8> {
    let cfg = load_config(path).map_err(|e| {
        eprintln!("error: {}", e);
        1u8
    })?;
    cfg.build().map_err(|e| {
        eprintln!("error: {}", e);
        1u8
    })
}

fn emit_json(path: &Option<PathBuf>, body: &str) -> Result<(), u8> {
    match path {
        Some(p) => std::fs::write(p, body).map_err(|e| {
            eprintln!("error: cannot write {}: {}", p.display(), e);
            1u8
        }),
        None => {
            println!("{}", body);
            Ok(())
        }
    }
}

#[derive(Serialize)]
struct SolveJson<'a> {
    schema: u32,
    mode: TheoremMode,
    q: Complex64,
    report: &'a IterationReport,
    csv_path: String,
}

fn render_csv(field: &SolutionField) -> String {
    let mut out = String::from("re_z,im_z,re_y,im_y,iters\n");
    for ((z, v), iters) in field
        .grid
        .iter()
        .zip(field.values.iter())
        .zip(field.iterations.iter())
    {
        out.push_str(&format!("{},{},{},{},{}\n", z.re, z.im, v.re, v.im, iters));
    }
    out
}

fn cmd_solve(
    config: &Path,
    strict: bool,
    out: Option<PathBuf>,
    workers: Option<usize>,
) -> u8 {
    let loaded = match load(config) {
        Ok(l) => l,
        Err(code) => return code,
    };
    if strict {
        match check_hypotheses(&loaded.problem, &loaded.grid) {
            Ok(report) => {
                let check = report.check_for(loaded.problem.mode);
                if !check.applicable {
                    eprintln!(
                        "hypothesis check failed for {:?}: {} violation(s), first: {}",
                        loaded.problem.mode,
                        check.failures.len(),
                        check
                            .failures
                            .first()
                            .map(|f| f.which.clone())
                            .unwrap_or_else(|| "q threshold or domain shape".into()),
                    );
                    return 3;
                }
            }
            Err(e) => {
                eprintln!("hypothesis check failed: {}", e);
                return 3;
            }
        }
    }
    let solve = || picard_solve(&loaded.problem, &loaded.grid, Start::HalfBall);
    let solved = match workers {
        Some(n) => {
            let pool = match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
                Ok(p) => p,
                Err(e) => {
                    eprintln!("error: cannot build thread pool: {}", e);
                    return 1;
                }
            };
            pool.install(solve)
        }
        None => solve(),
    };
    let (field, report) = match solved {
        Ok(pair) => pair,
        Err(e @ (SolverError::NonConvergence { .. } | SolverError::BallEscape { .. })) => {
            eprintln!("solve failed: {}", e);
            return 2;
        }
        Err(SolverError::Operator(e)) => {
            eprintln!("solve failed: {}", e);
            return 2;
        }
        Err(e) => {
            eprintln!("error: {}", e);
            return 1;
        }
    };
    let csv_path = out
        .or(loaded.output.csv.clone())
        .unwrap_or_else(|| PathBuf::from("solution.csv"));
    if let Err(e) = std::fs::write(&csv_path, render_csv(&field)) {
        eprintln!("error: cannot write {}: {}", csv_path.display(), e);
        return 1;
    }
    let json = SolveJson {
        schema: 1,
        mode: loaded.problem.mode,
        q: loaded.problem.q,
        report: &report,
        csv_path: csv_path.display().to_string(),
    };
    let body = serde_json::to_string_pretty(&json).expect("report serializes");
    if emit_json(&loaded.output.json, &body).is_err() {
        return 1;
    }
    0
}

#[derive(Serialize)]
struct VerifyJson {
    schema: u32,
    mode: TheoremMode,
    hypotheses: HypothesisReport,
    cj_bounds: BoundReport,
    lemmas: LemmaReport,
    pass: bool,
}

fn cmd_verify(config: &Path) -> u8 {
    let loaded = match load(config) {
        Ok(l) => l,
        Err(code) => return code,
    };
    let hypotheses = match check_hypotheses(&loaded.problem, &loaded.grid) {
        Ok(h) => h,
        Err(e) => {
            eprintln!("hypothesis check failed: {}", e);
            return 3;
        }
    };
    let sc = match SeriesCoefficients::expand(loaded.problem.coeffs.clone(), 8) {
        Ok(sc) => sc,
        Err(e) => {
            eprintln!("error: {}", e);
            return 1;
        }
    };
    let cj_bounds = match check_cj_bounds(&sc, &loaded.grid, loaded.problem.mode, loaded.problem.q)
    {
        Ok(b) => b,
        Err(e) => {
            eprintln!("coefficient bound check failed: {}", e);
            return 3;
        }
    };
    let (q_values, j_range) = default_lemma_ranges();
    let lemmas = check_numeric_lemmas(&q_values, j_range);
    let pass = hypotheses.check_for(loaded.problem.mode).applicable
        && cj_bounds.all_pass()
        && lemmas.all_pass;
    let json = VerifyJson {
        schema: 1,
        mode: loaded.problem.mode,
        hypotheses,
        cj_bounds,
        lemmas,
        pass,
    };
    let body = serde_json::to_string_pretty(&json).expect("report serializes");
    if emit_json(&loaded.output.json, &body).is_err() {
        return 1;
    }
    if pass {
        0
    } else {
        3
    }
}

#[derive(Serialize)]
struct EvalJson {
    schema: u32,
    point: Complex64,
    max_steps: u32,
    result: ContinuationResult,
}

fn cmd_eval(config: &Path, point: Complex64, max_steps: u32) -> u8 {
    let loaded = match load(config) {
        Ok(l) => l,
        Err(code) => return code,
    };
    let (field, _) = match picard_solve(&loaded.problem, &loaded.grid, Start::HalfBall) {
        Ok(pair) => pair,
        Err(e) => {
            eprintln!("solve failed: {}", e);
            return 2;
        }
    };
    let result = evaluate_at(&field, &loaded.problem, point, max_steps);
    let json = EvalJson {
        schema: 1,
        point,
        max_steps,
        result,
    };
    let body = serde_json::to_string_pretty(&json).expect("result serializes");
    if emit_json(&loaded.output.json, &body).is_err() {
        return 1;
    }
    0
}

#[derive(Serialize)]
struct MonomialJson {
    coeff: i64,
    a_index: u32,
    b_powers: Vec<u32>,
    term: String,
}

#[derive(Serialize)]
struct CjMonomialsJson {
    j: u32,
    unit_terms: u64,
    monomials: Vec<MonomialJson>,
}

#[derive(Serialize)]
struct ExpandJson {
    schema: u32,
    order: u32,
    lambda: Complex64,
    #[serde(skip_serializing_if = "Option::is_none")]
    z: Option<Complex64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    c1: Option<Complex64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    values: Option<Vec<CjValueJson>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    coefficients: Option<Vec<CjMonomialsJson>>,
}

#[derive(Serialize)]
struct CjValueJson {
    j: u32,
    value: Complex64,
}

fn cmd_expand(config: &Path, order: u32, point: Option<Complex64>) -> u8 {
    let loaded = match load(config) {
        Ok(l) => l,
        Err(code) => return code,
    };
    let coeffs = &loaded.problem.coeffs;
    let mut json = ExpandJson {
        schema: 1,
        order,
        lambda: coeffs.lambda(),
        z: None,
        c1: None,
        values: None,
        coefficients: None,
    };
    match point {
        Some(z) => {
            let sc = match SeriesCoefficients::expand(coeffs.clone(), order) {
                Ok(sc) => sc,
                Err(e) => {
                    eprintln!("error: {}", e);
                    return 1;
                }
            };
            let cj = match sc.eval(z) {
                Ok(v) => v,
                Err(e) => {
                    eprintln!("error: {}", e);
                    return 1;
                }
            };
            json.z = Some(z);
            json.c1 = Some(cj[0]);
            json.values = Some(
                (2..=order)
                    .map(|j| CjValueJson {
                        j,
                        value: cj[j as usize - 1],
                    })
                    .collect(),
            );
        }
        None => {
            if order > crate::series::DEFAULT_ORDER_CAP {
                eprintln!(
                    "error: order {} exceeds the enumeration budget (cap {})",
                    order,
                    crate::series::DEFAULT_ORDER_CAP
                );
                return 1;
            }
            let p = coeffs.p() as u32;
            let t = coeffs.t() as u32;
            json.coefficients = Some(
                (2..=order)
                    .map(|j| {
                        let monomials = enumerate_monomials(j, p, t);
                        CjMonomialsJson {
                            j,
                            unit_terms: crate::series::unit_term_count(&monomials),
                            monomials: monomials
                                .into_iter()
                                .map(|m| MonomialJson {
                                    coeff: m.coeff,
                                    a_index: m.a_index,
                                    b_powers: m.b_powers.0.clone(),
                                    term: m.term_string(),
                                })
                                .collect(),
                        }
                    })
                    .collect(),
            );
        }
    }
    let body = serde_json::to_string_pretty(&json).expect("expansion serializes");
    if emit_json(&loaded.output.json, &body).is_err() {
        return 1;
    }
    0
}

#[derive(Serialize)]
struct DemoPoincareJson {
    schema: u32,
    q: Complex64,
    order: u32,
    samples: u32,
    max_residual: f64,
}

fn cmd_demo_poincare(q: Complex64, order: u32, samples: u32) -> u8 {
    if q.norm() <= 1.0 {
        eprintln!("error: the Laurent solution needs |q| > 1, got |q| = {}", q.norm());
        return 1;
    }
    if samples == 0 {
        eprintln!("error: samples must be positive");
        return 1;
    }
    let mut max_residual = 0.0f64;
    for k in 0..samples {
        let theta = std::f64::consts::TAU * (k as f64) / (samples as f64);
        let z = Complex64::from_polar(1.0, theta);
        max_residual = max_residual.max(poincare_residual(z, q, order));
    }
    let json = DemoPoincareJson {
        schema: 1,
        q,
        order,
        samples,
        max_residual,
    };
    let body = serde_json::to_string_pretty(&json).expect("demo serializes");
    println!("{}", body);
    0
}
