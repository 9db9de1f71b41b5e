//! Command-line front end: `solve`, `gen`, `verify` and `bench`.
//!
//! Exit codes: 0 success, 1 format or I/O error, 2 numerical singularity,
//! 3 failed verification, 64 usage error.

use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand, ValueEnum};

use crate::cbx::{parse_cbx, write_cbx, CbxFile};
use crate::cyclic::{SolveReport, WoodburyParams};
use crate::error::Error;
use crate::generate::{generate, GenSpec};
use crate::layout::{flatten, rel_inf_diff};
use crate::operator::{Kind, Operator};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FORMAT: i32 = 1;
pub const EXIT_SINGULAR: i32 = 2;
pub const EXIT_VERIFY_FAILED: i32 = 3;
pub const EXIT_USAGE: i32 = 64;

/// Residual gate applied by `verify`.
pub const VERIFY_RESIDUAL_TOL: f64 = 1e-8;
/// Largest `n·m` for which the dense oracle is run.
pub const DENSE_LIMIT: usize = 600;

pub const BENCH_HEADER: &str = "n,m,method,seconds,matmuls,lus,solves";

#[derive(Debug, Parser)]
#[command(name = "cbsolve", version, about = "Solve cyclic block tridiagonal and penta-diagonal systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    Woodbury,
    Dense,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve the system in a CBX file and write it back with a SOL section.
    Solve {
        #[arg(long)]
        input: PathBuf,
        /// Destination for the solved file; stdout when omitted.
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
        alpha: f64,
        #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
        beta: f64,
        #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
        gamma: f64,
        #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
        delta: f64,
        #[arg(long, value_enum, default_value_t = Method::Woodbury)]
        method: Method,
    },
    /// Generate a random system with a right-hand side.
    Gen {
        #[arg(long)]
        kind: Kind,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        m: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 1.5)]
        dominance: f64,
        #[arg(long)]
        output: PathBuf,
    },
    /// Check the SOL section of a file against its operator and RHS.
    Verify {
        #[arg(long)]
        input: PathBuf,
    },
    /// Time and count block operations over a range of sizes; CSV on stdout.
    Bench {
        #[arg(long)]
        kind: Kind,
        #[arg(long)]
        m: usize,
        #[arg(long, value_delimiter = ',', required = true)]
        n_list: Vec<usize>,
        #[arg(long, default_value_t = 3)]
        repeat: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 1.5)]
        dominance: f64,
    },
}

/// A failure carrying its exit code.
struct Failure {
    code: i32,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            e if e.is_singular() => EXIT_SINGULAR,
            Error::InvalidParameter(_) => EXIT_USAGE,
            _ => EXIT_FORMAT,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn io_failure(path: &std::path::Path, e: std::io::Error) -> Failure {
    Failure {
        code: EXIT_FORMAT,
        message: format!("{}: {e}", path.display()),
    }
}

/// Runs the CLI over `args` (program name first) and returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{e}");
                    EXIT_OK
                }
                _ => {
                    let _ = write!(err, "{e}");
                    EXIT_USAGE
                }
            }
        }
    };
    let result = match cli.command {
        Command::Solve {
            input,
            output,
            alpha,
            beta,
            gamma,
            delta,
            method,
        } => cmd_solve(&input, output.as_deref(), [alpha, beta, gamma, delta], method, out, err),
        Command::Gen {
            kind,
            n,
            m,
            seed,
            dominance,
            output,
        } => cmd_gen(GenSpec::new(kind, n, m, seed, dominance), &output, out),
        Command::Verify { input } => cmd_verify(&input, out),
        Command::Bench {
            kind,
            m,
            n_list,
            repeat,
            seed,
            dominance,
        } => cmd_bench(kind, m, &n_list, repeat, seed, dominance, out),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}

fn read_cbx(path: &std::path::Path) -> Result<CbxFile, Failure> {
    let text = fs::read_to_string(path).map_err(|e| io_failure(path, e))?;
    Ok(parse_cbx(&text)?)
}

fn write_summary(w: &mut dyn Write, method: &str, op: &Operator, rep: &SolveReport) -> std::io::Result<()> {
    writeln!(w, "method={method}")?;
    writeln!(w, "kind={} n={} m={}", op.kind(), op.n(), op.m())?;
    writeln!(w, "residual_inf={:.6e}", rep.residual_inf)?;
    writeln!(
        w,
        "matmuls={} lus={} solves={}",
        rep.counts.matmuls, rep.counts.lus, rep.counts.solves
    )?;
    writeln!(w, "capacitance_order={}", rep.capacitance_order)
}

fn cmd_solve(
    input: &std::path::Path,
    output: Option<&std::path::Path>,
    scalars: [f64; 4],
    method: Method,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<i32, Failure> {
    let [alpha, beta, gamma, delta] = scalars;
    let params = WoodburyParams::new(alpha, beta, gamma, delta)?;
    let file = read_cbx(input)?;
    let rhs = file.rhs.as_deref().ok_or_else(|| Failure {
        code: EXIT_FORMAT,
        message: format!("{}: no RHS section", input.display()),
    })?;
    let op = &file.operator;
    let (rep, name) = match method {
        Method::Woodbury => (op.solve_woodbury(rhs, &params)?, "woodbury"),
        Method::Dense => (op.solve_dense(rhs, &params)?, "dense"),
    };
    let text = write_cbx(op, Some(rhs), Some(&rep.x));
    match output {
        Some(path) => {
            fs::write(path, text).map_err(|e| io_failure(path, e))?;
            let _ = write_summary(out, name, op, &rep);
        }
        None => {
            let _ = out.write_all(text.as_bytes());
            let _ = write_summary(err, name, op, &rep);
        }
    }
    Ok(EXIT_OK)
}

fn cmd_gen(spec: GenSpec, output: &std::path::Path, out: &mut dyn Write) -> Result<i32, Failure> {
    let (op, rhs) = generate(&spec)?;
    fs::write(output, write_cbx(&op, Some(&rhs), None)).map_err(|e| io_failure(output, e))?;
    let _ = writeln!(
        out,
        "wrote {} n={} m={} seed={} to {}",
        spec.kind,
        spec.n,
        spec.m,
        spec.seed,
        output.display()
    );
    Ok(EXIT_OK)
}

fn cmd_verify(input: &std::path::Path, out: &mut dyn Write) -> Result<i32, Failure> {
    let file = read_cbx(input)?;
    let missing = |what: &str| Failure {
        code: EXIT_FORMAT,
        message: format!("{}: verify needs a {what} section", input.display()),
    };
    let rhs = file.rhs.as_deref().ok_or_else(|| missing("RHS"))?;
    let sol = file.solution.as_deref().ok_or_else(|| missing("SOL"))?;
    let op = &file.operator;
    let residual = op.residual_inf(sol, rhs)?;
    let _ = writeln!(out, "residual_inf={residual:.6e}");
    if op.n() * op.m() <= DENSE_LIMIT {
        let dense = op.solve_dense(rhs, &WoodburyParams::default())?;
        let dev = rel_inf_diff(&flatten(sol), &flatten(&dense.x));
        let _ = writeln!(out, "oracle_rel_diff={dev:.6e}");
    } else {
        let _ = writeln!(out, "oracle_rel_diff=skipped");
    }
    let pass = residual <= VERIFY_RESIDUAL_TOL;
    let _ = writeln!(out, "status={}", if pass { "pass" } else { "fail" });
    Ok(if pass { EXIT_OK } else { EXIT_VERIFY_FAILED })
}

fn cmd_bench(
    kind: Kind,
    m: usize,
    n_list: &[usize],
    repeat: usize,
    seed: u64,
    dominance: f64,
    out: &mut dyn Write,
) -> Result<i32, Failure> {
    let repeat = repeat.max(1);
    let params = WoodburyParams::default();
    let _ = writeln!(out, "{BENCH_HEADER}");
    for &n in n_list {
        let (op, rhs) = generate(&GenSpec::new(kind, n, m, seed, dominance))?;
        let (secs, rep) = time_solve(repeat, || op.solve_woodbury(&rhs, &params))?;
        let _ = writeln!(out, "{}", csv_row(n, m, "woodbury", secs, &rep));
        if n * m <= DENSE_LIMIT {
            let (secs, rep) = time_solve(repeat, || op.solve_dense(&rhs, &params))?;
            let _ = writeln!(out, "{}", csv_row(n, m, "dense", secs, &rep));
        }
    }
    Ok(EXIT_OK)
}

fn time_solve<F>(repeat: usize, mut solve: F) -> Result<(f64, SolveReport), Failure>
where
    F: FnMut() -> crate::error::Result<SolveReport>,
{
    let start = Instant::now();
    let mut last = solve()?;
    for _ in 1..repeat {
        last = solve()?;
    }
    Ok((start.elapsed().as_secs_f64() / repeat as f64, last))
}

fn csv_row(n: usize, m: usize, method: &str, secs: f64, rep: &SolveReport) -> String {
    format!(
        "{n},{m},{method},{secs:.6e},{},{},{}",
        rep.counts.matmuls, rep.counts.lus, rep.counts.solves
    )
}

/// One bench CSV row: `(n, m, method, seconds, matmuls, lus, solves)`.
pub type BenchRow = (usize, usize, String, f64, u64, u64, u64);

/// Parses a bench CSV body.
pub fn parse_bench_csv(text: &str) -> Option<Vec<BenchRow>> {
    let mut lines = text.lines();
    if lines.next()? != BENCH_HEADER {
        return None;
    }
    lines
        .map(|line| {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 7 {
                return None;
            }
            Some((
                f[0].parse().ok()?,
                f[1].parse().ok()?,
                f[2].to_string(),
                f[3].parse().ok()?,
                f[4].parse().ok()?,
                f[5].parse().ok()?,
                f[6].parse().ok()?,
            ))
        })
        .collect()
}
