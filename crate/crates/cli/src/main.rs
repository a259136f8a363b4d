//! `mshift`: run multishift analyses from JSON job specs or built-in
//! fixtures. Exit 0 means the analysis completed (a "no" verdict is data);
//! exit 1 is a violated precondition; exit 2 is a spec or usage error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use mshift_cli::job::JobSpec;
use mshift_cli::{fixtures, run};

#[derive(Parser)]
#[command(
    name = "mshift",
    version,
    about = "Multishift analysis on directed Cartesian products of rooted trees"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Materialize the product and report its combinatorics
    Build(JobArgs),
    /// Joint kernel: dimension, blocks, residuals
    Kernel(JobArgs),
    /// Closed-form moments against the iterated-apply oracle
    Moments(JobArgs),
    /// Balance, subnormality, hyponormality, radii, decay scan
    Classify(JobArgs),
    /// Spectral radius window estimates from the budget sequence
    Radii(JobArgs),
    /// Reproducing-kernel coefficients for power-family systems
    Rkhs(JobArgs),
    /// Model coefficient matrices and their band structure
    Shimorin(JobArgs),
    /// Three-part decomposition of a two-factor product
    Decompose2(JobArgs),
    /// Rank of the collected kernel orbit against the truncation
    Wandering(JobArgs),
    /// List the built-in job specs
    Fixtures(FixturesArgs),
}

#[derive(Args)]
struct JobArgs {
    /// JobSpec JSON file
    #[arg(long, value_name = "FILE", conflicts_with = "fixture")]
    spec: Option<PathBuf>,
    /// Built-in fixture name (see `mshift fixtures`)
    #[arg(long, value_name = "NAME")]
    fixture: Option<String>,
    /// Report destination; a `.csv` suffix selects the data series
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Numerical tolerance override
    #[arg(long)]
    tol: Option<f64>,
    /// Seed override for randomized checks
    #[arg(long)]
    seed: Option<u64>,
    /// Depth budget override
    #[arg(long)]
    budget: Option<u32>,
    /// Window override (difference box, Gram generations)
    #[arg(long)]
    window: Option<u32>,
}

#[derive(Args)]
struct FixturesArgs {
    /// Write the listing to a file as well
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

struct Failure {
    code: u8,
    message: String,
}

impl From<mshift_core::Error> for Failure {
    fn from(e: mshift_core::Error) -> Self {
        Failure {
            code: 1,
            message: e.to_string(),
        }
    }
}

fn spec_error(path: &Path, detail: impl std::fmt::Display) -> Failure {
    Failure {
        code: 2,
        message: format!("parse error: {}: {detail}", path.display()),
    }
}

fn usage_error(detail: impl Into<String>) -> Failure {
    Failure {
        code: 2,
        message: detail.into(),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    let (name, args) = match cli.command {
        Command::Build(a) => ("build", a),
        Command::Kernel(a) => ("kernel", a),
        Command::Moments(a) => ("moments", a),
        Command::Classify(a) => ("classify", a),
        Command::Radii(a) => ("radii", a),
        Command::Rkhs(a) => ("rkhs", a),
        Command::Shimorin(a) => ("shimorin", a),
        Command::Decompose2(a) => ("decompose2", a),
        Command::Wandering(a) => ("wandering", a),
        Command::Fixtures(f) => return list_fixtures(f),
    };
    let job = load_job(&args, name)?;
    let product = job
        .product
        .build()
        .map_err(|e| usage_error(format!("invalid product spec: {e}")))?;
    job.weights
        .validate(product.dim())
        .map_err(|e| usage_error(format!("invalid weights: {e}")))?;
    let (report, csv) = run::run(name, &product, &job)?;
    emit(&report, csv, job.out.as_deref())
}

fn load_job(args: &JobArgs, command: &str) -> Result<JobSpec, Failure> {
    let mut job = match (&args.spec, &args.fixture) {
        (Some(path), None) => {
            let text = fs::read_to_string(path).map_err(|e| spec_error(path, e))?;
            serde_json::from_str::<JobSpec>(&text).map_err(|e| spec_error(path, e))?
        }
        (None, Some(name)) => fixtures::by_name(name).ok_or_else(|| {
            usage_error(format!(
                "unknown fixture `{name}`; run `mshift fixtures` for the list"
            ))
        })?,
        _ => {
            return Err(usage_error(
                "exactly one of --spec or --fixture is required",
            ))
        }
    };
    if let Some(pinned) = &job.command {
        if pinned != command {
            return Err(usage_error(format!(
                "spec pins command `{pinned}`, invoked as `{command}`"
            )));
        }
    }
    if let Some(b) = args.budget {
        job.product.depth_budget = b;
    }
    if let Some(t) = args.tol {
        job.params.tol = Some(t);
    }
    if let Some(s) = args.seed {
        job.params.seed = Some(s);
    }
    if let Some(w) = args.window {
        job.params.window = Some(w);
    }
    if let Some(o) = &args.out {
        job.out = Some(o.clone());
    }
    Ok(job)
}

fn emit(
    report: &serde_json::Value,
    csv: Option<String>,
    out: Option<&Path>,
) -> Result<(), Failure> {
    let mut rendered = serde_json::to_string_pretty(report).expect("report serialization");
    rendered.push('\n');
    if let Some(path) = out {
        let wants_csv = path.extension().is_some_and(|e| e == "csv");
        let payload = if wants_csv {
            csv.ok_or_else(|| Failure {
                code: 1,
                message: "this command has no CSV series; use a .json destination".into(),
            })?
        } else {
            rendered.clone()
        };
        fs::write(path, payload).map_err(|e| Failure {
            code: 1,
            message: format!("cannot write {}: {e}", path.display()),
        })?;
    }
    print!("{rendered}");
    Ok(())
}

fn list_fixtures(args: FixturesArgs) -> Result<(), Failure> {
    let listing: Vec<serde_json::Value> = fixtures::all()
        .into_iter()
        .map(|f| {
            json!({
                "name": f.name,
                "description": f.description,
                "spec": serde_json::to_value(&f.job).expect("fixture serialization"),
            })
        })
        .collect();
    let report = serde_json::Value::Array(listing);
    emit(&report, None, args.out.as_deref())
}
