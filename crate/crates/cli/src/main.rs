use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use varpoly_cli::{execute, read_file, Command, Run};

/// Second-order analysis of polyhedral composite problems.
#[derive(Parser, Debug)]
#[command(name = "varpoly", version)]
struct Args {
    #[arg(value_enum)]
    command: Command,
    /// Problem file (see docs/problem-format.md).
    file: PathBuf,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write quotient samples as CSV (subderiv, epi).
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Override a tolerance, e.g. `--tol act=1e-8`; repeatable.
    #[arg(long = "tol", value_name = "KEY=VAL")]
    tol: Vec<String>,
}

fn emit(path: &Option<PathBuf>, text: &str) -> std::io::Result<()> {
    match path {
        Some(p) => std::fs::write(p, text),
        None => std::io::stdout().write_all(text.as_bytes()),
    }
}

fn main() -> ExitCode {
    let args = Args::parse();
    let text = match read_file(&args.file) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("varpoly: {e}");
            return ExitCode::from(e.exit_code());
        }
    };
    let run = Run {
        command: args.command,
        text,
        seed: args.seed,
        tol: args.tol,
        csv: args.csv.is_some(),
    };
    let ex = execute(&run);
    if let Some(e) = &ex.error {
        eprintln!("varpoly: {e}");
    }
    if let Some(doc) = &ex.report {
        if let Err(e) = emit(&args.out, &doc.render()) {
            eprintln!("varpoly: writing report: {e}");
            return ExitCode::from(1);
        }
    }
    if let (Some(path), Some(recs)) = (&args.csv, &ex.records) {
        if let Err(e) = varpoly_core::epi_oracle::write_csv_file(path, recs) {
            eprintln!("varpoly: {e}");
            return ExitCode::from(1);
        }
    }
    ExitCode::from(ex.exit_code())
}
