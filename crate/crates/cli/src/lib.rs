//! Problem files, reports and subcommands behind the `varpoly` binary.

pub mod commands;
pub mod problem;
pub mod report;

use std::path::Path;

use varpoly_core::{Error, Tolerances};

use commands::{Ctx, Output};
use problem::ProblemFile;
use report::{Json, Obj};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Parse(String),
    #[error(transparent)]
    Core(#[from] Error),
    #[error("{0}")]
    Io(String),
}

impl From<problem::ParseError> for CliError {
    fn from(e: problem::ParseError) -> Self {
        CliError::Parse(e.to_string())
    }
}

impl CliError {
    /// 2 parse, 3 precondition, 4 internal inconsistency, 1 anything else.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Parse(_) => 2,
            CliError::Core(Error::Precondition(..)) => 3,
            CliError::Core(Error::Inconsistency(_)) => 4,
            _ => 1,
        }
    }

    fn status(&self) -> &'static str {
        match self.exit_code() {
            2 => "parse-error",
            3 => "precondition-failed",
            4 => "inconsistency",
            _ => "error",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    Analyze,
    Subderiv,
    Geneq,
    Prox,
    Epi,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Analyze => "analyze",
            Command::Subderiv => "subderiv",
            Command::Geneq => "geneq",
            Command::Prox => "prox",
            Command::Epi => "epi",
        }
    }

    fn writes_csv(self) -> bool {
        matches!(self, Command::Subderiv | Command::Epi)
    }
}

/// Everything a run needs besides the output sinks.
pub struct Run {
    pub command: Command,
    pub text: String,
    pub seed: u64,
    /// `KEY=VAL` overrides applied after the file's `tol.*` lines.
    pub tol: Vec<String>,
    pub csv: bool,
}

/// Outcome of a run. Failures after parsing still carry a report.
pub struct Execution {
    pub report: Option<Json>,
    pub records: Option<Vec<varpoly_core::QuotientRecord>>,
    pub error: Option<CliError>,
}

impl Execution {
    fn failed(e: CliError, report: Option<Json>) -> Self {
        Self {
            report,
            records: None,
            error: Some(e),
        }
    }

    pub fn exit_code(&self) -> u8 {
        self.error.as_ref().map_or(0, CliError::exit_code)
    }
}

pub fn execute(run: &Run) -> Execution {
    let file = match ProblemFile::parse(&run.text) {
        Ok(f) => f,
        Err(e) => return Execution::failed(e.into(), None),
    };
    let mut tol = file.tolerances();
    for kv in &run.tol {
        let res = kv
            .split_once('=')
            .ok_or_else(|| CliError::Parse(format!("--tol expects KEY=VAL, got `{kv}`")))
            .and_then(|(k, v)| tol.set(k.trim(), v.trim()).map_err(|e| CliError::Parse(e.to_string())));
        if let Err(e) = res {
            return Execution::failed(e, None);
        }
    }
    if run.csv && !run.command.writes_csv() {
        let e = CliError::Parse(format!("`{}` produces no CSV table", run.command.name()));
        return Execution::failed(e, None);
    }
    let head = header(run, &file, &tol);
    let ctx = Ctx {
        file: &file,
        tol,
        seed: run.seed,
    };
    let out: Result<Output, CliError> = match run.command {
        Command::Analyze => commands::analyze(&ctx),
        Command::Subderiv => commands::subderiv(&ctx),
        Command::Geneq => commands::geneq(&ctx),
        Command::Prox => commands::prox(&ctx),
        Command::Epi => commands::epi(&ctx),
    };
    match out {
        Ok(o) => {
            let doc = head.with("status", "ok").with("exit_code", 0usize).with("result", o.report);
            Execution {
                report: Some(doc.into()),
                records: o.records,
                error: None,
            }
        }
        Err(e) => {
            let mut doc = head.with("status", e.status()).with("exit_code", e.exit_code() as usize).with("message", e.to_string());
            if let CliError::Core(Error::Precondition(p, _)) = &e {
                doc.insert("precondition", p.name());
            }
            Execution::failed(e, Some(doc.into()))
        }
    }
}

fn header(run: &Run, file: &ProblemFile, tol: &Tolerances) -> Obj {
    let mut tols = Obj::new();
    for (k, v) in tol.entries() {
        tols.insert(k, v);
    }
    Obj::new()
        .with("command", run.command.name())
        .with("input", file.serialize())
        .with(
            "provenance",
            Obj::new()
                .with("seed", run.seed)
                .with("tolerances", tols)
                .with("version", env!("CARGO_PKG_VERSION")),
        )
}

pub fn read_file(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}
