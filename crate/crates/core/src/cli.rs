//! Command-line front end.
//!
//! ```text
//! faasforge [--debug] [--local] [--endpoint URL] [--outdir DIR] [--path DIR]... [--bench LABEL] FILE...
//! faasforge serve [--bind ADDR]
//! ```
//!
//! Without `--local` or `--debug` the program runs in production mode
//! against `--endpoint`, then `FAASFORGE_ENDPOINT`, then the default
//! gateway address.

use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::analyzer::{load_file, AnalyzeError, SearchPathLoader};
use crate::bench::{render_report, run_experiment, BenchError, ExecMode, ExperimentOptions, ReportFormat};
use crate::emulator::{serve, Emulator, RemoteClient, DEFAULT_BIND};
use crate::package::write_debug_outputs;
use crate::syntax::{walk_exprs, ExprKind, Module, SourceModule};
use crate::transform::{transform_program, ClientRun, Mode, Program, TransformError, TransformOptions};

pub const ENDPOINT_VAR: &str = "FAASFORGE_ENDPOINT";

/// Success.
pub const EXIT_OK: i32 = 0;
/// The program cannot be transformed: syntax errors, subset violations,
/// arity mismatches, reserved names.
pub const EXIT_REJECTED: i32 = 1;
/// Usage errors, missing files, runtime and deployment failures.
pub const EXIT_FAILED: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "faasforge",
    version,
    about = "Turn a program's functions and classes into hosted-function units and run it"
)]
#[command(args_conflicts_with_subcommands = true)]
struct Cli {
    #[command(subcommand)]
    command: Option<Command>,
    #[command(flatten)]
    run: CliOptions,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the emulator gateway.
    Serve {
        #[arg(long)]
        bind: Option<String>,
    },
}

#[derive(Debug, Clone, Args, PartialEq)]
pub struct CliOptions {
    /// Entry files, run one after another.
    #[arg(required = true)]
    pub files: Vec<PathBuf>,
    /// Transform and write the results to --outdir; execute nothing.
    #[arg(long, conflicts_with = "endpoint")]
    pub debug: bool,
    /// Run units in process instead of on a gateway.
    #[arg(long)]
    pub local: bool,
    /// Gateway for production mode.
    #[arg(long)]
    pub endpoint: Option<String>,
    #[arg(long, default_value = "./out")]
    pub outdir: PathBuf,
    /// Extra directories searched for imported modules.
    #[arg(long = "path")]
    pub paths: Vec<PathBuf>,
    /// Measure the overhead of evaluating this expression, e.g. "fib(20)".
    #[arg(long)]
    pub bench: Option<String>,
}

impl CliOptions {
    fn mode(&self) -> Mode {
        if self.debug {
            Mode::Debug
        } else if self.local {
            Mode::Local
        } else {
            Mode::Production
        }
    }

    fn endpoint(&self) -> String {
        self.endpoint
            .clone()
            .or_else(|| std::env::var(ENDPOINT_VAR).ok().filter(|s| !s.is_empty()))
            .unwrap_or_else(|| DEFAULT_BIND.to_string())
    }
}

/// Parses `argv` (program name first) and runs it. Returns the exit code.
pub fn run_cli(argv: &[String], stdout: &mut dyn Write, stderr: &mut dyn Write, stdin: &mut dyn BufRead) -> i32 {
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_FAILED } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                write!(stderr, "{text}")
            } else {
                write!(stdout, "{text}")
            };
            return code;
        }
    };
    match cli.command {
        Some(Command::Serve { bind }) => {
            // A client's endpoint doubles as the address to serve on.
            let bind = bind
                .or_else(|| {
                    std::env::var(ENDPOINT_VAR)
                        .ok()
                        .filter(|s| !s.is_empty())
                        .map(|s| s.trim_start_matches("http://").trim_end_matches('/').to_string())
                })
                .unwrap_or_else(|| DEFAULT_BIND.to_string());
            match serve(Emulator::default(), &bind) {
                Ok(()) => EXIT_OK,
                Err(e) => {
                    let _ = writeln!(stderr, "error: cannot serve on {bind}: {e}");
                    EXIT_FAILED
                }
            }
        }
        None => {
            let mut stdin_lines = None;
            for file in &cli.run.files {
                let code = run_file(&cli.run, file, stdout, stderr, &mut || {
                    stdin_lines
                        .get_or_insert_with(|| stdin.lines().map_while(Result::ok).collect::<Vec<_>>())
                        .clone()
                });
                if code != EXIT_OK {
                    return code;
                }
            }
            EXIT_OK
        }
    }
}

fn rejected(e: &AnalyzeError) -> bool {
    !matches!(e, AnalyzeError::Io { .. })
}

fn report_analyze(e: &AnalyzeError, stderr: &mut dyn Write) -> i32 {
    match e {
        AnalyzeError::Violations { module, violations } => {
            for v in violations {
                let _ = writeln!(stderr, "error: {module}: {v}");
            }
        }
        other => {
            let _ = writeln!(stderr, "error: {other}");
        }
    }
    if rejected(e) {
        EXIT_REJECTED
    } else {
        EXIT_FAILED
    }
}

fn report_transform(e: &TransformError, stderr: &mut dyn Write) -> i32 {
    match e {
        TransformError::Analyze(a) => report_analyze(a, stderr),
        TransformError::Arity { .. } | TransformError::Reserved { .. } | TransformError::MethodCollision { .. } => {
            let _ = writeln!(stderr, "error: {e}");
            EXIT_REJECTED
        }
        _ => {
            let _ = writeln!(stderr, "error: {e}");
            EXIT_FAILED
        }
    }
}

fn reads_input(tree: &Module) -> bool {
    let mut found = false;
    walk_exprs(&tree.body, &mut |e| {
        if let ExprKind::Call(func, _) = &e.kind {
            match &func.kind {
                ExprKind::Name(n) if n == "input" => found = true,
                ExprKind::Attribute(_, attr) if attr == "read_line" => found = true,
                _ => {}
            }
        }
    });
    found
}

fn program_reads_input(program: &Program) -> bool {
    program.modules.iter().any(|m| reads_input(&m.tree)) || program.units.iter().any(|u| reads_input(&u.tree))
}

fn run_file(
    options: &CliOptions,
    file: &Path,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
    stdin: &mut dyn FnMut() -> Vec<String>,
) -> i32 {
    if !file.is_file() {
        let _ = writeln!(stderr, "error: {}: no such file", file.display());
        return EXIT_FAILED;
    }
    let entry: SourceModule = match load_file(file) {
        Ok(m) => m,
        Err(e) => return report_analyze(&e, stderr),
    };
    let mut search = vec![file
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."))
        .to_path_buf()];
    search.extend(options.paths.iter().cloned());
    let loader = SearchPathLoader::new(search);

    if let Some(label) = &options.bench {
        return bench(options, &entry, &loader, label, stdout, stderr);
    }

    let mode = options.mode();
    let endpoint = (mode == Mode::Production).then(|| options.endpoint());
    let topts = TransformOptions {
        mode,
        endpoint: endpoint.clone(),
        ..TransformOptions::default()
    };
    let program = match transform_program(&entry, &loader, topts) {
        Ok(p) => p,
        Err(e) => return report_transform(&e, stderr),
    };

    if mode == Mode::Debug {
        let outdir = options.outdir.join(&entry.name);
        return match write_debug_outputs(&program.modules, &program.units, &outdir) {
            Ok(paths) => {
                for p in paths {
                    let _ = writeln!(stderr, "wrote {}", p.display());
                }
                EXIT_OK
            }
            Err(e) => {
                let _ = writeln!(stderr, "error: {e}");
                EXIT_FAILED
            }
        };
    }

    let run = ClientRun {
        stdin: if program_reads_input(&program) {
            stdin()
        } else {
            Vec::new()
        },
        ..ClientRun::default()
    };
    let result = match endpoint {
        None => program.run_local(run),
        Some(endpoint) => program.run_remote(RemoteClient::new(&endpoint), run).map(|r| r.result),
    };
    match result {
        Ok(r) => {
            let _ = stdout.write_all(r.stdout.as_bytes());
            let _ = stdout.flush();
            EXIT_OK
        }
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            EXIT_FAILED
        }
    }
}

fn bench(
    options: &CliOptions,
    entry: &SourceModule,
    loader: &SearchPathLoader,
    label: &str,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> i32 {
    let (mode, endpoint) = match options.mode() {
        Mode::Production => (ExecMode::Emulated, Some(options.endpoint())),
        _ => (ExecMode::Local, None),
    };
    let eo = ExperimentOptions {
        mode,
        endpoint,
        ..ExperimentOptions::default()
    };
    let row = match run_experiment(entry, loader, label, &eo) {
        Ok(r) => r,
        Err(BenchError::Transform(e)) => return report_transform(&e, stderr),
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            return EXIT_FAILED;
        }
    };
    match render_report(std::slice::from_ref(&row), ReportFormat::Table) {
        Ok(table) => {
            let _ = write!(stdout, "{table}");
            if row.failed.is_some() {
                EXIT_FAILED
            } else {
                EXIT_OK
            }
        }
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            EXIT_FAILED
        }
    }
}
