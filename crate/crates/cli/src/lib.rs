//! The `depkit` command line.
//!
//! Exit codes: 0 success, 1 an analysis finding a CI gate should fail on
//! (counterexample or unknown verdict, monitor warning, coverage below
//! `--min-coverage`), 2 usage or input errors. Errors are reported on stderr as
//! one JSON object `{"error": kind, "message": text}`.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::Parser;
use depkit_core::Error;
use serde_json::json;

pub mod args;
pub mod commands;
pub mod io;

use args::{Cli, Command, CoverageCommand, MonitorCommand};
use commands::{Context, Outcome};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FINDING: i32 = 1;
pub const EXIT_ERROR: i32 = 2;

/// Parses `argv` (program name first) and runs the subcommand, writing to the
/// process's stdout and stderr.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(argv, &mut stdout.lock(), &mut stderr.lock())
}

pub fn run_with<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(out, "{}", e.render());
                return EXIT_OK;
            }
            report_error(err, "Usage", &e.render().to_string());
            return EXIT_ERROR;
        }
    };
    init_logging(cli.verbose);
    let ctx = Context {
        args: argv.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect(),
        seed: cli.seed,
        min_coverage: cli.min_coverage,
    };
    let result = match cli.jobs {
        Some(0) => Err(Error::BadParameters("--jobs must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::BadParameters(e.to_string()))
            .and_then(|pool| pool.install(|| execute(&cli, &ctx))),
        None => execute(&cli, &ctx),
    }
    .and_then(|(outcome, path)| emit(&outcome, path.as_deref(), out).map(|_| outcome.finding));
    match result {
        Ok(true) => EXIT_FINDING,
        Ok(false) => EXIT_OK,
        Err(e) => {
            report_error(err, e.kind(), &e.to_string());
            EXIT_ERROR
        }
    }
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        2 => log::LevelFilter::Debug,
        _ => log::LevelFilter::Trace,
    };
    // a second initialisation (repeated in-process runs) keeps the first logger
    let _ = env_logger::Builder::new().filter_level(level).try_init();
    log::set_max_level(level);
}

fn report_error(err: &mut dyn Write, kind: &str, message: &str) {
    let record = json!({"error": kind, "message": message.trim_end()});
    let _ = writeln!(err, "{record}");
}

/// Runs the subcommand; returns its outcome and where the report goes.
fn execute(cli: &Cli, ctx: &Context) -> depkit_core::Result<(Outcome, Option<PathBuf>)> {
    let mut report_path = cli.out.as_deref();
    let outcome: Outcome = match &cli.command {
        Command::Coverage { command } => match command {
            CoverageCommand::Compute(a) => commands::compute(ctx, a)?,
            CoverageCommand::Propose {
                catalog,
                count,
                strategy,
            } => commands::propose(ctx, catalog, *count, *strategy)?,
        },
        Command::Verify(a) => commands::verify(ctx, a)?,
        Command::Monitor { command } => match command {
            MonitorCommand::Build {
                model,
                data,
                layer,
                gamma,
                threshold,
                report,
            } => {
                let Some(monitor_out) = cli.out.as_deref() else {
                    return Err(Error::BadParameters(
                        "monitor build needs --out for the monitor file".into(),
                    ));
                };
                report_path = report.as_deref();
                let a = commands::monitor::BuildArgs {
                    model,
                    data,
                    layer: *layer,
                    gamma: *gamma,
                    threshold: *threshold,
                    out: monitor_out,
                };
                commands::build(ctx, &a)?
            }
            MonitorCommand::Check {
                monitor,
                model,
                input,
                data,
            } => commands::check(ctx, monitor, model.as_deref(), input.as_deref(), data.as_deref())?,
        },
        Command::Perturb(a) => commands::perturb(ctx, a)?,
        Command::Occlusion(a) => commands::occlusion(ctx, a)?,
    };
    if ctx.min_coverage.is_some() && !matches!(cli.command, Command::Coverage { .. }) {
        log::warn!("--min-coverage only applies to coverage commands");
    }
    Ok((outcome, report_path.map(Path::to_path_buf)))
}

fn emit(outcome: &Outcome, path: Option<&Path>, out: &mut dyn Write) -> depkit_core::Result<()> {
    let mut text = outcome.report.to_json();
    text.push('\n');
    match path {
        Some(p) => io::write_atomic(p, text.as_bytes()),
        None => Ok(out.write_all(text.as_bytes())?),
    }
}
