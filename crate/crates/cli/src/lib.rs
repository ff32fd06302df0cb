//! `ashgan` command-line front end. Each subcommand resolves its settings
//! (flags, then `ASHGAN_*` environment variables, then the `--config` TOML
//! file, then defaults), logs them, and calls into `ashgan-core`.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data error,
//! 3 runtime or training error.

mod args;
mod commands;
mod config;

use std::ffi::OsString;
use std::io::Write;
use std::sync::LazyLock;

use ashgan_core::ErrorKind;
use clap::{CommandFactory, FromArgMatches};

pub use args::Cli;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

static VERSION: LazyLock<String> = LazyLock::new(|| {
    format!(
        "{} (architecture spec v{})",
        env!("CARGO_PKG_VERSION"),
        ashgan_core::model::ARCHITECTURE_VERSION
    )
});

fn init_logging(cli: &Cli) {
    let level = match (cli.quiet, cli.verbose) {
        (true, _) => log::LevelFilter::Warn,
        (false, 0) => log::LevelFilter::Info,
        (false, 1) => log::LevelFilter::Debug,
        (false, _) => log::LevelFilter::Trace,
    };
    let mut builder = env_logger::Builder::new();
    builder.filter_level(level).parse_default_env();
    if cli.log_format == args::LogFormat::Json {
        builder.format(|buf, record| {
            let event = serde_json::json!({
                "level": record.level().as_str(),
                "target": record.target(),
                "message": record.args().to_string(),
            });
            writeln!(buf, "{event}")
        });
    } else {
        builder.format_target(false).format_timestamp_secs();
    }
    // A second call (tests run several commands in one process) keeps the
    // first logger.
    let _ = builder.try_init();
}

/// Exit code for an error: the first core error in the chain decides;
/// anything else stems from arguments or configuration.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    let core = err
        .chain()
        .find_map(|e| e.downcast_ref::<ashgan_core::Error>());
    match core.map(ashgan_core::Error::kind) {
        Some(ErrorKind::Data) => EXIT_DATA,
        Some(ErrorKind::Runtime) => EXIT_RUNTIME,
        Some(ErrorKind::Usage) | None => EXIT_USAGE,
    }
}

/// The error and its causes, skipping causes whose text the outer message
/// already includes.
pub fn describe(err: &anyhow::Error) -> String {
    let mut text = err.to_string();
    for cause in err.chain().skip(1) {
        let cause = cause.to_string();
        if !text.contains(&cause) {
            text.push_str(": ");
            text.push_str(&cause);
        }
    }
    text
}

fn kind_name(code: i32) -> &'static str {
    match code {
        EXIT_DATA => "data",
        EXIT_RUNTIME => "runtime",
        _ => "usage",
    }
}

/// Parses `args` (program name first) and runs the chosen subcommand.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let parsed = Cli::command()
        .version(VERSION.as_str())
        .try_get_matches_from(args)
        .and_then(|m| Cli::from_arg_matches(&m));
    let cli = match parsed {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    init_logging(&cli);
    match commands::dispatch(&cli) {
        Ok(()) => EXIT_OK,
        Err(err) => {
            let code = exit_code(&err);
            if cli.log_format == args::LogFormat::Json {
                let event = serde_json::json!({
                    "level": "ERROR",
                    "kind": kind_name(code),
                    "exit_code": code,
                    "message": describe(&err),
                });
                eprintln!("{event}");
            } else {
                eprintln!("error[{}]: {}", kind_name(code), describe(&err));
            }
            code
        }
    }
}
