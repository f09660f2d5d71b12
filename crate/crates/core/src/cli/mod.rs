//! `phonon-laser-lab <command> [--config FILE] [--key value ...]`

pub mod commands;
pub mod config;
pub mod table;

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::PathBuf;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Arg, ArgAction, Command};

use crate::error::{Error, Result};
use config::{read_config_file, Settings, KEYS};

pub const EXIT_OK: i32 = 0;
pub const EXIT_NUMERICAL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

const BOOLEAN_KEYS: &[&str] = &["series", "algebraic_fixed_points", "random_v0"];

fn cli() -> Command {
    let mut cmd = Command::new("phonon-laser-lab")
        .version(env!("CARGO_PKG_VERSION"))
        .about("Mean-field dynamics and fluctuation entanglement of a two-cavity phonon laser")
        .after_help(
            commands::COMMANDS
                .iter()
                .map(|(n, d)| format!("  {n:<18} {d}"))
                .collect::<Vec<_>>()
                .join("\n"),
        )
        .arg(
            Arg::new("command")
                .required(true)
                .value_parser(commands::COMMANDS.iter().map(|(n, _)| *n).collect::<Vec<_>>()),
        )
        .arg(
            Arg::new("config")
                .long("config")
                .value_name("FILE")
                .value_parser(clap::value_parser!(PathBuf))
                .help("flat key = value file; flags override it"),
        );
    for (key, default, help) in KEYS {
        let mut arg = Arg::new(*key)
            .long(key.replace('_', "-"))
            .value_name("VALUE")
            .help(format!("{help} [default: {default}]"))
            .action(ArgAction::Set);
        if BOOLEAN_KEYS.contains(key) {
            arg = arg.num_args(0..=1).default_missing_value("true");
        }
        cmd = cmd.arg(arg);
    }
    cmd
}

/// Parsed invocation.
#[derive(Debug, Clone)]
pub struct Invocation {
    pub command: String,
    pub settings: Settings,
}

pub fn parse_args<I, T>(args: I) -> std::result::Result<Invocation, clap::Error>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let m = cli().try_get_matches_from(args)?;
    let command = m.get_one::<String>("command").cloned().unwrap_or_default();
    let flags: BTreeMap<String, String> = KEYS
        .iter()
        .filter_map(|(k, _, _)| m.get_one::<String>(k).map(|v| (k.to_string(), v.clone())))
        .collect();
    let file = match m.get_one::<PathBuf>("config") {
        Some(p) => read_config_file(p),
        None => Ok(BTreeMap::new()),
    };
    let settings = file
        .and_then(|f| Settings::layered(f, flags))
        .map_err(|e| cli().error(clap::error::ErrorKind::InvalidValue, e.to_string()))?;
    Ok(Invocation { command, settings })
}

fn timestamp_tag() -> String {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs().to_string())
        .unwrap_or_else(|_| "0".into())
}

/// Runs a parsed invocation and writes its tables; returns the files.
pub fn execute(inv: &Invocation) -> Result<(Vec<PathBuf>, Option<String>)> {
    let s = &inv.settings;
    let tag = s.tag().unwrap_or_else(timestamp_tag);
    if tag.contains(['/', '\\']) {
        return Err(Error::Config(format!("tag '{tag}' must not contain path separators")));
    }
    let start = Instant::now();
    let out = commands::run_command(&inv.command, s)?;
    let wall = start.elapsed().as_secs_f64();
    let mut header = vec![
        ("command".to_string(), inv.command.clone()),
        ("engine".to_string(), format!("phonon-lab {}", env!("CARGO_PKG_VERSION"))),
    ];
    header.extend(s.entries().map(|(k, v)| (format!("config.{k}"), v.clone())));
    header.push(("wall_time_s".to_string(), format!("{wall:.3}")));
    let dir = s.out_dir();
    let files = out
        .tables
        .iter()
        .map(|(stem, t)| t.write(&dir, &format!("{stem}_{tag}.csv"), &header))
        .collect::<Result<Vec<_>>>()?;
    Ok((files, out.failure))
}

/// Full command-line entry point; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let inv = match parse_args(args) {
        Ok(inv) => inv,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(&inv) {
        Ok((files, failure)) => {
            for f in &files {
                println!("{}", f.display());
            }
            match failure {
                Some(why) => {
                    eprintln!("error: {why}");
                    EXIT_NUMERICAL
                }
                None => EXIT_OK,
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_usage() {
                EXIT_USAGE
            } else {
                EXIT_NUMERICAL
            }
        }
    }
}
