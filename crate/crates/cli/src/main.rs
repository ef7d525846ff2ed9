use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Arg, ArgAction, Command as Cli};
use sparse_edge_cli::{parse_with_overrides, run, KEYS};

fn cli() -> Cli {
    let mut cmd = Cli::new("sparse-edge")
        .version(env!("CARGO_PKG_VERSION"))
        .about("Monte Carlo experiments on the spectral edge of sparse random matrices")
        .after_help(
            "Settings come from a `key = value` config file. Any key may also be given as \
             --KEY VALUE, which overrides the file.\nExit status: 0 pass, 1 error, 2 contract failure.",
        )
        .arg(
            Arg::new("config")
                .value_name("CONFIG")
                .value_parser(clap::value_parser!(PathBuf))
                .help("configuration file (.cfg)"),
        );
    for key in KEYS {
        cmd = cmd.arg(
            Arg::new(key)
                .long(key)
                .value_name("VALUE")
                .action(ArgAction::Set)
                .allow_hyphen_values(true),
        );
    }
    cmd
}

fn main() -> ExitCode {
    let matches = cli().get_matches();
    let text = match matches.get_one::<PathBuf>("config") {
        Some(path) => match std::fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) => {
                eprintln!("error: cannot read {}: {e}", path.display());
                return ExitCode::from(1);
            }
        },
        None => String::new(),
    };
    let overrides: Vec<(String, String)> = KEYS
        .iter()
        .filter_map(|k| matches.get_one::<String>(k).map(|v| (k.to_string(), v.clone())))
        .collect();
    let config = match parse_with_overrides(&text, &overrides) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    match run(&config) {
        Ok(outcome) => {
            for c in &outcome.contracts {
                println!("{c}");
            }
            for f in &outcome.files {
                eprintln!("wrote {}", f.display());
            }
            ExitCode::from(outcome.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
