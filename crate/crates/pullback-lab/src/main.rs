//! Command-line entry point.
//!
//! Subcommands: `run <config-path>`, `list-scenarios`,
//! `emit-default-config <scenario>`. The environment variable
//! `PULLBACK_LAB_OUTPUT_ROOT`, when set, overrides the configured output
//! directory. Exit codes: 0 every gate passed, 1 an acceptance gate
//! failed, 2 configuration error, 3 runtime error.

use std::path::PathBuf;
use std::process::ExitCode;

use pullback_lab::config::{emit, parse_config};
use pullback_lab::error::Error;
use pullback_lab::runner;
use pullback_lab::scenarios;

const USAGE: &str = "usage: pullback-lab <command>

commands:
  run <config-path>              execute the experiments a config selects
  list-scenarios                 print the built-in scenario registry
  emit-default-config <scenario> print a ready-to-edit config for a scenario

environment:
  PULLBACK_LAB_OUTPUT_ROOT       overrides the configured output directory";

fn fail(err: &Error) -> ExitCode {
    eprintln!("error: {err}");
    ExitCode::from(err.exit_code())
}

fn cmd_run(path: &str) -> ExitCode {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {path}: {e}");
            return ExitCode::from(2);
        }
    };
    let cfg = match parse_config(&text) {
        Ok(c) => c,
        Err(e) => return fail(&e),
    };
    let root = std::env::var_os("PULLBACK_LAB_OUTPUT_ROOT").map(PathBuf::from);
    match runner::run(&cfg, root.as_deref()) {
        Ok(outcome) => {
            for g in &outcome.gates {
                println!(
                    "{} {}: {}",
                    if g.passed { "PASS" } else { "FAIL" },
                    g.name,
                    g.detail
                );
            }
            println!("artifacts: {}", outcome.out_dir.display());
            if outcome.all_passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => fail(&e),
    }
}

fn cmd_list() -> ExitCode {
    for s in &scenarios::SCENARIOS {
        println!("{:<28} {}", s.name, s.description);
    }
    ExitCode::SUCCESS
}

fn cmd_emit(scenario: &str) -> ExitCode {
    match pullback_lab::config::default_config(scenario) {
        Ok(cfg) => {
            print!("{}", emit(&cfg));
            ExitCode::SUCCESS
        }
        Err(e) => {
            // A bad scenario name on the command line is a config error.
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    match args.iter().map(String::as_str).collect::<Vec<_>>()[..] {
        ["run", path] => cmd_run(path),
        ["list-scenarios"] => cmd_list(),
        ["emit-default-config", scenario] => cmd_emit(scenario),
        _ => {
            eprintln!("{USAGE}");
            ExitCode::from(2)
        }
    }
}
