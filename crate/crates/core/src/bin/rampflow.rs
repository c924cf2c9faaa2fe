use std::process::ExitCode;

use clap::Parser;

use ramp_traffic::cli::{execute, Args};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let outcome = execute(&Args::parse());
    for line in &outcome.stdout {
        println!("{line}");
    }
    if let Some(err) = &outcome.stderr {
        eprintln!("{err}");
    }
    ExitCode::from(outcome.code)
}
