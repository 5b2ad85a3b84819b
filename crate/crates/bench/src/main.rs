//! `adasketch`: generate problems, run and compare sketch-preconditioned
//! solvers, and run concentration studies.
//!
//! Exit codes: 0 success, 2 flag error, 3 data error, 4 numerical failure.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod cli;
mod commands;
mod error;
mod io;
mod run;

use clap::Parser;

use cli::{Cli, Command};

fn main() {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Gen(args) => commands::gen(args),
        Command::Solve(args) => commands::solve(args),
        Command::Compare(args) => commands::compare(args),
        Command::Concentration(args) => commands::concentration(args),
    };
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
