// SPDX-License-Identifier: MIT OR Apache-2.0
use clap::Parser;

fn main() {
    std::process::exit(physteer::cli::run(physteer::cli::Cli::parse()));
}
