use clap::Parser;
use nonmarkov_krotov::cli::{execute, Cli};

fn main() {
    std::process::exit(execute(&Cli::parse()));
}
