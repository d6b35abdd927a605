use clap::Parser;
use deskgo::cli::{run, Cli};

fn main() {
    std::process::exit(run(Cli::parse()));
}
