use clap::Parser;
use triad_dynamics::cli::{run, Cli};

fn main() {
    let code = run(Cli::parse());
    std::process::exit(code);
}
