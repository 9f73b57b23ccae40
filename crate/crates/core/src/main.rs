use clap::Parser;
use selfedit::cli::{dispatch, Cli};

fn main() {
    std::process::exit(dispatch(Cli::parse()));
}
