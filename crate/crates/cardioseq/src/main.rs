use clap::Parser;

use cardioseq::cli::{execute, Cli};

/// Exit codes: 0 success, 1 runtime/data error, 2 usage error (from the
/// argument parser).
fn main() {
    let cli = Cli::parse();
    if let Err(err) = execute(cli) {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}
