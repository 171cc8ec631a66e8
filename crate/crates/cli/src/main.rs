use clap::Parser;
use minsing_cli::{execute, Cli};

fn main() {
    let cli = Cli::parse();
    if let Err(e) = execute(&cli) {
        eprintln!("minsing: {e}");
        std::process::exit(e.exit_code());
    }
}
