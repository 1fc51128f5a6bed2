use clap::Parser;

use coughep_cli::pipeline::{run, Cli};

fn main() {
    env_logger::Builder::from_env(
        env_logger::Env::default().filter_or("COUGH_EP_LOG", "info"),
    )
    .format_timestamp(None)
    .init();

    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("{}", e.to_json());
        std::process::exit(e.exit_code());
    }
}
