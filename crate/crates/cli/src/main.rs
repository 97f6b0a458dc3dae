use clap::Parser;

use dtofkit_cli::Command;

/// dToF depth toolkit: simulation, projection, evaluation and refinement.
#[derive(Debug, Parser)]
#[command(name = "dtofkit", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

fn main() {
    let cli = Cli::parse();
    if let Err(err) = dtofkit_cli::run(&cli.command) {
        eprintln!("dtofkit: {err}");
        std::process::exit(err.exit_code());
    }
}
