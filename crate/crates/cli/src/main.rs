use clap::Parser;

fn main() {
    let cli = cfel_cli::Cli::parse();
    std::process::exit(cfel_cli::execute(&cli));
}
