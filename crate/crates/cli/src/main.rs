use clap::Parser;

fn main() {
    let cli = transportlab_cli::Cli::parse();
    std::process::exit(transportlab_cli::main_with(cli));
}
