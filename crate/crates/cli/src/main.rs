use clap::Parser;

fn main() {
    let cli = coldwave_cli::Cli::parse();
    std::process::exit(coldwave_cli::run(&cli));
}
