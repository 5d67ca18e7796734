use clap::Parser;

fn main() {
    let cli = coqan::commands::Cli::parse();
    if let Err(e) = coqan::commands::run(cli) {
        eprintln!("error: {}", e);
        std::process::exit(1);
    }
}
