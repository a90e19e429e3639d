use clap::Parser;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let argv: Vec<String> = std::env::args().collect();
    let cli = stig_cli::Cli::parse();
    if let Err(e) = stig_cli::run(cli, &argv) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
