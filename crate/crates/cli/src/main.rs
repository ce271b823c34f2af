use clap::Parser;

fn main() {
    let cli = satisfice_cli::Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    std::process::exit(satisfice_cli::run(cli));
}
