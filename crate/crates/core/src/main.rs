use clap::Parser;

fn main() -> std::process::ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    semilinear_heat::cli::main_with(semilinear_heat::cli::Cli::parse())
}
