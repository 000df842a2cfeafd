use std::process::ExitCode;

use anyhow::Context;
use clap::Parser;
use nlqsim::Cli;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match setup_threads()
        .and_then(|_| nlqsim::run(&cli, &mut std::io::stdout().lock(), &mut std::io::stderr()))
    {
        Ok(0) => ExitCode::SUCCESS,
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn setup_threads() -> anyhow::Result<()> {
    let Ok(v) = std::env::var("NLQSIM_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .parse()
        .with_context(|| format!("NLQSIM_THREADS must be a positive integer, got `{v}`"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n.max(1))
        .build_global()
        .context("configuring the worker pool")
}
