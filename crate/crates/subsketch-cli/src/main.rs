use clap::Parser;
use subsketch_cli::cli::{Cli, Command, SvmCommand};
use subsketch_cli::commands;

fn main() {
    // SUBSKETCH_THREADS caps the worker pool used by sampled certification
    // and error sweeps
    if let Ok(t) = std::env::var("SUBSKETCH_THREADS") {
        if let Ok(n) = t.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
        }
    }
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Build(args) => commands::cmd_build(args),
        Command::Query(args) => commands::cmd_query(args),
        Command::Stream(args) => commands::cmd_stream(args),
        Command::Svm(SvmCommand::Build(args)) => commands::cmd_svm_build(args),
        Command::Svm(SvmCommand::Query(args)) => commands::cmd_svm_query(args),
        Command::Experiment(args) => commands::cmd_experiment(args),
    };
    match result {
        Ok(code) => std::process::exit(code),
        Err(err) => {
            eprintln!("error: {err}");
            std::process::exit(commands::exit_code_for(&err));
        }
    }
}
