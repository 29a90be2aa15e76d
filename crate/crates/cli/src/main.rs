use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hiergen_cli::{cmd_bench, cmd_tree, parse_config, summary_table, CliError};

/// Induce class hierarchies and benchmark hierarchical classification.
#[derive(Parser)]
#[command(name = "hiergen", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Cross-validate the configured schemes and write reports.
    Bench(Args),
    /// Build one hierarchy from the full dataset and print it.
    Tree(Args),
}

#[derive(clap::Args)]
struct Args {
    /// Config file with `key = value` lines.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Overrides as `--key value` or `--key=value`, e.g. `--cv.folds 10`.
    #[arg(trailing_var_arg = true, allow_hyphen_values = true, value_name = "OVERRIDES")]
    overrides: Vec<String>,
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Bench(args) => {
            let cfg = parse_config(args.config.as_deref(), &args.overrides)?;
            let report = cmd_bench(&cfg)?;
            print!("{}", summary_table(&report));
            println!("wrote {}", cfg.output_dir.display());
        }
        Command::Tree(args) => {
            let cfg = parse_config(args.config.as_deref(), &args.overrides)?;
            let out = cmd_tree(&cfg)?;
            println!("{}", out.newick);
            println!("fingerprint {}", out.fingerprint);
            print!("{}", out.table);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
