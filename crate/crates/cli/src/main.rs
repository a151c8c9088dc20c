use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use kgcurve_cli::{run, Invocation, Task};

#[derive(Parser)]
#[command(name = "kgcurve", version, about = "Bound states of a Klein-Gordon particle with delta interactions on closed curves")]
struct Args {
    task: Task,
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    threads: Option<usize>,
    /// Reject unknown config keys.
    #[arg(long)]
    strict: bool,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let inv = Invocation {
        task: args.task,
        config: args.config,
        out: args.out,
        threads: args.threads,
        strict: args.strict,
    };
    match run(&inv) {
        Ok(path) => {
            println!("{}", path.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
