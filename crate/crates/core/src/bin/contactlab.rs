use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

use contactlab::config::RunConfig;
use contactlab::runner::{error_kind, exit_code, run};
use contactlab::Error;

#[derive(Parser)]
#[command(name = "contactlab", version, about = "Contact process experiments driven by one JSON config")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiments listed in the config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `output_dir` of the config.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides `mc.base_seed`.
        #[arg(long)]
        seed_override: Option<u64>,
        /// Worker threads; defaults to all cores. Results do not depend on it.
        #[arg(long)]
        threads: Option<usize>,
    },
    /// List every invariant violation of the config without simulating.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

fn fail(e: &Error) -> ExitCode {
    let record = serde_json::json!({"error": error_kind(e), "message": e.to_string(), "exit_code": exit_code(e)});
    eprintln!("{record}");
    ExitCode::from(exit_code(e) as u8)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match cli.command {
        Command::Validate { config } => {
            let cfg = match RunConfig::from_path(&config) {
                Ok(c) => c,
                Err(e) => return fail(&e),
            };
            let v = cfg.violations();
            println!("{}", serde_json::json!({"violations": v}));
            if v.is_empty() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            }
        }
        Command::Run { config, out, seed_override, threads } => {
            let mut cfg = match RunConfig::from_path(&config) {
                Ok(c) => c,
                Err(e) => return fail(&e),
            };
            if let Some(o) = out {
                cfg.output_dir = o;
            }
            if let Some(s) = seed_override {
                cfg.mc.base_seed = s;
            }
            let n = threads.unwrap_or(0);
            if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                return fail(&Error::InvalidArgument(e.to_string()));
            }
            let (_, res) = run(&cfg, rayon::current_num_threads());
            match res {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => fail(&e),
            }
        }
    }
}
