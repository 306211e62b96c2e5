use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use mfg_fp::harness::{cmd_bench_lq, cmd_list_envs, cmd_run, BenchLqOptions};

#[derive(Parser)]
#[command(name = "mfg-fp", version, about = "Fictitious Play for finite mean field games")]
struct Cli {
    /// Worker threads (defaults to MFG_FP_THREADS, then all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Run Fictitious Play from a JSON config.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// List the builtin environments.
    ListEnvs {
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
    /// Compare FP on the LQ game against the projected closed form.
    BenchLq {
        #[arg(long, default_value_t = 200)]
        iterations: usize,
        #[arg(long, default_value = "out/bench_lq")]
        output_dir: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn main() {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run { config } => cmd_run(&config, cli.threads),
        Command::ListEnvs { format } => cmd_list_envs(matches!(format, Format::Json)),
        Command::BenchLq {
            iterations,
            output_dir,
            seed,
        } => {
            if iterations == 0 {
                eprintln!("error: --iterations must be ≥ 1");
                std::process::exit(2);
            }
            let opts = BenchLqOptions {
                iterations,
                seed,
                output_dir,
                ..BenchLqOptions::default()
            };
            cmd_bench_lq(&opts, cli.threads)
        }
    };
    std::process::exit(code);
}
