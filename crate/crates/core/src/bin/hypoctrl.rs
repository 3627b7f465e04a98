use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hypoctrl::scenario::{registry, render_list, run_scenario};

#[derive(Parser)]
#[command(name = "hypoctrl", version, about = "Null-controllability study cases for hypoelliptic Ornstein-Uhlenbeck equations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write result.json plus CSV files.
    Run {
        scenario: String,
        /// TOML (.toml) or JSON config overriding scenario defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// List scenarios.
    List {
        #[arg(long)]
        json: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::List { json } => {
            let text = render_list(registry(), json);
            if json {
                println!("{text}");
            } else {
                print!("{text}");
            }
            ExitCode::SUCCESS
        }
        Command::Run { scenario, config, out, seed } => match run_scenario(&scenario, config.as_deref(), &out, seed) {
            Ok(r) => {
                for v in r.result["verdicts"].as_array().into_iter().flatten() {
                    println!("{:<40}{}", v["name"].as_str().unwrap_or(""), v["status"].as_str().unwrap_or(""));
                }
                println!("wrote {}", out.join("result.json").display());
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("hypoctrl: {e}");
                ExitCode::FAILURE
            }
        },
    }
}
