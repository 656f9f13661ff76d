use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use netmimo::harness::config::{Scheme, SimConfig};
use netmimo::harness::validation::{self, AcceptancePlan};
use netmimo::harness::{run_episode, run_sweep, write_episode, write_sweep};
use netmimo::oracle;
use netmimo::{Error, Result};
use serde_json::json;

#[derive(Parser)]
#[command(name = "netmimo", version, about = "Queue-aware network MIMO simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one episode and write its summary and traces.
    Simulate {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory; overrides `output.dir`.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        scheme: Option<String>,
    },
    /// Sweep one numeric config field over values, seeds and schemes.
    Sweep {
        config: PathBuf,
        /// Dotted field path, e.g. `radio.budget_dbm`.
        #[arg(long)]
        axis: String,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
        /// Comma-separated schemes; all four when absent.
        #[arg(long, value_delimiter = ',')]
        scheme: Option<Vec<String>>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve a tiny quantised-CSI instance exactly and print JSON.
    Oracle {
        config: PathBuf,
        /// Per-BS multipliers; `learning.gamma_init` when absent.
        #[arg(long, value_delimiter = ',')]
        gamma: Option<Vec<f64>>,
    },
    /// Run the acceptance checks.
    Validate {
        /// Criterion ids to run; all when absent.
        #[arg(long, value_delimiter = ',')]
        only: Option<Vec<u32>>,
        #[arg(long)]
        seed: Option<u64>,
        /// Print the reports as JSON.
        #[arg(long)]
        json: bool,
        /// Tiny configuration for the learning checks; the bundled one when absent.
        #[arg(long)]
        tiny: Option<PathBuf>,
        /// Desk-scale configuration; the bundled one when absent.
        #[arg(long)]
        desk: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            let mut report = json!({ "kind": e.kind(), "message": e.to_string() });
            if let Error::AtSlot { slot, .. } = &e {
                report["slot"] = json!(slot);
            }
            eprintln!("{}", json!({ "error": report }));
            ExitCode::from(2)
        }
    }
}

fn run(command: Command) -> Result<ExitCode> {
    match command {
        Command::Simulate {
            config,
            seed,
            out,
            scheme,
        } => {
            let mut cfg = SimConfig::load(&config)?;
            if let Some(s) = seed {
                cfg.run.seed = s;
            }
            if let Some(s) = scheme {
                cfg.scheme.kind = Scheme::parse(&s)?;
            }
            if let Some(dir) = out {
                cfg.output.dir = Some(dir);
            }
            cfg.validate()?;
            let result = run_episode(&cfg)?;
            if let Some(dir) = cfg.output_dir() {
                write_episode(&dir, &result)?;
                log::info!("wrote {}", dir.display());
            }
            println!("{}", serde_json::to_string_pretty(&result.summary)?);
            Ok(ExitCode::SUCCESS)
        }
        Command::Sweep {
            config,
            axis,
            values,
            seeds,
            scheme,
            out,
        } => {
            let cfg = SimConfig::load(&config)?;
            let seeds = seeds.unwrap_or_else(|| vec![cfg.run.seed]);
            let schemes = match scheme {
                Some(names) => names.iter().map(|n| Scheme::parse(n)).collect::<Result<Vec<_>>>()?,
                None => Scheme::ALL.to_vec(),
            };
            let result = run_sweep(&cfg, &axis, &values, &seeds, &schemes)?;
            let dir = out.or_else(|| cfg.output_dir());
            if let Some(dir) = dir {
                write_sweep(&dir, &result)?;
            }
            println!("{}", serde_json::to_string_pretty(&result.aggregates)?);
            Ok(ExitCode::SUCCESS)
        }
        Command::Oracle { config, gamma } => {
            let cfg = SimConfig::load(&config)?;
            let cells = cfg.build_topology()?.num_cells;
            let gamma = gamma.unwrap_or_else(|| vec![cfg.learning.gamma_init; cells]);
            let inst = cfg.tiny_instance(&gamma)?;
            let report = oracle::solve(&inst)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(ExitCode::SUCCESS)
        }
        Command::Validate {
            only,
            seed,
            json,
            tiny,
            desk,
        } => {
            let mut plan = AcceptancePlan::default();
            if let Some(s) = seed {
                plan.seed = s;
            }
            if let Some(p) = tiny {
                plan.tiny = SimConfig::load(&p)?;
            }
            if let Some(p) = desk {
                plan.desk = SimConfig::load(&p)?;
            }
            let scratch = std::env::temp_dir().join(format!("netmimo-validate-{}", std::process::id()));
            let ids = only.unwrap_or_else(|| validation::ALL_CRITERIA.to_vec());
            let reports = validation::run_criteria(&plan, &ids, &scratch, |r| {
                if !json {
                    println!("{r}");
                }
            });
            let _ = std::fs::remove_dir_all(&scratch);
            if json {
                println!("{}", serde_json::to_string_pretty(&reports)?);
            }
            Ok(if reports.iter().all(|r| r.passed) {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            })
        }
    }
}
