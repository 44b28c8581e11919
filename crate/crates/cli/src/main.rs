use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use zoirl_core::experiment::{
    config::TraceSource, load_traces, parse_override, run_blackbox_suite, run_district, run_sweep,
    ExperimentConfig, Mode,
};
use zoirl_core::sim::write_traces_csv;
use zoirl_core::Error;

#[derive(Parser)]
#[command(name = "zoirl", version, about = "Guided evolutionary search over rolling-horizon storage planners")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one district experiment (mode from the config, default zoirl).
    Run(Common),
    /// Run the configured parameter grid over several seeds.
    Sweep(Common),
    /// Run the test-function convergence suite.
    Blackbox(Common),
    /// Write the configured traces to `<out>/traces.csv`.
    GenData(Common),
}

#[derive(Args)]
struct Common {
    /// JSON config; every field is optional.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (overrides `output_dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Dotted-path override such as `schedule.iota1=0.3`; repeatable.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

fn load(common: &Common) -> zoirl_core::Result<ExperimentConfig> {
    let mut overrides = common
        .overrides
        .iter()
        .map(|o| parse_override(o))
        .collect::<zoirl_core::Result<Vec<_>>>()?;
    if let Some(seed) = common.seed {
        overrides.push(parse_override(&format!("seed={seed}"))?);
    }
    if let Some(out) = &common.out {
        overrides.push(("output_dir".into(), out.to_string_lossy().into_owned().into()));
    }
    match &common.config {
        Some(path) => ExperimentConfig::from_file(path, &overrides),
        None => ExperimentConfig::from_json_str("{}", &overrides),
    }
}

fn execute(command: Command) -> zoirl_core::Result<()> {
    match command {
        Command::Run(c) => {
            let cfg = load(&c)?;
            let out = if cfg.mode == Mode::Blackbox {
                run_blackbox_suite(&cfg)?
            } else {
                run_district(&cfg)?
            };
            out.write(&cfg.output_dir)?;
            if let Some(r) = &out.report {
                print!("{}", r.table());
            }
            println!("outputs written to {}", cfg.output_dir.display());
        }
        Command::Sweep(c) => {
            let cfg = load(&c)?;
            let out = run_sweep(&cfg)?;
            out.write(&cfg.output_dir, &cfg)?;
            for (i, cell) in out.cells.iter().enumerate() {
                let (mean, std) = zoirl_core::experiment::sweep::mean_std(&cell.total_scores());
                let label: Vec<String> = cell.assignments.iter().map(|(k, v)| format!("{k}={v}")).collect();
                println!(
                    "cell {i:>3} [{}] total_score {mean:.4} ± {std:.4} ({} ok, {} failed)",
                    label.join(", "),
                    cell.runs.len(),
                    cell.failures.len()
                );
            }
            println!("outputs written to {}", cfg.output_dir.display());
        }
        Command::Blackbox(c) => {
            let cfg = load(&c)?;
            let out = run_blackbox_suite(&cfg)?;
            out.write(&cfg.output_dir)?;
            for s in &out.blackbox_summary {
                println!(
                    "{:<28} concentrated {}/{}  accurate {}/{}",
                    s.case, s.concentrated_seeds, s.seeds, s.accurate_seeds, s.seeds
                );
            }
            println!("outputs written to {}", cfg.output_dir.display());
        }
        Command::GenData(c) => {
            let cfg = load(&c)?;
            if let TraceSource::Csv(p) = &cfg.traces {
                eprintln!("note: re-exporting traces read from {}", p.display());
            }
            let traces = load_traces(&cfg)?;
            std::fs::create_dir_all(&cfg.output_dir).map_err(|e| Error::io(&cfg.output_dir, e))?;
            let path = cfg.output_dir.join("traces.csv");
            let file = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
            write_traces_csv(&traces, file)?;
            println!("{} buildings, {} hours written to {}", traces.len(), traces[0].len(), path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Error::Config(problems)) => {
            eprintln!("configuration error:");
            for p in problems {
                eprintln!("  - {p}");
            }
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(3)
        }
    }
}
