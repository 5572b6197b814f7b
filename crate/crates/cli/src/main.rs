use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use heatsource_core::config::{preset, presets, ExperimentConfig};
use heatsource_core::output::{run_to_bundle, write_forward, write_timing, Timing};
use heatsource_core::sensors::StrategyKind;
use heatsource_core::{par, Error, Result};

#[derive(Parser)]
#[command(
    name = "heatsource",
    version,
    about = "Bayesian heat-source inversion with moving boundary sensors"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve with the true source and write the boundary flux at each schedule time.
    Forward {
        #[command(flatten)]
        input: Input,
        /// Also write the final temperature field.
        #[arg(long)]
        dump_field: bool,
    },
    /// Run the full observe / sample / relocate loop and write a result bundle.
    Experiment {
        #[command(flatten)]
        input: Input,
        /// Run this many seeds (seed, seed+1, ...) into `out/seed-<n>` subdirectories.
        #[arg(long, default_value_t = 1)]
        replicates: usize,
        /// Override the sensor strategy.
        #[arg(long, value_parser = parse_strategy)]
        strategy: Option<StrategyKind>,
    },
    /// Inspect built-in configurations.
    Presets {
        #[command(subcommand)]
        action: PresetAction,
    },
}

#[derive(Subcommand)]
enum PresetAction {
    List,
    /// Print a preset as a config file.
    Show {
        name: String,
    },
}

#[derive(Args)]
struct Input {
    /// Config file (TOML).
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    config: Option<PathBuf>,
    #[arg(long)]
    preset: Option<String>,
    /// Override the master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Input {
    fn resolve(&self) -> Result<(ExperimentConfig, PathBuf)> {
        let mut cfg = match (&self.config, &self.preset) {
            (Some(path), _) => ExperimentConfig::load(path)?,
            (None, Some(name)) => preset(name)?,
            (None, None) => unreachable!("clap requires one input"),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        let out = self.out.clone().unwrap_or_else(|| PathBuf::from(&cfg.output.dir));
        Ok((cfg, out))
    }
}

fn parse_strategy(s: &str) -> std::result::Result<StrategyKind, String> {
    [
        StrategyKind::Fixed,
        StrategyKind::RandomEachRound,
        StrategyKind::PosteriorAngle,
        StrategyKind::MaxFluxVariance,
    ]
    .into_iter()
    .find(|k| k.name() == s)
    .ok_or_else(|| {
        format!("unknown strategy `{s}` (fixed, random-each-round, posterior-angle, max-flux-variance)")
    })
}

fn experiment(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    let start = Instant::now();
    let result = run_to_bundle(cfg, out)?;
    write_timing(
        out,
        &Timing {
            seconds: start.elapsed().as_secs_f64(),
            rounds: result.rounds.len(),
            parallel: par::is_parallel(),
        },
    )?;
    let last = result.final_round();
    let itinerary: Vec<String> = result.itinerary().iter().map(|p| p.to_string()).collect();
    println!(
        "{}: seed {} rounds {} sensors {} mean {:?}{}",
        cfg.name,
        cfg.seed,
        result.rounds.len(),
        itinerary.join(" -> "),
        last.summary.mean,
        if result.stop_fired() {
            " (stopped on repeat)"
        } else {
            ""
        }
    );
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Forward { input, dump_field } => {
            let (cfg, out) = input.resolve()?;
            write_forward(&cfg, &out, dump_field)?;
            println!("wrote {}", out.join("flux.csv").display());
            Ok(())
        }
        Command::Experiment {
            input,
            replicates,
            strategy,
        } => {
            let (mut cfg, out) = input.resolve()?;
            if let Some(s) = strategy {
                cfg.schedule.strategy = s;
            }
            cfg.validate()?;
            if replicates <= 1 {
                return experiment(&cfg, &out);
            }
            let runs = par::map_range(replicates, |i| {
                let c = heatsource_core::assimilation::replicate_config(&cfg, i);
                let dir = out.join(format!("seed-{}", c.seed));
                experiment(&c, &dir).map_err(|e| (c.seed, e))
            });
            let failures: Vec<(u64, Error)> = runs.into_iter().filter_map(|r| r.err()).collect();
            for (seed, e) in &failures {
                eprintln!("seed {seed}: {e}");
            }
            match failures.into_iter().next() {
                Some((_, e)) => Err(e),
                None => Ok(()),
            }
        }
        Command::Presets { action } => {
            match action {
                PresetAction::List => {
                    for p in presets() {
                        println!("{:<22} {}", p.name, p.description);
                    }
                }
                PresetAction::Show { name } => print!("{}", preset(&name)?.to_toml_string()),
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::FAILURE
        }
    }
}
