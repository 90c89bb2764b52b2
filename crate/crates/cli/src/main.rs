use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use banditnet::harness::{self, parse_seed_range, ScenarioConfig};
use banditnet::strategies::StrategySpec;
use banditnet::verify;

#[derive(Parser)]
#[command(name = "banditnet", version, about = "Bandit channel and power selection experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scenario for every seed and write traces.
    Run(RunArgs),
    /// Aggregate traces into summary files.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the acceptance checks and print one line per criterion.
    Verify {
        /// Only run the listed criteria (1-10).
        #[arg(long, value_delimiter = ',')]
        only: Vec<usize>,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Scenario file (TOML).
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    config: Option<PathBuf>,
    /// Built-in scenario: part_one, part_one_stationary, part_two.
    #[arg(long)]
    preset: Option<String>,
    /// Seeds as `a..b`, `a..=b`, or a single number.
    #[arg(long)]
    seeds: Option<String>,
    #[arg(long)]
    out: PathBuf,
    /// Strategy per player, e.g. `bewas`, `eps_greedy=0.1` or
    /// `berts=period:80,threshold:0.16`. Give one for all players or one
    /// per player.
    #[arg(long = "strategy")]
    strategies: Vec<String>,
    #[arg(long)]
    horizon: Option<u64>,
}

fn scenario(args: &RunArgs) -> Result<ScenarioConfig> {
    let mut cfg = match (&args.config, &args.preset) {
        (Some(path), _) => ScenarioConfig::load(path)?,
        (None, Some(name)) => harness::preset(name)?,
        (None, None) => bail!("either --config or --preset is required"),
    };
    if let Some(seeds) = &args.seeds {
        cfg.seeds = parse_seed_range(seeds)?;
    }
    if let Some(h) = args.horizon {
        cfg.horizon = h;
        cfg.ce_checkpoints.retain(|&t| t <= h);
    }
    if !args.strategies.is_empty() {
        let specs = args
            .strategies
            .iter()
            .map(|s| StrategySpec::parse(s))
            .collect::<Result<Vec<_>, _>>()?;
        let k = cfg.num_players();
        cfg.strategies = match specs.len() {
            1 => vec![specs[0].clone(); k],
            n if n == k => specs,
            n => bail!("{n} strategies given for {k} players"),
        };
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(args: RunArgs) -> Result<()> {
    let cfg = scenario(&args)?;
    let traces = harness::run_batch(&cfg)?;
    let label_dir = args.out.join(cfg.strategy_label());
    std::fs::create_dir_all(&label_dir).with_context(|| format!("creating {}", label_dir.display()))?;
    let scenario_path = label_dir.join("scenario.toml");
    std::fs::write(&scenario_path, cfg.to_toml()?).with_context(|| format!("writing {}", scenario_path.display()))?;
    for trace in &traces {
        let dir = harness::write_run(trace, &args.out)?;
        let last = trace.last();
        let rewards: Vec<String> = last.average_rewards().iter().map(|r| format!("{r:.4}")).collect();
        println!(
            "seed {:>4}  t={}  average reward [{}]  -> {}",
            trace.seed,
            last.t,
            rewards.join(", "),
            dir.display()
        );
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run(args) => run(args),
        Command::Report { input, out } => harness::load_traces(&input)
            .and_then(|traces| harness::write_report(&traces, &out))
            .map(|summary| {
                for (label, s) in &summary.labels {
                    println!("{label}: {} runs, final average reward {:.4}", s.runs, s.final_average_reward);
                }
            })
            .map_err(Into::into),
        Command::Verify { only } => {
            let criteria = if only.is_empty() { verify::CRITERIA.to_vec() } else { only };
            let mut failed = 0;
            for id in criteria {
                match verify::check(id) {
                    Ok(outcome) => {
                        println!("{outcome}");
                        failed += usize::from(!outcome.passed);
                    }
                    Err(e) => {
                        println!("criterion {id}: FAIL ({e})");
                        failed += 1;
                    }
                }
            }
            if failed == 0 {
                Ok(())
            } else {
                Err(anyhow::anyhow!("{failed} criteria failed"))
            }
        }
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
