use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use riskfleet::experiment::{cmd_eval, cmd_record, cmd_train, run_stem, ExperimentPlan, Mode};
use riskfleet::model::{Scenario, TaskKind};
use riskfleet::policies::PolicyKind;
use riskfleet::Error;

#[derive(Parser)]
#[command(name = "riskfleet", version, about = "Train and compare task-offloading policies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train learning policies and write checkpoints and reward traces.
    Train(Common),
    /// Evaluate policies and write traces and KPI tables.
    Eval(Common),
    /// Record behavior-policy simulations as an offline dataset.
    Record(Common),
}

#[derive(Args)]
struct Common {
    /// Scenario file; the built-in paper scenario when omitted.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Comma-separated policies: rr, qhef, dql, drs, rq. Record defaults to rr.
    #[arg(long, value_delimiter = ',')]
    policy: Vec<String>,
    /// Seeds as a list and/or ranges, e.g. `0,3,5-9`.
    #[arg(long, default_value = "0")]
    seeds: String,
    /// Training episodes (train, and the checkpoints eval loads) or number
    /// of recorded simulations (record). Defaults to the scenario's budget.
    #[arg(long)]
    episodes: Option<usize>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Checkpoint directory; `<out>/checkpoints` when omitted.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Dataset written by `record`, used to pre-fill the replay buffers.
    #[arg(long)]
    offline_dataset: Option<PathBuf>,
    /// Training seed whose checkpoints eval loads.
    #[arg(long, default_value_t = 0)]
    train_seed: u64,
    /// After training, evaluate on these seeds.
    #[arg(long)]
    eval_seeds: Option<String>,
}

fn parse_seeds(s: &str) -> Result<Vec<u64>, Error> {
    let bad = || Error::Config(format!("cannot parse seed list {s:?}"));
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match part.split_once('-') {
            Some((a, b)) => {
                let (a, b): (u64, u64) = (a.parse().map_err(|_| bad())?, b.parse().map_err(|_| bad())?);
                if a > b {
                    return Err(bad());
                }
                out.extend(a..=b);
            }
            None => out.push(part.parse().map_err(|_| bad())?),
        }
    }
    Ok(out)
}

fn plan(args: Common, mode: Mode) -> Result<ExperimentPlan, Error> {
    let scenario = match &args.scenario {
        Some(p) => Scenario::load(p).map_err(|e| match e {
            Error::Io { .. } => Error::Config(e.to_string()),
            e => e,
        })?,
        None => Scenario::paper_default(),
    };
    let episodes = args.episodes.unwrap_or(match mode {
        Mode::Record => 100,
        _ => scenario.train.episodes,
    });
    let mut plan = ExperimentPlan::new(scenario, mode, args.out);
    plan.policies = args
        .policy
        .iter()
        .map(|p| p.parse())
        .collect::<Result<_, _>>()?;
    plan.seeds = parse_seeds(&args.seeds)?;
    plan.episodes = episodes;
    plan.checkpoint = args.checkpoint;
    plan.offline_dataset = args.offline_dataset;
    plan.train_seed = args.train_seed;
    if let Some(e) = args.eval_seeds {
        plan.eval_seeds = parse_seeds(&e)?;
        if plan.mode == Mode::Train {
            plan.mode = Mode::TrainEval;
        }
    }
    Ok(plan)
}

fn configure_threads() -> Result<(), Error> {
    let Ok(v) = std::env::var("RISKFLEET_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::Config(format!("RISKFLEET_THREADS={v:?} is not a positive count")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))
}

fn execute(cli: Cli) -> Result<(), Error> {
    configure_threads()?;
    match cli.command {
        Command::Train(args) => {
            let plan = plan(args, Mode::Train)?;
            for t in cmd_train(&plan)? {
                let finals: Vec<String> = t
                    .policy
                    .agents()
                    .iter()
                    .map(|a| {
                        let tail = &a.reward_trace[a.reward_trace.len().saturating_sub(500)..];
                        let mean = tail.iter().sum::<f64>() / tail.len().max(1) as f64;
                        format!("{mean:.2}")
                    })
                    .collect();
                println!(
                    "trained {} (final mean episode reward per UAV: {})",
                    run_stem(t.policy.kind().name(), t.seed, plan.episodes),
                    finals.join(", ")
                );
            }
            println!("outputs in {}", plan.out_dir.display());
        }
        Command::Eval(args) => {
            let plan = plan(args, Mode::Eval)?;
            let evals = cmd_eval(&plan)?;
            println!(
                "{:<6} {:>10} {:>10} {:>10} {:>12} {:>10}",
                "policy", "violations", "fire", "delay_s", "min_energy", "objective"
            );
            for e in &evals {
                println!(
                    "{:<6} {:>10.3} {:>10.3} {:>10.4} {:>12.5} {:>10.5}",
                    e.policy.name(),
                    e.mean(|r| r.violation_rate),
                    e.mean(|r| r.violations_of(TaskKind::FireDetection) as f64),
                    e.mean(|r| r.mean_delay),
                    e.mean(|r| r.min_remaining_energy),
                    e.mean(|r| r.objective),
                );
            }
            println!("outputs in {}", plan.out_dir.display());
        }
        Command::Record(args) => {
            let args = Common {
                policy: if args.policy.is_empty() { vec![PolicyKind::RoundRobin.name().into()] } else { args.policy },
                ..args
            };
            let plan = plan(args, Mode::Record)?;
            let (path, data) = cmd_record(&plan)?;
            println!("recorded {} transitions to {}", data.transitions.len(), path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("riskfleet: {e}");
            ExitCode::from(match e {
                Error::Config(_) => 2,
                Error::Numeric(_) => 3,
                _ => 1,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_lists_and_ranges() {
        assert_eq!(parse_seeds("0,3,5-7").unwrap(), vec![0, 3, 5, 6, 7]);
        assert_eq!(parse_seeds("4").unwrap(), vec![4]);
        assert!(parse_seeds("9-2").is_err());
        assert!(parse_seeds("x").is_err());
    }
}
