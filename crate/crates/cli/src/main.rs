//! `asris` command-line driver.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use asris_core::agents::{train, Algo, TrainOptions};
use asris_core::baseline::{grid_oracle, run_baseline, sample_channel, write_baseline, BASELINE_FILE};
use asris_core::report::{build_report, REPORT_FILE};
use asris_core::sweep::run_sweep;
use asris_core::RunConfig;
use clap::{Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "asris",
    version,
    about = "Active STAR-RIS symbiotic-radio simulator and DRL trainer"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train one agent and write its trace CSV and checkpoint.
    Train {
        #[arg(long)]
        algo: Algo,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Defaults to the first seed in the config.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        /// Use the full-scale episode budget instead of the desk-scale one.
        #[arg(long)]
        paper_scale: bool,
        /// Overrides the configured episode budget.
        #[arg(long)]
        episodes: Option<usize>,
    },
    /// Run the configured parameter sweep.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        paper_scale: bool,
    },
    /// Exhaustive grid search on the single-antenna, single-element, single-user network.
    Oracle {
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Random-search baseline over the configured channels.
    Baseline {
        #[arg(long)]
        budget: usize,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Defaults to every seed in the config.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Collect sweep summaries and traces into one long-format CSV.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
        /// Defaults to report_long.csv inside the input directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load(path: Option<&Path>) -> Result<RunConfig> {
    match path {
        Some(p) => Ok(RunConfig::load(p)?),
        None => Ok(RunConfig::default()),
    }
}

fn cmd_train(
    algo: Algo,
    config: Option<&Path>,
    seed: Option<u64>,
    out: &Path,
    paper_scale: bool,
    episodes: Option<usize>,
) -> Result<()> {
    let run = load(config)?;
    let seed = seed.unwrap_or(run.seeds[0]);
    let episodes = episodes.unwrap_or(run.episodes(paper_scale));
    std::fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
    let checkpoint = out.join(format!("checkpoint_{algo}_seed{seed}.json"));
    let opts = TrainOptions {
        checkpoint_every: run.train.checkpoint_every,
        checkpoint_path: Some(checkpoint.clone()),
        config_hash: run.hash()?,
    };
    let start = Instant::now();
    let outcome = train(algo, &run.system, &run.env, &run.agents(), episodes, seed, &opts)?;
    let trace = out.join(format!("trace_{algo}_seed{seed}.csv"));
    outcome.trace.save_csv(&trace)?;
    outcome.checkpoint.save(&checkpoint)?;
    let n = outcome.trace.rows.len();
    println!(
        "{algo} seed {seed}: {n} episodes in {:.1} s, final-100 mean reward {:.4e}",
        start.elapsed().as_secs_f64(),
        outcome.trace.final_mean_reward(100)
    );
    println!("wrote {} and {}", trace.display(), checkpoint.display());
    if let Some(why) = outcome.aborted {
        bail!("training aborted after {n} episodes: {why}");
    }
    Ok(())
}

fn cmd_sweep(config: &Path, out: &Path, paper_scale: bool) -> Result<()> {
    let run = load(Some(config))?;
    if run.sweep.is_none() {
        bail!("{} has no [sweep] section", config.display());
    }
    let outcome = run_sweep(&run, paper_scale)?;
    outcome.write(out)?;
    for row in &outcome.summary {
        println!(
            "{} = {}: {} {} mean min-rate {:.4e} (std {:.2e}, {} seeds, {} failures)",
            row.variable.as_str(),
            row.value,
            row.series,
            row.method.as_str(),
            row.mean_min_rate,
            row.std_min_rate,
            row.seeds.len(),
            row.failures
        );
    }
    let failures: usize = outcome.summary.iter().map(|r| r.failures).sum();
    println!("wrote {} sweep points to {}", outcome.points.len(), out.display());
    if failures > 0 {
        eprintln!("warning: {failures} sweep points failed; see the error column of points.csv");
    }
    Ok(())
}

fn cmd_oracle(config: Option<&Path>) -> Result<()> {
    let run = load(config)?;
    let sys = run.system.clone().with_dims(1, 1, 1);
    let spec = run.oracle.grid(&sys);
    let ch = sample_channel(&sys, run.oracle.seed)?;
    let start = Instant::now();
    let out = grid_oracle(&ch, &sys, &spec)?;
    println!(
        "grid of {} points ({} feasible) in {:.1} s",
        out.evaluated,
        out.feasible,
        start.elapsed().as_secs_f64()
    );
    match (&out.best, out.min_rate) {
        (Some(dv), Some(rate)) => {
            println!("optimum min-rate {rate:.6e}");
            println!(
                "eta {:.4} tau {:.4} power {:.4} beta_t {:.4} beta_r {:.4} theta_t {:.4} theta_r {:.4}",
                dv.eta[0],
                dv.tau[0],
                dv.power[0],
                dv.ris.beta_t[0],
                dv.ris.beta_r[0],
                dv.ris.theta_t[0],
                dv.ris.theta_r[0]
            );
        }
        _ => println!("infeasible: no grid point meets every constraint"),
    }
    Ok(())
}

fn cmd_baseline(budget: usize, config: Option<&Path>, seed: Option<u64>, out: Option<&Path>) -> Result<()> {
    if budget == 0 {
        bail!("--budget must be at least 1");
    }
    let run = load(config)?;
    let seeds = seed.map_or_else(|| run.seeds.clone(), |s| vec![s]);
    let rows = run_baseline(&run, budget, &seeds)?;
    for &s in &seeds {
        let mine: Vec<_> = rows.iter().filter(|r| r.seed == s).collect();
        let feasible = mine.iter().filter(|r| r.best_min_rate.is_some()).count();
        let mean = mine.iter().map(|r| r.best_min_rate.unwrap_or(0.0)).sum::<f64>() / mine.len() as f64;
        println!(
            "seed {s}: mean best min-rate {mean:.4e} over {} channels ({feasible} feasible)",
            mine.len()
        );
    }
    if let Some(dir) = out {
        std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
        let path = dir.join(BASELINE_FILE);
        write_baseline(&rows, &run.hash()?, &path)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn cmd_report(input: &Path, out: Option<&Path>) -> Result<()> {
    let report = build_report(input)?;
    let path = out.map_or_else(|| input.join(REPORT_FILE), Path::to_path_buf);
    report.write(&path)?;
    for check in &report.checks {
        println!("{}", check.line());
    }
    println!("wrote {} rows to {}", report.rows.len(), path.display());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train {
            algo,
            config,
            seed,
            out,
            paper_scale,
            episodes,
        } => cmd_train(algo, config.as_deref(), seed, &out, paper_scale, episodes),
        Command::Sweep {
            config,
            out,
            paper_scale,
        } => cmd_sweep(&config, &out, paper_scale),
        Command::Oracle { config } => cmd_oracle(config.as_deref()),
        Command::Baseline {
            budget,
            config,
            seed,
            out,
        } => cmd_baseline(budget, config.as_deref(), seed, out.as_deref()),
        Command::Report { input, out } => cmd_report(&input, out.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
