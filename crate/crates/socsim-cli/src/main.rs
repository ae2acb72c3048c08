use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use socsim_core::experiments::{self, OmegaShape};
use socsim_core::{load, write_outputs, RunStop, SimulationConfig, SimulationState};

#[derive(Parser)]
#[command(name = "socsim", version, about = "Event-driven social network simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a simulation from a TOML config and write its outputs
    Run {
        /// Path to the simulation config
        config: PathBuf,
        /// Override the config's RNG seed
        #[arg(long)]
        seed: Option<u64>,
        /// Override the config's sim-time halt
        #[arg(long)]
        max_sim_time: Option<f64>,
        /// Output directory (replicas each get a seed-<n> subdirectory)
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Number of replicas, seeded upward from the base seed
        #[arg(long, default_value_t = 1)]
        seeds: usize,
    },
    /// Continue a checkpointed run and write outputs when it halts again
    Resume {
        checkpoint: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// New absolute sim-time halt
        #[arg(long)]
        until: Option<f64>,
        /// New total event-count halt
        #[arg(long)]
        events: Option<u64>,
    },
    /// Grow a uniformly wired network and compare degrees to the matching Poisson law
    ValidateRandom {
        #[arg(long, default_value_t = 10_000)]
        agents: u32,
        #[arg(long, default_value_t = 20.0)]
        mean_degree: f64,
        #[arg(long, default_value_t = 5)]
        replicas: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
    /// Grow a degree-proportional network and fit the degree-distribution tail
    ValidatePreferential {
        #[arg(long, default_value_t = 50_000)]
        agents: u32,
        #[arg(long, default_value_t = 0.1)]
        follow_rate: f64,
        #[arg(long, default_value_t = 10)]
        k_min: u32,
        #[arg(long, default_value_t = 5)]
        replicas: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
    /// Preferential growth with reciprocated follows; reports degree parity and the tail fit
    Followback {
        #[arg(long, default_value_t = 10_000)]
        agents: u32,
        #[arg(long, default_value_t = 0.1)]
        follow_rate: f64,
        /// Probability that a follow is returned
        #[arg(long, default_value_t = 1.0)]
        followback: f64,
        #[arg(long, default_value_t = 10)]
        k_min: u32,
        #[arg(long, default_value_t = 5)]
        replicas: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
    /// Sweep rebroadcast propensity against graph density; prints a CSV of mean spread
    Viral {
        /// Comma-separated transmission probabilities (overrides the min/max/step grid)
        #[arg(long, value_delimiter = ',')]
        alphas: Option<Vec<f64>>,
        /// Start of the evenly spaced alpha grid
        #[arg(long, default_value_t = 0.001)]
        alpha_min: f64,
        /// End of the alpha grid, inclusive up to rounding
        #[arg(long, default_value_t = 0.05)]
        alpha_max: f64,
        /// Spacing of the alpha grid
        #[arg(long, default_value_t = 0.01)]
        alpha_step: f64,
        /// Comma-separated follow-edge budgets
        #[arg(long, value_delimiter = ',', default_value = "10000,30000,90000")]
        follows: Vec<u64>,
        /// Interest-decay profile: exp | reciprocal
        #[arg(long, default_value = "exp")]
        omega: String,
        #[arg(long, default_value_t = 4)]
        replicas: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Write the CSV here instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Time a large run and report throughput and peak memory
    Bench {
        #[arg(long, default_value_t = 100_000)]
        agents: u32,
        #[arg(long, default_value_t = 1_000_000)]
        events: u64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run { config, seed, max_sim_time, out, seeds } => {
            cmd_run(&config, seed, max_sim_time, &out, seeds)
        }
        Command::Resume { checkpoint, out, until, events } => {
            cmd_resume(&checkpoint, &out, until, events)
        }
        Command::ValidateRandom { agents, mean_degree, replicas, seed } => {
            cmd_validate_random(agents, mean_degree, replicas, seed)
        }
        Command::ValidatePreferential { agents, follow_rate, k_min, replicas, seed } => {
            cmd_validate_preferential(agents, follow_rate, k_min, replicas, seed)
        }
        Command::Followback { agents, follow_rate, followback, k_min, replicas, seed } => {
            cmd_followback(agents, follow_rate, followback, k_min, replicas, seed)
        }
        Command::Viral {
            alphas,
            alpha_min,
            alpha_max,
            alpha_step,
            follows,
            omega,
            replicas,
            seed,
            out,
        } => {
            let alphas = alphas
                .unwrap_or_else(|| alpha_grid(alpha_min, alpha_max, alpha_step));
            cmd_viral(&alphas, &follows, &omega, replicas, seed, out.as_deref())
        }
        Command::Bench { agents, events, seed } => cmd_bench(agents, events, seed),
    }
}

fn alpha_grid(min: f64, max: f64, step: f64) -> Vec<f64> {
    assert!(step > 0.0 && max >= min, "bad alpha grid: [{min}, {max}] step {step}");
    let n = ((max - min) / step).round() as usize;
    (0..=n).map(|i| min + i as f64 * step).filter(|&a| a <= max + 1e-12).collect()
}

fn finish(mut state: SimulationState, out: &Path) -> Result<RunStop> {
    let stop = state.run();
    let files = write_outputs(&state, out, &format!("{stop:?}"))
        .with_context(|| format!("writing outputs to {}", out.display()))?;
    for file in files {
        println!("wrote {}", file.display());
    }
    Ok(stop)
}

fn cmd_run(
    config_path: &Path,
    seed: Option<u64>,
    max_sim_time: Option<f64>,
    out: &Path,
    seeds: usize,
) -> Result<()> {
    let mut config = SimulationConfig::from_path(config_path)
        .with_context(|| format!("loading {}", config_path.display()))?;
    if let Some(seed) = seed {
        config.seed = seed;
    }
    if max_sim_time.is_some() {
        config.max_sim_time = max_sim_time;
    }
    if seeds <= 1 {
        let stop = finish(SimulationState::new(config), out)?;
        println!("stop: {stop:?}");
        return Ok(());
    }
    let base = config.seed;
    let stops = experiments::run_replicas(base, seeds, |seed| {
        let mut config = config.clone();
        config.seed = seed;
        let dir = out.join(format!("seed-{seed}"));
        // replica output is the directory tree; stdout interleaving is harmless
        finish(SimulationState::new(config), &dir).map_err(|e| e.to_string())
    })?;
    for (i, stop) in stops.iter().enumerate() {
        println!("seed {}: {stop:?}", base + i as u64);
    }
    Ok(())
}

fn cmd_resume(
    checkpoint: &Path,
    out: &Path,
    until: Option<f64>,
    events: Option<u64>,
) -> Result<()> {
    let mut state =
        load(checkpoint).with_context(|| format!("loading {}", checkpoint.display()))?;
    if let Some(t) = until {
        state.set_sim_time_limit(Some(t));
    }
    if let Some(n) = events {
        state.set_event_limit(Some(n));
    }
    println!("resumed at t={} with {} agents", state.time(), state.store().len());
    let stop = finish(state, out)?;
    println!("stop: {stop:?}");
    Ok(())
}

fn cmd_validate_random(agents: u32, mean_degree: f64, replicas: usize, seed: u64) -> Result<()> {
    let runs = experiments::run_replicas(seed, replicas, |seed| {
        experiments::validate_random(agents, mean_degree, seed)
    })?;
    let mut worst: f64 = 0.0;
    for (i, run) in runs.iter().enumerate() {
        println!(
            "seed {}: mean_degree {:.4} ks {:.5}",
            seed + i as u64,
            run.mean_degree,
            run.ks
        );
        worst = worst.max(run.ks);
    }
    println!("max_ks: {worst:.5}");
    Ok(())
}

fn cmd_validate_preferential(
    agents: u32,
    follow_rate: f64,
    k_min: u32,
    replicas: usize,
    seed: u64,
) -> Result<()> {
    let runs = experiments::run_replicas(seed, replicas, |seed| {
        experiments::validate_preferential(agents, follow_rate, k_min, seed)
    })?;
    let mut sum = 0.0;
    for (i, run) in runs.iter().enumerate() {
        println!(
            "seed {}: agents {} gamma {:.3} r2 {:.4} bins {}{}",
            seed + i as u64,
            run.agents,
            run.fit.gamma,
            run.fit.r_squared,
            run.fit.bins_used,
            if run.fit.poor_fit { " (poor fit)" } else { "" }
        );
        sum += run.fit.gamma;
    }
    println!("mean_gamma: {:.3}", sum / replicas as f64);
    Ok(())
}

fn cmd_followback(
    agents: u32,
    follow_rate: f64,
    followback: f64,
    k_min: u32,
    replicas: usize,
    seed: u64,
) -> Result<()> {
    let runs = experiments::run_replicas(seed, replicas, |seed| {
        experiments::experiment_followback(agents, follow_rate, followback, k_min, seed)
    })?;
    for (i, run) in runs.iter().enumerate() {
        let (even, odd) = experiments::degree_parity_masses(&run.histogram);
        println!(
            "seed {}: agents {} even {:.4} odd {:.4} gamma {:.3}",
            seed + i as u64,
            run.agents,
            even,
            odd,
            run.fit.gamma
        );
    }
    Ok(())
}

fn cmd_viral(
    alphas: &[f64],
    follows: &[u64],
    omega: &str,
    replicas: usize,
    seed: u64,
    out: Option<&Path>,
) -> Result<()> {
    let shape = match omega {
        "exp" | "exponential" => OmegaShape::Exponential,
        "reciprocal" => OmegaShape::Reciprocal,
        other => anyhow::bail!("unknown omega shape {other:?}, expected exp|reciprocal"),
    };
    let cells = experiments::experiment_viral(alphas, follows, shape, replicas, seed)?;
    let csv = experiments::viral_csv(&cells);
    match out {
        Some(path) => {
            std::fs::write(path, &csv).with_context(|| format!("writing {}", path.display()))?;
            println!("wrote {}", path.display());
        }
        None => print!("{csv}"),
    }
    Ok(())
}

fn cmd_bench(agents: u32, events: u64, seed: u64) -> Result<()> {
    let report = experiments::scale_benchmark(agents, events, seed)
        .map_err(|e| anyhow::anyhow!("{e}"))?;
    println!("agents: {}", report.agents);
    println!("edges: {}", report.edges);
    println!("events: {}", report.events);
    println!("wall_seconds: {:.3}", report.wall_seconds);
    println!("events_per_second: {:.0}", report.events as f64 / report.wall_seconds.max(1e-9));
    println!("peak_rss_mb: {:.1}", report.peak_rss_bytes as f64 / (1024.0 * 1024.0));
    Ok(())
}
