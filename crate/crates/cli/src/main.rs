//! `rideshare` command-line front end: single runs, the paired policy
//! comparison, and one-key parameter sweeps.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};

use rideshare_core::engine::{load_grid, load_schedule};
use rideshare_core::experiment::{compare, sweep, Cell, ExperimentPlan, PolicyChoice};
use rideshare_core::metrics::write_csv;
use rideshare_core::{run, ConfigBuilder, MovementPolicy, RunResult, SimConfig};

/// Grid used when neither the config file nor the flags name one.
const DEFAULT_GRID: &str = "synthetic:60,60,4";

#[derive(Parser)]
#[command(name = "rideshare", version, about = "Agent-based ridesharing market simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation and write its frames and summary.
    Run {
        #[command(flatten)]
        common: Common,
        /// Output directory.
        #[arg(long, default_value = "runs")]
        out: PathBuf,
    },
    /// Run both policies under both scenarios over paired seeds and test
    /// for a difference in final total profit.
    Compare {
        #[command(flatten)]
        common: Common,
        /// Seeds as a list (`1,2,3`) or an inclusive range (`1..30`).
        #[arg(long, default_value = "1..30")]
        seeds: String,
        #[arg(long, default_value = "runs")]
        out: PathBuf,
    },
    /// Vary one config key and summarize final total profit per value.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Config key to vary, e.g. `drivers_count`.
        #[arg(long)]
        key: String,
        /// Values as a list (`50,100`) or a numeric range `start..end[:step]`.
        #[arg(long)]
        values: String,
        #[arg(long, default_value = "1..10")]
        seeds: String,
    },
}

#[derive(Args)]
struct Common {
    /// `key = value` config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// `file:<path>` or `synthetic:<w>,<h>,<spacing>`.
    #[arg(long)]
    grid: Option<String>,
    #[arg(long)]
    drivers: Option<String>,
    #[arg(long)]
    riders: Option<String>,
    /// `random` or `voronoi`.
    #[arg(long)]
    policy: Option<String>,
    #[arg(long)]
    vision: Option<String>,
    #[arg(long)]
    step_length: Option<String>,
    #[arg(long)]
    pickup_radius: Option<String>,
    #[arg(long)]
    dropoff_radius: Option<String>,
    /// Ticks a rider waits before giving up, or `inf`.
    #[arg(long)]
    max_wait: Option<String>,
    /// `stationary`, `saturday` or `file:<path>`.
    #[arg(long)]
    scenario: Option<String>,
    #[arg(long)]
    random_exit: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    run_length: Option<String>,
}

/// Failure classes mapped to exit codes.
enum Failure {
    Config(anyhow::Error),
    Runtime(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 1,
            Failure::Runtime(_) => 2,
        }
    }

    fn error(&self) -> &anyhow::Error {
        match self {
            Failure::Config(e) | Failure::Runtime(e) => e,
        }
    }
}

fn config_err<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure::Config(e.into())
}

fn runtime_err<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure::Runtime(e.into())
}

impl Common {
    fn builder(&self) -> Result<ConfigBuilder, Failure> {
        let mut b = ConfigBuilder::new();
        b.set("grid", DEFAULT_GRID).map_err(config_err)?;
        if let Some(path) = &self.config {
            let text = fs::read_to_string(path)
                .with_context(|| format!("cannot read config {}", path.display()))
                .map_err(config_err)?;
            b.apply_text(&text)
                .with_context(|| format!("in config {}", path.display()))
                .map_err(config_err)?;
        }
        let overrides = [
            ("grid", &self.grid),
            ("drivers_count", &self.drivers),
            ("riders_per_tick", &self.riders),
            ("policy", &self.policy),
            ("voronoi_vision", &self.vision),
            ("step_length", &self.step_length),
            ("pickup_radius", &self.pickup_radius),
            ("dropoff_radius", &self.dropoff_radius),
            ("max_wait", &self.max_wait),
            ("scenario", &self.scenario),
            ("random_exit", &self.random_exit),
            ("seed", &self.seed),
            ("run_length", &self.run_length),
        ];
        for (key, value) in overrides {
            if let Some(v) = value {
                b.set(key, v).map_err(config_err)?;
            }
        }
        Ok(b)
    }
}

/// Loads the grid and schedule once up front so unreadable inputs are
/// reported as configuration errors.
fn preflight(config: &SimConfig) -> Result<(), Failure> {
    load_grid(&config.grid).map_err(config_err)?;
    load_schedule(config).map_err(config_err)?;
    Ok(())
}

fn parse_seeds(text: &str) -> Result<Vec<u64>, Failure> {
    let bad = || config_err(anyhow!("invalid seed list `{text}`"));
    if let Some((a, b)) = text.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|_| bad())?;
        let b: u64 = b.trim().trim_start_matches('=').parse().map_err(|_| bad())?;
        if b < a {
            return Err(bad());
        }
        return Ok((a..=b).collect());
    }
    text.split(',')
        .map(|s| s.trim().parse().map_err(|_| bad()))
        .collect()
}

fn parse_values(text: &str) -> Result<Vec<String>, Failure> {
    let Some((a, rest)) = text.split_once("..") else {
        return Ok(text.split(',').map(|s| s.trim().to_string()).collect());
    };
    let (b, step) = rest.split_once(':').unwrap_or((rest, "1"));
    let bad = || config_err(anyhow!("invalid value range `{text}`"));
    let a: f64 = a.trim().parse().map_err(|_| bad())?;
    let b: f64 = b.trim().parse().map_err(|_| bad())?;
    let step: f64 = step.trim().parse().map_err(|_| bad())?;
    if step.is_nan() || step <= 0.0 || b < a {
        return Err(bad());
    }
    let integral = [a, b, step].iter().all(|v| v.fract() == 0.0);
    let count = ((b - a) / step + 1e-9).floor() as u64 + 1;
    Ok((0..count)
        .map(|i| {
            let v = a + i as f64 * step;
            if integral {
                format!("{}", v as i64)
            } else {
                format!("{v}")
            }
        })
        .collect())
}

fn policy_choice(policy: MovementPolicy) -> PolicyChoice {
    match policy {
        MovementPolicy::RandomSearch => PolicyChoice::Random,
        MovementPolicy::VoronoiSearch { .. } => PolicyChoice::Voronoi,
    }
}

fn final_profit_line(result: &RunResult) -> String {
    match result.final_profit() {
        Some(p) => format!("final_total_profit = {p}\n"),
        None => "final_total_profit = none\n".to_string(),
    }
}

fn summary_text(result: &RunResult) -> String {
    let mut text = final_profit_line(result);
    if let Some(s) = &result.summary {
        text.push_str(&s.to_text());
    }
    text
}

/// Writes `<out>/<cell>/<seed>/{frames.csv, summary.txt, summary.json, config.echo}`.
fn write_run(out: &Path, cell: &str, config: &SimConfig, result: &RunResult) -> anyhow::Result<PathBuf> {
    let dir = out.join(cell).join(config.seed.to_string());
    fs::create_dir_all(&dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let csv = dir.join("frames.csv");
    let file = fs::File::create(&csv).with_context(|| format!("cannot create {}", csv.display()))?;
    write_csv(&result.frames, std::io::BufWriter::new(file))
        .with_context(|| format!("cannot write {}", csv.display()))?;
    fs::write(dir.join("summary.txt"), summary_text(result))?;
    let json = serde_json::json!({
        "final_total_profit": result.final_profit().map(|c| c.dollars()),
        "summary": result.summary,
    });
    fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&json)? + "\n")?;
    fs::write(dir.join("config.echo"), config.to_config_text())?;
    Ok(dir)
}

fn cmd_run(common: &Common, out: &Path) -> Result<(), Failure> {
    let config = common.builder()?.build().map_err(config_err)?;
    preflight(&config)?;
    let result = run(&config).map_err(runtime_err)?;
    let cell = Cell {
        scenario: config.scenario.clone(),
        policy: policy_choice(config.policy),
    };
    let dir = write_run(out, &cell.name(), &config, &result).map_err(runtime_err)?;
    print!("{}", summary_text(&result));
    println!("output = {}", dir.display());
    Ok(())
}

fn cmd_compare(common: &Common, seeds: &str, out: &Path) -> Result<(), Failure> {
    let seeds = parse_seeds(seeds)?;
    if seeds.len() < 2 {
        return Err(config_err(anyhow!(
            "compare needs at least 2 seeds to test, got {}",
            seeds.len()
        )));
    }
    let mut b = common.builder()?;
    if !b.has_policy() {
        // each cell sets its own policy
        b.set("policy", "random").map_err(config_err)?;
    }
    let base = b.build().map_err(config_err)?;
    if matches!(base.scenario, rideshare_core::ScenarioSource::File(_)) {
        eprintln!("note: compare always runs the stationary and saturday scenarios");
    }
    preflight(&base)?;
    let plan = ExperimentPlan::two_by_two(base, seeds);
    plan.validate().map_err(config_err)?;
    let (runs, report) = compare(&plan).map_err(runtime_err)?;
    for cell_runs in &runs {
        let name = cell_runs.cell.name();
        for (seed, result) in &cell_runs.runs {
            let config = cell_runs.cell.config(&plan.base, *seed);
            write_run(out, &name, &config, result).map_err(runtime_err)?;
        }
    }
    fs::create_dir_all(out)
        .and_then(|_| {
            let text = serde_json::to_string_pretty(&report).map_err(std::io::Error::other)?;
            fs::write(out.join("compare.json"), text + "\n")
        })
        .with_context(|| format!("cannot write {}", out.join("compare.json").display()))
        .map_err(runtime_err)?;
    print!("{}", report.to_text());
    for c in &report.comparisons {
        println!("verdict {}: {}", c.scenario, c.verdict);
    }
    Ok(())
}

fn cmd_sweep(common: &Common, key: &str, values: &str, seeds: &str) -> Result<(), Failure> {
    if key == "seed" {
        return Err(config_err(anyhow!("cannot sweep the seed; use --seeds")));
    }
    let seeds = parse_seeds(seeds)?;
    let values = parse_values(values)?;
    let base = common.builder()?.build().map_err(config_err)?;
    preflight(&base)?;
    // validate every value before spending time on runs
    for v in &values {
        let mut b = ConfigBuilder::new();
        b.apply_text(&base.to_config_text()).map_err(config_err)?;
        b.set(key, v).map_err(config_err)?;
        b.build().map_err(config_err)?;
    }
    let rows = sweep(&base, key, &values, &seeds).map_err(runtime_err)?;
    println!(
        "{:<12} {:>4} {:>12} {:>10} {:>12} {:>10} {:>12}",
        key, "n", "mean", "se", "median", "sd", "max"
    );
    for row in rows {
        let s = row.final_profit;
        println!(
            "{:<12} {:>4} {:>12.2} {:>10.2} {:>12.2} {:>10.2} {:>12.2}",
            row.value, s.count, s.mean, s.standard_error, s.median, s.standard_deviation, s.maximum
        );
    }
    Ok(())
}

/// Joins the error chain, skipping causes the outer message already quotes.
fn describe(error: &anyhow::Error) -> String {
    let mut text = error.to_string();
    for cause in error.chain().skip(1) {
        let c = cause.to_string();
        if !text.contains(&c) {
            text.push_str(": ");
            text.push_str(&c);
        }
    }
    text
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Run { common, out } => cmd_run(common, out),
        Command::Compare { common, seeds, out } => cmd_compare(common, seeds, out),
        Command::Sweep {
            common,
            key,
            values,
            seeds,
        } => cmd_sweep(common, key, values, seeds),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", describe(f.error()));
            ExitCode::from(f.code())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_lists_and_ranges() {
        assert!(matches!(parse_seeds("1..3"), Ok(v) if v == [1, 2, 3]));
        assert!(matches!(parse_seeds("1..=2"), Ok(v) if v == [1, 2]));
        assert!(matches!(parse_seeds("7, 9"), Ok(v) if v == [7, 9]));
        assert!(parse_seeds("3..1").is_err());
        assert!(parse_seeds("x").is_err());
    }

    #[test]
    fn value_ranges() {
        assert!(matches!(parse_values("50..150:50"), Ok(v) if v == ["50", "100", "150"]));
        assert!(matches!(parse_values("0.5..1:0.25"), Ok(v) if v == ["0.5", "0.75", "1"]));
        assert!(matches!(parse_values("random,voronoi"), Ok(v) if v == ["random", "voronoi"]));
        assert!(parse_values("1..2:0").is_err());
    }
}
