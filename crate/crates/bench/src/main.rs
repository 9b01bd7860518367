use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use gaussrobust_bench::{
    emit_csv, emit_svg_lines, run_experiment, summarize, BenchError, ExperimentConfig, ExperimentOutput, Scenario,
};

#[derive(Parser)]
#[command(name = "gaussrobust", version, about = "Seeded robust-estimation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Flat `key = value` experiment config.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory for CSV, SVG and JSON artifacts.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Worker threads; falls back to ROBUST_THREADS, then to all cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Print the summary (and tail-fit reports) to stdout as JSON.
    #[arg(long, global = true)]
    json: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Mean estimation under contamination.
    MeanEst,
    /// Covariance estimation under contamination.
    CovEst,
    /// Order-statistic concentration lab.
    Concentration,
    /// Mean-estimation sweep over N and eps.
    Sweep,
}

impl Command {
    fn scenario(self) -> Scenario {
        match self {
            Command::MeanEst => Scenario::Mean,
            Command::CovEst => Scenario::Cov,
            Command::Concentration => Scenario::Concentration,
            Command::Sweep => Scenario::Sweep,
        }
    }
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig, BenchError> {
    let scenario = cli.command.scenario();
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| BenchError::Config(format!("cannot read config {}: {e}", path.display())))?;
            ExperimentConfig::parse_str(&format!("scenario = {scenario}\n{text}"), path.parent())?
        }
        None => ExperimentConfig::defaults_for(scenario),
    };
    if cfg.scenario != scenario {
        return Err(BenchError::Config(format!(
            "config declares scenario `{}` but this subcommand runs `{scenario}`",
            cfg.scenario
        )));
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn thread_count(cli: &Cli) -> Result<Option<usize>, BenchError> {
    let n = match cli.threads {
        Some(n) => Some(n),
        None => match std::env::var("ROBUST_THREADS") {
            Ok(v) if !v.trim().is_empty() => Some(
                v.trim()
                    .parse()
                    .map_err(|_| BenchError::Config(format!("ROBUST_THREADS: expected a count, got `{v}`")))?,
            ),
            _ => None,
        },
    };
    if n == Some(0) {
        return Err(BenchError::Config("thread count must be at least 1".into()));
    }
    Ok(n)
}

fn write_artifacts(cfg: &ExperimentConfig, out: &ExperimentOutput, dir: &Path) -> Result<(), BenchError> {
    std::fs::create_dir_all(dir).map_err(|e| BenchError::io(dir, e))?;
    emit_csv(&out.rows, &dir.join(&cfg.csv_name))?;
    if let Some(svg) = &cfg.svg_name {
        if cfg.scenario != Scenario::Concentration && out.rows.iter().any(|r| r.is_ok()) {
            let x = if cfg.grid_n.len() > 1 || cfg.grid_eps.len() == 1 { "N" } else { "eps" };
            emit_svg_lines(&out.rows, x, "error", "estimator", &dir.join(svg))?;
        }
    }
    if !out.tail_reports.is_empty() {
        let path = dir.join("tail_reports.json");
        let json = serde_json::to_string_pretty(&out.tail_reports).map_err(|e| BenchError::io(&path, e))?;
        std::fs::write(&path, json + "\n").map_err(|e| BenchError::io(&path, e))?;
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<ExperimentOutput, BenchError> {
    let cfg = load_config(cli)?;
    let output = match thread_count(cli)? {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| BenchError::Config(format!("cannot build thread pool: {e}")))?
            .install(|| run_experiment(&cfg))?,
        None => run_experiment(&cfg)?,
    };
    write_artifacts(&cfg, &output, &cli.out)?;
    if cli.json {
        let report = serde_json::json!({
            "summary": summarize(&output.rows),
            "tail_reports": output.tail_reports,
        });
        println!("{}", serde_json::to_string_pretty(&report).expect("summary serializes"));
    }
    Ok(output)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(out) if out.all_failed() => {
            eprintln!("error: every trial failed");
            for r in out.rows.iter().take(3) {
                eprintln!("  {}: {}", r.estimator, r.status);
            }
            ExitCode::from(3)
        }
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                BenchError::Config(_) => ExitCode::from(2),
                BenchError::Core(gaussrobust::Error::Config(_)) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
