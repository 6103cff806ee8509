use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use dkf::bench::{
    generate_surrogate, normalized_mse, parse_settings, prepare_datasets, run_benchmark, write_trace, BenchError,
    BenchmarkConfig, FittedFilter, ReportFormat, Settings, SURROGATE_OBSERVATION_DIM,
};
use dkf::oracle::{compare_dkf_with_grid, DEFAULT_GRID_POINTS};
use dkf::statespace::{generate_synthetic1, generate_synthetic2};
use dkf::RandomSource;

/// Discriminative Kalman filtering and baselines.
#[derive(Parser)]
#[command(name = "dkf", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a dataset (syn1, syn2 or surrogate) and write it as CSV.
    Simulate(Common),
    /// Fit one filter on the training segment of trial 1 and save it.
    Fit(Common),
    /// Filter the test segment of trial 1 with a saved model; writes a trace.
    Run(Common),
    /// Fit and score every selected filter on every trial.
    Bench(Common),
    /// Compare the DKF with the grid filter on random scalar models.
    OracleCheck(Common),
}

#[derive(Args, Default)]
struct Common {
    /// syn1 | syn2 | csv (simulate also accepts surrogate)
    #[arg(long)]
    dataset: Option<String>,
    #[arg(long)]
    csv_path: Option<PathBuf>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    /// Rows per trial
    #[arg(long = "T")]
    t_len: Option<usize>,
    #[arg(long)]
    trials: Option<usize>,
    /// Comma-separated: kalman,ekf,ukf,dkf-gp,dkf-gp-freq,dkf-nn
    #[arg(long)]
    filters: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    lag: Option<usize>,
    #[arg(long)]
    gp_cap: Option<usize>,
    #[arg(long)]
    split_fraction: Option<f64>,
    /// blocks | overlapping
    #[arg(long)]
    window_mode: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// csv | table
    #[arg(long)]
    format: Option<String>,
    /// key=value file; flags take precedence
    #[arg(long)]
    config: Option<PathBuf>,
    /// Model file for `run`
    #[arg(long)]
    model: Option<PathBuf>,
}

impl Common {
    fn settings(&self) -> Result<Settings> {
        let mut s = match &self.config {
            Some(p) => parse_settings(&fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?)?,
            None => Settings::new(),
        };
        let mut put = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                s.insert(k.to_string(), v);
            }
        };
        put("dataset", self.dataset.clone());
        put("csv-path", self.csv_path.as_ref().map(|p| p.display().to_string()));
        put("d", self.d.map(|v| v.to_string()));
        put("m", self.m.map(|v| v.to_string()));
        put("T", self.t_len.map(|v| v.to_string()));
        put("trials", self.trials.map(|v| v.to_string()));
        put("filters", self.filters.clone());
        put("seed", self.seed.map(|v| v.to_string()));
        put("lag", self.lag.map(|v| v.to_string()));
        put("gp-cap", self.gp_cap.map(|v| v.to_string()));
        put("split-fraction", self.split_fraction.map(|v| v.to_string()));
        put("window-mode", self.window_mode.clone());
        put("out", self.out.as_ref().map(|p| p.display().to_string()));
        put("format", self.format.clone());
        Ok(s)
    }

    fn bench_config(&self) -> Result<BenchmarkConfig> {
        Ok(BenchmarkConfig::from_settings(&self.settings()?)?)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let kind = err.downcast_ref::<BenchError>().map_or("error", BenchError::kind);
            let line = serde_json::json!({ "error": kind, "message": format!("{err:#}") });
            eprintln!("{line}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Simulate(c) => simulate(&c),
        Command::Fit(c) => fit(&c),
        Command::Run(c) => run(&c),
        Command::Bench(c) => bench(&c),
        Command::OracleCheck(c) => oracle_check(&c),
    }
}

fn simulate(c: &Common) -> Result<()> {
    let s = c.settings()?;
    let out = s.get("out").map(PathBuf::from).context("simulate needs --out")?;
    let seed: u64 = s.get("seed").map(|v| v.parse()).transpose()?.unwrap_or(0);
    let t_len: Option<usize> = s.get("T").map(|v| v.parse()).transpose()?;
    let m: Option<usize> = s.get("m").map(|v| v.parse()).transpose()?;
    let mut rng = RandomSource::new(seed);
    let ds = match s.get("dataset").map_or("syn1", String::as_str) {
        "syn1" => generate_synthetic1(t_len.unwrap_or(10_000), m.unwrap_or(5), &mut rng)?,
        "syn2" => generate_synthetic2(t_len.unwrap_or(2000), &mut rng)?,
        "surrogate" => generate_surrogate(t_len.unwrap_or(12_000), m.unwrap_or(SURROGATE_OBSERVATION_DIM), &mut rng)?,
        other => bail!(BenchError::InvalidConfig(format!("cannot simulate dataset `{other}`"))),
    };
    ds.save(&out, Some(seed))?;
    eprintln!("wrote {} rows (d={}, m={}) to {}", ds.len(), ds.state_dim(), ds.observation_dim(), out.display());
    Ok(())
}

fn single_filter(config: &BenchmarkConfig) -> Result<dkf::bench::FilterKind> {
    match config.filters.as_slice() {
        [one] => Ok(*one),
        _ => bail!(BenchError::InvalidConfig("fit needs exactly one filter in --filters".into())),
    }
}

fn fit(c: &Common) -> Result<()> {
    let config = c.bench_config()?;
    let kind = single_filter(&config)?;
    let out = config.output.clone().context("fit needs --out")?;
    let datasets = prepare_datasets(&config)?;
    let mut rng = RandomSource::new(config.seed).derive(kind.stream_id());
    let start = Instant::now();
    let fitted = FittedFilter::fit(kind, &datasets[0], &config.learners, &mut rng)?;
    fitted.save(&out)?;
    eprintln!("fitted {kind} in {:.1}s, saved to {}", start.elapsed().as_secs_f64(), out.display());
    Ok(())
}

fn run(c: &Common) -> Result<()> {
    let model_path = c.model.as_ref().context("run needs --model")?;
    let fitted = FittedFilter::load(model_path)?;
    let mut config = c.bench_config()?;
    config.trials = 1;
    config.filters = vec![fitted.kind()];
    let ds = prepare_datasets(&config)?.remove(0);
    let filtered = fitted.run(ds.test_observations())?;
    let nmse = normalized_mse(&filtered.means(), ds.test_states())?;
    match &config.output {
        Some(p) => write_trace(BufWriter::new(File::create(p)?), &filtered.beliefs, Some(ds.test_states()))?,
        None => write_trace(io::stdout().lock(), &filtered.beliefs, Some(ds.test_states()))?,
    }
    eprintln!(
        "{}: nmse {nmse:.6} over {} steps (Q regularized {}, prior correction dropped {})",
        fitted.kind(),
        filtered.beliefs.len(),
        filtered.warnings.q_regularized,
        filtered.warnings.prior_correction_dropped
    );
    Ok(())
}

fn bench(c: &Common) -> Result<()> {
    let config = c.bench_config()?;
    let start = Instant::now();
    let report = run_benchmark(&config)?;
    let text = match config.format {
        ReportFormat::Csv => report.table().to_csv(),
        ReportFormat::Table => report.to_text(),
    };
    emit(config.output.as_deref(), &text)?;
    if config.format == ReportFormat::Csv {
        for (f, row) in report.filters.iter().zip(&report.cells) {
            for (t, cell) in row.iter().enumerate() {
                if let Err(e) = cell {
                    eprintln!("{f} trial#{}: {e}", t + 1);
                }
            }
        }
    }
    eprintln!("finished in {:.1}s", start.elapsed().as_secs_f64());
    Ok(())
}

fn oracle_check(c: &Common) -> Result<()> {
    let configs = c.trials.unwrap_or(20);
    let seed = c.seed.unwrap_or(0);
    let steps = c.t_len.unwrap_or(50);
    let start = Instant::now();
    let results = compare_dkf_with_grid(configs, steps, seed, DEFAULT_GRID_POINTS)?;
    let mut text = String::from("config,a,gamma,max_mean_gap,max_variance_gap\n");
    for (i, r) in results.iter().enumerate() {
        text += &format!("{},{},{},{:e},{:e}\n", i + 1, r.transition, r.process_noise, r.max_mean_gap, r.max_variance_gap);
    }
    emit(c.out.as_deref(), &text)?;
    let worst = results.iter().map(|r| r.max_mean_gap.max(r.max_variance_gap)).fold(0.0, f64::max);
    eprintln!("worst gap {worst:e} over {configs} configurations in {:.1}s", start.elapsed().as_secs_f64());
    if worst > 1e-4 {
        bail!("grid and DKF posteriors differ by {worst:e}");
    }
    Ok(())
}

fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display()))?,
        None => io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}
