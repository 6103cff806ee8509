use std::time::Instant;

use nalgebra::DVector;
use rayon::prelude::*;

use super::config::{BenchmarkConfig, DatasetSource, FilterKind, WindowMode};
use super::fitted::FittedFilter;
use super::ingest::{ingest_csv, CsvSchema, Split};
use super::metric::normalized_mse;
use super::report::ReportTable;
use super::BenchError;
use crate::filters::FilterWarnings;
use crate::regression::LearnerOptions;
use crate::rng::RandomSource;
use crate::statespace::{generate_synthetic1, generate_synthetic2, TrajectoryDataset};

#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub nmse: f64,
    /// Posterior means over the test segment.
    pub means: Vec<DVector<f64>>,
    pub warnings: FilterWarnings,
    pub fit_seconds: f64,
    pub filter_seconds: f64,
}

/// A failed cell keeps the error message; other cells are unaffected.
pub type CellOutcome = Result<TrialResult, String>;

#[derive(Debug, Clone)]
pub struct MetricReport {
    pub config: BenchmarkConfig,
    pub filters: Vec<FilterKind>,
    /// `cells[filter][trial]`.
    pub cells: Vec<Vec<CellOutcome>>,
}

impl MetricReport {
    pub fn nmse(&self, filter: FilterKind) -> Option<Vec<Option<f64>>> {
        let i = self.filters.iter().position(|&f| f == filter)?;
        Some(self.cells[i].iter().map(|c| c.as_ref().ok().map(|r| r.nmse)).collect())
    }

    /// Mean over trials; `None` when any trial failed.
    pub fn average(&self, filter: FilterKind) -> Option<f64> {
        let values = self.nmse(filter)?;
        let n = values.len() as f64;
        values.into_iter().sum::<Option<f64>>().map(|s| s / n)
    }

    pub fn table(&self) -> ReportTable {
        ReportTable {
            filters: self.filters.iter().map(|f| f.name().to_string()).collect(),
            values: self.filters.iter().map(|&f| self.nmse(f).unwrap_or_default()).collect(),
        }
    }

    /// Text table plus config echo, warning counts and failed cells.
    pub fn to_text(&self) -> String {
        let mut out = format!("# {}\n", self.config.echo());
        out += &self.table().to_text();
        for (f, row) in self.filters.iter().zip(&self.cells) {
            let (q, dropped) = row.iter().filter_map(|c| c.as_ref().ok()).fold((0, 0), |acc, r| {
                (acc.0 + r.warnings.q_regularized, acc.1 + r.warnings.prior_correction_dropped)
            });
            if q + dropped > 0 {
                out += &format!("# {f}: Q regularized {q} times, prior correction dropped {dropped} times\n");
            }
            for (t, cell) in row.iter().enumerate() {
                if let Err(e) = cell {
                    out += &format!("# {f} trial#{}: {e}\n", t + 1);
                }
            }
        }
        out
    }
}

/// One dataset per trial. Synthetic trial `i` is generated from seed
/// `seed + i`; CSV input is cut into windows.
pub fn prepare_datasets(config: &BenchmarkConfig) -> Result<Vec<TrajectoryDataset>, BenchError> {
    config.validate()?;
    match &config.dataset {
        DatasetSource::Syn1 | DatasetSource::Syn2 => (0..config.trials)
            .map(|i| {
                let t_len = config.t_len.unwrap_or(10_000);
                let mut rng = RandomSource::new(config.seed.wrapping_add(i as u64));
                let ds = match config.dataset {
                    DatasetSource::Syn1 => generate_synthetic1(t_len, config.m, &mut rng)?,
                    _ => generate_synthetic2(t_len, &mut rng)?,
                };
                Ok(ds.with_split(split_point(t_len, config.split_fraction))?)
            })
            .collect(),
        DatasetSource::Csv(path) => {
            let schema = CsvSchema { d: config.d, m: config.m, lag: config.lag, split: Split::Fraction(0.5) };
            let full = ingest_csv(path, &schema)?;
            csv_windows(&full, config)
        }
    }
}

fn split_point(len: usize, fraction: f64) -> usize {
    ((len as f64 * fraction).floor() as usize).clamp(1, len - 1)
}

fn csv_windows(full: &TrajectoryDataset, config: &BenchmarkConfig) -> Result<Vec<TrajectoryDataset>, BenchError> {
    let n = full.len();
    let block = config.t_len.unwrap_or(n / config.trials);
    if block < 4 {
        return Err(BenchError::InvalidConfig(format!("{n} rows cannot hold {} windows", config.trials)));
    }
    let train = split_point(block, config.split_fraction);
    let stride = match config.window_mode {
        WindowMode::Blocks => block,
        WindowMode::Overlapping => train,
    };
    (0..config.trials)
        .map(|w| {
            let start = w * stride;
            if start + block > n {
                return Err(BenchError::InvalidConfig(format!(
                    "window {} needs rows {start}..{} but only {n} are available",
                    w + 1,
                    start + block
                )));
            }
            Ok(full.window(start..start + block, train)?)
        })
        .collect()
}

/// Fits one filter on the training segment and scores it on the test
/// segment. Model randomness comes from `(seed, filter)`.
pub fn run_cell(
    kind: FilterKind,
    dataset: &TrajectoryDataset,
    learners: &LearnerOptions,
    seed: u64,
) -> Result<TrialResult, BenchError> {
    let mut rng = RandomSource::new(seed).derive(kind.stream_id());
    let start = Instant::now();
    let fitted = FittedFilter::fit(kind, dataset, learners, &mut rng)?;
    let fit_seconds = start.elapsed().as_secs_f64();
    let start = Instant::now();
    let run = fitted.run(dataset.test_observations())?;
    let filter_seconds = start.elapsed().as_secs_f64();
    let means = run.means();
    let nmse = normalized_mse(&means, dataset.test_states())?;
    Ok(TrialResult { nmse, means, warnings: run.warnings, fit_seconds, filter_seconds })
}

/// Runs every (filter, trial) cell. Results do not depend on scheduling.
pub fn run_benchmark(config: &BenchmarkConfig) -> Result<MetricReport, BenchError> {
    let datasets = prepare_datasets(config)?;
    let jobs: Vec<(usize, usize)> =
        (0..config.filters.len()).flat_map(|f| (0..datasets.len()).map(move |t| (f, t))).collect();
    let results: Vec<CellOutcome> = jobs
        .par_iter()
        .map(|&(f, t)| {
            let seed = config.seed.wrapping_add(t as u64);
            run_cell(config.filters[f], &datasets[t], &config.learners, seed).map_err(|e| e.to_string())
        })
        .collect();
    let mut it = results.into_iter();
    let cells = (0..config.filters.len()).map(|_| it.by_ref().take(datasets.len()).collect()).collect();
    Ok(MetricReport { config: config.clone(), filters: config.filters.clone(), cells })
}
