use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use super::BenchError;
use crate::regression::{DkfVariant, GpOptions, LearnerOptions};

/// Raw `key=value` settings; later sources override earlier ones.
pub type Settings = BTreeMap<String, String>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FilterKind {
    Kalman,
    Ekf,
    Ukf,
    Dkf(DkfVariant),
}

impl FilterKind {
    pub const ALL: [FilterKind; 6] = [
        FilterKind::Kalman,
        FilterKind::Ekf,
        FilterKind::Ukf,
        FilterKind::Dkf(DkfVariant::Gp),
        FilterKind::Dkf(DkfVariant::GpFreq),
        FilterKind::Dkf(DkfVariant::Nn),
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Kalman => "kalman",
            Self::Ekf => "ekf",
            Self::Ukf => "ukf",
            Self::Dkf(v) => v.name(),
        }
    }

    /// Stream id for model randomness; fixed per kind so that the filter list
    /// does not change any one filter's draws.
    pub fn stream_id(self) -> u64 {
        match self {
            Self::Kalman => 1,
            Self::Ekf => 2,
            Self::Ukf => 3,
            Self::Dkf(DkfVariant::Gp) => 4,
            Self::Dkf(DkfVariant::GpFreq) => 5,
            Self::Dkf(DkfVariant::Nn) => 6,
        }
    }
}

impl fmt::Display for FilterKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FilterKind {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim().to_ascii_lowercase();
        FilterKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| BenchError::InvalidConfig(format!("unknown filter `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DatasetSource {
    Syn1,
    Syn2,
    Csv(PathBuf),
}

impl DatasetSource {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Syn1 => "syn1",
            Self::Syn2 => "syn2",
            Self::Csv(_) => "csv",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WindowMode {
    /// Consecutive, non-overlapping blocks of `T` rows.
    #[default]
    Blocks,
    /// Window `w` starts at `w · train_len`, so each test segment is the next
    /// window's training segment.
    Overlapping,
}

impl FromStr for WindowMode {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "blocks" => Ok(Self::Blocks),
            "overlapping" => Ok(Self::Overlapping),
            other => Err(BenchError::InvalidConfig(format!("unknown window mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReportFormat {
    Csv,
    #[default]
    Table,
}

impl FromStr for ReportFormat {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "csv" => Ok(Self::Csv),
            "table" => Ok(Self::Table),
            other => Err(BenchError::InvalidConfig(format!("unknown format `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkConfig {
    pub dataset: DatasetSource,
    /// State dimension; only read for CSV input.
    pub d: usize,
    pub m: usize,
    /// Rows per trial window. For CSV input `None` means `rows / trials`.
    pub t_len: Option<usize>,
    pub trials: usize,
    pub filters: Vec<FilterKind>,
    pub seed: u64,
    pub lag: usize,
    pub gp_subsample_cap: usize,
    pub split_fraction: f64,
    pub window_mode: WindowMode,
    pub output: Option<PathBuf>,
    pub format: ReportFormat,
    pub learners: LearnerOptions,
}

impl BenchmarkConfig {
    /// Defaults for a dataset: syn1 `T = 10000, m = 5`; syn2 `T = 2000, m = 2`.
    pub fn new(dataset: DatasetSource) -> Self {
        let (t_len, m) = match dataset {
            DatasetSource::Syn1 => (Some(10_000), 5),
            DatasetSource::Syn2 => (Some(2000), 2),
            DatasetSource::Csv(_) => (None, 1),
        };
        Self {
            dataset,
            d: 1,
            m,
            t_len,
            trials: 5,
            filters: FilterKind::ALL.to_vec(),
            seed: 0,
            lag: 0,
            gp_subsample_cap: GpOptions::default().subsample_cap,
            split_fraction: 0.5,
            window_mode: WindowMode::Blocks,
            output: None,
            format: ReportFormat::Table,
            learners: LearnerOptions::default(),
        }
    }

    /// Builds a validated config from merged settings. Keys use the long CLI
    /// flag names without dashes (`csv-path`, `gp-cap`, ...).
    pub fn from_settings(settings: &Settings) -> Result<Self, BenchError> {
        for key in settings.keys() {
            if !KEYS.contains(&key.as_str()) {
                return Err(BenchError::InvalidConfig(format!("unknown setting `{key}`")));
            }
        }
        let get = |k: &str| settings.get(k).map(String::as_str);
        let dataset = match get("dataset").unwrap_or("syn1") {
            "syn1" => DatasetSource::Syn1,
            "syn2" => DatasetSource::Syn2,
            "csv" => DatasetSource::Csv(
                get("csv-path")
                    .ok_or_else(|| BenchError::InvalidConfig("dataset=csv needs csv-path".into()))?
                    .into(),
            ),
            other => return Err(BenchError::InvalidConfig(format!("unknown dataset `{other}`"))),
        };
        let mut c = Self::new(dataset);
        if let Some(v) = get("d") {
            c.d = parse(v, "d")?;
        }
        if let Some(v) = get("m") {
            c.m = parse(v, "m")?;
        }
        if let Some(v) = get("T") {
            c.t_len = Some(parse(v, "T")?);
        }
        if let Some(v) = get("trials") {
            c.trials = parse(v, "trials")?;
        }
        if let Some(v) = get("filters") {
            c.filters = v.split(',').filter(|s| !s.trim().is_empty()).map(str::parse).collect::<Result<_, _>>()?;
        }
        if let Some(v) = get("seed") {
            c.seed = parse(v, "seed")?;
        }
        if let Some(v) = get("lag") {
            c.lag = parse(v, "lag")?;
        }
        if let Some(v) = get("gp-cap") {
            c.gp_subsample_cap = parse(v, "gp-cap")?;
        }
        if let Some(v) = get("split-fraction") {
            c.split_fraction = parse(v, "split-fraction")?;
        }
        if let Some(v) = get("window-mode") {
            c.window_mode = v.parse()?;
        }
        if let Some(v) = get("out") {
            c.output = Some(v.into());
        }
        if let Some(v) = get("format") {
            c.format = v.parse()?;
        }
        c.learners.gp.subsample_cap = c.gp_subsample_cap;
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        let bad = |msg: String| Err(BenchError::InvalidConfig(msg));
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.filters.is_empty() {
            return bad("no filters selected".into());
        }
        if !(self.split_fraction > 0.0 && self.split_fraction < 1.0) {
            return bad(format!("split-fraction {} must lie in (0, 1)", self.split_fraction));
        }
        if self.d == 0 || self.m == 0 {
            return bad("d and m must be positive".into());
        }
        if let Some(t) = self.t_len {
            if t < 4 {
                return bad(format!("T = {t} is too short"));
            }
        }
        if self.gp_subsample_cap < 2 {
            return bad("gp-cap must be at least 2".into());
        }
        match self.dataset {
            DatasetSource::Syn2 if self.m != 2 => bad(format!("syn2 has m = 2, got m = {}", self.m)),
            DatasetSource::Syn1 | DatasetSource::Syn2 if self.d != 1 => bad("synthetic datasets have d = 1".into()),
            DatasetSource::Syn1 | DatasetSource::Syn2 if self.lag != 0 => bad("lag applies to csv input only".into()),
            _ => Ok(()),
        }
    }

    /// One-line `key=value` summary.
    pub fn echo(&self) -> String {
        let mut s = format!("dataset={}", self.dataset.name());
        if let DatasetSource::Csv(p) = &self.dataset {
            s += &format!(" csv-path={}", p.display());
        }
        s += &format!(" d={} m={}", self.d, self.m);
        if let Some(t) = self.t_len {
            s += &format!(" T={t}");
        }
        let filters: Vec<_> = self.filters.iter().map(|f| f.name()).collect();
        s += &format!(
            " trials={} seed={} lag={} gp-cap={} split-fraction={} window-mode={} filters={}",
            self.trials,
            self.seed,
            self.lag,
            self.gp_subsample_cap,
            self.split_fraction,
            match self.window_mode {
                WindowMode::Blocks => "blocks",
                WindowMode::Overlapping => "overlapping",
            },
            filters.join(",")
        );
        s
    }
}

const KEYS: &[&str] = &[
    "dataset", "csv-path", "d", "m", "T", "trials", "filters", "seed", "lag", "gp-cap", "split-fraction", "window-mode",
    "out", "format",
];

fn parse<T: FromStr>(v: &str, key: &str) -> Result<T, BenchError>
where
    T::Err: fmt::Display,
{
    v.trim().parse().map_err(|e| BenchError::InvalidConfig(format!("{key}=`{v}`: {e}")))
}

/// Parses a `key=value` file. Blank lines and `#` comments are skipped;
/// underscores in keys are read as dashes.
pub fn parse_settings(text: &str) -> Result<Settings, BenchError> {
    let mut out = Settings::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| BenchError::InvalidConfig(format!("line {}: expected key=value", i + 1)))?;
        let key = k.trim().replace('_', "-");
        let key = if key.eq_ignore_ascii_case("t") { "T".to_string() } else { key };
        out.insert(key, v.trim().to_string());
    }
    Ok(out)
}
