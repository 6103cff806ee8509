use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::ops::Range;
use std::path::{Path, PathBuf};

use nalgebra::DVector;

use super::StateSpaceError;

/// Aligned latent states `z_t ∈ ℝ^d` and observations `x_t ∈ ℝ^m`.
///
/// Rows `0..split_index` form the training segment and
/// `split_index..len` the test segment. `lag` records how many steps the
/// observations were shifted relative to the states when the data was built.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryDataset {
    states: Vec<DVector<f64>>,
    observations: Vec<DVector<f64>>,
    split_index: usize,
    lag: usize,
}

/// Sidecar metadata stored next to a dataset CSV.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetMetadata {
    pub d: usize,
    pub m: usize,
    pub split_index: usize,
    pub lag: usize,
    pub seed: Option<u64>,
}

impl TrajectoryDataset {
    pub fn new(
        states: Vec<DVector<f64>>,
        observations: Vec<DVector<f64>>,
        split_index: usize,
        lag: usize,
    ) -> Result<Self, StateSpaceError> {
        let t = states.len();
        if observations.len() != t {
            return Err(StateSpaceError::DimensionMismatch(format!(
                "{t} states but {} observations",
                observations.len()
            )));
        }
        if t < 2 {
            return Err(StateSpaceError::InsufficientData { needed: 2, got: t });
        }
        if split_index == 0 || split_index >= t {
            return Err(StateSpaceError::InvalidArgument(format!(
                "split index {split_index} outside 1..{t}"
            )));
        }
        let d = states[0].len();
        let m = observations[0].len();
        if d == 0 || m == 0 {
            return Err(StateSpaceError::DimensionMismatch("empty state or observation vectors".into()));
        }
        if states.iter().any(|z| z.len() != d) || observations.iter().any(|x| x.len() != m) {
            return Err(StateSpaceError::DimensionMismatch("ragged rows".into()));
        }
        Ok(Self { states, observations, split_index, lag })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn state_dim(&self) -> usize {
        self.states[0].len()
    }

    pub fn observation_dim(&self) -> usize {
        self.observations[0].len()
    }

    pub fn split_index(&self) -> usize {
        self.split_index
    }

    pub fn lag(&self) -> usize {
        self.lag
    }

    pub fn states(&self) -> &[DVector<f64>] {
        &self.states
    }

    pub fn observations(&self) -> &[DVector<f64>] {
        &self.observations
    }

    pub fn train_states(&self) -> &[DVector<f64>] {
        &self.states[..self.split_index]
    }

    pub fn train_observations(&self) -> &[DVector<f64>] {
        &self.observations[..self.split_index]
    }

    pub fn test_states(&self) -> &[DVector<f64>] {
        &self.states[self.split_index..]
    }

    pub fn test_observations(&self) -> &[DVector<f64>] {
        &self.observations[self.split_index..]
    }

    pub fn with_split(self, split_index: usize) -> Result<Self, StateSpaceError> {
        Self::new(self.states, self.observations, split_index, self.lag)
    }

    /// Rows `range` as a new dataset, split `split_offset` rows into the range.
    pub fn window(&self, range: Range<usize>, split_offset: usize) -> Result<Self, StateSpaceError> {
        if range.end > self.len() || range.start >= range.end {
            return Err(StateSpaceError::InvalidArgument(format!(
                "window {range:?} outside 0..{}",
                self.len()
            )));
        }
        Self::new(
            self.states[range.clone()].to_vec(),
            self.observations[range].to_vec(),
            split_offset,
            self.lag,
        )
    }

    pub fn metadata(&self, seed: Option<u64>) -> DatasetMetadata {
        DatasetMetadata {
            d: self.state_dim(),
            m: self.observation_dim(),
            split_index: self.split_index,
            lag: self.lag,
            seed,
        }
    }

    /// Writes `t,z_1..z_d,x_1..x_m` rows with 17 significant digits.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), StateSpaceError> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["t".to_string()];
        header.extend((1..=self.state_dim()).map(|i| format!("z_{i}")));
        header.extend((1..=self.observation_dim()).map(|i| format!("x_{i}")));
        w.write_record(&header)?;
        let mut record = Vec::with_capacity(header.len());
        for (t, (z, x)) in self.states.iter().zip(&self.observations).enumerate() {
            record.clear();
            record.push(t.to_string());
            record.extend(z.iter().chain(x.iter()).map(|v| format_f64(*v)));
            w.write_record(&record)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Writes `path` and its `.meta` sidecar.
    pub fn save(&self, path: &Path, seed: Option<u64>) -> Result<(), StateSpaceError> {
        self.write_csv(BufWriter::new(File::create(path)?))?;
        std::fs::write(sidecar_path(path), self.metadata(seed).to_string())?;
        Ok(())
    }

    /// Reads a CSV written by [`TrajectoryDataset::save`] together with its sidecar.
    pub fn load(path: &Path) -> Result<(Self, DatasetMetadata), StateSpaceError> {
        let meta_text = std::fs::read_to_string(sidecar_path(path))?;
        let meta: DatasetMetadata = meta_text.parse()?;
        let (states, observations) =
            read_rows(BufReader::new(File::open(path)?), meta.d, meta.m, true)?;
        let ds = Self::new(states, observations, meta.split_index, meta.lag)?;
        Ok((ds, meta))
    }
}

/// `data.csv` → `data.meta`.
pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("meta")
}

pub(crate) fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Parses `t,z..,x..` rows (or `z..,x..` when `has_t` is false) into vectors.
/// The first record is treated as a header when its first field is not numeric.
pub(crate) fn read_rows<R: Read>(
    reader: R,
    d: usize,
    m: usize,
    has_t: bool,
) -> Result<(Vec<DVector<f64>>, Vec<DVector<f64>>), StateSpaceError> {
    let mut r = csv::ReaderBuilder::new().has_headers(false).from_reader(reader);
    let offset = usize::from(has_t);
    let mut states = Vec::new();
    let mut observations = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        if i == 0 && rec.get(0).is_some_and(|f| f.trim().parse::<f64>().is_err()) {
            continue;
        }
        if rec.len() != offset + d + m {
            return Err(StateSpaceError::Parse {
                location: format!("record {}", i + 1),
                message: format!("expected {} columns, found {}", offset + d + m, rec.len()),
            });
        }
        let parse = |j: usize| -> Result<f64, StateSpaceError> {
            rec[j].trim().parse::<f64>().map_err(|e| StateSpaceError::Parse {
                location: format!("record {}, column {}", i + 1, j + 1),
                message: e.to_string(),
            })
        };
        states.push(DVector::from_iterator(d, (offset..offset + d).map(parse).collect::<Result<Vec<_>, _>>()?));
        observations.push(DVector::from_iterator(
            m,
            (offset + d..offset + d + m).map(parse).collect::<Result<Vec<_>, _>>()?,
        ));
    }
    Ok((states, observations))
}

impl std::fmt::Display for DatasetMetadata {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "d={}", self.d)?;
        writeln!(f, "m={}", self.m)?;
        writeln!(f, "split_index={}", self.split_index)?;
        writeln!(f, "lag={}", self.lag)?;
        match self.seed {
            Some(s) => writeln!(f, "seed={s}"),
            None => writeln!(f, "seed="),
        }
    }
}

impl std::str::FromStr for DatasetMetadata {
    type Err = StateSpaceError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut d = None;
        let mut m = None;
        let mut split_index = None;
        let mut lag = 0usize;
        let mut seed = None;
        for (n, line) in s.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| StateSpaceError::Parse {
                location: format!("metadata line {}", n + 1),
                message: "expected key=value".into(),
            })?;
            let value = value.trim();
            let bad = |e: std::num::ParseIntError| StateSpaceError::Parse {
                location: format!("metadata line {}", n + 1),
                message: e.to_string(),
            };
            match key.trim() {
                "d" => d = Some(value.parse().map_err(bad)?),
                "m" => m = Some(value.parse().map_err(bad)?),
                "split_index" => split_index = Some(value.parse().map_err(bad)?),
                "lag" => lag = value.parse().map_err(bad)?,
                "seed" if value.is_empty() => seed = None,
                "seed" => seed = Some(value.parse().map_err(bad)?),
                _ => {}
            }
        }
        let missing = |k: &str| StateSpaceError::Parse {
            location: "metadata".into(),
            message: format!("missing key {k}"),
        };
        Ok(Self {
            d: d.ok_or_else(|| missing("d"))?,
            m: m.ok_or_else(|| missing("m"))?,
            split_index: split_index.ok_or_else(|| missing("split_index"))?,
            lag,
            seed,
        })
    }
}
