use std::fs::File;
use std::io::{BufReader, Read};
use std::path::Path;

use nalgebra::DVector;

use super::BenchError;
use crate::statespace::TrajectoryDataset;

/// Where the train/test boundary goes after the lag is applied.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Split {
    Fraction(f64),
    Index(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CsvSchema {
    pub d: usize,
    pub m: usize,
    /// Pairs `z_t` with `x_{t−lag}`.
    pub lag: usize,
    pub split: Split,
}

pub fn ingest_csv(path: &Path, schema: &CsvSchema) -> Result<TrajectoryDataset, BenchError> {
    ingest_reader(BufReader::new(File::open(path)?), schema)
}

/// Accepts `t,z_1..z_d,x_1..x_m` with a header, or headerless rows of either
/// `d + m` or `1 + d + m` columns (a leading `t` column is dropped).
/// `NonFinite(row)` counts data rows from 0.
pub fn ingest_reader<R: Read>(reader: R, schema: &CsvSchema) -> Result<TrajectoryDataset, BenchError> {
    let (d, m) = (schema.d, schema.m);
    if d == 0 || m == 0 {
        return Err(BenchError::InvalidConfig(format!("d and m must be positive, got d={d}, m={m}")));
    }
    let mut csv = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_reader(reader);
    let mut states = Vec::new();
    let mut observations = Vec::new();
    let mut has_t: Option<bool> = None;
    let mut row = 0usize;
    for (record_index, rec) in csv.records().enumerate() {
        let rec = rec?;
        let first_is_text = rec.get(0).is_some_and(|f| f.parse::<f64>().is_err());
        if record_index == 0 && first_is_text {
            has_t = Some(rec.get(0) == Some("t"));
            if rec.len() != usize::from(has_t == Some(true)) + d + m {
                return Err(BenchError::SchemaMismatch { row: None, expected: d + m, found: rec.len() });
            }
            continue;
        }
        let with_t = *has_t.get_or_insert(rec.len() == 1 + d + m);
        let offset = usize::from(with_t);
        if rec.len() != offset + d + m {
            return Err(BenchError::SchemaMismatch { row: Some(row), expected: offset + d + m, found: rec.len() });
        }
        let values = rec
            .iter()
            .skip(offset)
            .map(|f| f.parse::<f64>().map_err(|e| BenchError::Parse { row, message: format!("`{f}`: {e}") }))
            .collect::<Result<Vec<_>, _>>()?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(BenchError::NonFinite(row));
        }
        states.push(DVector::from_column_slice(&values[..d]));
        observations.push(DVector::from_column_slice(&values[d..]));
        row += 1;
    }
    let lag = schema.lag;
    if states.len() < lag + 2 {
        return Err(BenchError::EmptyAfterLag { rows: states.len(), lag });
    }
    let n = states.len() - lag;
    states.drain(..lag);
    observations.truncate(n);
    let split_index = match schema.split {
        Split::Index(i) => i,
        Split::Fraction(f) => {
            if !(f > 0.0 && f < 1.0) {
                return Err(BenchError::InvalidConfig(format!("split fraction {f} must lie in (0, 1)")));
            }
            ((n as f64 * f).floor() as usize).clamp(1, n - 1)
        }
    };
    Ok(TrajectoryDataset::new(states, observations, split_index, lag)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RandomSource;
    use crate::statespace::generate_synthetic1;

    fn schema(d: usize, m: usize, lag: usize) -> CsvSchema {
        CsvSchema { d, m, lag, split: Split::Fraction(0.5) }
    }

    #[test]
    fn lag_zero_round_trip() {
        let ds = generate_synthetic1(50, 3, &mut RandomSource::new(6)).unwrap();
        let mut buf = Vec::new();
        ds.write_csv(&mut buf).unwrap();
        let back = ingest_reader(buf.as_slice(), &schema(1, 3, 0)).unwrap();
        assert_eq!(back.states(), ds.states());
        assert_eq!(back.observations(), ds.observations());
        assert_eq!(back.split_index(), ds.split_index());
    }

    #[test]
    fn lag_one_drops_first_observation() {
        let text = "0,10,100\n1,11,101\n2,12,102\n3,13,103\n4,14,104\n";
        let ds = ingest_reader(text.as_bytes(), &schema(1, 1, 1)).unwrap();
        assert_eq!(ds.len(), 4);
        // z_t paired with x_{t-1}
        assert_eq!(ds.states()[0][0], 11.0);
        assert_eq!(ds.observations()[0][0], 100.0);
        assert_eq!(ds.states()[3][0], 14.0);
        assert_eq!(ds.observations()[3][0], 103.0);
        assert_eq!(ds.lag(), 1);
    }

    #[test]
    fn headerless_without_t() {
        let text = "1,2,3\n4,5,6\n7,8,9\n";
        let ds = ingest_reader(text.as_bytes(), &schema(1, 2, 0)).unwrap();
        assert_eq!(ds.observations()[2].as_slice(), &[8.0, 9.0]);
    }

    #[test]
    fn nan_row_is_reported() {
        let mut text = String::from("t,z_1,x_1\n");
        for t in 0..30 {
            if t == 17 {
                text.push_str("17,NaN,1\n");
            } else {
                text.push_str(&format!("{t},{t},1\n"));
            }
        }
        let err = ingest_reader(text.as_bytes(), &schema(1, 1, 0)).unwrap_err();
        assert!(matches!(err, BenchError::NonFinite(17)), "{err:?}");
    }

    #[test]
    fn schema_and_length_errors() {
        let err = ingest_reader("1,2,3,4\n".as_bytes(), &schema(1, 1, 0)).unwrap_err();
        assert!(matches!(err, BenchError::SchemaMismatch { .. }));
        let err = ingest_reader("0,1,2\n1,1,2\n".as_bytes(), &schema(1, 1, 1)).unwrap_err();
        assert!(matches!(err, BenchError::EmptyAfterLag { rows: 2, lag: 1 }));
    }
}
