use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};

use super::FilterError;
use crate::linalg;
use crate::statespace::{format_f64, GaussianBelief};

/// Writes `t,mu_1..mu_d,sigma_11..sigma_dd` (covariance row-major).
pub fn write_beliefs_csv<W: Write>(writer: W, beliefs: &[GaussianBelief]) -> Result<(), FilterError> {
    let d = beliefs.first().map_or(0, GaussianBelief::dim);
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["t".to_string()];
    header.extend((1..=d).map(|i| format!("mu_{i}")));
    for i in 1..=d {
        header.extend((1..=d).map(|j| format!("sigma_{i}{j}")));
    }
    w.write_record(&header)?;
    for (t, b) in beliefs.iter().enumerate() {
        if b.dim() != d {
            return Err(FilterError::DimensionMismatch(format!("belief {t} has d={}, expected {d}", b.dim())));
        }
        let mut row = vec![t.to_string()];
        row.extend(b.mean().iter().map(|&v| format_f64(v)));
        for i in 0..d {
            row.extend((0..d).map(|j| format_f64(b.covariance()[(i, j)])));
        }
        w.write_record(&row)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Inverse of [`write_beliefs_csv`]; `d` is taken from the header.
pub fn read_beliefs_csv<R: Read>(reader: R) -> Result<Vec<GaussianBelief>, FilterError> {
    let mut r = csv::Reader::from_reader(reader);
    let d = r.headers()?.iter().filter(|h| h.starts_with("mu_")).count();
    let mut out = Vec::new();
    for (row, rec) in r.records().enumerate() {
        let rec = rec?;
        if rec.len() != 1 + d + d * d {
            return Err(FilterError::Parse(format!("row {row}: expected {} fields, found {}", 1 + d + d * d, rec.len())));
        }
        let values = rec
            .iter()
            .skip(1)
            .map(|f| f.trim().parse::<f64>().map_err(|e| FilterError::Parse(format!("row {row}: {e}"))))
            .collect::<Result<Vec<_>, _>>()?;
        let mean = DVector::from_column_slice(&values[..d]);
        let cov = DMatrix::from_row_slice(d, d, &values[d..]);
        if !linalg::is_positive_definite(&cov) {
            return Err(FilterError::Parse(format!("row {row}: covariance is not positive definite")));
        }
        out.push(GaussianBelief::from_parts(mean, cov));
    }
    Ok(out)
}
