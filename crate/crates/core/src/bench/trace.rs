use std::io::Write;

use nalgebra::DVector;

use super::BenchError;
use crate::statespace::GaussianBelief;

/// `t,truth_1..,mean_1..,sd_1..` per step; truth columns are omitted when
/// `truth` is `None`.
pub fn write_trace<W: Write>(
    writer: W,
    beliefs: &[GaussianBelief],
    truth: Option<&[DVector<f64>]>,
) -> Result<(), BenchError> {
    if let Some(z) = truth {
        if z.len() != beliefs.len() {
            return Err(BenchError::LengthMismatch { predicted: beliefs.len(), truth: z.len() });
        }
    }
    let d = beliefs.first().map_or(0, GaussianBelief::dim);
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["t".to_string()];
    if truth.is_some() {
        header.extend((1..=d).map(|i| format!("truth_{i}")));
    }
    header.extend((1..=d).map(|i| format!("mean_{i}")));
    header.extend((1..=d).map(|i| format!("sd_{i}")));
    w.write_record(&header)?;
    for (t, b) in beliefs.iter().enumerate() {
        let mut row = vec![t.to_string()];
        if let Some(z) = truth {
            row.extend(z[t].iter().map(|v| format!("{v:.16e}")));
        }
        row.extend(b.mean().iter().map(|v| format!("{v:.16e}")));
        row.extend((0..d).map(|i| format!("{:.16e}", b.covariance()[(i, i)].sqrt())));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    #[test]
    fn columns() {
        let b = GaussianBelief::new(DVector::from_vec(vec![1.0, -2.0]), DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 9.0])))
            .unwrap();
        let mut out = Vec::new();
        write_trace(&mut out, &[b.clone(), b.clone()], Some(&[DVector::zeros(2), DVector::zeros(2)])).unwrap();
        let text = String::from_utf8(out).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("t,truth_1,truth_2,mean_1,mean_2,sd_1,sd_2"));
        let row: Vec<f64> = lines.next().unwrap().split(',').map(|s| s.parse().unwrap()).collect();
        assert_eq!(row, vec![0.0, 0.0, 0.0, 1.0, -2.0, 2.0, 3.0]);
        assert!(write_trace(Vec::new(), &[b], Some(&[])).is_err());
    }
}
