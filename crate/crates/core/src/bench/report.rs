use super::BenchError;

/// NMSE per filter and trial; `None` marks a failed cell.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportTable {
    pub filters: Vec<String>,
    pub values: Vec<Vec<Option<f64>>>,
}

impl ReportTable {
    pub fn trials(&self) -> usize {
        self.values.first().map_or(0, Vec::len)
    }

    pub fn average(&self, row: usize) -> Option<f64> {
        let v = &self.values[row];
        v.iter().copied().sum::<Option<f64>>().map(|s| s / v.len() as f64)
    }

    fn header(&self) -> Vec<String> {
        let mut h = vec!["filter".to_string()];
        h.extend((1..=self.trials()).map(|i| format!("trial#{i}")));
        h.push("avg".into());
        h
    }

    /// `filter,trial#1..trial#N,avg`; values in shortest round-trip form,
    /// failures as `NA`.
    pub fn to_csv(&self) -> String {
        let cell = |v: Option<f64>| v.map_or("NA".to_string(), |x| x.to_string());
        let mut out = self.header().join(",") + "\n";
        for (i, name) in self.filters.iter().enumerate() {
            let mut row = vec![name.clone()];
            row.extend(self.values[i].iter().map(|&v| cell(v)));
            row.push(cell(self.average(i)));
            out += &(row.join(",") + "\n");
        }
        out
    }

    pub fn to_text(&self) -> String {
        let cell = |v: Option<f64>| v.map_or("NA".to_string(), |x| format!("{x:.4}"));
        let mut rows = vec![self.header()];
        for (i, name) in self.filters.iter().enumerate() {
            let mut row = vec![name.clone()];
            row.extend(self.values[i].iter().map(|&v| cell(v)));
            row.push(cell(self.average(i)));
            rows.push(row);
        }
        let cols = rows[0].len();
        let widths: Vec<usize> = (0..cols).map(|c| rows.iter().map(|r| r[c].len()).max().unwrap_or(0)).collect();
        let mut out = String::new();
        for row in rows {
            let line: Vec<String> = row
                .iter()
                .enumerate()
                .map(|(c, s)| if c == 0 { format!("{s:<w$}", w = widths[c]) } else { format!("{s:>w$}", w = widths[c]) })
                .collect();
            out += line.join("  ").trim_end();
            out.push('\n');
        }
        out
    }
}

/// Reads back [`ReportTable::to_csv`] output. The `avg` column is checked
/// against the trial values.
pub fn parse_report_csv(text: &str) -> Result<ReportTable, BenchError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let header = reader.headers()?.clone();
    let cols = header.len();
    let well_formed = cols >= 3
        && &header[0] == "filter"
        && &header[cols - 1] == "avg"
        && (1..cols - 1).all(|i| header[i] == format!("trial#{i}"));
    if !well_formed {
        return Err(BenchError::SchemaMismatch { row: None, expected: cols.max(3), found: cols });
    }
    let mut table = ReportTable { filters: Vec::new(), values: Vec::new() };
    for (row, rec) in reader.records().enumerate() {
        let rec = rec?;
        let parse = |s: &str| -> Result<Option<f64>, BenchError> {
            if s == "NA" {
                return Ok(None);
            }
            s.parse().map(Some).map_err(|e| BenchError::Parse { row, message: format!("`{s}`: {e}") })
        };
        table.filters.push(rec[0].to_string());
        table.values.push((1..cols - 1).map(|i| parse(&rec[i])).collect::<Result<_, _>>()?);
        let avg = parse(&rec[cols - 1])?;
        let expected = table.average(row);
        if avg.map(f64::to_bits) != expected.map(f64::to_bits) {
            return Err(BenchError::Parse { row, message: format!("avg {avg:?} does not match trials ({expected:?})") });
        }
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn formats() {
        let t = ReportTable {
            filters: vec!["kalman".into(), "dkf-gp".into()],
            values: vec![vec![Some(0.5), Some(0.25)], vec![Some(0.1), None]],
        };
        assert_eq!(t.to_csv(), "filter,trial#1,trial#2,avg\nkalman,0.5,0.25,0.375\ndkf-gp,0.1,NA,NA\n");
        let text = t.to_text();
        assert!(text.starts_with("filter  trial#1  trial#2     avg\nkalman   0.5000   0.2500  0.3750\n"), "{text}");
    }

    #[test]
    fn rejects_bad_csv() {
        assert!(parse_report_csv("name,trial#1,avg\nk,1,1\n").is_err());
        assert!(parse_report_csv("filter,trial#1,avg\nk,x,1\n").is_err());
        assert!(parse_report_csv("filter,trial#1,avg\nk,1,2\n").is_err());
    }

    proptest! {
        #[test]
        fn csv_round_trip(rows in proptest::collection::vec(
            proptest::collection::vec(proptest::option::weighted(0.9, 0.0f64..10.0), 4), 1..6)) {
            let t = ReportTable {
                filters: (0..rows.len()).map(|i| format!("f{i}")).collect(),
                values: rows,
            };
            let back = parse_report_csv(&t.to_csv()).unwrap();
            prop_assert_eq!(back, t);
        }
    }
}
