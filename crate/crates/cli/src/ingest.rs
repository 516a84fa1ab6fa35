//! CSV ingestion: `time,status,<covariates...>` with a header row.

use std::fs::File;
use std::io::Read;
use std::path::Path;

use cwaft::{Dataset, Status, SurvivalRecord};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Problems with the input file itself. Row numbers are file line numbers,
/// the header being line 1.
#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("input file is empty")]
    EmptyFile,

    #[error("schema error at row {row}: {message}")]
    Schema { row: u64, message: String },

    #[error("row {row}: time must be positive")]
    NonPositiveTime { row: u64 },
}

/// Per-column centering and scaling applied to the covariates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub columns: Vec<String>,
    pub mean: Vec<f64>,
    /// Sample standard deviation (divisor `n - 1`).
    pub sd: Vec<f64>,
}

impl Standardization {
    fn fit(columns: &[String], rows: &[Vec<f64>]) -> Result<Self, IngestError> {
        let n = rows.len();
        if n < 2 {
            return Err(IngestError::Schema {
                row: 2,
                message: "standardization needs at least two rows".into(),
            });
        }
        let d = columns.len();
        let mut mean = vec![0.0; d];
        let mut sd = vec![0.0; d];
        for j in 0..d {
            mean[j] = rows.iter().map(|r| r[j]).sum::<f64>() / n as f64;
            let ss: f64 = rows.iter().map(|r| (r[j] - mean[j]).powi(2)).sum();
            sd[j] = (ss / (n - 1) as f64).sqrt();
            if !(sd[j] > 0.0) {
                return Err(IngestError::Schema {
                    row: 1,
                    message: format!("column `{}` is constant and cannot be standardized", columns[j]),
                });
            }
        }
        Ok(Self {
            columns: columns.to_vec(),
            mean,
            sd,
        })
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.mean.iter().zip(&self.sd))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct Ingested {
    pub dataset: Dataset,
    pub covariate_names: Vec<String>,
    pub standardization: Option<Standardization>,
    /// Human-readable notes, e.g. cause labels with no observed failure.
    pub warnings: Vec<String>,
}

fn schema(row: u64, message: impl Into<String>) -> IngestError {
    IngestError::Schema {
        row,
        message: message.into(),
    }
}

fn parse_field<T: std::str::FromStr>(raw: &str, row: u64, column: &str) -> Result<T, IngestError> {
    raw.trim()
        .parse()
        .map_err(|_| schema(row, format!("column `{column}`: cannot parse `{raw}`")))
}

pub fn ingest(path: &Path, standardize: bool) -> Result<Ingested, IngestError> {
    let mut text = String::new();
    File::open(path)
        .and_then(|mut f| f.read_to_string(&mut text))
        .map_err(|source| IngestError::Io {
            path: path.display().to_string(),
            source,
        })?;
    parse(&text, standardize)
}

/// Parses CSV text already in memory.
pub fn parse(text: &str, standardize: bool) -> Result<Ingested, IngestError> {
    if text.trim().is_empty() {
        return Err(IngestError::EmptyFile);
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| schema(1, e.to_string()))?
        .clone();
    let names: Vec<String> = header.iter().map(|h| h.trim().to_string()).collect();
    if names.len() < 3 || names[0] != "time" || names[1] != "status" {
        return Err(schema(
            1,
            "header must be `time,status,` followed by at least one covariate column",
        ));
    }
    let covariate_names = names[2..].to_vec();

    let mut times = Vec::new();
    let mut codes = Vec::new();
    let mut rows = Vec::new();
    for result in reader.records() {
        let record = result.map_err(|e| {
            let row = e.position().map_or(0, |p| p.line());
            schema(row, e.to_string())
        })?;
        let row = record.position().map_or(0, |p| p.line());
        let time: f64 = parse_field(&record[0], row, "time")?;
        if !time.is_finite() {
            return Err(schema(row, "time must be finite"));
        }
        if time <= 0.0 {
            return Err(IngestError::NonPositiveTime { row });
        }
        let code: usize = parse_field(&record[1], row, "status")?;
        let x = covariate_names
            .iter()
            .enumerate()
            .map(|(j, name)| {
                let v: f64 = parse_field(&record[j + 2], row, name)?;
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(schema(row, format!("column `{name}` must be finite")))
                }
            })
            .collect::<Result<Vec<f64>, _>>()?;
        times.push(time);
        codes.push(code);
        rows.push(x);
    }
    if rows.is_empty() {
        return Err(IngestError::EmptyFile);
    }

    let n_causes = codes.iter().copied().max().unwrap_or(0);
    if n_causes == 0 {
        return Err(schema(2, "no observed failures: every status is 0"));
    }
    let mut counts = vec![0usize; n_causes];
    for &c in &codes {
        if c > 0 {
            counts[c - 1] += 1;
        }
    }
    let warnings = counts
        .iter()
        .enumerate()
        .filter(|(_, &c)| c == 0)
        .map(|(g, _)| format!("cause {} has no observed failures", g + 1))
        .collect();

    let standardization = if standardize {
        Some(Standardization::fit(&covariate_names, &rows)?)
    } else {
        None
    };
    let records = rows
        .into_iter()
        .zip(times.into_iter().zip(codes))
        .map(|(x, (t, c))| {
            let x = match &standardization {
                Some(s) => s.apply(&x),
                None => x,
            };
            SurvivalRecord::new(x, t, Status::from_code(c))
        })
        .collect();
    let dataset = Dataset::with_causes(records, n_causes).map_err(|e| schema(0, e.to_string()))?;
    Ok(Ingested {
        dataset,
        covariate_names,
        standardization,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_valid_rows() {
        let got = parse("time,status,x\n1.5,1,0.2\n2,0,0.3\n3,2,-1\n", false).unwrap();
        assert_eq!(got.dataset.len(), 3);
        assert_eq!(got.dataset.n_causes(), 2);
        assert_eq!(got.covariate_names, vec!["x"]);
        assert!(got.warnings.is_empty());
    }

    #[test]
    fn largest_label_sets_cause_count_and_warns_on_gaps() {
        let got = parse("time,status,x\n1,4,0\n2,1,1\n3,0,2\n", false).unwrap();
        assert_eq!(got.dataset.n_causes(), 4);
        assert_eq!(
            got.warnings,
            vec![
                "cause 2 has no observed failures",
                "cause 3 has no observed failures"
            ]
        );
    }

    #[test]
    fn zero_time_reports_its_row() {
        let err = parse("time,status,x\n1,1,0\n0,1,0\n", false).unwrap_err();
        assert!(matches!(err, IngestError::NonPositiveTime { row: 3 }), "{err:?}");
    }

    #[test]
    fn schema_errors() {
        assert!(matches!(parse("", false), Err(IngestError::EmptyFile)));
        assert!(matches!(parse("time,status,x\n", false), Err(IngestError::EmptyFile)));
        assert!(matches!(
            parse("t,status,x\n1,1,0\n", false),
            Err(IngestError::Schema { row: 1, .. })
        ));
        assert!(matches!(
            parse("time,status\n1,1\n", false),
            Err(IngestError::Schema { row: 1, .. })
        ));
        assert!(matches!(
            parse("time,status,x\n1,1,0\n2,one,0\n", false),
            Err(IngestError::Schema { row: 3, .. })
        ));
        assert!(matches!(
            parse("time,status,x\n1,1,0\n2,1\n", false),
            Err(IngestError::Schema { row: 3, .. })
        ));
        assert!(matches!(
            parse("time,status,x\n1,-1,0\n", false),
            Err(IngestError::Schema { row: 2, .. })
        ));
    }

    #[test]
    fn standardization_uses_sample_sd() {
        let got = parse("time,status,x,z\n1,1,1,5\n2,1,2,5.5\n3,0,3,7\n", true).unwrap();
        let s = got.standardization.unwrap();
        assert_eq!(s.mean, vec![2.0, 5.833333333333333]);
        assert_eq!(s.sd[0], 1.0);
        let col: Vec<f64> = (0..3).map(|i| got.dataset.covariates(i)[0]).collect();
        assert_eq!(col, vec![-1.0, 0.0, 1.0]);
        assert!(parse("time,status,x\n1,1,2\n2,1,2\n", true).is_err());
    }
}
