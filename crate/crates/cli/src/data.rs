//! CSV stream ingestion.

use std::io::Read;

use crate::error::CliError;

/// Numeric rows split into inputs and targets.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub input_names: Vec<String>,
    pub target_names: Vec<String>,
    pub x: Vec<Vec<f64>>,
    pub t: Vec<Vec<f64>>,
    /// 0-based data row (header excluded) each kept sample came from.
    pub rows: Vec<usize>,
    /// Rows dropped for missing or malformed fields.
    pub skipped_rows: usize,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn p(&self) -> usize {
        self.input_names.len()
    }

    pub fn m(&self) -> usize {
        self.target_names.len()
    }
}

/// Which columns to read. With no targets the last column is the target;
/// with no inputs every non-target column is an input.
#[derive(Debug, Clone, Default)]
pub struct Columns {
    pub targets: Vec<String>,
    pub inputs: Vec<String>,
}

fn locate(header: &[String], name: &str) -> Result<usize, CliError> {
    header
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| CliError::Config(format!("column {name:?} not in header {header:?}")))
}

/// Reads a headered CSV. A row with a missing, unparsable or non-finite input
/// field, or with a missing target, is skipped and counted. A target field
/// that is present but not a number is fatal.
pub fn read_csv(reader: impl Read, cols: &Columns) -> Result<Dataset, CliError> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).trim(csv::Trim::All).from_reader(reader);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| CliError::Data(format!("cannot read CSV header: {e}")))?
        .iter()
        .map(str::to_string)
        .collect();
    if header.len() < 2 {
        return Err(CliError::Data(format!("need at least one input and one target column, header is {header:?}")));
    }
    let target_idx: Vec<usize> = if cols.targets.is_empty() {
        vec![header.len() - 1]
    } else {
        cols.targets.iter().map(|n| locate(&header, n)).collect::<Result<_, _>>()?
    };
    let input_idx: Vec<usize> = if cols.inputs.is_empty() {
        (0..header.len()).filter(|i| !target_idx.contains(i)).collect()
    } else {
        cols.inputs.iter().map(|n| locate(&header, n)).collect::<Result<_, _>>()?
    };
    if input_idx.is_empty() {
        return Err(CliError::Config("no input columns left after choosing targets".into()));
    }
    if input_idx.iter().any(|i| target_idx.contains(i)) {
        return Err(CliError::Config("a column cannot be both input and target".into()));
    }

    let mut ds = Dataset {
        input_names: input_idx.iter().map(|&i| header[i].clone()).collect(),
        target_names: target_idx.iter().map(|&i| header[i].clone()).collect(),
        ..Dataset::default()
    };
    for (row, rec) in rdr.records().enumerate() {
        let rec = match rec {
            Ok(r) if r.len() == header.len() => r,
            Ok(r) => {
                log::warn!("row {row}: {} fields, expected {}; skipped", r.len(), header.len());
                ds.skipped_rows += 1;
                continue;
            }
            Err(e) => {
                log::warn!("row {row}: {e}; skipped");
                ds.skipped_rows += 1;
                continue;
            }
        };
        let mut t = Vec::with_capacity(target_idx.len());
        let mut missing = false;
        for &i in &target_idx {
            let field = &rec[i];
            if field.is_empty() {
                missing = true;
                break;
            }
            match field.parse::<f64>() {
                Ok(v) if v.is_finite() => t.push(v),
                _ => {
                    return Err(CliError::Config(format!(
                        "target column {:?} holds non-numeric value {field:?} at row {row}",
                        header[i]
                    )))
                }
            }
        }
        let x: Option<Vec<f64>> = input_idx
            .iter()
            .map(|&i| rec[i].parse::<f64>().ok().filter(|v| v.is_finite()))
            .collect();
        match (missing, x) {
            (false, Some(x)) => {
                ds.x.push(x);
                ds.t.push(t);
                ds.rows.push(row);
            }
            _ => {
                log::warn!("row {row}: missing or malformed field; skipped");
                ds.skipped_rows += 1;
            }
        }
    }
    Ok(ds)
}
