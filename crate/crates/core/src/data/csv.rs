use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use crate::dataset::Dataset;
use crate::error::{ExposeError, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CsvOptions {
    /// The last column is an integer class label.
    pub has_labels: bool,
    /// The first record is a header and is skipped.
    pub has_header: bool,
}

fn parse_label(raw: &str) -> Option<i64> {
    raw.parse::<i64>().ok().or_else(|| {
        raw.parse::<f64>()
            .ok()
            .filter(|v| v.fract() == 0.0 && v.abs() < 9.0e15)
            .map(|v| v as i64)
    })
}

pub fn read_csv<R: Read>(reader: R, source: &str, opts: CsvOptions) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(opts.has_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut features = Vec::new();
    let mut labels = Vec::new();
    let mut width: Option<usize> = None;
    for (i, record) in rdr.records().enumerate() {
        let line = i + 1 + usize::from(opts.has_header);
        let record = record.map_err(|e| ExposeError::Parse {
            location: format!("{source}:{line}"),
            message: e.to_string(),
        })?;
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        let cols = record.len() - usize::from(opts.has_labels);
        if cols == 0 {
            return Err(ExposeError::Parse {
                location: format!("{source}:{line}"),
                message: "row has no feature columns".into(),
            });
        }
        match width {
            None => width = Some(cols),
            Some(w) if w != cols => {
                return Err(ExposeError::Parse {
                    location: format!("{source}:{line}"),
                    message: format!("ragged row: {} fields, expected {}", record.len(), w + usize::from(opts.has_labels)),
                })
            }
            _ => {}
        }
        for (j, cell) in record.iter().take(cols).enumerate() {
            let v: f64 = cell.parse().map_err(|_| ExposeError::Parse {
                location: format!("{source}:{line}, column {}", j + 1),
                message: format!("non-numeric value `{cell}`"),
            })?;
            if !v.is_finite() {
                return Err(ExposeError::Parse {
                    location: format!("{source}:{line}, column {}", j + 1),
                    message: format!("non-finite value `{cell}`"),
                });
            }
            features.push(v);
        }
        if opts.has_labels {
            let cell = &record[cols];
            labels.push(parse_label(cell).ok_or_else(|| ExposeError::Parse {
                location: format!("{source}:{line}, column {}", cols + 1),
                message: format!("label `{cell}` is not an integer"),
            })?);
        }
    }
    let d = width.ok_or_else(|| ExposeError::Parse {
        location: source.to_string(),
        message: "no data rows".into(),
    })?;
    let labels = opts.has_labels.then_some(labels);
    Dataset::new(features, d, labels, source, format!("csv:{source}"))
}

pub fn load_csv(path: impl AsRef<Path>, opts: CsvOptions) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| ExposeError::io(path, e))?;
    read_csv(file, &path.display().to_string(), opts)
}

/// Writes rows with shortest round-trip float formatting, labels last if present.
pub fn save_csv(data: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let io_err = |e| ExposeError::io(path, e);
    let mut out = BufWriter::new(File::create(path).map_err(io_err)?);
    for (i, row) in data.rows().enumerate() {
        let mut line = row.iter().map(f64::to_string).collect::<Vec<_>>().join(",");
        if let Some(labels) = data.labels() {
            line.push(',');
            line.push_str(&labels[i].to_string());
        }
        writeln!(out, "{line}").map_err(io_err)?;
    }
    out.flush().map_err(io_err)
}
