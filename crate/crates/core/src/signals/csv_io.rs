use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use super::{SignalError, TimeSeriesData};

pub const EXPORT_INDEX_COLUMN: &str = "index";
pub const EXPORT_VALUE_COLUMN: &str = "value";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsvOptions {
    pub value_column: String,
    pub delimiter: u8,
}

impl CsvOptions {
    pub fn column(name: impl Into<String>) -> Self {
        Self {
            value_column: name.into(),
            delimiter: b',',
        }
    }
}

/// Parsed series plus notes about skipped input.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvIngest {
    pub series: TimeSeriesData,
    pub notes: Vec<String>,
}

/// Reads one numeric column from a headed CSV source.
///
/// Blank lines are skipped and recorded in `notes`; any other row whose cell
/// does not parse as a finite number is an error naming the line.
pub fn ingest_csv_reader<R: Read>(mut reader: R, opts: &CsvOptions, label: &str) -> Result<CsvIngest, SignalError> {
    let mut data = Vec::new();
    reader.read_to_end(&mut data)?;
    // Record positions include any blank lines skipped before the record.
    let line_of = |byte: u64| {
        let mut start = byte as usize;
        while start < data.len() && matches!(data[start], b'\n' | b'\r') {
            start += 1;
        }
        1 + data[..start].iter().filter(|&&b| b == b'\n').count() as u64
    };

    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .delimiter(opts.delimiter)
        .flexible(true)
        .from_reader(&data[..]);

    let headers = match rdr.headers() {
        Ok(h) => h.clone(),
        Err(e) => return Err(csv_to_signal(e)),
    };
    if headers.is_empty() || (headers.len() == 1 && headers[0].trim().is_empty()) {
        return Err(SignalError::Empty);
    }
    let column = headers
        .iter()
        .position(|h| h.trim() == opts.value_column)
        .ok_or_else(|| SignalError::MissingColumn(opts.value_column.clone()))?;

    let mut values = Vec::new();
    let mut notes = Vec::new();
    let mut last_line = rdr
        .headers()
        .ok()
        .and_then(|h| h.position())
        .map_or(1, |p| line_of(p.byte()));
    let mut record = csv::StringRecord::new();
    loop {
        match rdr.read_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {}
            Err(e) => return Err(csv_to_signal(e)),
        }
        let line = record.position().map_or(last_line + 1, |p| line_of(p.byte()));
        for skipped in last_line + 1..line {
            notes.push(format!("line {skipped}: blank line skipped"));
        }
        last_line = line;
        if record.iter().all(|c| c.trim().is_empty()) {
            notes.push(format!("line {line}: blank line skipped"));
            continue;
        }
        let cell = record.get(column).ok_or_else(|| SignalError::BadRow {
            row: line,
            message: format!("expected at least {} fields, found {}", column + 1, record.len()),
        })?;
        let value = cell
            .trim()
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| SignalError::BadCell {
                row: line,
                cell: cell.to_string(),
            })?;
        values.push(value);
    }
    if values.is_empty() {
        return Err(SignalError::Empty);
    }
    Ok(CsvIngest {
        series: TimeSeriesData::new(values, 1.0, label)?,
        notes,
    })
}

fn csv_to_signal(e: csv::Error) -> SignalError {
    let row = e.position().map(|p| p.line());
    match (e.kind(), row) {
        (csv::ErrorKind::Utf8 { .. }, Some(row)) => SignalError::BadRow {
            row,
            message: "invalid UTF-8".into(),
        },
        (csv::ErrorKind::Io(_), _) => match e.into_kind() {
            csv::ErrorKind::Io(io) => SignalError::Io(io),
            _ => unreachable!(),
        },
        _ => SignalError::Csv(e),
    }
}

pub fn ingest_csv(path: impl AsRef<Path>, opts: &CsvOptions) -> Result<CsvIngest, SignalError> {
    let path = path.as_ref();
    let label = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    ingest_csv_reader(File::open(path)?, opts, &label)
}

/// Writes `index,value` rows with 17 significant digits, which reproduce
/// every finite `f64` exactly when read back.
pub fn export_csv<W: Write>(series: &TimeSeriesData, mut out: W) -> Result<(), SignalError> {
    writeln!(out, "{EXPORT_INDEX_COLUMN},{EXPORT_VALUE_COLUMN}")?;
    for (i, v) in series.values.iter().enumerate() {
        writeln!(out, "{i},{v:.16e}")?;
    }
    Ok(())
}
