use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use csv::StringRecord;

use super::{IngestError, RowError};
use crate::dataset::{OptionQuote, OptionType, N_LAGS};

/// Loads with more malformed rows than this fraction of data rows are aborted.
pub const MAX_MALFORMED_FRACTION: f64 = 0.01;

const N_COLUMNS: usize = 8 + N_LAGS;

pub fn csv_header() -> Vec<String> {
    let mut h: Vec<String> = [
        "option_type",
        "strike",
        "underlying_price",
        "rate",
        "dividend_yield",
        "maturity_years",
        "implied_vol",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    h.extend((1..=N_LAGS).map(|i| format!("lag_{i}")));
    h.push("midpoint".into());
    h
}

/// Quotes parsed from a CSV file, plus the rows that were skipped.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvLoad {
    pub quotes: Vec<OptionQuote>,
    pub rejected: Vec<RowError>,
}

fn number(record: &StringRecord, idx: usize, name: &str) -> Result<f64, String> {
    let raw = &record[idx];
    raw.trim()
        .parse::<f64>()
        .map_err(|_| format!("{name}: cannot parse {raw:?} as a number"))
}

fn parse_row(record: &StringRecord, header: &[String]) -> Result<OptionQuote, String> {
    if record.len() != N_COLUMNS {
        return Err(format!("expected {N_COLUMNS} fields, found {}", record.len()));
    }
    let num = |idx: usize| number(record, idx, &header[idx]);
    let option_type = OptionType::from_code(record[0].trim())
        .ok_or_else(|| format!("option_type: expected \"C\" or \"P\", found {:?}", &record[0]))?;
    let implied_vol = match record[6].trim() {
        "" => None,
        _ => Some(num(6)?),
    };
    let lags = (7..7 + N_LAGS).map(num).collect::<Result<Vec<_>, _>>()?;
    Ok(OptionQuote {
        option_type,
        strike: num(1)?,
        underlying_price: num(2)?,
        rate: num(3)?,
        dividend_yield: num(4)?,
        maturity_years: num(5)?,
        implied_vol,
        lags,
        midpoint: num(7 + N_LAGS)?,
    })
}

/// Reads quotes in file order. Unparseable rows are collected in
/// [`CsvLoad::rejected`] unless they exceed [`MAX_MALFORMED_FRACTION`].
pub fn read_csv(path: impl AsRef<Path>) -> Result<CsvLoad, IngestError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| IngestError::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .from_reader(BufReader::new(file));

    let expected = csv_header();
    let found = reader.headers().map_err(|e| IngestError::csv(path, e))?.clone();
    if found.iter().ne(expected.iter().map(String::as_str)) {
        let reason = match expected.iter().zip(found.iter()).position(|(e, f)| e != f) {
            Some(i) => format!("column {} is {:?}, expected {:?}", i + 1, &found[i], expected[i]),
            None => format!("{} columns, expected {}", found.len(), expected.len()),
        };
        return Err(IngestError::Schema {
            path: path.into(),
            reason,
        });
    }

    let mut quotes = Vec::new();
    let mut rejected = Vec::new();
    let mut record = StringRecord::new();
    loop {
        match reader.read_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {
                let line = record.position().map_or(0, |p| p.line());
                match parse_row(&record, &expected) {
                    Ok(q) => quotes.push(q),
                    Err(reason) => rejected.push(RowError { line, reason }),
                }
            }
            Err(e) => match e.kind() {
                csv::ErrorKind::Utf8 { pos, .. } => rejected.push(RowError {
                    line: pos.as_ref().map_or(0, |p| p.line()),
                    reason: "invalid UTF-8".into(),
                }),
                _ => return Err(IngestError::csv(path, e)),
            },
        }
    }

    let total = quotes.len() + rejected.len();
    if rejected.len() as f64 > MAX_MALFORMED_FRACTION * total as f64 {
        return Err(IngestError::TooManyMalformed {
            path: path.into(),
            rejected: rejected.len(),
            total,
            first: rejected[0].clone(),
        });
    }
    Ok(CsvLoad { quotes, rejected })
}

/// `Display` for `f64` prints the shortest decimal that parses back to the
/// same value, so rows round-trip exactly.
fn row(q: &OptionQuote) -> Vec<String> {
    let mut r = Vec::with_capacity(N_COLUMNS);
    r.push(q.option_type.code().to_string());
    for v in [q.strike, q.underlying_price, q.rate, q.dividend_yield, q.maturity_years] {
        r.push(v.to_string());
    }
    r.push(q.implied_vol.map_or_else(String::new, |v| v.to_string()));
    r.extend(q.lags.iter().map(f64::to_string));
    r.push(q.midpoint.to_string());
    r
}

pub fn write_csv(quotes: &[OptionQuote], path: impl AsRef<Path>) -> Result<(), IngestError> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| IngestError::io(path, e))?;
    let mut writer = csv::Writer::from_writer(BufWriter::new(file));
    let wrap = |e| IngestError::csv(path, e);
    writer.write_record(csv_header()).map_err(wrap)?;
    for q in quotes {
        writer.write_record(row(q)).map_err(wrap)?;
    }
    let mut inner = writer
        .into_inner()
        .map_err(|e| IngestError::io(path, e.into_error()))?;
    inner.flush().map_err(|e| IngestError::io(path, e))
}
