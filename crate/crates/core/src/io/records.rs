//! Backbone measurement tables: CSV with columns `top1`, `pretrain`,
//! `accuracy` in any order. Extra columns are ignored.

use std::fs::File;
use std::io::Read;
use std::path::Path;

use crate::error::{Error, Result};
use crate::stats::BackboneRecord;

/// Parses backbone records. Without `require_pretrain` a missing `pretrain`
/// column reads as group 0.
pub fn parse_records<R: Read>(reader: R, require_pretrain: bool) -> Result<Vec<BackboneRecord>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| Error::HeaderMismatch(e.to_string()))?
        .clone();
    let column = |name: &str| header.iter().position(|h| h.trim() == name);
    let missing = |name: &str| Error::HeaderMismatch(format!("missing column '{name}'"));
    let top1 = column("top1").ok_or_else(|| missing("top1"))?;
    let accuracy = column("accuracy").ok_or_else(|| missing("accuracy"))?;
    let pretrain = match column("pretrain") {
        Some(i) => Some(i),
        None if require_pretrain => return Err(missing("pretrain")),
        None => None,
    };

    let mut out = Vec::new();
    for (idx, record) in rdr.records().enumerate() {
        let line = idx + 2;
        let record = record.map_err(|e| match e.kind() {
            csv::ErrorKind::UnequalLengths { expected_len, len, .. } => Error::RaggedRow {
                line,
                expected: *expected_len as usize,
                actual: *len as usize,
            },
            _ => Error::HeaderMismatch(e.to_string()),
        })?;
        let field = |i: usize| record[i].trim();
        let number = |i: usize| -> Result<f64> {
            field(i).parse().map_err(|_| Error::UnparsableNumber {
                line,
                field: field(i).to_string(),
            })
        };
        let group = match pretrain {
            Some(i) => field(i).parse::<u8>().map_err(|_| Error::UnparsableNumber {
                line,
                field: field(i).to_string(),
            })?,
            None => 0,
        };
        out.push(BackboneRecord::new(number(top1)?, group, number(accuracy)?)?);
    }
    Ok(out)
}

pub fn read_records(path: impl AsRef<Path>, require_pretrain: bool) -> Result<Vec<BackboneRecord>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_records(file, require_pretrain)
}
