//! Numeric CSV features: header `f0,...,f{D-1},label`, empty label = unlabeled.

use std::fs::File;
use std::io::Read;
use std::path::Path;

use crate::error::{Error, Result};
use crate::types::{FeatureMatrix, LabeledDomain, UNLABELED};

fn check_header(header: &csv::StringRecord) -> Result<usize> {
    let n = header.len();
    if n < 2 {
        return Err(Error::HeaderMismatch(format!(
            "expected at least one feature column and a label column, got {n} columns"
        )));
    }
    for (i, name) in header.iter().take(n - 1).enumerate() {
        if name != format!("f{i}") {
            return Err(Error::HeaderMismatch(format!("column {i} is '{name}', expected 'f{i}'")));
        }
    }
    if &header[n - 1] != "label" {
        return Err(Error::HeaderMismatch(format!(
            "last column is '{}', expected 'label'",
            &header[n - 1]
        )));
    }
    Ok(n - 1)
}

/// Parses CSV features from any reader. Class count is `max label + 1`.
pub fn parse_csv<R: Read>(reader: R) -> Result<LabeledDomain> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::None)
        .from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| Error::HeaderMismatch(e.to_string()))?
        .clone();
    let dim = check_header(&header)?;

    let mut values = Vec::new();
    let mut labels = Vec::new();
    for (idx, record) in rdr.records().enumerate() {
        let line = idx + 2;
        let record = record.map_err(|e| Error::HeaderMismatch(e.to_string()))?;
        if record.len() != dim + 1 {
            return Err(Error::RaggedRow {
                line,
                expected: dim + 1,
                actual: record.len(),
            });
        }
        for field in record.iter().take(dim) {
            let v: f64 = field.parse().map_err(|_| Error::UnparsableNumber {
                line,
                field: field.to_string(),
            })?;
            values.push(v);
        }
        let label = &record[dim];
        labels.push(if label.is_empty() {
            UNLABELED
        } else {
            label.parse::<i32>().map_err(|_| Error::UnparsableNumber {
                line,
                field: label.to_string(),
            })?
        });
    }
    let features = FeatureMatrix::new(labels.len(), dim, values)?;
    let num_classes = labels.iter().copied().max().unwrap_or(UNLABELED).max(0) as usize + 1;
    LabeledDomain::new(features, labels, num_classes)
}

pub fn read_csv(path: impl AsRef<Path>) -> Result<LabeledDomain> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_csv(file)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simple_file() {
        let d = parse_csv("f0,f1,label\n1.0,2.0,0\n".as_bytes()).unwrap();
        assert_eq!(d.features().row(0), &[1.0, 2.0]);
        assert_eq!(d.labels(), &[0]);
    }

    #[test]
    fn crlf_and_empty_label() {
        let d = parse_csv("f0,label\r\n1e-3,\r\n2,1\r\n".as_bytes()).unwrap();
        assert_eq!(d.labels(), &[-1, 1]);
        assert_eq!(d.features().get(0, 0), 1e-3);
        assert_eq!(d.num_classes(), 2);
    }

    #[test]
    fn ragged_row() {
        let err = parse_csv("f0,f1,label\n1,2,3,0\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::RaggedRow { line: 2, expected: 3, actual: 4 }));
    }

    #[test]
    fn header_mismatch() {
        assert!(matches!(parse_csv("a,b,label\n1,2,0\n".as_bytes()), Err(Error::HeaderMismatch(_))));
        assert!(matches!(parse_csv("f0,f1,y\n1,2,0\n".as_bytes()), Err(Error::HeaderMismatch(_))));
    }

    #[test]
    fn unparsable_and_decimal_comma() {
        assert!(matches!(
            parse_csv("f0,label\nabc,0\n".as_bytes()),
            Err(Error::UnparsableNumber { line: 2, .. })
        ));
        // a decimal comma splits the field and leaves the row ragged
        assert!(matches!(parse_csv("f0,label\n1,5,0\n".as_bytes()), Err(Error::RaggedRow { .. })));
    }
}
