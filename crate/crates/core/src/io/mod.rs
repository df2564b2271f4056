//! Feature files, experiment manifests and backbone measurement tables.

mod csv_features;
mod manifest;
mod records;
pub mod sfdk;

pub use csv_features::{parse_csv, read_csv};
pub use manifest::{
    parse_manifest, read_manifest, render_manifest, write_manifest, ExperimentManifest,
    ExperimentRecord, MANIFEST_FORMAT, MANIFEST_VERSION,
};
pub use records::{parse_records, read_records};
pub use sfdk::{read_sfdk, write_sfdk};

use std::path::Path;

use crate::error::Result;
use crate::types::LabeledDomain;

/// Reads features by extension: `.csv` as CSV, anything else as SFDK.
pub fn read_features(path: impl AsRef<Path>) -> Result<LabeledDomain> {
    let path = path.as_ref();
    match path.extension().and_then(|e| e.to_str()) {
        Some(ext) if ext.eq_ignore_ascii_case("csv") => read_csv(path),
        _ => read_sfdk(path),
    }
}
