//! WFDB record reading: text headers (`.hea`) and binary signal files (`.dat`).
//!
//! Only storage formats 16 and 212 are accepted. Multi-segment records and
//! variable-layout signal specifications (samples-per-frame, skew, byte
//! offsets) are rejected at parse time rather than decoded approximately.

mod decode;
mod header;
mod record;

pub use decode::{
    adc_to_physical, decode_format_16, decode_format_212, encode_format_16, encode_format_212,
};
pub use header::{parse_header, RecordHeader, SignalSpec, StorageFormat};
pub use record::{
    assemble_manifest, ingest_dataset, ingest_record, record_id_for, source_interpretations, DatasetManifest, EcgRecord,
    LeadSignal,
};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WfdbError {
    #[error("malformed header (line {line}): {reason}")]
    MalformedHeader { line: usize, reason: String },
    #[error("unsupported storage format `{0}`")]
    UnsupportedFormat(String),
    #[error("unsupported record layout: {0}")]
    UnsupportedLayout(String),
    #[error("inconsistent header: {0}")]
    InconsistentHeader(String),
    #[error("signal file `{file}` holds {actual} bytes, expected {expected}")]
    TruncatedSignalFile {
        file: String,
        expected: usize,
        actual: usize,
    },
    #[error("signal file `{0}` is missing")]
    MissingSignalFile(String),
    #[error("ADC gain must be positive, got {0}")]
    NonPositiveGain(f64),
    #[error("record name `{0}` appears more than once in the dataset")]
    DuplicateRecordName(String),
}

impl WfdbError {
    /// Short reason class used in ingestion reports.
    pub fn kind(&self) -> &'static str {
        match self {
            WfdbError::MalformedHeader { .. } => "malformed header",
            WfdbError::UnsupportedFormat(_) => "unsupported format",
            WfdbError::UnsupportedLayout(_) => "unsupported layout",
            WfdbError::InconsistentHeader(_) => "inconsistent header",
            WfdbError::TruncatedSignalFile { .. } => "truncated signal file",
            WfdbError::MissingSignalFile(_) => "missing signal file",
            WfdbError::NonPositiveGain(_) => "non-positive gain",
            WfdbError::DuplicateRecordName(_) => "duplicate record name",
        }
    }
}
