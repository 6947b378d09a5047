use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::decode::{decode_format_16, decode_format_212, format_16_len, format_212_len};
use super::header::{parse_header, RecordHeader, StorageFormat};
use super::WfdbError;

/// One calibrated lead. Samples stay raw ADC units; millivolts are derived on
/// read as `(s - baseline) / adc_gain`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeadSignal {
    pub lead_name: String,
    pub adc_gain: f64,
    pub baseline: i32,
    pub samples: Vec<i16>,
}

impl LeadSignal {
    pub fn to_physical(&self, raw: i16) -> f64 {
        (raw as i32 - self.baseline) as f64 / self.adc_gain
    }

    pub fn physical(&self) -> Vec<f64> {
        self.samples.iter().map(|&s| self.to_physical(s)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EcgRecord {
    pub record_id: String,
    pub name: String,
    pub sampling_frequency: f64,
    pub duration: f64,
    pub leads: Vec<LeadSignal>,
    /// Header comments carrying the source's own diagnosis, verbatim.
    #[serde(default)]
    pub source_interpretations: Vec<String>,
}

impl EcgRecord {
    pub fn n_samples(&self) -> usize {
        self.leads.first().map_or(0, |l| l.samples.len())
    }

    pub fn lead(&self, name: &str) -> Option<&LeadSignal> {
        self.leads.iter().find(|l| l.lead_name == name)
    }
}

/// Comments of the form `Dx: ...`, `Diagnosis: ...` or `Interpretation: ...`
/// (key case-insensitive).
pub fn source_interpretations(comments: &[String]) -> Vec<String> {
    comments
        .iter()
        .filter(|c| {
            c.split_once(':').is_some_and(|(key, value)| {
                let key = key.trim().to_ascii_lowercase();
                matches!(key.as_str(), "dx" | "diagnosis" | "diagnoses" | "interpretation") && !value.trim().is_empty()
            })
        })
        .cloned()
        .collect()
}

/// Deterministic record identifier derived from the dataset and record names.
pub fn record_id_for(dataset_name: &str, record_name: &str) -> String {
    let mut h = Sha256::new();
    h.update(dataset_name.as_bytes());
    h.update([0]);
    h.update(record_name.as_bytes());
    format!("rec_{}", hex::encode(&h.finalize()[..12]))
}

struct FileGroup<'h> {
    file_name: &'h str,
    format: StorageFormat,
    signals: Vec<usize>,
}

fn group_by_file(header: &RecordHeader) -> Vec<FileGroup<'_>> {
    let mut groups: Vec<FileGroup> = Vec::new();
    for (i, spec) in header.signal_specs.iter().enumerate() {
        match groups.iter_mut().find(|g| g.file_name == spec.file_name) {
            Some(g) => g.signals.push(i),
            None => groups.push(FileGroup {
                file_name: &spec.file_name,
                format: spec.storage_format,
                signals: vec![i],
            }),
        }
    }
    groups
}

fn bytes_for(format: StorageFormat, n: usize) -> usize {
    match format {
        StorageFormat::Fmt16 => format_16_len(n),
        StorageFormat::Fmt212 => format_212_len(n),
    }
}

fn samples_in(format: StorageFormat, n_bytes: usize) -> usize {
    match format {
        StorageFormat::Fmt16 => n_bytes / 2,
        StorageFormat::Fmt212 => n_bytes * 2 / 3,
    }
}

/// Decodes one record from its header text and the bytes of every signal
/// file the header names.
///
/// A signal file may exceed the length implied by the sample count by at
/// most one padding byte; anything else is reported as
/// [`WfdbError::TruncatedSignalFile`].
pub fn ingest_record(
    dataset_name: &str,
    header_text: &str,
    signal_files: &HashMap<String, Vec<u8>>,
) -> Result<EcgRecord, WfdbError> {
    let header = parse_header(header_text)?;
    let groups = group_by_file(&header);

    let mut files = Vec::with_capacity(groups.len());
    for g in &groups {
        let bytes = signal_files
            .get(g.file_name)
            .ok_or_else(|| WfdbError::MissingSignalFile(g.file_name.to_string()))?;
        files.push(bytes.as_slice());
    }

    let n_samples = match header.n_samples {
        Some(n) => n,
        None => samples_in(groups[0].format, files[0].len()) / groups[0].signals.len(),
    };

    let mut leads: Vec<Option<LeadSignal>> = vec![None; header.n_signals];
    for (g, bytes) in groups.iter().zip(&files) {
        let per_frame = g.signals.len();
        let total = n_samples * per_frame;
        let expected = bytes_for(g.format, total);
        let length_error = || WfdbError::TruncatedSignalFile {
            file: g.file_name.to_string(),
            expected,
            actual: bytes.len(),
        };
        if bytes.len() > expected + 1 {
            return Err(length_error());
        }
        let flat = match g.format {
            StorageFormat::Fmt16 => decode_format_16(bytes, total),
            StorageFormat::Fmt212 => decode_format_212(bytes, total),
        }
        .map_err(|_| length_error())?;

        for (slot, &sig) in g.signals.iter().enumerate() {
            let spec = &header.signal_specs[sig];
            let samples = flat.iter().skip(slot).step_by(per_frame).copied().collect();
            leads[sig] = Some(LeadSignal {
                lead_name: spec.lead_name.clone(),
                adc_gain: spec.adc_gain,
                baseline: spec.baseline,
                samples,
            });
        }
    }

    Ok(EcgRecord {
        source_interpretations: source_interpretations(&header.comments),
        record_id: record_id_for(dataset_name, &header.record_name),
        name: header.record_name,
        sampling_frequency: header.sampling_frequency,
        duration: n_samples as f64 / header.sampling_frequency,
        leads: leads.into_iter().map(|l| l.expect("every signal belongs to a file group")).collect(),
    })
}

/// A dataset's records in their canonical (lexicographic by name) order.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub name: String,
    pub records: Vec<EcgRecord>,
}

impl DatasetManifest {
    pub fn record_ids(&self) -> Vec<&str> {
        self.records.iter().map(|r| r.record_id.as_str()).collect()
    }
}

/// Orders already-decoded records by name and rejects duplicates.
pub fn assemble_manifest(
    name: &str,
    mut records: Vec<EcgRecord>,
) -> Result<DatasetManifest, WfdbError> {
    records.sort_by(|a, b| a.name.cmp(&b.name));
    let mut seen = BTreeSet::new();
    for r in &records {
        if !seen.insert(r.name.as_str()) {
            return Err(WfdbError::DuplicateRecordName(r.name.clone()));
        }
    }
    Ok(DatasetManifest {
        name: name.to_string(),
        records,
    })
}

pub fn ingest_dataset(
    name: &str,
    records: &[(String, HashMap<String, Vec<u8>>)],
) -> Result<DatasetManifest, WfdbError> {
    let decoded = records
        .iter()
        .map(|(header, files)| ingest_record(name, header, files))
        .collect::<Result<Vec<_>, _>>()?;
    assemble_manifest(name, decoded)
}
