//! Imported records: metadata with cached analysis, signal storage, and
//! windowed waveform reads for display.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{
    analyze_record_with, bucket_extrema, window_sample_range, DiagnosisThresholds, DownsampleError, RecordAnalysis,
    SegmentBuckets,
};
use crate::annotation::{insert_dataset, AnnotationError, Dataset, LabelCode};
use crate::storage::{Reader, StorageError, Store, Table};
use crate::wfdb::{DatasetManifest, EcgRecord};

pub const DEFAULT_WINDOW_S: f64 = 10.0;
pub const DEFAULT_MAX_BUCKETS: usize = 2000;
pub const MAX_BUCKETS_CAP: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeadMeta {
    pub name: String,
    pub adc_gain: f64,
    pub baseline: i32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordMeta {
    pub record_id: String,
    pub dataset_id: String,
    pub name: String,
    pub position: usize,
    pub sampling_frequency: f64,
    pub n_samples: usize,
    pub duration: f64,
    pub leads: Vec<LeadMeta>,
    pub analysis: RecordAnalysis,
}

impl RecordMeta {
    pub fn lead_names(&self) -> Vec<String> {
        self.leads.iter().map(|l| l.name.clone()).collect()
    }
}

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error(transparent)]
    Annotation(#[from] AnnotationError),
    #[error(transparent)]
    Storage(#[from] StorageError),
    #[error(transparent)]
    Window(#[from] DownsampleError),
    #[error("record has no lead named `{0}`")]
    UnknownLead(String),
    #[error("max_buckets must be between 1 and {MAX_BUCKETS_CAP}")]
    BucketCount(usize),
}

/// Stores every record of a manifest and creates its dataset in one
/// transaction. Signal files are written first; a file left behind by an
/// interrupted import is reused when its contents match.
pub fn import_dataset(
    store: &Arc<Store>,
    manifest: &DatasetManifest,
    vocabulary: Vec<LabelCode>,
    thresholds: &DiagnosisThresholds,
) -> Result<Dataset, CatalogError> {
    let exists = store.read(|s| s.get_raw(Table::DatasetNames, &manifest.name))?.is_some();
    if exists {
        return Err(AnnotationError::DuplicateDataset(manifest.name.clone()).into());
    }
    crate::annotation::validate_vocabulary(&vocabulary)?;
    for record in &manifest.records {
        write_signal(store, record)?;
    }
    let metas: Vec<(EcgRecord, RecordAnalysis)> = manifest
        .records
        .iter()
        .map(|r| (r.clone(), analyze_record_with(r, thresholds)))
        .collect();
    store.transact(|txn| {
        let ids = manifest.records.iter().map(|r| r.record_id.clone()).collect();
        let dataset = insert_dataset(txn, &manifest.name, vocabulary, ids)?;
        for (position, (record, analysis)) in metas.into_iter().enumerate() {
            let meta = RecordMeta {
                record_id: record.record_id.clone(),
                dataset_id: dataset.dataset_id.clone(),
                name: record.name.clone(),
                position,
                sampling_frequency: record.sampling_frequency,
                n_samples: record.n_samples(),
                duration: record.duration,
                leads: record
                    .leads
                    .iter()
                    .map(|l| LeadMeta {
                        name: l.lead_name.clone(),
                        adc_gain: l.adc_gain,
                        baseline: l.baseline,
                    })
                    .collect(),
                analysis,
            };
            txn.put(Table::Records, &meta.record_id, &meta)?;
        }
        Ok::<_, CatalogError>(dataset)
    })
    .inspect(|d| tracing::info!(dataset = %d.name, records = d.record_ids.len(), "imported dataset"))
}

fn write_signal(store: &Store, record: &EcgRecord) -> Result<(), CatalogError> {
    let leads: Vec<&[i16]> = record.leads.iter().map(|l| l.samples.as_slice()).collect();
    match store.put_signal(&record.record_id, &leads) {
        Err(StorageError::SignalExists(_)) => {
            let (n_leads, n) = store.signal_shape(&record.record_id)?;
            let same = n_leads == leads.len()
                && n == record.n_samples()
                && leads
                    .iter()
                    .enumerate()
                    .all(|(k, l)| store.get_signal_window(&record.record_id, k, 0..n).ok().as_deref() == Some(*l));
            if same {
                Ok(())
            } else {
                Err(StorageError::SignalExists(record.record_id.clone()).into())
            }
        }
        other => Ok(other?),
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SegmentRequest {
    /// seconds; defaults to 0
    pub start: Option<f64>,
    /// seconds; defaults to `start + 10` clamped to the record
    pub end: Option<f64>,
    /// lead names; `None` means all leads
    pub leads: Option<Vec<String>>,
    pub max_buckets: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentResponse {
    pub record_id: String,
    pub sampling_frequency: f64,
    pub duration: f64,
    pub lead_names: Vec<String>,
    pub segments: Vec<SegmentBuckets>,
}

/// Min-max buckets of the requested leads over a time window, reading only
/// the samples inside the window.
pub fn read_segment(store: &Store, meta: &RecordMeta, req: &SegmentRequest) -> Result<SegmentResponse, CatalogError> {
    let max_buckets = req.max_buckets.unwrap_or(DEFAULT_MAX_BUCKETS);
    if max_buckets == 0 || max_buckets > MAX_BUCKETS_CAP {
        return Err(CatalogError::BucketCount(max_buckets));
    }
    let start = req.start.unwrap_or(0.0);
    let end = req.end.unwrap_or_else(|| (start + DEFAULT_WINDOW_S).min(meta.duration));
    let range = window_sample_range(start, end, meta.sampling_frequency, meta.n_samples)?;
    let wanted: Vec<usize> = match &req.leads {
        None => (0..meta.leads.len()).collect(),
        Some(names) => names
            .iter()
            .map(|n| {
                meta.leads
                    .iter()
                    .position(|l| &l.name == n)
                    .ok_or_else(|| CatalogError::UnknownLead(n.clone()))
            })
            .collect::<Result<_, _>>()?,
    };
    let mut segments = Vec::with_capacity(wanted.len());
    for k in wanted {
        let lead = &meta.leads[k];
        let raw = store.get_signal_window(&meta.record_id, k, range.clone())?;
        let mv: Vec<f64> = raw
            .iter()
            .map(|&s| (f64::from(s) - f64::from(lead.baseline)) / lead.adc_gain)
            .collect();
        let (bucket_width, extrema) = bucket_extrema(&mv, max_buckets);
        segments.push(SegmentBuckets {
            lead_name: lead.name.clone(),
            t_start: start,
            t_end: end,
            bucket_width,
            extrema,
        });
    }
    Ok(SegmentResponse {
        record_id: meta.record_id.clone(),
        sampling_frequency: meta.sampling_frequency,
        duration: meta.duration,
        lead_names: meta.lead_names(),
        segments,
    })
}
