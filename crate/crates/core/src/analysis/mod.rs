//! Signal parameters, rhythm suggestions, and display downsampling.

mod diagnose;
mod downsample;
mod features;
mod qrs;

pub use diagnose::{
    auto_diagnose, auto_diagnose_with, AutoSuggestion, DiagnosisThresholds, BUILTIN_RHYTHM_CODES,
};
pub use downsample::{
    bucket_extrema, downsample_minmax, window_sample_range, DownsampleError, SegmentBuckets,
};
pub use features::{compute_features, RhythmFeatures};
pub use qrs::{detect_qrs, QrsDetection, REFRACTORY_S};

use serde::{Deserialize, Serialize};

use crate::wfdb::EcgRecord;

/// What the viewer's parameter and suggestion boxes show for one record.
/// Computed once at ingestion and cached with the record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordAnalysis {
    pub analyzed_lead: Option<String>,
    pub beat_indices: Vec<usize>,
    pub features: Option<RhythmFeatures>,
    pub suggestions: Vec<AutoSuggestion>,
}

/// Lead II when the record has one (MIT-BIH's modified lead II counts),
/// otherwise the first lead.
pub fn analysis_lead_index<S: AsRef<str>>(lead_names: &[S]) -> Option<usize> {
    if lead_names.is_empty() {
        return None;
    }
    let is_lead_ii = |n: &str| {
        let n = n.trim();
        n.eq_ignore_ascii_case("II") || n.eq_ignore_ascii_case("MLII")
    };
    Some(
        lead_names
            .iter()
            .position(|n| is_lead_ii(n.as_ref()))
            .unwrap_or(0),
    )
}

pub fn analyze_record(record: &EcgRecord) -> RecordAnalysis {
    analyze_record_with(record, &DiagnosisThresholds::default())
}

/// Suggestion code for an interpretation shipped with the record itself.
pub const SOURCE_CODE: &str = "SRC";

/// Rule suggestions followed by the record's own interpretations, verbatim.
fn suggestions_for(record: &EcgRecord, features: Option<&RhythmFeatures>, th: &DiagnosisThresholds) -> Vec<AutoSuggestion> {
    let mut out = auto_diagnose_with(features, th);
    out.extend(record.source_interpretations.iter().map(|text| AutoSuggestion {
        code: SOURCE_CODE.into(),
        display_text: text.clone(),
        rule_id: "source".into(),
    }));
    out
}

pub fn analyze_record_with(record: &EcgRecord, thresholds: &DiagnosisThresholds) -> RecordAnalysis {
    let names: Vec<&str> = record.leads.iter().map(|l| l.lead_name.as_str()).collect();
    let Some(idx) = analysis_lead_index(&names) else {
        return RecordAnalysis {
            analyzed_lead: None,
            beat_indices: Vec::new(),
            features: None,
            suggestions: suggestions_for(record, None, thresholds),
        };
    };
    let lead = &record.leads[idx];
    let mut detection = detect_qrs(&lead.physical(), record.sampling_frequency);
    detection.analyzed_lead = Some(lead.lead_name.clone());
    let features = compute_features(&detection, record.sampling_frequency);
    RecordAnalysis {
        analyzed_lead: detection.analyzed_lead,
        beat_indices: detection.beat_indices,
        suggestions: suggestions_for(record, features.as_ref(), thresholds),
        features,
    }
}
