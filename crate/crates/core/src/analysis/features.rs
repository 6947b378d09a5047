use serde::{Deserialize, Serialize};

use super::qrs::QrsDetection;

/// Rate and RR-interval statistics. Only defined for two or more beats.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RhythmFeatures {
    /// beats per minute
    pub mean_hr: f64,
    /// seconds
    pub rr_mean: f64,
    /// seconds, population standard deviation
    pub rr_std: f64,
    pub rr_cv: f64,
    pub n_beats: usize,
}

pub fn compute_features(detection: &QrsDetection, fs: f64) -> Option<RhythmFeatures> {
    let beats = &detection.beat_indices;
    if beats.len() < 2 || !(fs > 0.0) {
        return None;
    }
    let rr: Vec<f64> = beats
        .windows(2)
        .map(|w| (w[1] as f64 - w[0] as f64) / fs)
        .collect();
    let n = rr.len() as f64;
    let rr_mean = rr.iter().sum::<f64>() / n;
    let rr_std = (rr.iter().map(|r| (r - rr_mean).powi(2)).sum::<f64>() / n).sqrt();
    Some(RhythmFeatures {
        mean_hr: 60.0 / rr_mean,
        rr_mean,
        rr_std,
        rr_cv: rr_std / rr_mean,
        n_beats: beats.len(),
    })
}
