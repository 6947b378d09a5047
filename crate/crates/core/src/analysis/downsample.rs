//! Min-max bucketing of waveform windows for display.

use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DownsampleError {
    #[error("window [{t_start}, {t_end}) is outside the record (duration {duration} s)")]
    WindowOutOfRange { t_start: f64, t_end: f64, duration: f64 },
    #[error("max_buckets must be at least 1")]
    ZeroBuckets,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentBuckets {
    pub lead_name: String,
    pub t_start: f64,
    pub t_end: f64,
    /// samples per bucket; the last bucket may hold fewer
    pub bucket_width: usize,
    /// `(min, max)` in millivolts, in time order
    pub extrema: Vec<(f64, f64)>,
}

/// `ceil`, except values within rounding noise of an integer snap to it.
fn ceil_index(x: f64) -> usize {
    let r = x.round();
    if (x - r).abs() <= 1e-9 * r.abs().max(1.0) {
        r as usize
    } else {
        x.ceil() as usize
    }
}

/// Sample indices `i` with `t_start <= i / fs < t_end`.
pub fn window_sample_range(
    t_start: f64,
    t_end: f64,
    fs: f64,
    n_samples: usize,
) -> Result<Range<usize>, DownsampleError> {
    let duration = n_samples as f64 / fs;
    let ok = t_start.is_finite()
        && t_end.is_finite()
        && fs > 0.0
        && t_start >= 0.0
        && t_start < t_end
        && t_end <= duration + 1e-9;
    if !ok {
        return Err(DownsampleError::WindowOutOfRange {
            t_start,
            t_end,
            duration,
        });
    }
    let first = ceil_index(t_start * fs).min(n_samples);
    let end = ceil_index(t_end * fs).min(n_samples);
    Ok(first..end.max(first))
}

/// Splits `samples` into at most `max_buckets` equal-width buckets and
/// reports each bucket's exact extremes. Returns `(bucket_width, extrema)`.
pub fn bucket_extrema(samples: &[f64], max_buckets: usize) -> (usize, Vec<(f64, f64)>) {
    debug_assert!(max_buckets >= 1);
    let width = samples.len().div_ceil(max_buckets.max(1)).max(1);
    let extrema = samples
        .chunks(width)
        .map(|chunk| {
            chunk.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
        })
        .collect();
    (width, extrema)
}

pub fn downsample_minmax(
    samples: &[f64],
    t_start: f64,
    t_end: f64,
    fs: f64,
    max_buckets: usize,
) -> Result<SegmentBuckets, DownsampleError> {
    if max_buckets == 0 {
        return Err(DownsampleError::ZeroBuckets);
    }
    let range = window_sample_range(t_start, t_end, fs, samples.len())?;
    let (bucket_width, extrema) = bucket_extrema(&samples[range], max_buckets);
    Ok(SegmentBuckets {
        lead_name: String::new(),
        t_start,
        t_end,
        bucket_width,
        extrema,
    })
}
