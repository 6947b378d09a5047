//! Offline QRS detection in the Pan-Tompkins style.
//!
//! Stages: band-pass (cascaded centered moving averages, zero phase),
//! five-point derivative, squaring, 150 ms moving-window integration, then
//! adaptive dual-threshold peak classification with search-back and a 200 ms
//! refractory period. All thresholds are relative to running signal and noise
//! peak estimates, so the detector is insensitive to amplitude scale.

use serde::{Deserialize, Serialize};

pub const REFRACTORY_S: f64 = 0.2;
const INTEGRATION_S: f64 = 0.150;
const T_WAVE_WINDOW_S: f64 = 0.36;
const LEARNING_S: f64 = 2.0;
const SEARCH_BACK_FACTOR: f64 = 1.66;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QrsDetection {
    pub beat_indices: Vec<usize>,
    pub analyzed_lead: Option<String>,
    pub refractory: f64,
}

impl QrsDetection {
    fn empty() -> Self {
        QrsDetection {
            beat_indices: Vec::new(),
            analyzed_lead: None,
            refractory: REFRACTORY_S,
        }
    }
}

fn odd_len(seconds: f64, fs: f64) -> usize {
    let n = (seconds * fs).round().max(1.0) as usize;
    n | 1
}

/// Centered moving average of odd length `w`, zero outside the signal.
fn moving_average(x: &[f64], w: usize) -> Vec<f64> {
    let half = w / 2;
    let mut prefix = Vec::with_capacity(x.len() + 1);
    prefix.push(0.0);
    for v in x {
        prefix.push(prefix.last().unwrap() + v);
    }
    (0..x.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(x.len());
            (prefix[hi] - prefix[lo]) / w as f64
        })
        .collect()
}

fn band_pass(x: &[f64], fs: f64) -> Vec<f64> {
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    let centered: Vec<f64> = x.iter().map(|v| v - mean).collect();
    // a length-L average has its -3 dB point near 0.443 fs / L
    let lp_len = odd_len(0.443 / 15.0, fs);
    let hp_len = odd_len(0.443 / 5.0, fs);
    let low = moving_average(&moving_average(&centered, lp_len), lp_len);
    let trend = moving_average(&low, hp_len);
    low.iter().zip(&trend).map(|(a, b)| a - b).collect()
}

fn derivative(x: &[f64], fs: f64) -> Vec<f64> {
    let at = |i: isize| -> f64 {
        if i < 0 || i as usize >= x.len() {
            0.0
        } else {
            x[i as usize]
        }
    };
    (0..x.len() as isize)
        .map(|i| (2.0 * at(i + 2) + at(i + 1) - at(i - 1) - 2.0 * at(i - 2)) * fs / 8.0)
        .collect()
}

fn window(i: usize, half: usize, len: usize) -> std::ops::Range<usize> {
    i.saturating_sub(half)..(i + half + 1).min(len)
}

fn argmax_abs(x: &[f64], range: std::ops::Range<usize>) -> usize {
    let start = range.start;
    x[range]
        .iter()
        .enumerate()
        .fold((start, f64::NEG_INFINITY), |(bi, bv), (k, v)| {
            if v.abs() > bv {
                (start + k, v.abs())
            } else {
                (bi, bv)
            }
        })
        .0
}

/// Local maxima of `m`, thinned so that no two survivors are closer than
/// `min_gap` samples (larger peaks win).
fn candidate_peaks(m: &[f64], min_gap: usize) -> Vec<usize> {
    let n = m.len();
    let mut peaks: Vec<usize> = (0..n)
        .filter(|&i| {
            let left = if i == 0 { 0.0 } else { m[i - 1] };
            let right = if i + 1 == n { 0.0 } else { m[i + 1] };
            m[i] > 0.0 && m[i] > left && m[i] >= right
        })
        .collect();
    peaks.sort_by(|&a, &b| m[b].total_cmp(&m[a]).then(a.cmp(&b)));
    let mut kept = std::collections::BTreeSet::new();
    for p in peaks {
        let lo = p.saturating_sub(min_gap - 1);
        if kept.range(lo..p + min_gap).next().is_none() {
            kept.insert(p);
        }
    }
    kept.into_iter().collect()
}

/// Running signal and noise peak levels for one detection channel.
struct Channel {
    signal_peak: f64,
    noise_peak: f64,
}

impl Channel {
    fn learn(initial: &[f64]) -> Self {
        Channel {
            signal_peak: initial.iter().cloned().fold(0.0, f64::max),
            noise_peak: initial.iter().sum::<f64>() / initial.len() as f64,
        }
    }

    fn primary(&self) -> f64 {
        self.noise_peak + 0.25 * (self.signal_peak - self.noise_peak)
    }

    fn secondary(&self) -> f64 {
        0.5 * self.primary()
    }

    fn signal(&mut self, v: f64, weight: f64) {
        self.signal_peak = weight * v + (1.0 - weight) * self.signal_peak;
    }

    fn noise(&mut self, v: f64) {
        self.noise_peak = 0.125 * v + 0.875 * self.noise_peak;
    }
}

/// Detects R peaks in a single lead given in millivolts.
///
/// Signals shorter than two seconds yield an empty detection.
pub fn detect_qrs(samples: &[f64], fs: f64) -> QrsDetection {
    if !(fs > 0.0) || (samples.len() as f64) < LEARNING_S * fs || samples.is_empty() {
        return QrsDetection::empty();
    }
    let n = samples.len();
    let filtered = band_pass(samples, fs);
    let slope = derivative(&filtered, fs);
    let squared: Vec<f64> = slope.iter().map(|d| d * d).collect();
    let int_len = odd_len(INTEGRATION_S, fs);
    let integrated = moving_average(&squared, int_len);
    let half = int_len / 2;

    let min_gap = ((REFRACTORY_S * fs).ceil() as usize).max(1);
    let candidates = candidate_peaks(&integrated, min_gap);
    if candidates.is_empty() {
        return QrsDetection::empty();
    }

    // a beat must stand out both in integrated energy and in the band-passed
    // amplitude around it
    let magnitude: Vec<f64> = filtered.iter().map(|v| v.abs()).collect();
    let peak_magnitude = |i: usize| magnitude[window(i, half, n)].iter().fold(0.0f64, |a, &v| a.max(v));
    let learn_len = ((LEARNING_S * fs) as usize).min(n);
    let mut energy = Channel::learn(&integrated[..learn_len]);
    let mut amplitude = Channel::learn(&magnitude[..learn_len]);
    let max_slope = |i: usize| {
        slope[window(i, half, n)]
            .iter()
            .fold(0.0f64, |a, v| a.max(v.abs()))
    };

    let mut beats: Vec<usize> = Vec::new();
    let mut noise: Vec<usize> = Vec::new();
    let t_wave_gap = (T_WAVE_WINDOW_S * fs) as usize;

    for &c in &candidates {
        if let (Some(&last), true) = (beats.last(), beats.len() >= 2) {
            let recent = &beats[beats.len().saturating_sub(9)..];
            let rr_avg = (recent[recent.len() - 1] - recent[0]) as f64 / (recent.len() - 1) as f64;
            if (c - last) as f64 > SEARCH_BACK_FACTOR * rr_avg {
                let missed = noise
                    .iter()
                    .copied()
                    .filter(|&k| {
                        k > last
                            && integrated[k] > energy.secondary()
                            && peak_magnitude(k) > amplitude.secondary()
                    })
                    .max_by(|&a, &b| integrated[a].total_cmp(&integrated[b]));
                if let Some(k) = missed {
                    energy.signal(integrated[k], 0.25);
                    amplitude.signal(peak_magnitude(k), 0.25);
                    beats.push(k);
                }
            }
        }

        let v = integrated[c];
        let f = peak_magnitude(c);
        let is_beat = v > energy.primary()
            && f > amplitude.primary()
            && match beats.last() {
                Some(&last) if c - last < t_wave_gap => max_slope(c) >= 0.5 * max_slope(last),
                _ => true,
            };
        if is_beat {
            energy.signal(v, 0.125);
            amplitude.signal(f, 0.125);
            beats.push(c);
        } else {
            energy.noise(v);
            amplitude.noise(f);
            noise.push(c);
        }
    }

    // move each beat from the energy peak to the band-passed extremum
    let mut located: Vec<usize> = Vec::with_capacity(beats.len());
    for b in beats {
        let r = argmax_abs(&filtered, window(b, half, n));
        match located.last() {
            Some(&prev) if r <= prev || ((r - prev) as f64) < REFRACTORY_S * fs => {
                if filtered[r].abs() > filtered[prev].abs() {
                    *located.last_mut().unwrap() = r;
                }
            }
            _ => located.push(r),
        }
    }

    QrsDetection {
        beat_indices: located,
        analyzed_lead: None,
        refractory: REFRACTORY_S,
    }
}
