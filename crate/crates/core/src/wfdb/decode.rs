use super::WfdbError;

fn truncated(expected: usize, actual: usize) -> WfdbError {
    WfdbError::TruncatedSignalFile {
        file: String::new(),
        expected,
        actual,
    }
}

/// Bytes needed to hold `n` samples in format 16.
pub(crate) fn format_16_len(n: usize) -> usize {
    2 * n
}

/// Bytes needed to hold `n` samples in format 212.
pub(crate) fn format_212_len(n: usize) -> usize {
    (3 * n).div_ceil(2)
}

/// Decodes `n_samples_total` little-endian two's-complement 16-bit samples.
///
/// Multi-signal files come out interleaved exactly as stored.
pub fn decode_format_16(bytes: &[u8], n_samples_total: usize) -> Result<Vec<i16>, WfdbError> {
    let need = format_16_len(n_samples_total);
    if bytes.len() < need {
        return Err(truncated(need, bytes.len()));
    }
    Ok(bytes[..need]
        .chunks_exact(2)
        .map(|pair| i16::from_le_bytes([pair[0], pair[1]]))
        .collect())
}

fn sign_extend_12(v: u16) -> i16 {
    // shift the 12-bit value into the top of an i16 and arithmetic-shift back
    ((v << 4) as i16) >> 4
}

/// Decodes `n_samples_total` 12-bit samples packed two per three bytes.
///
/// For a byte triple `b0 b1 b2` the first sample is the low nibble of `b1`
/// above `b0`, the second is the high nibble of `b1` above `b2`. An odd final
/// sample occupies only `b0` and the low nibble of `b1`.
pub fn decode_format_212(bytes: &[u8], n_samples_total: usize) -> Result<Vec<i16>, WfdbError> {
    let need = format_212_len(n_samples_total);
    if bytes.len() < need {
        return Err(truncated(need, bytes.len()));
    }
    let mut out = Vec::with_capacity(n_samples_total);
    let mut i = 0;
    while out.len() < n_samples_total {
        let b0 = bytes[i] as u16;
        let b1 = bytes[i + 1] as u16;
        out.push(sign_extend_12(((b1 & 0x0F) << 8) | b0));
        if out.len() == n_samples_total {
            break;
        }
        let b2 = bytes[i + 2] as u16;
        out.push(sign_extend_12(((b1 & 0xF0) << 4) | b2));
        i += 3;
    }
    Ok(out)
}

/// Inverse of [`decode_format_16`].
pub fn encode_format_16(samples: &[i16]) -> Vec<u8> {
    samples.iter().flat_map(|s| s.to_le_bytes()).collect()
}

/// Inverse of [`decode_format_212`]. Samples must lie in `[-2048, 2047]`.
pub fn encode_format_212(samples: &[i16]) -> Vec<u8> {
    debug_assert!(samples.iter().all(|s| (-2048..=2047).contains(s)));
    let mut out = Vec::with_capacity(format_212_len(samples.len()));
    for pair in samples.chunks(2) {
        let a = (pair[0] as u16) & 0x0FFF;
        match pair.get(1) {
            Some(&b) => {
                let b = (b as u16) & 0x0FFF;
                out.push((a & 0xFF) as u8);
                out.push((((b >> 8) << 4) | (a >> 8)) as u8);
                out.push((b & 0xFF) as u8);
            }
            None => {
                out.push((a & 0xFF) as u8);
                out.push((a >> 8) as u8);
            }
        }
    }
    out
}

/// Converts a raw ADC sample to millivolts: `(sample - baseline) / gain`.
pub fn adc_to_physical(sample: i32, gain: f64, baseline: i32) -> Result<f64, WfdbError> {
    if !(gain > 0.0) {
        return Err(WfdbError::NonPositiveGain(gain));
    }
    Ok((sample - baseline) as f64 / gain)
}
