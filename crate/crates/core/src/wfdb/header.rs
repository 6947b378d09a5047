use serde::{Deserialize, Serialize};

use super::WfdbError;

pub const DEFAULT_SAMPLING_FREQUENCY: f64 = 250.0;
pub const DEFAULT_ADC_GAIN: f64 = 200.0;
pub const DEFAULT_ADC_RESOLUTION: u32 = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StorageFormat {
    Fmt16,
    Fmt212,
}

impl StorageFormat {
    pub fn code(self) -> u32 {
        match self {
            StorageFormat::Fmt16 => 16,
            StorageFormat::Fmt212 => 212,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalSpec {
    pub file_name: String,
    pub storage_format: StorageFormat,
    /// ADC units per physical unit (normally millivolts).
    pub adc_gain: f64,
    pub baseline: i32,
    pub units: Option<String>,
    pub adc_resolution: u32,
    pub adc_zero: i32,
    pub initial_value: i32,
    pub lead_name: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordHeader {
    pub record_name: String,
    pub n_signals: usize,
    pub sampling_frequency: f64,
    /// Samples per lead; `None` when the header leaves it out and the signal
    /// file length has to decide.
    pub n_samples: Option<usize>,
    pub signal_specs: Vec<SignalSpec>,
    /// Text of the `#` comment lines, in order.
    pub comments: Vec<String>,
}

impl RecordHeader {
    pub fn lead_names(&self) -> Vec<&str> {
        self.signal_specs.iter().map(|s| s.lead_name.as_str()).collect()
    }
}

fn malformed(line: usize, reason: impl Into<String>) -> WfdbError {
    WfdbError::MalformedHeader {
        line,
        reason: reason.into(),
    }
}

fn parse_num<T: std::str::FromStr>(tok: &str, line: usize, what: &str) -> Result<T, WfdbError> {
    tok.parse()
        .map_err(|_| malformed(line, format!("{what} `{tok}` is not a number")))
}

/// Sampling frequency token: `fs[/counter_freq[(base_counter)]]`.
fn parse_frequency(tok: &str, line: usize) -> Result<f64, WfdbError> {
    let fs_part = tok.split('/').next().unwrap_or(tok);
    let fs: f64 = parse_num(fs_part, line, "sampling frequency")?;
    if !fs.is_finite() || fs < 0.0 {
        return Err(malformed(line, format!("sampling frequency `{tok}` is invalid")));
    }
    // zero is the WFDB spelling of "unspecified"
    Ok(if fs == 0.0 { DEFAULT_SAMPLING_FREQUENCY } else { fs })
}

fn parse_format(tok: &str, line: usize) -> Result<StorageFormat, WfdbError> {
    if tok.contains(['x', ':', '+']) {
        return Err(WfdbError::UnsupportedLayout(format!(
            "format field `{tok}` uses samples-per-frame, skew, or byte offset"
        )));
    }
    let code: u32 = parse_num(tok, line, "storage format")?;
    match code {
        16 => Ok(StorageFormat::Fmt16),
        212 => Ok(StorageFormat::Fmt212),
        _ => Err(WfdbError::UnsupportedFormat(tok.to_string())),
    }
}

/// Gain token: `gain[(baseline)][/units]`.
fn parse_gain(tok: &str, line: usize) -> Result<(f64, Option<i32>, Option<String>), WfdbError> {
    let (value, units) = match tok.split_once('/') {
        Some((v, u)) => (v, Some(u.to_string()).filter(|u| !u.is_empty())),
        None => (tok, None),
    };
    let (gain_part, baseline) = match value.split_once('(') {
        Some((g, rest)) => {
            let inner = rest
                .strip_suffix(')')
                .ok_or_else(|| malformed(line, format!("unterminated baseline in `{tok}`")))?;
            (g, Some(parse_num::<i32>(inner, line, "baseline")?))
        }
        None => (value, None),
    };
    let gain: f64 = parse_num(gain_part, line, "ADC gain")?;
    if !gain.is_finite() || gain < 0.0 {
        return Err(WfdbError::NonPositiveGain(gain));
    }
    let gain = if gain == 0.0 { DEFAULT_ADC_GAIN } else { gain };
    Ok((gain, baseline, units))
}

fn parse_signal_line(tokens: &[&str], index: usize, line: usize) -> Result<SignalSpec, WfdbError> {
    if tokens.len() < 2 {
        return Err(malformed(line, "signal line needs at least a file name and a format"));
    }
    let file_name = tokens[0];
    if file_name == "~" {
        return Err(WfdbError::UnsupportedLayout("null signal file `~`".into()));
    }
    let storage_format = parse_format(tokens[1], line)?;

    let (adc_gain, baseline, units) = match tokens.get(2) {
        Some(tok) => parse_gain(tok, line)?,
        None => (DEFAULT_ADC_GAIN, None, None),
    };
    let adc_resolution = match tokens.get(3) {
        Some(tok) => match parse_num::<u32>(tok, line, "ADC resolution")? {
            0 => DEFAULT_ADC_RESOLUTION,
            r => r,
        },
        None => DEFAULT_ADC_RESOLUTION,
    };
    let adc_zero = match tokens.get(4) {
        Some(tok) => parse_num::<i32>(tok, line, "ADC zero")?,
        None => 0,
    };
    let initial_value = match tokens.get(5) {
        Some(tok) => parse_num::<i32>(tok, line, "initial value")?,
        None => adc_zero,
    };
    if let Some(tok) = tokens.get(6) {
        parse_num::<i64>(tok, line, "checksum")?;
    }
    if let Some(tok) = tokens.get(7) {
        let block: i64 = parse_num(tok, line, "block size")?;
        if block != 0 {
            return Err(WfdbError::UnsupportedLayout(format!("block size {block}")));
        }
    }
    let lead_name = if tokens.len() > 8 {
        tokens[8..].join(" ")
    } else {
        format!("lead{index}")
    };

    Ok(SignalSpec {
        file_name: file_name.to_string(),
        storage_format,
        adc_gain,
        baseline: baseline.unwrap_or(adc_zero),
        units,
        adc_resolution,
        adc_zero,
        initial_value,
        lead_name,
    })
}

/// Parses a WFDB header.
///
/// The first non-comment line is the record line
/// `<name> <n_signals> [fs [n_samples [base_time [base_date]]]]`; each of the
/// following `n_signals` non-comment lines is a signal specification.
pub fn parse_header(header_text: &str) -> Result<RecordHeader, WfdbError> {
    let comments = header_text
        .lines()
        .filter_map(|l| l.trim().strip_prefix('#'))
        .map(|c| c.trim().to_string())
        .filter(|c| !c.is_empty())
        .collect();
    let mut lines = header_text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

    let (line_no, record_line) = lines
        .next()
        .ok_or_else(|| malformed(0, "header has no record line"))?;
    let tokens: Vec<&str> = record_line.split_whitespace().collect();
    if tokens.len() < 2 {
        return Err(malformed(line_no, "record line needs a name and a signal count"));
    }
    let record_name = tokens[0];
    if record_name.contains('/') {
        return Err(WfdbError::UnsupportedLayout(format!(
            "multi-segment record `{record_name}`"
        )));
    }
    let n_signals: usize = parse_num(tokens[1], line_no, "signal count")?;
    if n_signals == 0 {
        return Err(malformed(line_no, "record declares zero signals"));
    }
    let sampling_frequency = match tokens.get(2) {
        Some(tok) => parse_frequency(tok, line_no)?,
        None => DEFAULT_SAMPLING_FREQUENCY,
    };
    let n_samples = match tokens.get(3) {
        Some(tok) => Some(parse_num::<usize>(tok, line_no, "sample count")?),
        None => None,
    };

    let mut signal_specs = Vec::with_capacity(n_signals);
    for (line_no, line) in lines {
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if signal_specs.len() == n_signals {
            return Err(WfdbError::InconsistentHeader(format!(
                "record declares {n_signals} signals but line {line_no} adds another"
            )));
        }
        signal_specs.push(parse_signal_line(&tokens, signal_specs.len(), line_no)?);
    }
    if signal_specs.len() != n_signals {
        return Err(WfdbError::InconsistentHeader(format!(
            "record declares {n_signals} signals but {} are specified",
            signal_specs.len()
        )));
    }
    for (i, a) in signal_specs.iter().enumerate() {
        if let Some(b) = signal_specs[..i]
            .iter()
            .find(|b| b.file_name == a.file_name && b.storage_format != a.storage_format)
        {
            return Err(WfdbError::InconsistentHeader(format!(
                "file `{}` is declared with formats {} and {}",
                a.file_name,
                b.storage_format.code(),
                a.storage_format.code()
            )));
        }
    }

    Ok(RecordHeader {
        record_name: record_name.to_string(),
        n_signals,
        sampling_frequency,
        n_samples,
        signal_specs,
        comments,
    })
}
