//! Synthetic ECG-like records: unit spike trains at a fixed rate with
//! optional Gaussian noise. Used for demos, tests and load simulations.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::wfdb::{encode_format_16, record_id_for, EcgRecord, LeadSignal};

pub const SYNTH_GAIN: f64 = 200.0;

#[derive(Debug, Clone)]
pub struct SynthSpec {
    pub fs: f64,
    pub seconds: f64,
    pub bpm: f64,
    pub lead_names: Vec<String>,
    /// noise standard deviation in millivolts
    pub noise_sd: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            fs: 250.0,
            seconds: 10.0,
            bpm: 75.0,
            lead_names: vec!["I".into(), "II".into()],
            noise_sd: 0.0,
            seed: 0,
        }
    }
}

/// Box-Muller, so no distribution crate is needed here.
fn gaussian(rng: &mut StdRng) -> f64 {
    let u1: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

pub fn synthetic_record(dataset_name: &str, record_name: &str, spec: &SynthSpec) -> EcgRecord {
    let n = (spec.seconds * spec.fs).round() as usize;
    let period = 60.0 / spec.bpm;
    let mut rng = StdRng::seed_from_u64(spec.seed);
    let leads = spec
        .lead_names
        .iter()
        .map(|name| {
            let mut mv = vec![0.0; n];
            let mut t = 0.25;
            while ((t * spec.fs).round() as usize) < n {
                mv[(t * spec.fs).round() as usize] = 1.0;
                t += period;
            }
            if spec.noise_sd > 0.0 {
                mv.iter_mut().for_each(|v| *v += spec.noise_sd * gaussian(&mut rng));
            }
            LeadSignal {
                lead_name: name.clone(),
                adc_gain: SYNTH_GAIN,
                baseline: 0,
                samples: mv
                    .iter()
                    .map(|v| (v * SYNTH_GAIN).round().clamp(-32768.0, 32767.0) as i16)
                    .collect(),
            }
        })
        .collect();
    EcgRecord {
        record_id: record_id_for(dataset_name, record_name),
        name: record_name.to_string(),
        sampling_frequency: spec.fs,
        duration: n as f64 / spec.fs,
        leads,
        source_interpretations: Vec::new(),
    }
}

/// The record as a WFDB header and a single interleaved format-16 file
/// named `<name>.dat`.
pub fn to_wfdb(record: &EcgRecord) -> (String, Vec<u8>) {
    let n = record.n_samples();
    let file = format!("{}.dat", record.name);
    let mut header = format!(
        "{} {} {} {}\n",
        record.name,
        record.leads.len(),
        record.sampling_frequency,
        n
    );
    for l in &record.leads {
        header.push_str(&format!(
            "{file} 16 {}({})/mV 16 0 0 0 0 {}\n",
            l.adc_gain, l.baseline, l.lead_name
        ));
    }
    let mut interleaved = Vec::with_capacity(n * record.leads.len());
    for i in 0..n {
        interleaved.extend(record.leads.iter().map(|l| l.samples[i]));
    }
    (header, encode_format_16(&interleaved))
}
