//! Decoding of real PhysioNet records against reference values produced by
//! an independent decoder and the published physical values.

use std::collections::HashMap;
use std::path::PathBuf;

use cardiolabel_core::wfdb::{ingest_record, parse_header};
use serde_json::Value;

fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data/physionet")
}

fn load(rec: &str) -> (String, HashMap<String, Vec<u8>>) {
    let dir = data_dir();
    let header = std::fs::read_to_string(dir.join(format!("{rec}.hea"))).unwrap();
    let parsed = parse_header(&header).unwrap();
    let folder = dir.join(rec).parent().unwrap().to_path_buf();
    let files = parsed
        .signal_specs
        .iter()
        .map(|s| (s.file_name.clone(), std::fs::read(folder.join(&s.file_name)).unwrap()))
        .collect();
    (header, files)
}

#[test]
fn decoded_records_match_the_reference() {
    let reference: HashMap<String, Value> =
        serde_json::from_str(&std::fs::read_to_string(data_dir().join("reference.json")).unwrap()).unwrap();
    assert!(reference.len() >= 3);
    let mut formats = Vec::new();
    for (rec, expect) in &reference {
        let (header, files) = load(rec);
        let record = ingest_record("physionet", &header, &files).unwrap();
        formats.push(expect["format"].as_u64().unwrap());
        let raw = expect["raw"].as_array().unwrap();
        let phys = expect["physical"].as_array().unwrap();
        assert_eq!(record.leads.len(), raw.len(), "{rec}");
        for (k, lead) in record.leads.iter().enumerate() {
            let want: Vec<i64> = raw[k].as_array().unwrap().iter().map(|v| v.as_i64().unwrap()).collect();
            let got: Vec<i64> = lead.samples.iter().map(|&s| s as i64).collect();
            assert_eq!(got, want, "{rec} lead {k} raw");
            for (i, p) in phys[k].as_array().unwrap().iter().enumerate() {
                let p = p.as_f64().unwrap();
                let ours = lead.to_physical(lead.samples[i]);
                assert!((ours - p).abs() <= 1e-9, "{rec} lead {k} sample {i}: {ours} vs {p}");
            }
        }
    }
    assert!(formats.contains(&212) && formats.contains(&16));
}

#[test]
fn record_100_metadata() {
    let (header, files) = load("mitdb/100");
    let r = ingest_record("mitdb", &header, &files).unwrap();
    assert_eq!(r.sampling_frequency, 360.0);
    assert_eq!(r.leads.iter().map(|l| l.lead_name.as_str()).collect::<Vec<_>>(), ["MLII", "V5"]);
    assert_eq!(r.n_samples(), 10);
}
