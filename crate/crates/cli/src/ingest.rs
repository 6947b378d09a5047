//! Directory walking for `ingest`: every `.hea` below a root becomes one
//! record, or one skip line with its reason.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use cardiolabel_core::annotation::LabelCode;
use cardiolabel_core::wfdb::{ingest_record, parse_header, EcgRecord, WfdbError};
use walkdir::WalkDir;

pub enum Outcome {
    Ok(EcgRecord),
    Skip { reason: &'static str, detail: String },
}

pub struct Scanned {
    pub path: PathBuf,
    pub outcome: Outcome,
}

pub fn header_files(root: &Path) -> anyhow::Result<Vec<PathBuf>> {
    if !root.is_dir() {
        bail!("{} is not a directory", root.display());
    }
    let mut out = Vec::new();
    for entry in WalkDir::new(root).sort_by_file_name() {
        let entry = entry.with_context(|| format!("walking {}", root.display()))?;
        if entry.file_type().is_file() && entry.path().extension().is_some_and(|e| e == "hea") {
            out.push(entry.into_path());
        }
    }
    Ok(out)
}

fn load(dataset: &str, hea: &Path) -> Result<EcgRecord, (&'static str, String)> {
    let text = std::fs::read_to_string(hea).map_err(|e| ("unreadable header", e.to_string()))?;
    let wfdb = |e: WfdbError| (e.kind(), e.to_string());
    let header = parse_header(&text).map_err(wfdb)?;
    let dir = hea.parent().unwrap_or(Path::new("."));
    let mut files = HashMap::new();
    for spec in &header.signal_specs {
        if files.contains_key(&spec.file_name) {
            continue;
        }
        // a missing file is left for the decoder to report
        if let Ok(bytes) = std::fs::read(dir.join(&spec.file_name)) {
            files.insert(spec.file_name.clone(), bytes);
        }
    }
    ingest_record(dataset, &text, &files).map_err(wfdb)
}

/// Decodes every header; records whose name was already taken by an earlier
/// file are skipped.
pub fn scan(dataset: &str, root: &Path) -> anyhow::Result<Vec<Scanned>> {
    let mut seen: BTreeMap<String, PathBuf> = BTreeMap::new();
    let mut out = Vec::new();
    for path in header_files(root)? {
        let outcome = match load(dataset, &path) {
            Ok(rec) => match seen.get(&rec.name) {
                Some(first) => {
                    let e = WfdbError::DuplicateRecordName(rec.name.clone());
                    Outcome::Skip {
                        reason: e.kind(),
                        detail: format!("{e}; first seen at {}", first.display()),
                    }
                }
                None => {
                    seen.insert(rec.name.clone(), path.clone());
                    Outcome::Ok(rec)
                }
            },
            Err((reason, detail)) => Outcome::Skip { reason, detail },
        };
        out.push(Scanned { path, outcome });
    }
    Ok(out)
}

/// "N ingested, M skipped" with the skip reasons in parentheses.
pub fn summary(scanned: &[Scanned]) -> String {
    let mut reasons: BTreeMap<&str, usize> = BTreeMap::new();
    let mut ok = 0;
    for s in scanned {
        match &s.outcome {
            Outcome::Ok(_) => ok += 1,
            Outcome::Skip { reason, .. } => *reasons.entry(reason).or_default() += 1,
        }
    }
    let skipped: usize = reasons.values().sum();
    let mut line = format!("{ok} ingested, {skipped} skipped");
    if skipped > 0 {
        let parts: Vec<String> = reasons
            .iter()
            .map(|(r, n)| if *n == 1 { r.to_string() } else { format!("{n} {r}") })
            .collect();
        line.push_str(&format!(" ({})", parts.join(", ")));
    }
    line
}

/// One `code,display` pair per line; blank lines and `#` comments ignored.
pub fn parse_labels(text: &str) -> anyhow::Result<Vec<LabelCode>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((code, display)) = line.split_once(',') else {
            bail!("labels line {}: expected `code,display`", i + 1);
        };
        out.push(LabelCode {
            code: code.trim().to_string(),
            display_text: display.trim().to_string(),
        });
    }
    Ok(out)
}
