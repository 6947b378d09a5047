use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{decisions_on, heads_of_record, load_annotation, load_record, AnnotationError, Annotation, Dataset, ReviewAction};
use crate::auth::load_account;
use crate::storage::Reader;

pub const EXPORT_HEADER: [&str; 5] = ["record", "labels", "status", "annotator", "reviewer"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExportRow {
    pub record_name: String,
    pub record_id: String,
    /// sorted label codes
    pub labels: Vec<String>,
    /// `confirmed`, `unsure` or `unannotated`
    pub status: String,
    /// username of whoever first labelled the chosen annotation's chain
    pub annotator: String,
    /// username of the expert who approved or wrote it, empty if none
    pub reviewer: String,
    pub annotation_id: Option<String>,
}

fn username(r: &impl Reader, user_id: &str) -> Result<String, AnnotationError> {
    Ok(load_account(r, user_id)?.map_or_else(|| user_id.to_string(), |a| a.username))
}

/// Author at the root of a review chain.
fn origin_author(r: &impl Reader, head: &Annotation) -> Result<String, AnnotationError> {
    let mut current = head.clone();
    // chains are acyclic; the bound only guards against corrupt data
    for _ in 0..10_000 {
        match &current.review_of {
            Some(prev) => current = load_annotation(r, prev)?,
            None => break,
        }
    }
    Ok(current.annotator_id)
}

/// Chooses the final annotation of a record. Among heads an expert wrote
/// or approved, the one with the most recent expert action wins; without
/// any expert action, the most recently updated head stands.
fn choose(r: &impl Reader, heads: Vec<Annotation>) -> Result<Option<(Annotation, Option<String>)>, AnnotationError> {
    let mut best: Option<((chrono::DateTime<chrono::Utc>, String), Annotation, String)> = None;
    for h in &heads {
        let mut acts = Vec::new();
        if h.review_of.is_some() {
            acts.push((h.updated_at, h.annotation_id.clone(), h.annotator_id.clone()));
        }
        for d in decisions_on(r, &h.annotation_id)? {
            if d.action == ReviewAction::Approve {
                acts.push((d.decided_at, d.decision_id, d.reviewer_id));
            }
        }
        for (at, tie, reviewer) in acts {
            let key = (at, tie);
            if best.as_ref().map_or(true, |(k, _, _)| key > *k) {
                best = Some((key, h.clone(), reviewer));
            }
        }
    }
    if let Some((_, h, reviewer)) = best {
        return Ok(Some((h, Some(reviewer))));
    }
    Ok(heads
        .into_iter()
        .max_by(|a, b| (a.updated_at, &a.annotation_id).cmp(&(b.updated_at, &b.annotation_id)))
        .map(|h| (h, None)))
}

pub(crate) fn final_rows(r: &impl Reader, dataset: &Dataset) -> Result<Vec<ExportRow>, AnnotationError> {
    let mut rows = Vec::with_capacity(dataset.record_ids.len());
    for record_id in &dataset.record_ids {
        let meta = load_record(r, record_id)?;
        let row = match choose(r, heads_of_record(r, record_id)?)? {
            Some((head, reviewer)) => ExportRow {
                record_name: meta.name,
                record_id: record_id.clone(),
                labels: head.labels.iter().cloned().collect(),
                status: head.status.as_str().to_string(),
                annotator: username(r, &origin_author(r, &head)?)?,
                reviewer: match reviewer {
                    Some(id) => username(r, &id)?,
                    None => String::new(),
                },
                annotation_id: Some(head.annotation_id),
            },
            None => ExportRow {
                record_name: meta.name,
                record_id: record_id.clone(),
                labels: Vec::new(),
                status: "unannotated".into(),
                annotator: String::new(),
                reviewer: String::new(),
                annotation_id: None,
            },
        };
        rows.push(row);
    }
    Ok(rows)
}

/// Writes rows as comma-separated text with a header line; labels are
/// joined by `|`.
pub fn write_csv<W: Write>(rows: &[ExportRow], out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(EXPORT_HEADER)?;
    for row in rows {
        w.write_record([
            row.record_name.as_str(),
            &row.labels.join("|"),
            &row.status,
            &row.annotator,
            &row.reviewer,
        ])?;
    }
    w.flush()?;
    Ok(())
}
