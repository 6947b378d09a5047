use std::collections::{BTreeMap, BTreeSet};

use super::{head_key, Annotation, AnnotationError, AnnotationStatus, Cursor, Dataset, ReviewAction, ReviewDecision};
use crate::catalog::RecordMeta;
use crate::storage::{Reader, Table};

/// Every invariant violation found in a store, as readable messages.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AuditReport {
    pub violations: Vec<String>,
    pub annotations: usize,
    pub decisions: usize,
}

impl AuditReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks the campaign invariants over the whole store.
pub fn audit(r: &impl Reader) -> Result<AuditReport, AnnotationError> {
    let mut report = AuditReport::default();
    let mut v = |msg: String| report.violations.push(msg);

    let datasets: BTreeMap<String, Dataset> = r.scan(Table::Datasets, "")?.into_iter().collect();
    let records: BTreeMap<String, RecordMeta> = r.scan(Table::Records, "")?.into_iter().collect();
    let anns: BTreeMap<String, Annotation> = r.scan(Table::Annotations, "")?.into_iter().collect();
    let decisions: Vec<ReviewDecision> = r.scan(Table::Decisions, "")?.into_iter().map(|(_, d)| d).collect();
    let cursors: Vec<Cursor> = r.scan(Table::Cursors, "")?.into_iter().map(|(_, c)| c).collect();
    let heads_index: BTreeMap<String, String> = r.scan(Table::Heads, "")?.into_iter().collect();

    for ds in datasets.values() {
        let unique: BTreeSet<_> = ds.record_ids.iter().collect();
        if unique.len() != ds.record_ids.len() {
            v(format!("dataset {} has duplicate record ids", ds.dataset_id));
        }
        if !ds.experts.is_subset(&ds.members) {
            v(format!("dataset {} has experts outside its members", ds.dataset_id));
        }
        let codes: BTreeSet<_> = ds.label_vocabulary.iter().map(|l| &l.code).collect();
        if codes.len() != ds.label_vocabulary.len() {
            v(format!("dataset {} has duplicate label codes", ds.dataset_id));
        }
        for (pos, rid) in ds.record_ids.iter().enumerate() {
            match records.get(rid) {
                Some(m) if m.dataset_id == ds.dataset_id && m.position == pos => {}
                _ => v(format!("record {rid} does not match position {pos} of {}", ds.dataset_id)),
            }
        }
    }

    let mut pairs: BTreeMap<(String, String), Vec<&Annotation>> = BTreeMap::new();
    for a in anns.values() {
        let Some(ds) = datasets.get(&a.dataset_id) else {
            v(format!("{} belongs to unknown dataset", a.annotation_id));
            continue;
        };
        if !ds.record_ids.contains(&a.record_id) {
            v(format!("{} is on a record outside its dataset", a.annotation_id));
        }
        if a.status == AnnotationStatus::Confirmed && a.labels.is_empty() && a.comment.trim().is_empty() {
            v(format!("{} is confirmed but empty", a.annotation_id));
        }
        if let Some(bad) = a.labels.iter().find(|c| !ds.has_code(c)) {
            v(format!("{} uses unknown code {bad}", a.annotation_id));
        }
        if let Some(next) = &a.superseded_by {
            match anns.get(next) {
                // successors have larger ids, so chains cannot cycle
                Some(n) if n.record_id == a.record_id && n.annotation_id > a.annotation_id => {}
                _ => v(format!("{} is superseded by an invalid annotation", a.annotation_id)),
            }
        }
        if let Some(prev) = &a.review_of {
            if !anns.contains_key(prev) {
                v(format!("{} reviews a missing annotation", a.annotation_id));
            }
        }
        pairs
            .entry((a.record_id.clone(), a.annotator_id.clone()))
            .or_default()
            .push(a);
    }

    for ((record, user), list) in &pairs {
        // ids are issued in increasing order, so the map order is creation order
        let revisions: Vec<u32> = list.iter().map(|a| a.revision).collect();
        let dense: Vec<u32> = (1..=list.len() as u32).collect();
        if revisions != dense {
            v(format!("revisions of {record}/{user} are {revisions:?}"));
        }
        let heads = list.iter().filter(|a| a.is_head()).count();
        if heads > 1 {
            v(format!("{record}/{user} has {heads} heads"));
        }
        let latest = &list.last().expect("non-empty").annotation_id;
        if heads_index.get(&head_key(record, user)) != Some(latest) {
            v(format!("head index of {record}/{user} is stale"));
        }
    }
    let history: BTreeSet<String> = r.scan::<String>(Table::History, "")?.into_iter().map(|(k, _)| k).collect();
    let expected_history: BTreeSet<String> =
        anns.values().map(|a| head_key(&a.record_id, &a.annotation_id)).collect();
    if history != expected_history {
        v("history index does not match the annotations".into());
    }
    if heads_index.len() != pairs.len() {
        v(format!("head index has {} entries for {} pairs", heads_index.len(), pairs.len()));
    }

    for d in &decisions {
        let Some(target) = anns.get(&d.target_annotation_id) else {
            v(format!("{} targets a missing annotation", d.decision_id));
            continue;
        };
        match datasets.get(&target.dataset_id) {
            Some(ds) if ds.is_expert(&d.reviewer_id) => {}
            _ => v(format!("{} was made by a non-expert", d.decision_id)),
        }
        match d.action {
            ReviewAction::Approve => {
                if d.resulting_annotation_id.is_some() || !d.override_labels.is_empty() {
                    v(format!("{} approves but carries override data", d.decision_id));
                }
            }
            ReviewAction::Override => {
                if d.override_labels.is_empty() {
                    v(format!("{} overrides without labels", d.decision_id));
                }
                let result = d.resulting_annotation_id.as_ref().and_then(|id| anns.get(id));
                match result {
                    Some(n) if n.annotator_id == d.reviewer_id && target.superseded_by.is_some() => {}
                    _ => v(format!("{} has no valid override annotation", d.decision_id)),
                }
            }
        }
    }

    for c in &cursors {
        match (datasets.get(&c.dataset_id), c.last_position) {
            (None, _) => v(format!("cursor of {} points at unknown dataset", c.user_id)),
            (Some(ds), Some(p)) if p >= ds.record_ids.len() => {
                v(format!("cursor of {} on {} is past the end", c.user_id, c.dataset_id))
            }
            _ => {}
        }
    }

    report.annotations = anns.len();
    report.decisions = decisions.len();
    Ok(report)
}
