//! The annotation campaign: datasets and membership, per-user resume
//! cursors, confirm/unsure annotations with revision chains, the shared
//! unsure list, and expert review.
//!
//! Each annotator has at most one *head* (non-superseded annotation) per
//! record. Revising replaces the head and keeps the old one as history. An
//! expert writing over someone else's head creates a head attributed to the
//! expert and supersedes the original. For resume and auto-advance, a record
//! counts as done for a user once that user has annotated it at all, so a
//! record whose head was overridden by an expert is not handed back.

mod audit;
mod export;
mod model;

use std::collections::BTreeSet;
use std::sync::Arc;

use chrono::Utc;

use crate::auth::{account_by_name, load_account, Role};
use crate::catalog::RecordMeta;
use crate::storage::{Reader, Store, Table, Txn};

pub use audit::{audit, AuditReport};
pub use export::{write_csv, ExportRow, EXPORT_HEADER};
pub use model::*;

pub(crate) fn head_key(record_id: &str, user_id: &str) -> String {
    format!("{record_id}/{user_id}")
}

pub(crate) fn load_dataset(r: &impl Reader, dataset_id: &str) -> Result<Dataset, AnnotationError> {
    r.get(Table::Datasets, dataset_id)?
        .ok_or_else(|| AnnotationError::UnknownDataset(dataset_id.to_string()))
}

pub(crate) fn load_record(r: &impl Reader, record_id: &str) -> Result<RecordMeta, AnnotationError> {
    r.get(Table::Records, record_id)?
        .ok_or_else(|| AnnotationError::UnknownRecord(record_id.to_string()))
}

pub(crate) fn load_annotation(r: &impl Reader, annotation_id: &str) -> Result<Annotation, AnnotationError> {
    r.get(Table::Annotations, annotation_id)?
        .ok_or_else(|| AnnotationError::UnknownAnnotation(annotation_id.to_string()))
}

/// The user's most recent own annotation on a record, head or not.
fn own_latest(r: &impl Reader, record_id: &str, user_id: &str) -> Result<Option<Annotation>, AnnotationError> {
    match r.get::<String>(Table::Heads, &head_key(record_id, user_id))? {
        Some(id) => Ok(Some(load_annotation(r, &id)?)),
        None => Ok(None),
    }
}

fn has_annotated(r: &impl Reader, record_id: &str, user_id: &str) -> Result<bool, AnnotationError> {
    Ok(r.get_raw(Table::Heads, &head_key(record_id, user_id))?.is_some())
}

/// Current heads on a record, one per annotator at most.
pub(crate) fn heads_of_record(r: &impl Reader, record_id: &str) -> Result<Vec<Annotation>, AnnotationError> {
    let mut heads = Vec::new();
    for (_, id) in r.scan::<String>(Table::Heads, &format!("{record_id}/"))? {
        let a = load_annotation(r, &id)?;
        if a.is_head() {
            heads.push(a);
        }
    }
    Ok(heads)
}

pub(crate) fn decisions_on(r: &impl Reader, annotation_id: &str) -> Result<Vec<ReviewDecision>, AnnotationError> {
    Ok(r.scan::<ReviewDecision>(Table::Decisions, &format!("{annotation_id}/"))?
        .into_iter()
        .map(|(_, d)| d)
        .collect())
}

/// First record at or after `start` (wrapping) the user has not annotated.
fn first_unannotated(
    r: &impl Reader,
    dataset: &Dataset,
    user_id: &str,
    start: usize,
) -> Result<Resume, AnnotationError> {
    let n = dataset.record_ids.len();
    for k in 0..n {
        let pos = (start + k) % n;
        let record_id = &dataset.record_ids[pos];
        if !has_annotated(r, record_id, user_id)? {
            return Ok(Resume::At {
                record_id: record_id.clone(),
                position: pos,
            });
        }
    }
    Ok(Resume::Complete { position: n })
}

fn cursor_key(user_id: &str, dataset_id: &str) -> String {
    format!("{user_id}/{dataset_id}")
}

fn load_cursor(r: &impl Reader, user_id: &str, dataset_id: &str) -> Result<Cursor, AnnotationError> {
    Ok(r.get(Table::Cursors, &cursor_key(user_id, dataset_id))?.unwrap_or(Cursor {
        user_id: user_id.to_string(),
        dataset_id: dataset_id.to_string(),
        last_position: None,
    }))
}

fn validate_labels(dataset: &Dataset, labels: &BTreeSet<String>) -> Result<(), AnnotationError> {
    match labels.iter().find(|c| !dataset.has_code(c)) {
        Some(bad) => Err(AnnotationError::UnknownLabelCode(bad.clone())),
        None => Ok(()),
    }
}

fn validate_draft(dataset: &Dataset, draft: &Draft) -> Result<(), AnnotationError> {
    validate_labels(dataset, &draft.labels)?;
    if draft.status == AnnotationStatus::Confirmed && draft.labels.is_empty() && draft.comment.trim().is_empty() {
        return Err(AnnotationError::EmptyConfirmed);
    }
    Ok(())
}

pub(crate) fn validate_vocabulary(vocabulary: &[LabelCode]) -> Result<(), AnnotationError> {
    let mut seen = BTreeSet::new();
    for l in vocabulary {
        let code = l.code.as_str();
        if code.is_empty() || code.trim() != code || code.contains(['|', ',', '\n', '"']) {
            return Err(AnnotationError::InvalidVocabulary(format!("bad code `{code}`")));
        }
        if !seen.insert(code) {
            return Err(AnnotationError::InvalidVocabulary(format!("duplicate code `{code}`")));
        }
    }
    if seen.is_empty() {
        return Err(AnnotationError::InvalidVocabulary("no codes".into()));
    }
    Ok(())
}

/// Creates a dataset row inside an ongoing transaction.
pub(crate) fn insert_dataset(
    txn: &mut Txn,
    name: &str,
    vocabulary: Vec<LabelCode>,
    record_ids: Vec<String>,
) -> Result<Dataset, AnnotationError> {
    validate_vocabulary(&vocabulary)?;
    if name.trim().is_empty() {
        return Err(AnnotationError::InvalidVocabulary("empty dataset name".into()));
    }
    if txn.get_raw(Table::DatasetNames, name)?.is_some() {
        return Err(AnnotationError::DuplicateDataset(name.to_string()));
    }
    let dataset = Dataset {
        dataset_id: format!("ds_{:06}", txn.next_seq("dataset")?),
        name: name.to_string(),
        record_ids,
        label_vocabulary: vocabulary,
        members: BTreeSet::new(),
        experts: BTreeSet::new(),
        created_at: Utc::now(),
    };
    txn.put(Table::Datasets, &dataset.dataset_id, &dataset)?;
    txn.put(Table::DatasetNames, name, &dataset.dataset_id)?;
    Ok(dataset)
}

/// Writes a new annotation by `author`, superseding the author's current
/// head on the record if there is one.
fn write_own(
    txn: &mut Txn,
    record: &RecordMeta,
    author: &str,
    draft: Draft,
    review_of: Option<String>,
) -> Result<Annotation, AnnotationError> {
    let now = Utc::now();
    let prev = own_latest(txn, &record.record_id, author)?;
    let id = format!("ann_{:010}", txn.next_seq("annotation")?);
    let mut inherited_review = None;
    let (revision, created_at) = match prev {
        Some(mut p) => {
            if p.is_head() {
                inherited_review = p.review_of.clone();
                p.superseded_by = Some(id.clone());
                p.updated_at = now;
                txn.put(Table::Annotations, &p.annotation_id, &p)?;
            }
            (p.revision + 1, p.created_at)
        }
        None => (1, now),
    };
    let annotation = Annotation {
        annotation_id: id,
        record_id: record.record_id.clone(),
        dataset_id: record.dataset_id.clone(),
        annotator_id: author.to_string(),
        labels: draft.labels,
        comment: draft.comment,
        status: draft.status,
        revision,
        created_at,
        updated_at: now,
        superseded_by: None,
        review_of: review_of.or(inherited_review),
    };
    txn.put(Table::Annotations, &annotation.annotation_id, &annotation)?;
    txn.put(
        Table::Heads,
        &head_key(&record.record_id, author),
        &annotation.annotation_id,
    )?;
    txn.put(
        Table::History,
        &head_key(&record.record_id, &annotation.annotation_id),
        &annotation.annotation_id,
    )?;
    Ok(annotation)
}

/// An expert's head written over `target`, which becomes superseded.
fn write_over(
    txn: &mut Txn,
    record: &RecordMeta,
    mut target: Annotation,
    expert: &str,
    draft: Draft,
) -> Result<Annotation, AnnotationError> {
    if target.annotator_id == expert {
        return write_own(txn, record, expert, draft, None);
    }
    let new = write_own(txn, record, expert, draft, Some(target.annotation_id.clone()))?;
    target.superseded_by = Some(new.annotation_id.clone());
    target.updated_at = new.updated_at;
    txn.put(Table::Annotations, &target.annotation_id, &target)?;
    Ok(new)
}

fn member_dataset(r: &impl Reader, user_id: &str, dataset_id: &str) -> Result<Dataset, AnnotationError> {
    let ds = load_dataset(r, dataset_id)?;
    if !ds.is_member(user_id) {
        return Err(AnnotationError::NotAMember);
    }
    Ok(ds)
}

/// Campaign operations over a shared store. Holds no mutable state of its
/// own; every mutation is one storage transaction.
#[derive(Clone)]
pub struct Campaign {
    store: Arc<Store>,
}

impl Campaign {
    pub fn new(store: Arc<Store>) -> Self {
        Campaign { store }
    }

    pub fn store(&self) -> &Arc<Store> {
        &self.store
    }

    pub fn dataset(&self, dataset_id: &str) -> Result<Dataset, AnnotationError> {
        self.store.read(|s| load_dataset(s, dataset_id))
    }

    pub fn dataset_by_name(&self, name: &str) -> Result<Dataset, AnnotationError> {
        self.store.read(|s| {
            let id: String = s
                .get(Table::DatasetNames, name)?
                .ok_or_else(|| AnnotationError::UnknownDataset(name.to_string()))?;
            load_dataset(s, &id)
        })
    }

    pub fn all_datasets(&self) -> Result<Vec<Dataset>, AnnotationError> {
        self.store.read(|s| {
            Ok(s.scan::<Dataset>(Table::Datasets, "")?
                .into_iter()
                .map(|(_, d)| d)
                .collect())
        })
    }

    /// Datasets the user belongs to, in creation order.
    pub fn datasets_for(&self, user_id: &str) -> Result<Vec<Dataset>, AnnotationError> {
        Ok(self
            .all_datasets()?
            .into_iter()
            .filter(|d| d.is_member(user_id))
            .collect())
    }

    /// Creates an empty dataset. Records are normally added at creation by
    /// the catalog import instead.
    pub fn create_dataset(&self, name: &str, vocabulary: Vec<LabelCode>) -> Result<Dataset, AnnotationError> {
        self.store
            .transact(|txn| insert_dataset(txn, name, vocabulary, Vec::new()))
    }

    /// Adds a user to a dataset, and to its experts when `expert` is set.
    /// Granting is idempotent.
    pub fn grant(&self, dataset_name: &str, username: &str, expert: bool) -> Result<Dataset, AnnotationError> {
        self.store.transact(|txn| {
            let id: String = txn
                .get(Table::DatasetNames, dataset_name)?
                .ok_or_else(|| AnnotationError::UnknownDataset(dataset_name.to_string()))?;
            let mut ds = load_dataset(txn, &id)?;
            let user = account_by_name(txn, username)?
                .ok_or_else(|| AnnotationError::UnknownUser(username.to_string()))?;
            if expert && user.role == Role::Annotator {
                return Err(AnnotationError::NotExpertRole {
                    user: username.to_string(),
                    role: "annotator".into(),
                });
            }
            ds.members.insert(user.user_id.clone());
            if expert {
                ds.experts.insert(user.user_id);
            }
            txn.put(Table::Datasets, &ds.dataset_id, &ds)?;
            Ok(ds)
        })
    }

    /// Record metadata, provided the user belongs to the record's dataset.
    pub fn record_for_member(&self, user_id: &str, record_id: &str) -> Result<RecordMeta, AnnotationError> {
        self.store.read(|s| {
            let rec = load_record(s, record_id)?;
            member_dataset(s, user_id, &rec.dataset_id)?;
            Ok(rec)
        })
    }

    pub fn annotation(&self, annotation_id: &str) -> Result<Annotation, AnnotationError> {
        self.store.read(|s| load_annotation(s, annotation_id))
    }

    /// Every annotation ever written on a record, oldest first.
    pub fn history(&self, record_id: &str) -> Result<Vec<Annotation>, AnnotationError> {
        self.store.read(|s| {
            s.scan::<String>(Table::History, &format!("{record_id}/"))?
                .into_iter()
                .map(|(_, id)| load_annotation(s, &id))
                .collect()
        })
    }

    pub fn cursor(&self, user_id: &str, dataset_id: &str) -> Result<Cursor, AnnotationError> {
        self.store.read(|s| load_cursor(s, user_id, dataset_id))
    }

    /// Where the user should continue: the saved position if still
    /// unannotated by them, otherwise the next unannotated record after it.
    pub fn open_dataset(&self, user_id: &str, dataset_id: &str) -> Result<Resume, AnnotationError> {
        self.store.read(|s| {
            let ds = member_dataset(s, user_id, dataset_id)?;
            let cursor = load_cursor(s, user_id, dataset_id)?;
            first_unannotated(s, &ds, user_id, cursor.last_position.unwrap_or(0))
        })
    }

    /// Number of records in the dataset the user has annotated.
    pub fn annotated_count(&self, user_id: &str, dataset_id: &str) -> Result<usize, AnnotationError> {
        self.store.read(|s| {
            let ds = member_dataset(s, user_id, dataset_id)?;
            let mut n = 0;
            for r in &ds.record_ids {
                if has_annotated(s, r, user_id)? {
                    n += 1;
                }
            }
            Ok(n)
        })
    }

    /// Records the user's annotation of a record, revising their head if
    /// they already have one, and returns where to go next.
    pub fn submit(&self, user_id: &str, record_id: &str, draft: Draft) -> Result<Submitted, AnnotationError> {
        self.store.transact(|txn| {
            let record = load_record(txn, record_id)?;
            let ds = member_dataset(txn, user_id, &record.dataset_id)?;
            validate_draft(&ds, &draft)?;
            let annotation = write_own(txn, &record, user_id, draft, None)?;
            let mut cursor = load_cursor(txn, user_id, &ds.dataset_id)?;
            cursor.last_position = Some(cursor.last_position.map_or(record.position, |p| p.max(record.position)));
            txn.put(Table::Cursors, &cursor_key(user_id, &ds.dataset_id), &cursor)?;
            let next = first_unannotated(txn, &ds, user_id, record.position + 1)?;
            Ok(Submitted { annotation, next })
        })
    }

    /// The record one step from `position`. Browsing leaves the cursor alone.
    pub fn navigate(
        &self,
        user_id: &str,
        dataset_id: &str,
        position: usize,
        direction: Direction,
    ) -> Result<(String, usize), AnnotationError> {
        let ds = self.store.read(|s| member_dataset(s, user_id, dataset_id))?;
        let len = ds.record_ids.len();
        if position >= len {
            return Err(AnnotationError::PositionOutOfRange { position, len });
        }
        let target = match direction {
            Direction::Next if position + 1 < len => position + 1,
            Direction::Previous if position > 0 => position - 1,
            _ => return Err(AnnotationError::AtBoundary),
        };
        Ok((ds.record_ids[target].clone(), target))
    }

    /// The user's latest annotation on each record they have annotated, in
    /// record order.
    pub fn list_my_annotations(&self, user_id: &str, dataset_id: &str) -> Result<Vec<Annotation>, AnnotationError> {
        self.store.read(|s| {
            let ds = member_dataset(s, user_id, dataset_id)?;
            let mut out = Vec::new();
            for r in &ds.record_ids {
                if let Some(a) = own_latest(s, r, user_id)? {
                    out.push(a);
                }
            }
            Ok(out)
        })
    }

    /// Revises a head annotation. The owner gets a new revision; an expert
    /// of the dataset gets a head of their own that supersedes the target.
    /// With `expected_revision`, the call fails unless the target is still
    /// at that revision.
    pub fn revise(
        &self,
        user_id: &str,
        annotation_id: &str,
        draft: Draft,
        expected_revision: Option<u32>,
    ) -> Result<Annotation, AnnotationError> {
        self.store.transact(|txn| {
            let target = load_annotation(txn, annotation_id)?;
            let ds = load_dataset(txn, &target.dataset_id)?;
            let is_owner = target.annotator_id == user_id && ds.is_member(user_id);
            if !is_owner && !ds.is_expert(user_id) {
                return Err(AnnotationError::NotOwnerNorExpert);
            }
            if !target.is_head() {
                return Err(AnnotationError::Superseded(target.annotation_id));
            }
            if let Some(expected) = expected_revision {
                if expected != target.revision {
                    return Err(AnnotationError::RevisionMismatch {
                        expected,
                        actual: target.revision,
                    });
                }
            }
            validate_draft(&ds, &draft)?;
            let record = load_record(txn, &target.record_id)?;
            if is_owner {
                write_own(txn, &record, user_id, draft, None)
            } else {
                write_over(txn, &record, target, user_id, draft)
            }
        })
    }

    /// Unsure heads of every member, in record order. The same for every
    /// member of the dataset.
    pub fn list_unsure(&self, user_id: &str, dataset_id: &str) -> Result<Vec<Annotation>, AnnotationError> {
        self.store.read(|s| {
            let ds = member_dataset(s, user_id, dataset_id)?;
            let mut out = Vec::new();
            for r in &ds.record_ids {
                out.extend(
                    heads_of_record(s, r)?
                        .into_iter()
                        .filter(|a| a.status == AnnotationStatus::Unsure),
                );
            }
            Ok(out)
        })
    }

    /// Every record with at least one head, with its heads and the
    /// decisions taken on them.
    pub fn expert_review(&self, reviewer_id: &str, dataset_id: &str) -> Result<Vec<ReviewItem>, AnnotationError> {
        self.store.read(|s| {
            let ds = load_dataset(s, dataset_id)?;
            if !ds.is_expert(reviewer_id) {
                return Err(AnnotationError::NotAnExpert);
            }
            let mut out = Vec::new();
            for (position, r) in ds.record_ids.iter().enumerate() {
                let heads = heads_of_record(s, r)?;
                if heads.is_empty() {
                    continue;
                }
                let mut decisions = Vec::new();
                for h in &heads {
                    decisions.extend(decisions_on(s, &h.annotation_id)?);
                }
                out.push(ReviewItem {
                    record_id: r.clone(),
                    position,
                    heads,
                    decisions,
                });
            }
            Ok(out)
        })
    }

    /// Approves a head as it stands, or overrides it with the reviewer's
    /// labels.
    pub fn expert_decide(
        &self,
        reviewer_id: &str,
        annotation_id: &str,
        action: ReviewAction,
        override_labels: BTreeSet<String>,
        comment: &str,
    ) -> Result<ReviewDecision, AnnotationError> {
        self.store.transact(|txn| {
            let target = load_annotation(txn, annotation_id)?;
            let ds = load_dataset(txn, &target.dataset_id)?;
            if !ds.is_expert(reviewer_id) {
                return Err(AnnotationError::NotAnExpert);
            }
            if !target.is_head() {
                return Err(AnnotationError::Superseded(target.annotation_id));
            }
            let resulting = match action {
                ReviewAction::Approve => None,
                ReviewAction::Override => {
                    if override_labels.is_empty() {
                        return Err(AnnotationError::MissingOverrideLabels);
                    }
                    validate_labels(&ds, &override_labels)?;
                    let record = load_record(txn, &target.record_id)?;
                    let draft = Draft {
                        labels: override_labels.clone(),
                        comment: comment.to_string(),
                        status: AnnotationStatus::Confirmed,
                    };
                    Some(write_over(txn, &record, target.clone(), reviewer_id, draft)?.annotation_id)
                }
            };
            let decision = ReviewDecision {
                decision_id: format!("dec_{:010}", txn.next_seq("decision")?),
                reviewer_id: reviewer_id.to_string(),
                target_annotation_id: target.annotation_id.clone(),
                action,
                override_labels: if action == ReviewAction::Override {
                    override_labels
                } else {
                    BTreeSet::new()
                },
                resulting_annotation_id: resulting,
                decided_at: Utc::now(),
            };
            txn.put(
                Table::Decisions,
                &format!("{}/{}", target.annotation_id, decision.decision_id),
                &decision,
            )?;
            Ok(decision)
        })
    }

    /// One row per record of the dataset with its final labels.
    pub fn export_final_labels(&self, dataset_id: &str) -> Result<Vec<ExportRow>, AnnotationError> {
        self.store.read(|s| {
            let ds = load_dataset(s, dataset_id)?;
            export::final_rows(s, &ds)
        })
    }

    /// Username for display; falls back to the id for deleted accounts.
    pub fn username(&self, user_id: &str) -> Result<String, AnnotationError> {
        Ok(self
            .store
            .read(|s| load_account(s, user_id))?
            .map_or_else(|| user_id.to_string(), |a| a.username))
    }
}
