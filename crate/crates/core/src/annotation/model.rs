use std::collections::BTreeSet;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::storage::StorageError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelCode {
    pub code: String,
    pub display_text: String,
}

impl LabelCode {
    pub fn new(code: &str, display_text: &str) -> Self {
        LabelCode {
            code: code.to_string(),
            display_text: display_text.to_string(),
        }
    }
}

/// The four diagnostic categories used when a dataset is created without an
/// explicit vocabulary.
pub fn default_vocabulary() -> Vec<LabelCode> {
    vec![
        LabelCode::new("NORM", "normal"),
        LabelCode::new("AF", "atrial fibrillation"),
        LabelCode::new("ER", "early repolarization"),
        LabelCode::new("TWC", "T wave change"),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub dataset_id: String,
    pub name: String,
    /// ingestion order; positions index into this list
    pub record_ids: Vec<String>,
    pub label_vocabulary: Vec<LabelCode>,
    pub members: BTreeSet<String>,
    pub experts: BTreeSet<String>,
    pub created_at: DateTime<Utc>,
}

impl Dataset {
    pub fn is_member(&self, user_id: &str) -> bool {
        self.members.contains(user_id)
    }

    pub fn is_expert(&self, user_id: &str) -> bool {
        self.experts.contains(user_id)
    }

    pub fn has_code(&self, code: &str) -> bool {
        self.label_vocabulary.iter().any(|l| l.code == code)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnnotationStatus {
    Confirmed,
    Unsure,
}

impl AnnotationStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            AnnotationStatus::Confirmed => "confirmed",
            AnnotationStatus::Unsure => "unsure",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Annotation {
    pub annotation_id: String,
    pub record_id: String,
    pub dataset_id: String,
    pub annotator_id: String,
    pub labels: BTreeSet<String>,
    pub comment: String,
    pub status: AnnotationStatus,
    /// counts annotations by this annotator on this record, from 1
    pub revision: u32,
    pub created_at: DateTime<Utc>,
    pub updated_at: DateTime<Utc>,
    pub superseded_by: Option<String>,
    /// set when an expert wrote this annotation over someone else's
    pub review_of: Option<String>,
}

impl Annotation {
    pub fn is_head(&self) -> bool {
        self.superseded_by.is_none()
    }
}

/// Labels, comment and status for a new annotation or a revision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Draft {
    pub labels: BTreeSet<String>,
    #[serde(default)]
    pub comment: String,
    pub status: AnnotationStatus,
}

impl Draft {
    pub fn new<I, S>(labels: I, comment: &str, status: AnnotationStatus) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Draft {
            labels: labels.into_iter().map(Into::into).collect(),
            comment: comment.to_string(),
            status,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReviewAction {
    Approve,
    Override,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewDecision {
    pub decision_id: String,
    pub reviewer_id: String,
    pub target_annotation_id: String,
    pub action: ReviewAction,
    pub override_labels: BTreeSet<String>,
    /// the reviewer's head created by an override
    pub resulting_annotation_id: Option<String>,
    pub decided_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cursor {
    pub user_id: String,
    pub dataset_id: String,
    pub last_position: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Next,
    Previous,
}

/// Where a user lands when entering a dataset, or after a submission.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Resume {
    At { record_id: String, position: usize },
    Complete { position: usize },
}

impl Resume {
    pub fn record_id(&self) -> Option<&str> {
        match self {
            Resume::At { record_id, .. } => Some(record_id),
            Resume::Complete { .. } => None,
        }
    }

    pub fn position(&self) -> usize {
        match self {
            Resume::At { position, .. } | Resume::Complete { position } => *position,
        }
    }

    pub fn is_complete(&self) -> bool {
        matches!(self, Resume::Complete { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Submitted {
    pub annotation: Annotation,
    pub next: Resume,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewItem {
    pub record_id: String,
    pub position: usize,
    pub heads: Vec<Annotation>,
    /// decisions on any of `heads`
    pub decisions: Vec<ReviewDecision>,
}

#[derive(Debug, Error)]
pub enum AnnotationError {
    #[error("unknown dataset `{0}`")]
    UnknownDataset(String),
    #[error("unknown record `{0}`")]
    UnknownRecord(String),
    #[error("unknown annotation `{0}`")]
    UnknownAnnotation(String),
    #[error("unknown user `{0}`")]
    UnknownUser(String),
    #[error("dataset `{0}` already exists")]
    DuplicateDataset(String),
    #[error("invalid label vocabulary: {0}")]
    InvalidVocabulary(String),
    #[error("user `{user}` cannot be an expert with role {role}")]
    NotExpertRole { user: String, role: String },
    #[error("not a member of this dataset")]
    NotAMember,
    #[error("only experts of this dataset may review")]
    NotAnExpert,
    #[error("only the annotator or an expert may revise this annotation")]
    NotOwnerNorExpert,
    #[error("label code `{0}` is not in the dataset vocabulary")]
    UnknownLabelCode(String),
    #[error("a confirmed annotation needs at least one label or a comment")]
    EmptyConfirmed,
    #[error("an override needs at least one label")]
    MissingOverrideLabels,
    #[error("no record in that direction")]
    AtBoundary,
    #[error("position {position} is outside the dataset ({len} records)")]
    PositionOutOfRange { position: usize, len: usize },
    #[error("annotation `{0}` has already been superseded")]
    Superseded(String),
    #[error("expected revision {expected} but the annotation is at revision {actual}")]
    RevisionMismatch { expected: u32, actual: u32 },
    #[error(transparent)]
    Storage(#[from] StorageError),
}
