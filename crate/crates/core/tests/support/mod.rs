//! Shared harness for workflow property tests: a small campaign world and a
//! random operation driver that checks per-operation properties as it goes.
#![allow(dead_code)]

use std::collections::BTreeSet;
use std::path::Path;
use std::sync::Arc;

use cardiolabel_core::analysis::DiagnosisThresholds;
use cardiolabel_core::annotation::{
    audit, default_vocabulary, Annotation, AnnotationError, AnnotationStatus, Campaign, Dataset, Direction, Draft, ReviewAction,
};
use cardiolabel_core::auth::{Auth, AuthConfig, HashCost, Role};
use cardiolabel_core::catalog::import_dataset;
use cardiolabel_core::storage::{Store, StoreOptions};
use cardiolabel_core::synth::{synthetic_record, SynthSpec};
use cardiolabel_core::wfdb::assemble_manifest;
use rand::rngs::StdRng;
use rand::seq::IndexedRandom;
use rand::Rng;

pub const DATASET: &str = "fuzz";
pub const MEMBERS: [(&str, Role); 4] = [
    ("ann1", Role::Annotator),
    ("ann2", Role::Annotator),
    ("exp1", Role::Expert),
    ("exp2", Role::Expert),
];
pub const OUTSIDER: &str = "outsider";

pub struct World {
    pub campaign: Campaign,
    pub dataset: Dataset,
    /// member user ids in `MEMBERS` order
    pub members: Vec<String>,
    pub outsider: String,
}

fn cheap_auth(store: &Arc<Store>) -> Auth {
    Auth::new(
        store.clone(),
        AuthConfig {
            hash_cost: HashCost::minimal(),
            ..AuthConfig::default()
        },
    )
}

/// Opens the world in `dir`, creating whatever is missing. Safe to call
/// again after an interrupted earlier call.
pub fn open_world(dir: &Path, n_records: usize, durable: bool) -> World {
    let options = StoreOptions { durable };
    let store = Arc::new(if Store::is_initialized(dir) {
        Store::open(dir, options).unwrap()
    } else {
        Store::create(dir, options).unwrap()
    });
    let auth = cheap_auth(&store);
    if auth.identity_of("admin").is_err() {
        auth.create_admin("admin", "adminpass").unwrap();
    }
    let admin = auth.identity_of("admin").unwrap();
    let ensure_user = |name: &str, role: Role| {
        if auth.identity_of(name).is_err() {
            let code = auth.issue_code(&admin, role).unwrap().code;
            auth.register(&code, name, "password").unwrap();
        }
        auth.identity_of(name).unwrap().user_id
    };
    let members: Vec<String> = MEMBERS.iter().map(|(n, r)| ensure_user(n, *r)).collect();
    let outsider = ensure_user(OUTSIDER, Role::Annotator);

    let campaign = Campaign::new(store.clone());
    if campaign.dataset_by_name(DATASET).is_err() {
        let records = (0..n_records)
            .map(|i| {
                let spec = SynthSpec {
                    seconds: 2.0,
                    lead_names: vec!["II".into()],
                    seed: i as u64,
                    ..SynthSpec::default()
                };
                synthetic_record(DATASET, &format!("f{i:03}"), &spec)
            })
            .collect();
        let manifest = assemble_manifest(DATASET, records).unwrap();
        import_dataset(&store, &manifest, default_vocabulary(), &DiagnosisThresholds::default()).unwrap();
    }
    for (name, role) in MEMBERS {
        campaign.grant(DATASET, name, role == Role::Expert).unwrap();
    }
    let dataset = campaign.dataset_by_name(DATASET).unwrap();
    World {
        campaign,
        dataset,
        members,
        outsider,
    }
}

fn random_draft(rng: &mut StdRng) -> Draft {
    let codes = ["NORM", "AF", "ER", "TWC"];
    let mut labels: BTreeSet<String> = BTreeSet::new();
    for c in codes {
        if rng.random_bool(0.3) {
            labels.insert(c.to_string());
        }
    }
    if rng.random_bool(0.03) {
        labels.insert("BOGUS".into());
    }
    let comment = if rng.random_bool(0.2) { "note" } else { "" };
    let status = if rng.random_bool(0.2) {
        AnnotationStatus::Unsure
    } else {
        AnnotationStatus::Confirmed
    };
    Draft {
        labels,
        comment: comment.into(),
        status,
    }
}

/// Errors a random operation may legitimately provoke.
fn expected(e: &AnnotationError) -> bool {
    use AnnotationError::*;
    matches!(
        e,
        NotAMember
            | NotAnExpert
            | NotOwnerNorExpert
            | UnknownLabelCode(_)
            | EmptyConfirmed
            | MissingOverrideLabels
            | AtBoundary
            | Superseded(_)
            | RevisionMismatch { .. }
    )
}

fn ok_or_expected<T>(r: Result<T, AnnotationError>) -> Option<T> {
    match r {
        Ok(v) => Some(v),
        Err(e) if expected(&e) => None,
        Err(e) => panic!("unexpected error: {e:?}"),
    }
}

#[derive(Debug, Default, Clone, Copy)]
pub struct FuzzStats {
    pub ops: usize,
    pub succeeded: usize,
    pub submits: usize,
    pub revisions: usize,
    pub decisions: usize,
}

/// Runs one random operation and checks the properties that can be
/// observed right after it.
pub fn step(w: &World, rng: &mut StdRng, stats: &mut FuzzStats) {
    let c = &w.campaign;
    let ds = &w.dataset;
    let n = ds.record_ids.len();
    let user = if rng.random_bool(0.03) {
        w.outsider.clone()
    } else {
        w.members.choose(rng).unwrap().clone()
    };
    stats.ops += 1;
    let done = match rng.random_range(0..100) {
        0..=39 => {
            let record = &ds.record_ids[rng.random_range(0..n)];
            let r = ok_or_expected(c.submit(&user, record, random_draft(rng)));
            if let Some(s) = &r {
                stats.submits += 1;
                if let Some(next) = s.next.record_id() {
                    assert_not_annotated(c, &user, &ds.dataset_id, next);
                }
            }
            r.is_some()
        }
        40..=54 => {
            let record = &ds.record_ids[rng.random_range(0..n)];
            let Some(target) = pick_target(c, record, rng) else {
                return;
            };
            let expected_rev = rng.random_bool(0.5).then(|| target.revision + rng.random_range(0..2));
            let r = ok_or_expected(c.revise(&user, &target.annotation_id, random_draft(rng), expected_rev));
            stats.revisions += r.is_some() as usize;
            r.is_some()
        }
        55..=69 => {
            let record = &ds.record_ids[rng.random_range(0..n)];
            let Some(target) = pick_target(c, record, rng) else {
                return;
            };
            let action = if rng.random_bool(0.5) {
                ReviewAction::Approve
            } else {
                ReviewAction::Override
            };
            let labels = random_draft(rng).labels;
            let r = ok_or_expected(c.expert_decide(&user, &target.annotation_id, action, labels, ""));
            stats.decisions += r.is_some() as usize;
            r.is_some()
        }
        70..=79 => {
            let dir = if rng.random_bool(0.5) {
                Direction::Next
            } else {
                Direction::Previous
            };
            ok_or_expected(c.navigate(&user, &ds.dataset_id, rng.random_range(0..n), dir)).is_some()
        }
        80..=89 => match ok_or_expected(c.open_dataset(&user, &ds.dataset_id)) {
            Some(resume) => {
                if let Some(r) = resume.record_id() {
                    assert_not_annotated(c, &user, &ds.dataset_id, r);
                } else {
                    assert!(resume.is_complete());
                    let mine = c.list_my_annotations(&user, &ds.dataset_id).unwrap();
                    assert_eq!(mine.len(), n, "complete but not everything annotated");
                }
                true
            }
            None => false,
        },
        90..=94 => ok_or_expected(c.expert_review(&user, &ds.dataset_id)).is_some(),
        _ => {
            let lists: Vec<_> = w
                .members
                .iter()
                .map(|m| c.list_unsure(m, &ds.dataset_id).unwrap())
                .collect();
            assert!(lists.windows(2).all(|p| p[0] == p[1]), "unsure lists differ between members");
            assert!(lists[0].iter().all(|a| a.is_head() && a.status == AnnotationStatus::Unsure));
            true
        }
    };
    stats.succeeded += done as usize;
}

/// Mostly current heads, sometimes stale revisions.
fn pick_target(c: &Campaign, record_id: &str, rng: &mut StdRng) -> Option<Annotation> {
    let history = c.history(record_id).unwrap();
    let heads: Vec<_> = history.iter().filter(|a| a.is_head()).collect();
    if !heads.is_empty() && rng.random_bool(0.8) {
        return heads.choose(rng).map(|a| (*a).clone());
    }
    history.choose(rng).cloned()
}

fn assert_not_annotated(c: &Campaign, user: &str, dataset_id: &str, record_id: &str) {
    let mine = c.list_my_annotations(user, dataset_id).unwrap();
    assert!(
        mine.iter().all(|a| a.record_id != record_id),
        "{record_id} was offered to {user} after they annotated it"
    );
}

/// Audit plus the export contract; panics with the violations.
pub fn check_world(w: &World) {
    let report = w.campaign.store().read(|s| audit(s)).unwrap();
    assert!(report.is_clean(), "invariants violated: {:#?}", report.violations);
    let rows = w.campaign.export_final_labels(&w.dataset.dataset_id).unwrap();
    assert_eq!(rows.len(), w.dataset.record_ids.len());
    let names: BTreeSet<_> = rows.iter().map(|r| r.record_id.clone()).collect();
    assert_eq!(names.len(), rows.len());
}
