//! Core engine for a multi-user ECG annotation service: WFDB record
//! ingestion, rhythm analysis, transactional storage, accounts, and the
//! annotation campaign workflow.

pub mod analysis;
pub mod annotation;
pub mod auth;
pub mod catalog;
pub mod storage;
pub mod synth;
pub mod wfdb;
