//! Durable storage: an embedded transactional key-value store for aggregates
//! and immutable per-record files for raw signal data.
//!
//! Aggregates are JSON documents keyed by string. Write transactions are
//! serialized by the underlying engine, so a transaction observes every
//! commit that preceded it and commits atomically; read transactions see a
//! consistent snapshot and never block writers.

mod blob;

use std::ops::Range;
use std::path::{Path, PathBuf};

use redb::{Database, Durability, ReadableTable, TableDefinition};
use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

use blob::BlobStore;

pub const SCHEMA_VERSION: u64 = 1;
const DB_FILE: &str = "store.redb";

#[derive(Debug, Error)]
pub enum StorageError {
    #[error("I/O failure: {0}")]
    Io(#[from] std::io::Error),
    #[error("database failure: {0}")]
    Db(String),
    #[error("stored document is not valid: {0}")]
    Serde(#[from] serde_json::Error),
    #[error("data directory {0} is already initialized")]
    AlreadyInitialized(PathBuf),
    #[error("data directory {0} is not initialized")]
    NotInitialized(PathBuf),
    #[error("schema version {found} does not match supported version {expected}")]
    SchemaMismatch { found: u64, expected: u64 },
    #[error("unknown record `{0}`")]
    UnknownRecord(String),
    #[error("signal data for `{0}` already exists")]
    SignalExists(String),
    #[error("range out of bounds for `{record_id}`: {detail}")]
    RangeOutOfBounds { record_id: String, detail: String },
    #[error("corrupt data: {0}")]
    Corrupt(String),
}

macro_rules! db_error {
    ($($t:ty),*) => {$(
        impl From<$t> for StorageError {
            fn from(e: $t) -> Self {
                StorageError::Db(e.to_string())
            }
        }
    )*};
}
db_error!(
    redb::DatabaseError,
    redb::TransactionError,
    redb::TableError,
    redb::StorageError,
    redb::CommitError
);

type Def = TableDefinition<'static, &'static str, &'static [u8]>;

/// Logical tables. Keys are opaque strings; composite keys join their parts
/// with `/`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Table {
    Accounts,
    Usernames,
    Codes,
    Sessions,
    Datasets,
    DatasetNames,
    Records,
    Annotations,
    /// `record_id/annotator_id` to that annotator's latest own annotation
    Heads,
    /// `record_id/annotation_id` to the annotation id, for every revision
    History,
    /// `annotation_id/decision_id` to a review decision
    Decisions,
    /// `user_id/dataset_id` to the last submitted position
    Cursors,
    Meta,
}

impl Table {
    const ALL: [Table; 13] = [
        Table::Accounts,
        Table::Usernames,
        Table::Codes,
        Table::Sessions,
        Table::Datasets,
        Table::DatasetNames,
        Table::Records,
        Table::Annotations,
        Table::Heads,
        Table::History,
        Table::Decisions,
        Table::Cursors,
        Table::Meta,
    ];

    fn def(self) -> Def {
        match self {
            Table::Accounts => TableDefinition::new("accounts"),
            Table::Usernames => TableDefinition::new("usernames"),
            Table::Codes => TableDefinition::new("codes"),
            Table::Sessions => TableDefinition::new("sessions"),
            Table::Datasets => TableDefinition::new("datasets"),
            Table::DatasetNames => TableDefinition::new("dataset_names"),
            Table::Records => TableDefinition::new("records"),
            Table::Annotations => TableDefinition::new("annotations"),
            Table::Heads => TableDefinition::new("heads"),
            Table::History => TableDefinition::new("history"),
            Table::Decisions => TableDefinition::new("decisions"),
            Table::Cursors => TableDefinition::new("cursors"),
            Table::Meta => TableDefinition::new("meta"),
        }
    }
}

fn decode<T: DeserializeOwned>(bytes: &[u8]) -> Result<T, StorageError> {
    Ok(serde_json::from_slice(bytes)?)
}

/// Read access shared by snapshots and write transactions.
pub trait Reader {
    fn get_raw(&self, table: Table, key: &str) -> Result<Option<Vec<u8>>, StorageError>;

    /// All entries whose key starts with `prefix`, in key order.
    fn scan_raw(&self, table: Table, prefix: &str) -> Result<Vec<(String, Vec<u8>)>, StorageError>;

    fn get<T: DeserializeOwned>(&self, table: Table, key: &str) -> Result<Option<T>, StorageError> {
        self.get_raw(table, key)?.map(|b| decode(&b)).transpose()
    }

    fn scan<T: DeserializeOwned>(
        &self,
        table: Table,
        prefix: &str,
    ) -> Result<Vec<(String, T)>, StorageError> {
        self.scan_raw(table, prefix)?
            .into_iter()
            .map(|(k, v)| Ok((k, decode(&v)?)))
            .collect()
    }
}

fn scan_table<T: ReadableTable<&'static str, &'static [u8]>>(
    t: &T,
    prefix: &str,
) -> Result<Vec<(String, Vec<u8>)>, StorageError> {
    let mut out = Vec::new();
    for entry in t.range(prefix..)? {
        let (k, v) = entry?;
        if !k.value().starts_with(prefix) {
            break;
        }
        out.push((k.value().to_string(), v.value().to_vec()));
    }
    Ok(out)
}

/// A consistent read-only view.
pub struct Snapshot {
    inner: redb::ReadTransaction,
}

impl Reader for Snapshot {
    fn get_raw(&self, table: Table, key: &str) -> Result<Option<Vec<u8>>, StorageError> {
        let t = self.inner.open_table(table.def())?;
        Ok(t.get(key)?.map(|v| v.value().to_vec()))
    }

    fn scan_raw(&self, table: Table, prefix: &str) -> Result<Vec<(String, Vec<u8>)>, StorageError> {
        scan_table(&self.inner.open_table(table.def())?, prefix)
    }
}

/// A write transaction. Everything done through it becomes visible together
/// on commit, or not at all.
pub struct Txn {
    inner: redb::WriteTransaction,
}

impl Reader for Txn {
    fn get_raw(&self, table: Table, key: &str) -> Result<Option<Vec<u8>>, StorageError> {
        let t = self.inner.open_table(table.def())?;
        let v = t.get(key)?.map(|v| v.value().to_vec());
        Ok(v)
    }

    fn scan_raw(&self, table: Table, prefix: &str) -> Result<Vec<(String, Vec<u8>)>, StorageError> {
        let t = self.inner.open_table(table.def())?;
        let v = scan_table(&t, prefix);
        v
    }
}

impl Txn {
    pub fn put<T: Serialize + ?Sized>(
        &mut self,
        table: Table,
        key: &str,
        value: &T,
    ) -> Result<(), StorageError> {
        let bytes = serde_json::to_vec(value)?;
        let mut t = self.inner.open_table(table.def())?;
        t.insert(key, bytes.as_slice())?;
        Ok(())
    }

    pub fn delete(&mut self, table: Table, key: &str) -> Result<bool, StorageError> {
        let mut t = self.inner.open_table(table.def())?;
        let existed = t.remove(key)?.is_some();
        Ok(existed)
    }

    /// Next value of a named monotonically increasing counter, starting at 1.
    pub fn next_seq(&mut self, name: &str) -> Result<u64, StorageError> {
        let key = format!("seq/{name}");
        let next = self.get::<u64>(Table::Meta, &key)?.unwrap_or(0) + 1;
        self.put(Table::Meta, &key, &next)?;
        Ok(next)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct StoreOptions {
    /// Flush every commit to stable storage before returning. Turning this
    /// off is only sensible for throwaway stores in tests.
    pub durable: bool,
}

impl Default for StoreOptions {
    fn default() -> Self {
        StoreOptions { durable: true }
    }
}

pub struct Store {
    root: PathBuf,
    db: Database,
    blobs: BlobStore,
    options: StoreOptions,
}

impl std::fmt::Debug for Store {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Store").field("root", &self.root).finish()
    }
}

impl Store {
    pub fn is_initialized(dir: &Path) -> bool {
        dir.join(DB_FILE).exists()
    }

    /// Initializes a fresh data directory. Refuses to touch an existing one.
    pub fn create(dir: &Path, options: StoreOptions) -> Result<Store, StorageError> {
        if Self::is_initialized(dir) {
            return Err(StorageError::AlreadyInitialized(dir.to_path_buf()));
        }
        std::fs::create_dir_all(dir)?;
        let db = Database::create(dir.join(DB_FILE))?;
        let store = Store {
            root: dir.to_path_buf(),
            blobs: BlobStore::new(blob::signals_dir(dir))?,
            db,
            options,
        };
        store.transact(|txn| {
            for t in Table::ALL {
                txn.inner.open_table(t.def())?;
            }
            txn.put(Table::Meta, "schema_version", &SCHEMA_VERSION)
        })?;
        Ok(store)
    }

    pub fn open(dir: &Path, options: StoreOptions) -> Result<Store, StorageError> {
        if !Self::is_initialized(dir) {
            return Err(StorageError::NotInitialized(dir.to_path_buf()));
        }
        let db = Database::open(dir.join(DB_FILE))?;
        let store = Store {
            root: dir.to_path_buf(),
            blobs: BlobStore::new(blob::signals_dir(dir))?,
            db,
            options,
        };
        let found: Option<u64> = store.read(|s| s.get(Table::Meta, "schema_version"))?;
        match found {
            Some(v) if v == SCHEMA_VERSION => Ok(store),
            Some(v) => Err(StorageError::SchemaMismatch {
                found: v,
                expected: SCHEMA_VERSION,
            }),
            None => Err(StorageError::Corrupt("schema version missing".into())),
        }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Runs `f` inside a write transaction, committing when it returns `Ok`
    /// and rolling back when it returns `Err`.
    pub fn transact<T, E>(&self, f: impl FnOnce(&mut Txn) -> Result<T, E>) -> Result<T, E>
    where
        E: From<StorageError>,
    {
        let mut inner = self.db.begin_write().map_err(StorageError::from)?;
        if !self.options.durable {
            inner.set_durability(Durability::None);
        }
        let mut txn = Txn { inner };
        match f(&mut txn) {
            Ok(v) => {
                txn.inner.commit().map_err(StorageError::from)?;
                Ok(v)
            }
            Err(e) => {
                txn.inner.abort().map_err(StorageError::from)?;
                Err(e)
            }
        }
    }

    pub fn read<T, E>(&self, f: impl FnOnce(&Snapshot) -> Result<T, E>) -> Result<T, E>
    where
        E: From<StorageError>,
    {
        let inner = self.db.begin_read().map_err(StorageError::from)?;
        f(&Snapshot { inner })
    }

    /// Writes a record's raw samples, one slice per lead. Signal data is
    /// immutable: writing the same record twice is an error.
    pub fn put_signal(&self, record_id: &str, leads: &[&[i16]]) -> Result<(), StorageError> {
        self.blobs.put(record_id, leads)
    }

    /// Raw samples `range` of one lead. Only the requested bytes are read.
    pub fn get_signal_window(
        &self,
        record_id: &str,
        lead: usize,
        range: Range<usize>,
    ) -> Result<Vec<i16>, StorageError> {
        self.blobs.window(record_id, lead, range)
    }

    /// `(lead count, samples per lead)` of a stored signal.
    pub fn signal_shape(&self, record_id: &str) -> Result<(usize, usize), StorageError> {
        self.blobs.shape(record_id)
    }

    /// Total bytes read from signal files since the store was opened.
    pub fn signal_bytes_read(&self) -> u64 {
        self.blobs.bytes_read()
    }
}
