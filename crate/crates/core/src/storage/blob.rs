//! Immutable per-record signal files.
//!
//! Layout of `signals/<record_id>.sig` (all integers little-endian):
//!
//! | offset        | size           | field                                   |
//! |---------------|----------------|-----------------------------------------|
//! | 0             | 8              | magic `ECGSIG\0\x01`                    |
//! | 8             | 4              | `u32` lead count `L`                    |
//! | 12            | 4              | reserved, zero                          |
//! | 16            | 8              | `u64` samples per lead `N`              |
//! | 24            | 8·L            | `u64` byte offset of each lead's data   |
//! | 24 + 8·L      | 2·N per lead   | `i16` raw ADC samples, lead-major       |

use std::fs::{self, File, OpenOptions};
use std::io::{Read, Seek, SeekFrom, Write};
use std::ops::Range;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use super::StorageError;

const MAGIC: &[u8; 8] = b"ECGSIG\0\x01";
const FIXED_HEADER: usize = 24;

pub(crate) struct BlobStore {
    dir: PathBuf,
    bytes_read: AtomicU64,
}

impl BlobStore {
    pub(crate) fn new(dir: PathBuf) -> Result<Self, StorageError> {
        fs::create_dir_all(&dir)?;
        Ok(BlobStore {
            dir,
            bytes_read: AtomicU64::new(0),
        })
    }

    fn path(&self, record_id: &str) -> PathBuf {
        self.dir.join(format!("{record_id}.sig"))
    }

    pub(crate) fn bytes_read(&self) -> u64 {
        self.bytes_read.load(Ordering::Relaxed)
    }

    pub(crate) fn put(&self, record_id: &str, leads: &[&[i16]]) -> Result<(), StorageError> {
        let n = leads.first().map_or(0, |l| l.len());
        if leads.iter().any(|l| l.len() != n) {
            return Err(StorageError::Corrupt(format!(
                "record {record_id}: leads differ in length"
            )));
        }
        let path = self.path(record_id);
        if path.exists() {
            return Err(StorageError::SignalExists(record_id.to_string()));
        }
        let data_start = FIXED_HEADER + 8 * leads.len();
        let mut buf = Vec::with_capacity(data_start + 2 * n * leads.len());
        buf.extend_from_slice(MAGIC);
        buf.extend_from_slice(&(leads.len() as u32).to_le_bytes());
        buf.extend_from_slice(&0u32.to_le_bytes());
        buf.extend_from_slice(&(n as u64).to_le_bytes());
        for k in 0..leads.len() {
            buf.extend_from_slice(&((data_start + 2 * n * k) as u64).to_le_bytes());
        }
        for lead in leads {
            for s in lead.iter() {
                buf.extend_from_slice(&s.to_le_bytes());
            }
        }
        let tmp = path.with_extension("sig.tmp");
        {
            let mut f = File::create(&tmp)?;
            f.write_all(&buf)?;
            f.sync_all()?;
        }
        fs::rename(&tmp, &path)?;
        if let Ok(d) = File::open(&self.dir) {
            let _ = d.sync_all();
        }
        Ok(())
    }

    fn read_exact_counted(&self, f: &mut File, buf: &mut [u8]) -> Result<(), StorageError> {
        f.read_exact(buf)?;
        self.bytes_read.fetch_add(buf.len() as u64, Ordering::Relaxed);
        Ok(())
    }

    /// Number of leads and samples per lead.
    pub(crate) fn shape(&self, record_id: &str) -> Result<(usize, usize), StorageError> {
        let mut f = self.open(record_id)?;
        let (leads, n, _) = self.read_header(&mut f, record_id, None)?;
        Ok((leads, n))
    }

    fn open(&self, record_id: &str) -> Result<File, StorageError> {
        let path = self.path(record_id);
        OpenOptions::new().read(true).open(&path).map_err(|e| {
            if e.kind() == std::io::ErrorKind::NotFound {
                StorageError::UnknownRecord(record_id.to_string())
            } else {
                e.into()
            }
        })
    }

    /// Reads the fixed header and, when `lead` is given, that lead's offset.
    fn read_header(
        &self,
        f: &mut File,
        record_id: &str,
        lead: Option<usize>,
    ) -> Result<(usize, usize, u64), StorageError> {
        let mut head = [0u8; FIXED_HEADER];
        self.read_exact_counted(f, &mut head)?;
        if &head[..8] != MAGIC {
            return Err(StorageError::Corrupt(format!("{record_id}: bad signal file magic")));
        }
        let n_leads = u32::from_le_bytes(head[8..12].try_into().unwrap()) as usize;
        let n = u64::from_le_bytes(head[16..24].try_into().unwrap()) as usize;
        let offset = match lead {
            Some(k) if k < n_leads => {
                f.seek(SeekFrom::Start((FIXED_HEADER + 8 * k) as u64))?;
                let mut off = [0u8; 8];
                self.read_exact_counted(f, &mut off)?;
                u64::from_le_bytes(off)
            }
            Some(k) => {
                return Err(StorageError::RangeOutOfBounds {
                    record_id: record_id.to_string(),
                    detail: format!("lead {k} of {n_leads}"),
                })
            }
            None => 0,
        };
        Ok((n_leads, n, offset))
    }

    pub(crate) fn window(
        &self,
        record_id: &str,
        lead: usize,
        range: Range<usize>,
    ) -> Result<Vec<i16>, StorageError> {
        let mut f = self.open(record_id)?;
        let (_, n, offset) = self.read_header(&mut f, record_id, Some(lead))?;
        if range.start > range.end || range.end > n {
            return Err(StorageError::RangeOutOfBounds {
                record_id: record_id.to_string(),
                detail: format!("samples {}..{} of {n}", range.start, range.end),
            });
        }
        f.seek(SeekFrom::Start(offset + 2 * range.start as u64))?;
        let mut bytes = vec![0u8; 2 * range.len()];
        self.read_exact_counted(&mut f, &mut bytes)?;
        Ok(bytes
            .chunks_exact(2)
            .map(|b| i16::from_le_bytes([b[0], b[1]]))
            .collect())
    }
}

pub(crate) fn signals_dir(root: &Path) -> PathBuf {
    root.join("signals")
}
