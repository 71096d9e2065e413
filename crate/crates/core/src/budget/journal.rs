//! Durable budget log.
//!
//! # Journal layout
//!
//! All integers little-endian.
//!
//! ```text
//! header  : b"DPJ1" (4 bytes) | generation: u64
//! record  : len: u32 | payload (len bytes)
//! payload : kind: u8 | id_len: u16 | analyst id (id_len bytes, UTF-8)
//!           | info: u64 | calls: u64 | unix_millis: i64
//! ```
//!
//! `kind` 1 charges `(info, calls)` at `unix_millis`. `kind` 2 (refresh) and
//! `kind` 3 (administrative reset) zero the usage and set `last_reset` to
//! `unix_millis`; their `info` and `calls` are 0. A short trailing record left
//! by a crash mid-write is ignored on replay.
//!
//! # Snapshot layout
//!
//! JSON `{"version": 1, "generation": g, "records": [BudgetRecord, ...]}`,
//! replaced atomically by rename. A journal whose header generation is below
//! the snapshot's has already been folded in and is skipped.

use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::BudgetRecord;

pub const JOURNAL_MAGIC: &[u8; 4] = b"DPJ1";
pub const SNAPSHOT_VERSION: u32 = 1;
pub const JOURNAL_FILE: &str = "budget.journal";
pub const SNAPSHOT_FILE: &str = "budget.snapshot.json";

#[derive(Debug, thiserror::Error)]
pub enum JournalError {
    #[error("journal i/o on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path} is not a budget journal")]
    BadMagic { path: PathBuf },
    #[error("malformed journal record at byte {offset}: {reason}")]
    Malformed { offset: u64, reason: String },
    #[error("snapshot {path}: {reason}")]
    Snapshot { path: PathBuf, reason: String },
    #[error("journal generation {journal} is newer than snapshot generation {snapshot}")]
    GenerationAhead { journal: u64, snapshot: u64 },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> JournalError + '_ {
    move |source| JournalError::Io { path: path.to_path_buf(), source }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[repr(u8)]
pub enum EntryKind {
    Charge = 1,
    Refresh = 2,
    Reset = 3,
}

impl EntryKind {
    fn from_byte(b: u8) -> Option<Self> {
        match b {
            1 => Some(EntryKind::Charge),
            2 => Some(EntryKind::Refresh),
            3 => Some(EntryKind::Reset),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JournalEntry {
    pub kind: EntryKind,
    pub analyst_id: String,
    pub info: u64,
    pub calls: u64,
    pub unix_millis: i64,
}

impl JournalEntry {
    pub fn timestamp(&self) -> DateTime<Utc> {
        DateTime::from_timestamp_millis(self.unix_millis).unwrap_or_default()
    }

    /// Length prefix plus payload.
    pub fn encode(&self) -> Vec<u8> {
        let id = self.analyst_id.as_bytes();
        let id_len = u16::try_from(id.len()).expect("analyst id longer than 65535 bytes");
        let payload_len = 1 + 2 + id.len() + 8 + 8 + 8;
        let mut out = Vec::with_capacity(4 + payload_len);
        out.extend_from_slice(&(payload_len as u32).to_le_bytes());
        out.push(self.kind as u8);
        out.extend_from_slice(&id_len.to_le_bytes());
        out.extend_from_slice(id);
        out.extend_from_slice(&self.info.to_le_bytes());
        out.extend_from_slice(&self.calls.to_le_bytes());
        out.extend_from_slice(&self.unix_millis.to_le_bytes());
        out
    }

    fn decode(payload: &[u8], offset: u64) -> Result<Self, JournalError> {
        let bad = |reason: &str| JournalError::Malformed { offset, reason: reason.to_string() };
        if payload.len() < 3 {
            return Err(bad("payload too short"));
        }
        let kind = EntryKind::from_byte(payload[0]).ok_or_else(|| bad("unknown kind"))?;
        let id_len = u16::from_le_bytes([payload[1], payload[2]]) as usize;
        if payload.len() != 3 + id_len + 24 {
            return Err(bad("length does not match id length"));
        }
        let id = std::str::from_utf8(&payload[3..3 + id_len]).map_err(|_| bad("analyst id is not UTF-8"))?;
        let rest = &payload[3 + id_len..];
        let word = |i: usize| <[u8; 8]>::try_from(&rest[8 * i..8 * i + 8]).expect("eight bytes");
        Ok(Self {
            kind,
            analyst_id: id.to_string(),
            info: u64::from_le_bytes(word(0)),
            calls: u64::from_le_bytes(word(1)),
            unix_millis: i64::from_le_bytes(word(2)),
        })
    }
}

/// Parses a whole journal image into its generation and entries.
pub fn decode_journal(bytes: &[u8], path: &Path) -> Result<(u64, Vec<JournalEntry>), JournalError> {
    if bytes.len() < 12 || &bytes[..4] != JOURNAL_MAGIC {
        return Err(JournalError::BadMagic { path: path.to_path_buf() });
    }
    let generation = u64::from_le_bytes(bytes[4..12].try_into().expect("eight bytes"));
    let mut entries = Vec::new();
    let mut pos = 12usize;
    while pos + 4 <= bytes.len() {
        let len = u32::from_le_bytes(bytes[pos..pos + 4].try_into().expect("four bytes")) as usize;
        if pos + 4 + len > bytes.len() {
            log::warn!("ignoring torn journal tail at byte {pos}");
            break;
        }
        entries.push(JournalEntry::decode(&bytes[pos + 4..pos + 4 + len], pos as u64)?);
        pos += 4 + len;
    }
    Ok((generation, entries))
}

/// Append handle on the journal file.
pub struct Journal {
    path: PathBuf,
    out: BufWriter<File>,
    generation: u64,
}

impl Journal {
    /// Opens for append, creating an empty generation-0 journal if missing.
    pub fn open(path: &Path) -> Result<(Self, Vec<JournalEntry>), JournalError> {
        let (generation, entries) = if path.exists() {
            let mut bytes = Vec::new();
            File::open(path).and_then(|mut f| f.read_to_end(&mut bytes)).map_err(io_err(path))?;
            decode_journal(&bytes, path)?
        } else {
            write_header(path, 0)?;
            (0, Vec::new())
        };
        let file = OpenOptions::new().append(true).open(path).map_err(io_err(path))?;
        Ok((Self { path: path.to_path_buf(), out: BufWriter::new(file), generation }, entries))
    }

    pub fn generation(&self) -> u64 {
        self.generation
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Writes one record and hands it to the OS.
    pub fn append(&mut self, entry: &JournalEntry) -> Result<(), JournalError> {
        self.out.write_all(&entry.encode()).and_then(|_| self.out.flush()).map_err(io_err(&self.path))
    }

    /// Flushes and fsyncs.
    pub fn sync(&mut self) -> Result<(), JournalError> {
        self.out.flush().map_err(io_err(&self.path))?;
        self.out.get_ref().sync_all().map_err(io_err(&self.path))
    }

    /// Replaces the file with an empty journal of the given generation.
    pub fn restart(&mut self, generation: u64) -> Result<(), JournalError> {
        self.sync()?;
        let tmp = self.path.with_extension("journal.tmp");
        write_header(&tmp, generation)?;
        std::fs::rename(&tmp, &self.path).map_err(io_err(&self.path))?;
        let file = OpenOptions::new().append(true).open(&self.path).map_err(io_err(&self.path))?;
        self.out = BufWriter::new(file);
        self.generation = generation;
        Ok(())
    }
}

fn write_header(path: &Path, generation: u64) -> Result<(), JournalError> {
    let mut f = File::create(path).map_err(io_err(path))?;
    f.write_all(JOURNAL_MAGIC).map_err(io_err(path))?;
    f.write_all(&generation.to_le_bytes()).map_err(io_err(path))?;
    f.sync_all().map_err(io_err(path))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetSnapshot {
    pub version: u32,
    pub generation: u64,
    pub records: Vec<BudgetRecord>,
}

impl BudgetSnapshot {
    pub fn load(path: &Path) -> Result<Option<Self>, JournalError> {
        if !path.exists() {
            return Ok(None);
        }
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        let snap: BudgetSnapshot = serde_json::from_str(&text)
            .map_err(|e| JournalError::Snapshot { path: path.to_path_buf(), reason: e.to_string() })?;
        if snap.version != SNAPSHOT_VERSION {
            return Err(JournalError::Snapshot {
                path: path.to_path_buf(),
                reason: format!("unsupported version {}", snap.version),
            });
        }
        Ok(Some(snap))
    }

    /// Writes to a temporary file, fsyncs and renames over `path`.
    pub fn save(&self, path: &Path) -> Result<(), JournalError> {
        let tmp = path.with_extension("json.tmp");
        let text = serde_json::to_vec_pretty(self).expect("snapshot serializes");
        let mut f = File::create(&tmp).map_err(io_err(&tmp))?;
        f.write_all(&text).and_then(|_| f.sync_all()).map_err(io_err(&tmp))?;
        std::fs::rename(&tmp, path).map_err(io_err(path))
    }
}
