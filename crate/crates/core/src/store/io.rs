//! Record files and table snapshots.
//!
//! NDJSON: one object per line with `member_id`, `item`, `event_date`
//! (`YYYY-MM-DD`) and one string field per dimension column.
//!
//! CSV: a header row naming `member_id`, `item`, `event_date` and the
//! dimension columns; an empty cell means the dimension is absent.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::{EventRecord, IngestOptions, RowError, StoreError, Table, TableSchema};

pub const SNAPSHOT_VERSION: u32 = 1;

fn read_err(path: &str, e: impl ToString) -> StoreError {
    StoreError::Read { path: path.to_string(), reason: e.to_string() }
}

pub fn read_ndjson<R: Read>(reader: R) -> Result<Vec<EventRecord>, StoreError> {
    let mut out = Vec::new();
    let mut errors = Vec::new();
    for (row, line) in BufReader::new(reader).lines().enumerate() {
        let line = line.map_err(|e| read_err("<ndjson>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<EventRecord>(&line) {
            Ok(r) => out.push(r),
            Err(e) => errors.push(RowError { row, reason: e.to_string() }),
        }
    }
    if errors.is_empty() {
        Ok(out)
    } else {
        Err(StoreError::Schema(errors))
    }
}

pub fn read_csv<R: Read>(reader: R) -> Result<Vec<EventRecord>, StoreError> {
    let mut rdr = csv::Reader::from_reader(reader);
    let headers = rdr.headers().map_err(|e| read_err("<csv>", e))?.clone();
    let position = |name: &str| headers.iter().position(|h| h == name);
    let (Some(member), Some(item), Some(date)) = (position("member_id"), position("item"), position("event_date"))
    else {
        return Err(read_err("<csv>", "header must contain member_id, item and event_date"));
    };

    let mut out = Vec::new();
    let mut errors = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = match rec {
            Ok(r) => r,
            Err(e) => {
                errors.push(RowError { row, reason: e.to_string() });
                continue;
            }
        };
        let event_date = match NaiveDate::parse_from_str(&rec[date], "%Y-%m-%d") {
            Ok(d) => d,
            Err(e) => {
                errors.push(RowError { row, reason: format!("bad event_date `{}`: {e}", &rec[date]) });
                continue;
            }
        };
        let dimensions: BTreeMap<String, String> = headers
            .iter()
            .zip(rec.iter())
            .enumerate()
            .filter(|(i, (_, v))| ![member, item, date].contains(i) && !v.is_empty())
            .map(|(_, (h, v))| (h.to_string(), v.to_string()))
            .collect();
        out.push(EventRecord { member_id: rec[member].to_string(), item: rec[item].to_string(), event_date, dimensions });
    }
    if errors.is_empty() {
        Ok(out)
    } else {
        Err(StoreError::Schema(errors))
    }
}

/// Reads a `.csv` file as CSV and anything else as NDJSON.
pub fn read_records(path: &Path) -> Result<Vec<EventRecord>, StoreError> {
    let name = path.display().to_string();
    let file = std::fs::File::open(path).map_err(|e| read_err(&name, e))?;
    let is_csv = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    let parsed = if is_csv { read_csv(file) } else { read_ndjson(file) };
    parsed.map_err(|e| match e {
        StoreError::Read { reason, .. } => StoreError::Read { path: name, reason },
        other => other,
    })
}

/// Accepted records of one table plus everything needed to rebuild it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Snapshot {
    pub version: u32,
    pub as_of: NaiveDate,
    pub schema: TableSchema,
    pub records: Vec<EventRecord>,
}

impl Snapshot {
    pub fn new(schema: TableSchema, as_of: NaiveDate, records: Vec<EventRecord>) -> Self {
        Self { version: SNAPSHOT_VERSION, as_of, schema, records }
    }

    pub fn to_table(&self) -> Result<Table, StoreError> {
        if self.version != SNAPSHOT_VERSION {
            return Err(StoreError::SnapshotVersion(self.version));
        }
        Ok(Table::ingest(self.schema.clone(), &self.records, IngestOptions { as_of: self.as_of })?.table)
    }

    pub fn save(&self, path: &Path) -> Result<(), StoreError> {
        let name = path.display().to_string();
        let text = serde_json::to_string(self).map_err(|e| read_err(&name, e))?;
        std::fs::write(path, text).map_err(|e| read_err(&name, e))
    }

    pub fn load(path: &Path) -> Result<Self, StoreError> {
        let name = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|e| read_err(&name, e))?;
        let snap: Snapshot = serde_json::from_str(&text).map_err(|e| read_err(&name, e))?;
        if snap.version != SNAPSHOT_VERSION {
            return Err(StoreError::SnapshotVersion(snap.version));
        }
        Ok(snap)
    }
}
