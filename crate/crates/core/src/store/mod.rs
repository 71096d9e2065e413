//! In-process columnar event store.
//!
//! Tables are built once from a batch of [`EventRecord`]s and are immutable
//! afterwards; re-ingesting produces a new [`Table`]. Queries are exact
//! group-by counts returned as a [`HistogramSlice`] truncated to the requested
//! number of ranks.

mod io;
mod schema;
mod table;

use std::collections::{BTreeMap, BTreeSet};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

pub use io::{read_csv, read_ndjson, read_records, Snapshot, SNAPSHOT_VERSION};
pub use schema::{ColumnMeta, Domain, SchemaFile, Sensitivity, TableSchema, DEFAULT_RETENTION_DAYS};
pub use table::{IngestOptions, IngestReport, Table};

/// Name of the implicit column holding the engaged element.
pub const ITEM_COLUMN: &str = "item";

/// One engagement event.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventRecord {
    pub member_id: String,
    pub item: String,
    pub event_date: NaiveDate,
    #[serde(flatten)]
    pub dimensions: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    /// Count distinct members per element.
    #[default]
    Distinct,
    /// Count rows per element.
    Raw,
}

impl Aggregation {
    pub fn as_str(self) -> &'static str {
        match self {
            Aggregation::Distinct => "distinct",
            Aggregation::Raw => "raw",
        }
    }
}

/// A conjunction of `column ∈ {values}` predicates. Equality is the
/// single-value case.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Filter {
    #[serde(default)]
    pub conjuncts: Vec<Predicate>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Predicate {
    pub column: String,
    pub values: BTreeSet<String>,
}

impl Predicate {
    pub fn eq(column: impl Into<String>, value: impl Into<String>) -> Self {
        Self { column: column.into(), values: [value.into()].into_iter().collect() }
    }

    pub fn any_of<I, S>(column: impl Into<String>, values: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self { column: column.into(), values: values.into_iter().map(Into::into).collect() }
    }
}

impl Filter {
    pub fn all() -> Self {
        Self::default()
    }

    pub fn and(mut self, predicate: Predicate) -> Self {
        self.conjuncts.push(predicate);
        self
    }

    pub fn is_empty(&self) -> bool {
        self.conjuncts.is_empty()
    }

    /// Column → allowed values, with repeated columns intersected.
    pub fn normalized(&self) -> BTreeMap<String, BTreeSet<String>> {
        let mut out: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        for p in &self.conjuncts {
            match out.get_mut(&p.column) {
                Some(existing) => existing.retain(|v| p.values.contains(v)),
                None => {
                    out.insert(p.column.clone(), p.values.clone());
                }
            }
        }
        out
    }
}

/// Exact counts for the top ranks of one group-by.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistogramSlice {
    /// Sorted by count descending, then element id ascending.
    pub entries: Vec<(String, u64)>,
    /// Number of ranks requested from the store.
    pub limit: usize,
    pub aggregation: Aggregation,
}

impl HistogramSlice {
    /// Builds a slice from arbitrary counts, applying the store's ordering and
    /// truncation rules. Zero counts are dropped.
    pub fn from_counts<I, S>(counts: I, limit: usize, aggregation: Aggregation) -> Self
    where
        I: IntoIterator<Item = (S, u64)>,
        S: Into<String>,
    {
        let mut entries: Vec<(String, u64)> =
            counts.into_iter().map(|(e, c)| (e.into(), c)).filter(|(_, c)| *c > 0).collect();
        entries.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        entries.truncate(limit);
        Self { entries, limit, aggregation }
    }

    /// Count at 1-based `rank`, or 0 past the last real element.
    pub fn rank_count(&self, rank: usize) -> u64 {
        assert!(rank >= 1, "ranks are 1-based");
        self.entries.get(rank - 1).map_or(0, |e| e.1)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DomainSize {
    Known(usize),
    Unknown,
}

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("unknown table `{0}`")]
    UnknownTable(String),
    #[error("fetch limit must be at least 1")]
    ZeroLimit,
    #[error("column `{0}` has no declared domain")]
    UndeclaredDomain(String),
    #[error("invalid column metadata for `{column}`: {reason}")]
    InvalidMeta { column: String, reason: String },
    #[error("{} record(s) do not match the schema: {}", .0.len(), summarize(.0))]
    Schema(Vec<RowError>),
    #[error("failed to read `{path}`: {reason}")]
    Read { path: String, reason: String },
    #[error("unsupported snapshot version {0}")]
    SnapshotVersion(u32),
}

fn summarize(rows: &[RowError]) -> String {
    let shown: Vec<String> = rows.iter().take(5).map(|r| format!("row {}: {}", r.row, r.reason)).collect();
    let mut s = shown.join("; ");
    if rows.len() > 5 {
        s.push_str("; ...");
    }
    s
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowError {
    pub row: usize,
    pub reason: String,
}
