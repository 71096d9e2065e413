use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{StoreError, ITEM_COLUMN};

pub const DEFAULT_RETENTION_DAYS: u32 = 30;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Domain {
    Known(Vec<String>),
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sensitivity {
    /// A member changes at most `delta` counts.
    Restricted { delta: u32 },
    Unrestricted,
}

/// Privacy-relevant metadata of one groupable column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnMeta {
    pub name: String,
    pub domain: Domain,
    pub sensitivity: Sensitivity,
    /// Bound on how much one member can change a single count.
    pub tau: f64,
}

impl ColumnMeta {
    pub fn new(name: impl Into<String>, domain: Domain, sensitivity: Sensitivity, tau: f64) -> Result<Self, StoreError> {
        let name = name.into();
        let invalid = |reason: String| StoreError::InvalidMeta { column: name.clone(), reason };
        if let Sensitivity::Restricted { delta: 0 } = sensitivity {
            return Err(invalid("restricted sensitivity needs delta >= 1".into()));
        }
        if !(tau >= 1.0 && tau.is_finite()) {
            return Err(invalid(format!("tau must be a finite value >= 1, got {tau}")));
        }
        if let Domain::Known(values) = &domain {
            if values.is_empty() {
                return Err(invalid("known domain must not be empty".into()));
            }
            let mut seen = BTreeSet::new();
            for v in values {
                if !seen.insert(v) {
                    return Err(invalid(format!("duplicate domain value `{v}`")));
                }
            }
        }
        Ok(Self { name, domain, sensitivity, tau })
    }

    /// Metadata used when nothing is declared: unknown domain, unrestricted
    /// sensitivity, tau = 1.
    pub fn undeclared(name: impl Into<String>) -> Self {
        Self { name: name.into(), domain: Domain::Unknown, sensitivity: Sensitivity::Unrestricted, tau: 1.0 }
    }
}

/// Columns of one table. The item column always exists; dimension columns
/// must be listed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableSchema {
    pub name: String,
    pub retention_days: u32,
    columns: BTreeMap<String, ColumnMeta>,
}

impl TableSchema {
    pub fn new(name: impl Into<String>) -> Self {
        let mut columns = BTreeMap::new();
        columns.insert(ITEM_COLUMN.to_string(), ColumnMeta::undeclared(ITEM_COLUMN));
        Self { name: name.into(), retention_days: DEFAULT_RETENTION_DAYS, columns }
    }

    pub fn with_retention_days(mut self, days: u32) -> Self {
        self.retention_days = days;
        self
    }

    /// Adds or replaces a column.
    /// Whether an event dated `date` is inside the retention window at `as_of`.
    pub fn retains(&self, as_of: chrono::NaiveDate, date: chrono::NaiveDate) -> bool {
        date <= as_of && (as_of - date).num_days() < i64::from(self.retention_days)
    }

    pub fn with_column(mut self, meta: ColumnMeta) -> Self {
        self.columns.insert(meta.name.clone(), meta);
        self
    }

    pub fn column(&self, name: &str) -> Option<&ColumnMeta> {
        self.columns.get(name)
    }

    pub fn columns(&self) -> impl Iterator<Item = &ColumnMeta> {
        self.columns.values()
    }

    pub fn has_dimension(&self, name: &str) -> bool {
        name != ITEM_COLUMN && self.columns.contains_key(name)
    }
}

// On-disk form:
//
// [[table]]
// name = "engagement"
// retention_days = 30
//
// [[table.column]]
// name = "seniority"
// domain = ["entry", "senior"]   # omitted: unknown domain
// delta = 1                      # omitted: unrestricted
// tau = 1                        # omitted: 1
#[derive(Debug, Deserialize)]
struct RawSchemaFile {
    #[serde(default)]
    table: Vec<RawTable>,
}

#[derive(Debug, Deserialize)]
struct RawTable {
    name: String,
    retention_days: Option<u32>,
    #[serde(default)]
    column: Vec<RawColumn>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawColumn {
    name: String,
    domain: Option<Vec<String>>,
    delta: Option<u32>,
    tau: Option<f64>,
}

/// Parsed schema configuration: every table's column metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemaFile {
    pub tables: Vec<TableSchema>,
}

impl SchemaFile {
    pub fn parse(text: &str) -> Result<Self, StoreError> {
        let raw: RawSchemaFile =
            toml::from_str(text).map_err(|e| StoreError::Read { path: "<schema>".into(), reason: e.to_string() })?;
        let mut tables = Vec::with_capacity(raw.table.len());
        for t in raw.table {
            let mut schema = TableSchema::new(t.name);
            if let Some(days) = t.retention_days {
                schema = schema.with_retention_days(days);
            }
            for c in t.column {
                let domain = c.domain.map_or(Domain::Unknown, Domain::Known);
                let sensitivity = c.delta.map_or(Sensitivity::Unrestricted, |delta| Sensitivity::Restricted { delta });
                schema = schema.with_column(ColumnMeta::new(c.name, domain, sensitivity, c.tau.unwrap_or(1.0))?);
            }
            tables.push(schema);
        }
        Ok(Self { tables })
    }

    pub fn load(path: &Path) -> Result<Self, StoreError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| StoreError::Read { path: path.display().to_string(), reason: e.to_string() })?;
        Self::parse(&text)
    }

    pub fn table(&self, name: &str) -> Option<&TableSchema> {
        self.tables.iter().find(|t| t.name == name)
    }
}
