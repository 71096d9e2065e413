use std::collections::{BTreeMap, BTreeSet, HashMap};

use chrono::NaiveDate;

use super::{
    Aggregation, Domain, DomainSize, EventRecord, Filter, HistogramSlice, RowError, StoreError, TableSchema,
    ITEM_COLUMN,
};

const NULL: u32 = u32::MAX;

/// Dictionary-encoded column. Codes follow the sorted order of the values, so
/// comparing codes compares element ids.
#[derive(Debug, Clone)]
struct Column {
    dict: Vec<String>,
    codes: Vec<u32>,
    raw_counts: Vec<u64>,
    distinct_counts: Vec<u64>,
}

impl Column {
    fn build(values: Vec<Option<&str>>, members: &[u32]) -> Self {
        let distinct: BTreeSet<&str> = values.iter().flatten().copied().collect();
        let dict: Vec<String> = distinct.iter().map(|s| s.to_string()).collect();
        let lookup: HashMap<&str, u32> = distinct.iter().enumerate().map(|(i, s)| (*s, i as u32)).collect();
        let codes: Vec<u32> = values.iter().map(|v| v.map_or(NULL, |s| lookup[s])).collect();

        let all_rows = |_: usize| true;
        let raw_counts = raw_counts(&codes, dict.len(), all_rows);
        let distinct_counts = distinct_counts(&codes, members, dict.len(), all_rows);
        Self { dict, codes, raw_counts, distinct_counts }
    }

    fn code_of(&self, value: &str) -> Option<u32> {
        self.dict.binary_search_by(|v| v.as_str().cmp(value)).ok().map(|i| i as u32)
    }
}

fn raw_counts(codes: &[u32], n: usize, keep: impl Fn(usize) -> bool) -> Vec<u64> {
    let mut counts = vec![0u64; n];
    for (row, &c) in codes.iter().enumerate() {
        if c != NULL && keep(row) {
            counts[c as usize] += 1;
        }
    }
    counts
}

fn distinct_counts(codes: &[u32], members: &[u32], n: usize, keep: impl Fn(usize) -> bool) -> Vec<u64> {
    let mut pairs: Vec<u64> = codes
        .iter()
        .zip(members)
        .enumerate()
        .filter(|&(row, (&c, _))| c != NULL && keep(row))
        .map(|(_, (&c, &m))| ((c as u64) << 32) | m as u64)
        .collect();
    pairs.sort_unstable();
    pairs.dedup();
    let mut counts = vec![0u64; n];
    for p in pairs {
        counts[(p >> 32) as usize] += 1;
    }
    counts
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IngestOptions {
    /// Snapshot date; records newer than this or older than the retention
    /// window are rejected.
    pub as_of: NaiveDate,
}

#[derive(Debug)]
pub struct IngestReport {
    pub table: Table,
    /// Records dropped because they fell outside the retention window.
    pub rejected: usize,
}

/// Immutable columnar table.
#[derive(Debug, Clone)]
pub struct Table {
    schema: TableSchema,
    as_of: NaiveDate,
    rows: usize,
    members: Vec<u32>,
    columns: BTreeMap<String, Column>,
}

impl Table {
    /// Validates and indexes `records`. Schema violations fail the whole
    /// batch; records outside the retention window are dropped and counted.
    pub fn ingest(schema: TableSchema, records: &[EventRecord], opts: IngestOptions) -> Result<IngestReport, StoreError> {
        let mut errors = Vec::new();
        for (row, r) in records.iter().enumerate() {
            if let Some(reason) = schema_violation(&schema, r) {
                errors.push(RowError { row, reason });
            }
        }
        if !errors.is_empty() {
            return Err(StoreError::Schema(errors));
        }

        let kept: Vec<&EventRecord> = records.iter().filter(|r| schema.retains(opts.as_of, r.event_date)).collect();
        let rejected = records.len() - kept.len();

        let mut member_codes: HashMap<&str, u32> = HashMap::new();
        let members: Vec<u32> = kept
            .iter()
            .map(|r| {
                let next = member_codes.len() as u32;
                *member_codes.entry(r.member_id.as_str()).or_insert(next)
            })
            .collect();

        let mut columns = BTreeMap::new();
        for meta in schema.columns() {
            let values: Vec<Option<&str>> = if meta.name == ITEM_COLUMN {
                kept.iter().map(|r| Some(r.item.as_str())).collect()
            } else {
                kept.iter().map(|r| r.dimensions.get(&meta.name).map(String::as_str)).collect()
            };
            columns.insert(meta.name.clone(), Column::build(values, &members));
        }

        log::debug!("ingested {} rows into `{}` ({} outside retention)", kept.len(), schema.name, rejected);
        let table = Table { schema, as_of: opts.as_of, rows: kept.len(), members, columns };
        Ok(IngestReport { table, rejected })
    }

    pub fn name(&self) -> &str {
        &self.schema.name
    }

    pub fn schema(&self) -> &TableSchema {
        &self.schema
    }

    pub fn as_of(&self) -> NaiveDate {
        self.as_of
    }

    pub fn num_rows(&self) -> usize {
        self.rows
    }

    fn column(&self, name: &str) -> Result<&Column, StoreError> {
        self.columns.get(name).ok_or_else(|| StoreError::UnknownColumn(name.to_string()))
    }

    /// Row predicate for `filter`, or `None` when every row passes.
    fn row_mask(&self, filter: &Filter) -> Result<Option<Vec<bool>>, StoreError> {
        if filter.is_empty() {
            return Ok(None);
        }
        let mut mask = vec![true; self.rows];
        for (col_name, values) in filter.normalized() {
            let col = self.column(&col_name)?;
            let allowed: Vec<u32> = values.iter().filter_map(|v| col.code_of(v)).collect();
            for (keep, code) in mask.iter_mut().zip(&col.codes) {
                *keep = *keep && allowed.contains(code);
            }
        }
        Ok(Some(mask))
    }

    fn counts(&self, col: &Column, filter: &Filter, aggregation: Aggregation) -> Result<Vec<u64>, StoreError> {
        Ok(match (self.row_mask(filter)?, aggregation) {
            (None, Aggregation::Raw) => col.raw_counts.clone(),
            (None, Aggregation::Distinct) => col.distinct_counts.clone(),
            (Some(mask), Aggregation::Raw) => raw_counts(&col.codes, col.dict.len(), |r| mask[r]),
            (Some(mask), Aggregation::Distinct) => {
                distinct_counts(&col.codes, &self.members, col.dict.len(), |r| mask[r])
            }
        })
    }

    /// Exact top-`limit` counts of `group_by` among rows matching `filter`.
    pub fn top_counts(
        &self,
        group_by: &str,
        filter: &Filter,
        limit: usize,
        aggregation: Aggregation,
    ) -> Result<HistogramSlice, StoreError> {
        if limit == 0 {
            return Err(StoreError::ZeroLimit);
        }
        let col = self.column(group_by)?;
        let counts = self.counts(col, filter, aggregation)?;
        let mut ranked: Vec<(u32, u64)> =
            counts.iter().enumerate().filter(|(_, &c)| c > 0).map(|(code, &c)| (code as u32, c)).collect();
        // Codes are in id order, so this is count desc then id asc.
        let by_rank = |a: &(u32, u64), b: &(u32, u64)| b.1.cmp(&a.1).then(a.0.cmp(&b.0));
        if ranked.len() > limit {
            ranked.select_nth_unstable_by(limit - 1, by_rank);
            ranked.truncate(limit);
        }
        ranked.sort_unstable_by(by_rank);
        let entries = ranked.into_iter().map(|(code, c)| (col.dict[code as usize].clone(), c)).collect();
        Ok(HistogramSlice { entries, limit, aggregation })
    }

    /// Counts over the full declared domain of `column`, in declared order,
    /// zero-filled.
    pub fn domain_counts(
        &self,
        column: &str,
        filter: &Filter,
        aggregation: Aggregation,
    ) -> Result<Vec<(String, u64)>, StoreError> {
        let col = self.column(column)?;
        let Some(Domain::Known(values)) = self.schema.column(column).map(|m| &m.domain) else {
            return Err(StoreError::UndeclaredDomain(column.to_string()));
        };
        let counts = self.counts(col, filter, aggregation)?;
        Ok(values
            .iter()
            .map(|v| (v.clone(), col.code_of(v).map_or(0, |c| counts[c as usize])))
            .collect())
    }

    pub fn domain_size(&self, column: &str) -> Result<DomainSize, StoreError> {
        let meta = self.schema.column(column).ok_or_else(|| StoreError::UnknownColumn(column.to_string()))?;
        Ok(match &meta.domain {
            Domain::Known(values) => DomainSize::Known(values.len()),
            Domain::Unknown => DomainSize::Unknown,
        })
    }
}

fn schema_violation(schema: &TableSchema, r: &EventRecord) -> Option<String> {
    if r.member_id.is_empty() {
        return Some("empty member_id".into());
    }
    if r.item.is_empty() {
        return Some("empty item".into());
    }
    if let Some(Domain::Known(values)) = schema.column(ITEM_COLUMN).map(|m| &m.domain) {
        if !values.contains(&r.item) {
            return Some(format!("item `{}` outside the declared domain", r.item));
        }
    }
    for (col, value) in &r.dimensions {
        if !schema.has_dimension(col) {
            return Some(format!("unknown column `{col}`"));
        }
        if let Some(Domain::Known(values)) = schema.column(col).map(|m| &m.domain) {
            if !values.contains(value) {
                return Some(format!("value `{value}` of `{col}` outside the declared domain"));
            }
        }
    }
    None
}
