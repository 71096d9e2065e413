//! Synthetic workloads shared by the benchmarks.

use chrono::NaiveDate;
use dpolap::store::{Aggregation, EventRecord, HistogramSlice, IngestOptions, Table, TableSchema};

/// Zipf(s) counts over `n` elements, scaled so rank 1 has `top` events.
pub fn zipf_counts(n: usize, s: f64, top: f64) -> Vec<(String, u64)> {
    (1..=n).map(|r| (format!("e{r:06}"), (top / (r as f64).powf(s)).round() as u64)).collect()
}

pub fn zipf_slice(n: usize, s: f64, top: f64, limit: usize) -> HistogramSlice {
    HistogramSlice::from_counts(zipf_counts(n, s, top), limit, Aggregation::Distinct)
}

/// A table of `rows` events over `items` items and `members` members, dated
/// within a month of `as_of`.
pub fn synthetic_table(rows: usize, items: u64, members: u64, as_of: NaiveDate) -> Table {
    let mut x = 0x9e37_79b9_7f4a_7c15u64;
    let mut next = move || {
        x ^= x << 13;
        x ^= x >> 7;
        x ^= x << 17;
        x
    };
    let records: Vec<EventRecord> = (0..rows)
        .map(|_| {
            // Skewed item choice: square a uniform index.
            let u = (next() % 1_000_000) as f64 / 1_000_000.0;
            EventRecord {
                member_id: format!("m{}", next() % members),
                item: format!("i{}", (u * u * items as f64) as u64),
                event_date: as_of - chrono::Days::new(next() % 28),
                dimensions: Default::default(),
            }
        })
        .collect();
    Table::ingest(TableSchema::new("bench"), &records, IngestOptions { as_of }).expect("ingest").table
}
