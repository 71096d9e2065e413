//! Canonical query text, the byte string that keys a query's noise.
//!
//! ```text
//! agg=<distinct|raw>;delta=<Δ|none>;filter=<filter>;group_by=<col>;k=<k>;
//! sensitivity=<restricted|unrestricted>;table=<name>;tau=<τ>
//! ```
//!
//! (one line, no whitespace). Keys appear in this byte order. `<filter>` is
//! empty for no filter, otherwise `col:[v1,v2]` terms joined by `&`, with
//! columns in byte order, values in byte order and deduplicated, and repeated
//! columns intersected. Every name and value is percent-encoded: bytes outside
//! `A-Z a-z 0-9 - . _` become `%XX` in upper-case hex. `τ` uses the shortest
//! decimal that round-trips (`1`, `2.5`). `k` and `Δ` are plain decimals.

use std::fmt::Write as _;

use crate::mechanisms::QueryClass;
use crate::store::{Aggregation, Filter};

pub fn percent_encode(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for b in s.bytes() {
        if b.is_ascii_alphanumeric() || matches!(b, b'-' | b'.' | b'_') {
            out.push(b as char);
        } else {
            let _ = write!(out, "%{b:02X}");
        }
    }
    out
}

pub fn canonical_filter(filter: &Filter) -> String {
    filter
        .normalized()
        .iter()
        .map(|(col, values)| {
            let vs: Vec<String> = values.iter().map(|v| percent_encode(v)).collect();
            format!("{}:[{}]", percent_encode(col), vs.join(","))
        })
        .collect::<Vec<_>>()
        .join("&")
}

/// The fields that identify a query for noise purposes.
#[derive(Debug, Clone, Copy)]
pub struct CanonicalParts<'a> {
    pub table: &'a str,
    pub group_by: &'a str,
    pub filter: &'a Filter,
    pub k: usize,
    pub class: QueryClass,
    pub tau: f64,
    pub aggregation: Aggregation,
}

pub fn canonical_query(p: CanonicalParts<'_>) -> String {
    let delta = p.class.restricted_delta().map_or_else(|| "none".to_string(), |d| d.to_string());
    let sensitivity = if p.class.restricted_delta().is_some() { "restricted" } else { "unrestricted" };
    format!(
        "agg={};delta={};filter={};group_by={};k={};sensitivity={};table={};tau={}",
        p.aggregation.as_str(),
        delta,
        canonical_filter(p.filter),
        percent_encode(p.group_by),
        p.k,
        sensitivity,
        percent_encode(p.table),
        p.tau,
    )
}
