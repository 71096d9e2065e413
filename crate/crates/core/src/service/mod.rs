//! Query orchestration: classify, admit, fetch, release, charge.

mod canonical;
pub mod config;
pub mod server;

use std::collections::BTreeMap;
use std::sync::Arc;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::budget::{actual_cost, expected_cost, AdmissionError, BudgetError, Cost, Ledger};
use crate::mechanisms::{
    exp_known, gumbel_unknown, lap_known, lap_unknown, translate_query, DpResult, FetchRule, MechanismError,
    PrivacyParams, QueryClass,
};
use crate::noise::{derive_seed, NoiseError, NoiseKey, SecretKey};
use crate::store::{Aggregation, ColumnMeta, Domain, DomainSize, Filter, Sensitivity, StoreError, Table, ITEM_COLUMN};

pub use canonical::{canonical_filter, canonical_query, percent_encode, CanonicalParts};
pub use config::{ConfigError, ServiceConfig};
pub use server::{serve, Request, ServerHandle};

fn default_group_by() -> String {
    ITEM_COLUMN.to_string()
}

/// One analyst request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuerySpec {
    pub analyst_id: String,
    pub table: String,
    #[serde(default = "default_group_by")]
    pub group_by: String,
    #[serde(default)]
    pub filter: Filter,
    pub k: usize,
    /// Must match the loaded table's snapshot date when given.
    #[serde(default)]
    pub as_of_date: Option<NaiveDate>,
    #[serde(default)]
    pub aggregation: Aggregation,
    /// Include unrounded noisy values in the response.
    #[serde(default)]
    pub verbose: bool,
}

impl QuerySpec {
    pub fn new(analyst_id: impl Into<String>, table: impl Into<String>, k: usize) -> Self {
        Self {
            analyst_id: analyst_id.into(),
            table: table.into(),
            group_by: default_group_by(),
            filter: Filter::default(),
            k,
            as_of_date: None,
            aggregation: Aggregation::Distinct,
            verbose: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseEntry {
    pub element: String,
    /// Noisy count rounded to the nearest integer and clamped at 0.
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerboseDetail {
    pub canonical_query: String,
    /// Unrounded noisy counts, aligned with `entries`.
    pub raw_counts: Vec<f64>,
    /// Noisy threshold, when the mechanism releases it.
    pub bot_value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryResponse {
    pub entries: Vec<ResponseEntry>,
    /// The release ended at the noisy threshold.
    pub truncated: bool,
    pub cell: QueryClass,
    pub data_date: NaiveDate,
    pub cost_charged: Cost,
    pub budget_remaining: Cost,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verbose: Option<VerboseDetail>,
}

#[derive(Debug, thiserror::Error)]
pub enum QueryError {
    #[error("query rejected: {0}")]
    Rejected(AdmissionError),
    #[error("invalid query: {0}")]
    Invalid(String),
    #[error("unknown table `{0}`")]
    UnknownTable(String),
    #[error("table `{table}` holds data as of {available}, not {requested}")]
    DateMismatch { table: String, requested: NaiveDate, available: NaiveDate },
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Mechanism(#[from] MechanismError),
    #[error(transparent)]
    Noise(#[from] NoiseError),
    #[error(transparent)]
    Budget(BudgetError),
}

impl From<BudgetError> for QueryError {
    fn from(e: BudgetError) -> Self {
        match e {
            BudgetError::Admission(a) => QueryError::Rejected(a),
            other => QueryError::Budget(other),
        }
    }
}

impl QueryError {
    /// Short machine-readable kind for the wire protocol.
    pub fn kind(&self) -> &'static str {
        match self {
            QueryError::Rejected(_) => "rejected",
            QueryError::Invalid(_) | QueryError::DateMismatch { .. } | QueryError::UnknownTable(_) => "invalid_query",
            QueryError::Store(_) => "store",
            QueryError::Mechanism(_) | QueryError::Noise(_) => "mechanism",
            QueryError::Budget(_) => "budget",
        }
    }
}

/// Table cell plus the metadata the mechanism needs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Classification {
    pub class: QueryClass,
    pub tau: f64,
}

/// Looks up the group-by column's metadata; anything undeclared is unknown
/// domain, unrestricted, τ = 1.
pub fn classify(meta: Option<&ColumnMeta>) -> Classification {
    let Some(meta) = meta else {
        return Classification { class: QueryClass::UnknownUnrestricted, tau: 1.0 };
    };
    let known = matches!(meta.domain, Domain::Known(_));
    let class = match (known, meta.sensitivity) {
        (true, Sensitivity::Restricted { delta }) => QueryClass::KnownRestricted { delta },
        (true, Sensitivity::Unrestricted) => QueryClass::KnownUnrestricted,
        (false, Sensitivity::Restricted { delta }) => QueryClass::UnknownRestricted { delta },
        (false, Sensitivity::Unrestricted) => QueryClass::UnknownUnrestricted,
    };
    Classification { class, tau: meta.tau }
}

/// Shared, immutable query executor.
pub struct QueryEngine {
    tables: BTreeMap<String, Arc<Table>>,
    ledger: Arc<Ledger>,
    secret: SecretKey,
    params: PrivacyParams,
    fetch: FetchRule,
}

impl std::fmt::Debug for QueryEngine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("QueryEngine")
            .field("tables", &self.tables.keys().collect::<Vec<_>>())
            .field("params", &self.params)
            .field("fetch", &self.fetch)
            .finish_non_exhaustive()
    }
}

impl QueryEngine {
    pub fn new(ledger: Arc<Ledger>, secret: SecretKey, params: PrivacyParams, fetch: FetchRule) -> Self {
        Self { tables: BTreeMap::new(), ledger, secret, params, fetch }
    }

    pub fn with_table(mut self, table: Table) -> Self {
        self.tables.insert(table.name().to_string(), Arc::new(table));
        self
    }

    pub fn ledger(&self) -> &Arc<Ledger> {
        &self.ledger
    }

    pub fn params(&self) -> PrivacyParams {
        self.params
    }

    pub fn table(&self, name: &str) -> Option<&Arc<Table>> {
        self.tables.get(name)
    }

    /// Classification and canonical text of `q` without touching any budget.
    pub fn plan(&self, q: &QuerySpec) -> Result<(Arc<Table>, Classification, String), QueryError> {
        if q.k == 0 {
            return Err(QueryError::Invalid("k must be at least 1".into()));
        }
        if q.analyst_id.is_empty() {
            return Err(QueryError::Invalid("analyst_id must not be empty".into()));
        }
        let table = self.tables.get(&q.table).ok_or_else(|| QueryError::UnknownTable(q.table.clone()))?.clone();
        if let Some(requested) = q.as_of_date {
            if requested != table.as_of() {
                return Err(QueryError::DateMismatch { table: q.table.clone(), requested, available: table.as_of() });
            }
        }
        let meta = table.schema().column(&q.group_by).ok_or_else(|| StoreError::UnknownColumn(q.group_by.clone()))?;
        for col in q.filter.conjuncts.iter().map(|p| &p.column) {
            if table.schema().column(col).is_none() {
                return Err(StoreError::UnknownColumn(col.clone()).into());
            }
        }
        let c = classify(Some(meta));
        if let DomainSize::Known(d) = table.domain_size(&q.group_by)? {
            if q.k > d {
                return Err(MechanismError::KExceedsDomain { k: q.k, d }.into());
            }
        }
        let canon = canonical_query(CanonicalParts {
            table: &q.table,
            group_by: &q.group_by,
            filter: &q.filter,
            k: q.k,
            class: c.class,
            tau: c.tau,
            aggregation: q.aggregation,
        });
        Ok((table, c, canon))
    }

    /// Runs one query end to end. Budget is charged if and only if a release
    /// was produced.
    pub fn execute(&self, q: &QuerySpec) -> Result<QueryResponse, QueryError> {
        let (table, c, canon) = self.plan(q)?;
        let reservation = self.ledger.reserve(&q.analyst_id, expected_cost(c.class, q.k))?;

        let seed = derive_seed(&NoiseKey { secret: self.secret.as_bytes(), query_canon: &canon, data_date: table.as_of() })?;
        let result = self.release(&table, q, c, &seed)?;

        let cost = actual_cost(c.class, q.k, &result);
        let record = reservation.settle(cost)?;
        log::info!("analyst `{}` charged {:?} for {}", q.analyst_id, cost, canon);

        let raw: Vec<f64> = result.entries.iter().map(|e| e.noisy_count).collect();
        Ok(QueryResponse {
            entries: result
                .entries
                .iter()
                .map(|e| ResponseEntry { element: e.element.clone(), count: display_count(e.noisy_count) })
                .collect(),
            truncated: result.terminated_by_bot,
            cell: c.class,
            data_date: table.as_of(),
            cost_charged: cost,
            budget_remaining: record.remaining(),
            verbose: q.verbose.then_some(VerboseDetail { canonical_query: canon, raw_counts: raw, bot_value: result.bot_value }),
        })
    }

    fn release(
        &self,
        table: &Table,
        q: &QuerySpec,
        c: Classification,
        seed: &crate::noise::NoiseSeed,
    ) -> Result<DpResult, QueryError> {
        let domain = table.domain_size(&q.group_by)?;
        let d_bar = translate_query(q.k, domain, self.fetch);
        Ok(match c.class {
            QueryClass::KnownRestricted { delta } => {
                let hist = table.domain_counts(&q.group_by, &q.filter, q.aggregation)?;
                let mut out = lap_known(&hist, delta, c.tau, self.params, seed)?;
                out.entries.sort_by(|a, b| b.noisy_count.total_cmp(&a.noisy_count).then_with(|| a.element.cmp(&b.element)));
                out.entries.truncate(q.k);
                out
            }
            QueryClass::KnownUnrestricted => {
                let hist = table.domain_counts(&q.group_by, &q.filter, q.aggregation)?;
                exp_known(&hist, q.k, c.tau, self.params, seed)?
            }
            QueryClass::UnknownRestricted { delta } => {
                let slice = table.top_counts(&q.group_by, &q.filter, d_bar + 1, q.aggregation)?;
                let mut out = lap_unknown(&slice, delta, d_bar, c.tau, self.params, seed)?;
                if out.entries.len() > q.k {
                    out.entries.truncate(q.k);
                    out.terminated_by_bot = false;
                }
                out
            }
            QueryClass::UnknownUnrestricted => {
                let slice = table.top_counts(&q.group_by, &q.filter, d_bar + 1, q.aggregation)?;
                gumbel_unknown(&slice, q.k, d_bar, c.tau, self.params, seed)?
            }
        })
    }
}

/// Nearest integer, clamped at zero.
pub fn display_count(x: f64) -> u64 {
    if x.is_nan() || x <= 0.0 {
        0
    } else {
        x.round() as u64
    }
}
