//! Per-analyst information and call budgets.
//!
//! A query is admitted against its worst-case [`expected_cost`] and charged
//! its realized [`actual_cost`]. The [`Ledger`] keeps one record per analyst,
//! refreshes it lazily at period boundaries and persists every change to an
//! append-only [`journal`] with periodic snapshots.

pub mod journal;
mod ledger;

use std::ops::{Add, Sub};

use chrono::{DateTime, Datelike, NaiveDate, TimeZone, Utc};
use serde::{Deserialize, Serialize};

use crate::mechanisms::{DpResult, QueryClass};

pub use ledger::{
    AdmissionError, BudgetError, BudgetLimits, Clock, Ledger, LedgerConfig, ManualClock, Reservation, SystemClock,
};

/// Budget units: information (k*) and calls (ℓ*).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Cost {
    pub info: u64,
    pub calls: u64,
}

impl Cost {
    pub const ZERO: Cost = Cost { info: 0, calls: 0 };

    pub const fn new(info: u64, calls: u64) -> Self {
        Self { info, calls }
    }

    /// Componentwise `self ≤ other`.
    pub fn fits_within(self, other: Cost) -> bool {
        self.info <= other.info && self.calls <= other.calls
    }

    pub fn saturating_sub(self, other: Cost) -> Cost {
        Cost { info: self.info.saturating_sub(other.info), calls: self.calls.saturating_sub(other.calls) }
    }
}

impl Add for Cost {
    type Output = Cost;
    fn add(self, o: Cost) -> Cost {
        Cost { info: self.info + o.info, calls: self.calls + o.calls }
    }
}

impl Sub for Cost {
    type Output = Cost;
    fn sub(self, o: Cost) -> Cost {
        Cost { info: self.info - o.info, calls: self.calls - o.calls }
    }
}

/// How often usage returns to zero.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RefreshPeriod {
    /// Calendar months in UTC.
    #[default]
    Monthly,
    /// Fixed blocks of this many days counted from 1970-01-01.
    Days(u32),
}

impl RefreshPeriod {
    /// Start of the period containing `t`.
    pub fn period_start(self, t: DateTime<Utc>) -> DateTime<Utc> {
        let date = match self {
            RefreshPeriod::Monthly => NaiveDate::from_ymd_opt(t.year(), t.month(), 1).expect("first of month"),
            RefreshPeriod::Days(n) => {
                let n = i64::from(n.max(1));
                let days = t.timestamp().div_euclid(86_400);
                NaiveDate::from_ymd_opt(1970, 1, 1).expect("epoch") + chrono::Duration::days(days - days.rem_euclid(n))
            }
        };
        Utc.from_utc_datetime(&date.and_hms_opt(0, 0, 0).expect("midnight"))
    }
}

/// One analyst's budget state.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BudgetRecord {
    pub analyst_id: String,
    pub max_info: u64,
    pub max_calls: u64,
    pub used_info: u64,
    pub used_calls: u64,
    pub period: RefreshPeriod,
    pub last_reset: DateTime<Utc>,
}

impl BudgetRecord {
    pub fn max(&self) -> Cost {
        Cost::new(self.max_info, self.max_calls)
    }

    pub fn used(&self) -> Cost {
        Cost::new(self.used_info, self.used_calls)
    }

    pub fn remaining(&self) -> Cost {
        self.max().saturating_sub(self.used())
    }
}

/// Worst-case cost used for admission.
///
/// | cell                 | cost          |
/// |----------------------|---------------|
/// | known, Δ-restricted  | (Δ, 0)        |
/// | unknown, Δ-restricted| (max(Δ,1), 1) |
/// | known, unrestricted  | (2k, 0)       |
/// | unknown, unrestricted| (2k + 1, 1)   |
pub fn expected_cost(class: QueryClass, k: usize) -> Cost {
    let k = k as u64;
    match class {
        QueryClass::KnownRestricted { delta } => Cost::new(u64::from(delta), 0),
        QueryClass::UnknownRestricted { delta } => Cost::new(u64::from(delta).max(1), 1),
        QueryClass::KnownUnrestricted => Cost::new(2 * k, 0),
        QueryClass::UnknownUnrestricted => Cost::new(2 * k + 1, 1),
    }
}

/// Realized cost of a release. Only the unknown-domain unrestricted cell
/// depends on the output: `2|o| + 1 − [o ends with ⊥]`.
pub fn actual_cost(class: QueryClass, k: usize, result: &DpResult) -> Cost {
    match class {
        QueryClass::KnownRestricted { delta } => Cost::new(u64::from(delta), 0),
        QueryClass::UnknownRestricted { .. } => Cost::new(1, 1),
        QueryClass::KnownUnrestricted => Cost::new(2 * k as u64, 0),
        QueryClass::UnknownUnrestricted => {
            Cost::new(2 * result.entries.len() as u64 + 1 - u64::from(result.terminated_by_bot), 1)
        }
    }
}
