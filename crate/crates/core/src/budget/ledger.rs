use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Condvar, Mutex, MutexGuard};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::journal::{BudgetSnapshot, EntryKind, Journal, JournalEntry, JournalError, JOURNAL_FILE, SNAPSHOT_FILE, SNAPSHOT_VERSION};
use super::{BudgetRecord, Cost, RefreshPeriod};

pub trait Clock: Send + Sync {
    fn now(&self) -> DateTime<Utc>;
}

#[derive(Debug, Default, Clone, Copy)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> DateTime<Utc> {
        Utc::now()
    }
}

/// Settable clock for tests and replays.
#[derive(Debug)]
pub struct ManualClock(Mutex<DateTime<Utc>>);

impl ManualClock {
    pub fn new(t: DateTime<Utc>) -> Self {
        Self(Mutex::new(t))
    }

    pub fn set(&self, t: DateTime<Utc>) {
        *self.0.lock().unwrap() = t;
    }

    pub fn advance(&self, d: chrono::Duration) {
        *self.0.lock().unwrap() += d;
    }
}

impl Clock for ManualClock {
    fn now(&self) -> DateTime<Utc> {
        *self.0.lock().unwrap()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BudgetLimits {
    pub max_info: u64,
    pub max_calls: u64,
}

impl Default for BudgetLimits {
    fn default() -> Self {
        Self { max_info: 3000, max_calls: 30 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LedgerConfig {
    #[serde(default)]
    pub defaults: BudgetLimits,
    #[serde(default)]
    pub overrides: BTreeMap<String, BudgetLimits>,
    #[serde(default)]
    pub period: RefreshPeriod,
}

impl LedgerConfig {
    pub fn limits_for(&self, analyst: &str) -> BudgetLimits {
        self.overrides.get(analyst).copied().unwrap_or(self.defaults)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdmissionError {
    /// Either budget is at zero.
    #[error("budget_exhausted")]
    BudgetExhausted,
    /// Budget remains, but less than the query's expected cost.
    #[error("insufficient_for_query")]
    InsufficientForQuery,
}

impl AdmissionError {
    pub fn reason(self) -> &'static str {
        match self {
            AdmissionError::BudgetExhausted => "budget_exhausted",
            AdmissionError::InsufficientForQuery => "insufficient_for_query",
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum BudgetError {
    #[error(transparent)]
    Admission(#[from] AdmissionError),
    #[error("settled cost {actual:?} exceeds reserved cost {reserved:?}")]
    ExceedsReservation { actual: Cost, reserved: Cost },
    #[error(transparent)]
    Journal(#[from] JournalError),
}

struct SlotState {
    record: BudgetRecord,
    reserved: Cost,
}

struct Slot {
    state: Mutex<SlotState>,
    freed: Condvar,
}

/// Thread-safe budget store. Operations on one analyst are linearizable;
/// different analysts never contend beyond a map lookup.
pub struct Ledger {
    config: LedgerConfig,
    clock: Arc<dyn Clock>,
    slots: Mutex<HashMap<String, Arc<Slot>>>,
    journal: Option<Mutex<Journal>>,
    dir: Option<PathBuf>,
}

impl std::fmt::Debug for Ledger {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Ledger").field("config", &self.config).field("dir", &self.dir).finish_non_exhaustive()
    }
}

fn millis(t: DateTime<Utc>) -> i64 {
    t.timestamp_millis()
}

impl Ledger {
    /// A ledger that keeps nothing on disk.
    pub fn in_memory(config: LedgerConfig, clock: Arc<dyn Clock>) -> Self {
        Self { config, clock, slots: Mutex::new(HashMap::new()), journal: None, dir: None }
    }

    /// Opens (or creates) a ledger persisted under `dir`, restoring the latest
    /// snapshot and replaying the journal written after it.
    pub fn open(dir: &Path, config: LedgerConfig, clock: Arc<dyn Clock>) -> Result<Self, JournalError> {
        std::fs::create_dir_all(dir).map_err(|source| JournalError::Io { path: dir.to_path_buf(), source })?;
        let snapshot = BudgetSnapshot::load(&dir.join(SNAPSHOT_FILE))?;
        let (mut journal, entries) = Journal::open(&dir.join(JOURNAL_FILE))?;
        let snap_gen = snapshot.as_ref().map_or(0, |s| s.generation);

        let mut records: HashMap<String, BudgetRecord> = HashMap::new();
        for r in snapshot.into_iter().flat_map(|s| s.records) {
            records.insert(r.analyst_id.clone(), r);
        }
        if journal.generation() > snap_gen {
            return Err(JournalError::GenerationAhead { journal: journal.generation(), snapshot: snap_gen });
        }
        if journal.generation() == snap_gen {
            for e in &entries {
                let rec = records
                    .entry(e.analyst_id.clone())
                    .or_insert_with(|| fresh_record(&config, &e.analyst_id, e.timestamp()));
                apply(rec, e);
            }
        } else {
            log::info!("journal generation {} predates snapshot {}; starting a new one", journal.generation(), snap_gen);
            journal.restart(snap_gen)?;
        }

        let slots = records
            .into_iter()
            .map(|(id, mut record)| {
                let limits = config.limits_for(&id);
                record.max_info = limits.max_info;
                record.max_calls = limits.max_calls;
                record.period = config.period;
                (id, Arc::new(Slot { state: Mutex::new(SlotState { record, reserved: Cost::ZERO }), freed: Condvar::new() }))
            })
            .collect();
        Ok(Self { config, clock, slots: Mutex::new(slots), journal: Some(Mutex::new(journal)), dir: Some(dir.to_path_buf()) })
    }

    pub fn config(&self) -> &LedgerConfig {
        &self.config
    }

    pub fn now(&self) -> DateTime<Utc> {
        self.clock.now()
    }

    fn slot(&self, analyst: &str) -> Arc<Slot> {
        let mut slots = self.slots.lock().unwrap();
        slots
            .entry(analyst.to_string())
            .or_insert_with(|| {
                let record = fresh_record(&self.config, analyst, self.clock.now());
                Arc::new(Slot { state: Mutex::new(SlotState { record, reserved: Cost::ZERO }), freed: Condvar::new() })
            })
            .clone()
    }

    fn log(&self, entry: JournalEntry) -> Result<(), JournalError> {
        match &self.journal {
            Some(j) => j.lock().unwrap().append(&entry),
            None => Ok(()),
        }
    }

    /// Zeroes usage when the clock has entered a later period.
    fn refresh(&self, state: &mut SlotState) -> Result<(), JournalError> {
        let start = self.config.period.period_start(self.clock.now());
        if start > state.record.last_reset {
            let e = JournalEntry {
                kind: EntryKind::Refresh,
                analyst_id: state.record.analyst_id.clone(),
                info: 0,
                calls: 0,
                unix_millis: millis(start),
            };
            self.log(e.clone())?;
            apply(&mut state.record, &e);
        }
        Ok(())
    }

    fn locked<'s>(&self, slot: &'s Slot) -> Result<MutexGuard<'s, SlotState>, JournalError> {
        let mut g = slot.state.lock().unwrap();
        self.refresh(&mut g)?;
        Ok(g)
    }

    /// Current record, refreshed if a new period has begun. Unknown analysts
    /// get a fresh record with the configured limits.
    pub fn get_budget(&self, analyst: &str) -> Result<BudgetRecord, JournalError> {
        let slot = self.slot(analyst);
        let g = self.locked(&slot)?;
        Ok(g.record.clone())
    }

    /// Whether `cost` fits in the remaining budget. Does not change usage.
    pub fn check_budget(&self, analyst: &str, cost: Cost) -> Result<bool, JournalError> {
        Ok(cost.fits_within(self.get_budget(analyst)?.remaining()))
    }

    /// Atomic check and deduct.
    pub fn update_budget(&self, analyst: &str, cost: Cost) -> Result<BudgetRecord, BudgetError> {
        let slot = self.slot(analyst);
        let mut g = self.locked(&slot)?;
        if !(g.record.used() + g.reserved + cost).fits_within(g.record.max()) {
            return Err(AdmissionError::InsufficientForQuery.into());
        }
        self.charge(&mut g, cost)?;
        Ok(g.record.clone())
    }

    fn charge(&self, g: &mut SlotState, cost: Cost) -> Result<(), JournalError> {
        let e = JournalEntry {
            kind: EntryKind::Charge,
            analyst_id: g.record.analyst_id.clone(),
            info: cost.info,
            calls: cost.calls,
            unix_millis: millis(self.clock.now()),
        };
        self.log(e.clone())?;
        apply(&mut g.record, &e);
        Ok(())
    }

    /// Admits a query with worst-case cost `expected`.
    ///
    /// Rejects with [`AdmissionError::BudgetExhausted`] when either remaining
    /// budget is zero and with [`AdmissionError::InsufficientForQuery`] when
    /// `expected` does not fit what is left. If it fits only once in-flight
    /// reservations settle, waits for them.
    pub fn reserve(&self, analyst: &str, expected: Cost) -> Result<Reservation<'_>, BudgetError> {
        let slot = self.slot(analyst);
        let mut g = self.locked(&slot)?;
        loop {
            let remaining = g.record.remaining();
            if remaining.info == 0 || remaining.calls == 0 {
                return Err(AdmissionError::BudgetExhausted.into());
            }
            if !expected.fits_within(remaining) {
                return Err(AdmissionError::InsufficientForQuery.into());
            }
            if (g.record.used() + g.reserved + expected).fits_within(g.record.max()) {
                g.reserved = g.reserved + expected;
                drop(g);
                return Ok(Reservation { ledger: self, slot, reserved: expected, done: false });
            }
            g = slot.freed.wait(g).unwrap();
            self.refresh(&mut g)?;
        }
    }

    /// Zeroes an analyst's usage and starts their period now.
    pub fn reset(&self, analyst: &str) -> Result<BudgetRecord, JournalError> {
        let slot = self.slot(analyst);
        let mut g = self.locked(&slot)?;
        let e = JournalEntry {
            kind: EntryKind::Reset,
            analyst_id: analyst.to_string(),
            info: 0,
            calls: 0,
            unix_millis: millis(self.config.period.period_start(self.clock.now())),
        };
        self.log(e.clone())?;
        apply(&mut g.record, &e);
        Ok(g.record.clone())
    }

    /// All known records, refreshed, sorted by analyst id.
    pub fn records(&self) -> Result<Vec<BudgetRecord>, JournalError> {
        let mut ids: Vec<String> = self.slots.lock().unwrap().keys().cloned().collect();
        ids.sort();
        ids.iter().map(|id| self.get_budget(id)).collect()
    }

    /// Writes a snapshot of every record and starts an empty journal.
    pub fn compact(&self) -> Result<(), JournalError> {
        let (Some(journal), Some(dir)) = (&self.journal, &self.dir) else {
            return Ok(());
        };
        // Lock order everywhere: slot map, slot states, journal.
        let map = self.slots.lock().unwrap();
        let guards: Vec<MutexGuard<'_, SlotState>> = map.values().map(|s| s.state.lock().unwrap()).collect();
        let mut j = journal.lock().unwrap();
        let mut records: Vec<BudgetRecord> = guards.iter().map(|g| g.record.clone()).collect();
        records.sort_by(|a, b| a.analyst_id.cmp(&b.analyst_id));
        let generation = j.generation() + 1;
        BudgetSnapshot { version: SNAPSHOT_VERSION, generation, records }.save(&dir.join(SNAPSHOT_FILE))?;
        j.restart(generation)
    }

    /// Flushes and fsyncs the journal.
    pub fn sync(&self) -> Result<(), JournalError> {
        match &self.journal {
            Some(j) => j.lock().unwrap().sync(),
            None => Ok(()),
        }
    }
}

fn fresh_record(config: &LedgerConfig, analyst: &str, now: DateTime<Utc>) -> BudgetRecord {
    let limits = config.limits_for(analyst);
    BudgetRecord {
        analyst_id: analyst.to_string(),
        max_info: limits.max_info,
        max_calls: limits.max_calls,
        used_info: 0,
        used_calls: 0,
        period: config.period,
        last_reset: config.period.period_start(now),
    }
}

fn apply(rec: &mut BudgetRecord, e: &JournalEntry) {
    match e.kind {
        EntryKind::Charge => {
            rec.used_info += e.info;
            rec.used_calls += e.calls;
        }
        EntryKind::Refresh | EntryKind::Reset => {
            rec.used_info = 0;
            rec.used_calls = 0;
            rec.last_reset = e.timestamp();
        }
    }
}

/// Admitted capacity held for one query. Dropping it without settling
/// releases the capacity.
pub struct Reservation<'a> {
    ledger: &'a Ledger,
    slot: Arc<Slot>,
    reserved: Cost,
    done: bool,
}

impl Reservation<'_> {
    pub fn reserved(&self) -> Cost {
        self.reserved
    }

    /// Charges `actual` (at most the reserved cost) and releases the rest.
    pub fn settle(mut self, actual: Cost) -> Result<BudgetRecord, BudgetError> {
        if !actual.fits_within(self.reserved) {
            return Err(BudgetError::ExceedsReservation { actual, reserved: self.reserved });
        }
        let mut g = self.slot.state.lock().unwrap();
        g.reserved = g.reserved - self.reserved;
        self.done = true;
        let charged = self.ledger.charge(&mut g, actual);
        let record = g.record.clone();
        drop(g);
        self.slot.freed.notify_all();
        charged?;
        Ok(record)
    }
}

impl Drop for Reservation<'_> {
    fn drop(&mut self) {
        if !self.done {
            let mut g = self.slot.state.lock().unwrap_or_else(|p| p.into_inner());
            g.reserved = g.reserved - self.reserved;
            drop(g);
            self.slot.freed.notify_all();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    fn at(y: i32, m: u32, d: u32) -> DateTime<Utc> {
        Utc.with_ymd_and_hms(y, m, d, 12, 0, 0).unwrap()
    }

    fn ledger(clock: Arc<ManualClock>) -> Ledger {
        Ledger::in_memory(LedgerConfig::default(), clock)
    }

    #[test]
    fn fresh_analyst_gets_defaults() {
        let l = ledger(Arc::new(ManualClock::new(at(2020, 1, 3))));
        let r = l.get_budget("a").unwrap();
        assert_eq!((r.max_info, r.max_calls, r.used_info, r.used_calls), (3000, 30, 0, 0));
        assert!(l.check_budget("a", Cost::new(100, 1)).unwrap());
        assert!(l.check_budget("a", Cost::ZERO).unwrap());
    }

    #[test]
    fn update_and_exhaust() {
        let l = ledger(Arc::new(ManualClock::new(at(2020, 1, 3))));
        let r = l.update_budget("a", Cost::new(1476, 1)).unwrap();
        assert_eq!(r.used(), Cost::new(1476, 1));
        l.update_budget("a", Cost::new(1524, 0)).unwrap();
        assert!(!l.check_budget("a", Cost::new(1, 0)).unwrap());
        assert!(l.check_budget("a", Cost::ZERO).unwrap());
        assert!(matches!(l.update_budget("a", Cost::new(1, 0)), Err(BudgetError::Admission(_))));
    }

    #[test]
    fn lazy_monthly_refresh() {
        let clock = Arc::new(ManualClock::new(at(2020, 1, 3)));
        let l = ledger(clock.clone());
        l.update_budget("a", Cost::new(10, 1)).unwrap();
        clock.set(at(2020, 1, 31));
        assert_eq!(l.get_budget("a").unwrap().used(), Cost::new(10, 1));
        clock.set(at(2020, 2, 10));
        let r = l.get_budget("a").unwrap();
        assert_eq!(r.used(), Cost::ZERO);
        assert_eq!(r.last_reset, Utc.with_ymd_and_hms(2020, 2, 1, 0, 0, 0).unwrap());
        assert_eq!(l.get_budget("a").unwrap(), r);
    }

    #[test]
    fn admission_reasons() {
        let clock = Arc::new(ManualClock::new(at(2020, 1, 3)));
        let l = ledger(clock);
        l.update_budget("a", Cost::new(2995, 29)).unwrap();
        let err = l.reserve("a", Cost::new(101, 1)).err().unwrap();
        assert!(matches!(err, BudgetError::Admission(AdmissionError::InsufficientForQuery)));
        l.update_budget("a", Cost::new(0, 1)).unwrap();
        let err = l.reserve("a", Cost::new(1, 0)).err().unwrap();
        assert!(matches!(err, BudgetError::Admission(AdmissionError::BudgetExhausted)));
        assert_eq!(l.get_budget("a").unwrap().used(), Cost::new(2995, 30));
    }

    #[test]
    fn reservation_settle_and_release() {
        let l = ledger(Arc::new(ManualClock::new(at(2020, 1, 3))));
        let r = l.reserve("a", Cost::new(101, 1)).unwrap();
        let rec = r.settle(Cost::new(14, 1)).unwrap();
        assert_eq!(rec.used(), Cost::new(14, 1));
        let r = l.reserve("a", Cost::new(101, 1)).unwrap();
        drop(r);
        assert_eq!(l.get_budget("a").unwrap().used(), Cost::new(14, 1));
        let r = l.reserve("a", Cost::new(5, 1)).unwrap();
        assert!(matches!(r.settle(Cost::new(6, 1)), Err(BudgetError::ExceedsReservation { .. })));
        assert_eq!(l.get_budget("a").unwrap().used(), Cost::new(14, 1));
    }

    #[test]
    fn concurrent_deducts_exactly_one_wins() {
        let l = Arc::new(ledger(Arc::new(ManualClock::new(at(2020, 1, 3)))));
        let handles: Vec<_> = (0..2)
            .map(|_| {
                let l = l.clone();
                std::thread::spawn(move || l.update_budget("a", Cost::new(1600, 1)).is_ok())
            })
            .collect();
        let wins = handles.into_iter().map(|h| h.join().unwrap()).filter(|&w| w).count();
        assert_eq!(wins, 1);
        assert_eq!(l.get_budget("a").unwrap().used(), Cost::new(1600, 1));
    }

    #[test]
    fn overrides_apply() {
        let mut cfg = LedgerConfig::default();
        cfg.overrides.insert("vip".into(), BudgetLimits { max_info: 10, max_calls: 2 });
        let l = Ledger::in_memory(cfg, Arc::new(ManualClock::new(at(2020, 1, 3))));
        assert_eq!(l.get_budget("vip").unwrap().max(), Cost::new(10, 2));
        assert_eq!(l.get_budget("other").unwrap().max(), Cost::new(3000, 30));
    }

    #[test]
    fn persisted_state_survives_restart_and_compaction() {
        let dir = tempfile::tempdir().unwrap();
        let clock = Arc::new(ManualClock::new(at(2020, 1, 3)));
        {
            let l = Ledger::open(dir.path(), LedgerConfig::default(), clock.clone()).unwrap();
            l.update_budget("a", Cost::new(7, 1)).unwrap();
            l.update_budget("b", Cost::new(3, 1)).unwrap();
            l.compact().unwrap();
            l.update_budget("a", Cost::new(2, 0)).unwrap();
            l.reset("b").unwrap();
            l.sync().unwrap();
        }
        let l = Ledger::open(dir.path(), LedgerConfig::default(), clock.clone()).unwrap();
        assert_eq!(l.get_budget("a").unwrap().used(), Cost::new(9, 1));
        assert_eq!(l.get_budget("b").unwrap().used(), Cost::ZERO);
        clock.set(at(2020, 3, 1));
        assert_eq!(l.get_budget("a").unwrap().used(), Cost::ZERO);
        drop(l);
        let l = Ledger::open(dir.path(), LedgerConfig::default(), clock).unwrap();
        assert_eq!(l.get_budget("a").unwrap().used(), Cost::ZERO);
    }

    #[test]
    fn stale_journal_after_crash_is_skipped() {
        let dir = tempfile::tempdir().unwrap();
        let clock = Arc::new(ManualClock::new(at(2020, 1, 3)));
        let l = Ledger::open(dir.path(), LedgerConfig::default(), clock.clone()).unwrap();
        l.update_budget("a", Cost::new(7, 1)).unwrap();
        let journal_copy = std::fs::read(dir.path().join(JOURNAL_FILE)).unwrap();
        l.compact().unwrap();
        drop(l);
        // Crash between snapshot rename and journal restart.
        std::fs::write(dir.path().join(JOURNAL_FILE), journal_copy).unwrap();
        let l = Ledger::open(dir.path(), LedgerConfig::default(), clock).unwrap();
        assert_eq!(l.get_budget("a").unwrap().used(), Cost::new(7, 1));
    }
}
