//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::sync::{Arc, Barrier};
use std::time::{Duration, Instant};

use astro_float::{BigFloat, Consts, RoundingMode};
use chrono::{NaiveDate, TimeZone, Utc};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use dpolap::budget::{actual_cost, expected_cost, AdmissionError, BudgetError, BudgetLimits, Ledger, LedgerConfig, ManualClock, SystemClock};
use dpolap::calibration::{averaging_attack_prob, max_k, small_noise_prob, suggested_info_budget, threshold_breach_bound};
use dpolap::composition::{overall_guarantee, PerQueryParams};
use dpolap::mechanisms::{delta_hat_equation, exp_known, gumbel_unknown, solve_delta_hat, DpResult, FetchRule, QueryClass, ReleasedEntry};
use dpolap::store::{Aggregation, EventRecord, Filter, HistogramSlice, IngestOptions, Predicate, Table, TableSchema};
use dpolap::{Cost, NoiseSeed, PrivacyParams, QueryEngine, QuerySpec, SecretKey};

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit: Duration) -> Result<(), String> {
    ensure(elapsed < limit, || format!("took {elapsed:.2?}, limit {limit:?}"))
}

fn seed_for(stream: u64, trial: u64) -> NoiseSeed {
    let mut b = [0u8; 32];
    b[..8].copy_from_slice(&trial.to_le_bytes());
    b[8..16].copy_from_slice(&stream.to_le_bytes());
    NoiseSeed::from_bytes(b)
}

// 1 ------------------------------------------------------------------------

/// Composed ε in 256-bit (about 77 significant digits) arithmetic.
fn composition_oracle(eps: f64, t: u64, delta_prime: f64) -> f64 {
    const P: usize = 256;
    const RM: RoundingMode = RoundingMode::ToEven;
    let mut cc = Consts::new().unwrap();
    let e = BigFloat::from_f64(eps, P);
    let tb = BigFloat::from_u64(t, P);
    let one = BigFloat::from_u64(1, P);
    let r = e.div(&one.sub(&e.neg().exp(P, RM, &mut cc), P, RM), P, RM);
    let kl = r.sub(&one, P, RM).sub(&r.ln(P, RM, &mut cc), P, RM);
    let ln_inv = one.div(&BigFloat::from_f64(delta_prime, P), P, RM).ln(P, RM, &mut cc);
    let root = tb.mul(&ln_inv, P, RM).div(&BigFloat::from_u64(2, P), P, RM).sqrt(P, RM);
    let bounded: f64 = tb.mul(&kl, P, RM).add(&e.mul(&root, P, RM), P, RM).to_string().parse().unwrap();
    bounded.min(t as f64 * eps)
}

fn criterion_1() -> Check {
    let start = Instant::now();
    let (eps, delta) =
        overall_guarantee(PerQueryParams { eps_per: 0.15, delta: 1e-10, delta_prime: 1e-9 }, 3000, 30).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let oracle = composition_oracle(0.15, 3000, 1e-9);
    let rel = ((eps - oracle) / oracle).abs();
    ensure((eps - 34.9).abs() <= 0.05, || format!("eps {eps}"))?;
    ensure(delta == 7e-9, || format!("delta {delta:e}"))?;
    ensure(rel <= 1e-6, || format!("oracle {oracle}, relative error {rel:e}"))?;
    within(elapsed, Duration::from_secs(1))?;
    Ok(format!("eps={eps:.4} delta={delta:e} oracle_rel_err={rel:.1e} in {elapsed:.2?}"))
}

// 2 ------------------------------------------------------------------------

fn criterion_2() -> Check {
    let e = |x: dpolap::calibration::CalibrationError| x.to_string();
    let p = small_noise_prob(0.15).map_err(e)?;
    let k = max_k(p).map_err(e)?;
    let budget = suggested_info_budget(k);
    let avg = averaging_attack_prob(0.15, 30).map_err(e)?;
    let breach = threshold_breach_bound(0.15, 1e-10, 30, 1000).map_err(e)?.all_calls;
    ensure((p - 0.0368).abs() <= 1e-4, || format!("small-noise p {p}"))?;
    ensure(k == 738, || format!("max_k {k}"))?;
    ensure(budget == 2954, || format!("suggested budget {budget}"))?;
    ensure((0.110..=0.120).contains(&avg), || format!("averaging {avg}"))?;
    ensure((2.5e-9..=2.7e-9).contains(&breach), || format!("breach {breach:e}"))?;
    Ok(format!("p={p:.4} max_k={k} budget={budget} averaging={avg:.4} breach={breach:.3e}"))
}

// 3 ------------------------------------------------------------------------

fn criterion_3() -> Check {
    let start = Instant::now();
    let counts = [5u64, 3, 1];
    let hist: Vec<(String, u64)> = counts.iter().enumerate().map(|(i, &c)| (format!("e{i}"), c)).collect();
    let params = PrivacyParams::new(1.0, 1e-10).unwrap();
    let trials = 100_000u64;
    let mut wins = [0u64; 3];
    for t in 0..trials {
        let r = exp_known(&hist, 1, 1.0, params, &seed_for(3, t)).map_err(|e| e.to_string())?;
        wins[r.entries[0].element[1..].parse::<usize>().unwrap()] += 1;
    }
    let z: f64 = counts.iter().map(|&c| (c as f64).exp()).sum();
    let chi2: f64 = counts
        .iter()
        .zip(wins)
        .map(|(&c, w)| {
            let expect = trials as f64 * (c as f64).exp() / z;
            (w as f64 - expect).powi(2) / expect
        })
        .sum();
    let critical = ChiSquared::new(2.0).unwrap().inverse_cdf(0.99);
    let elapsed = start.elapsed();
    ensure(chi2 < critical, || format!("chi2 {chi2:.3} >= {critical:.3}, wins {wins:?}"))?;
    within(elapsed, Duration::from_secs(10))?;
    Ok(format!("wins={wins:?} chi2={chi2:.3} (<{critical:.3}) in {elapsed:.2?}"))
}

// 4 ------------------------------------------------------------------------

/// Smallest `m` with `P(Poisson(λ) > m) < 1%`.
fn one_sided_allowance(lambda: f64) -> u64 {
    let mut cdf = 0.0;
    let mut term = (-lambda).exp();
    let mut m = 0u64;
    loop {
        cdf += term;
        if 1.0 - cdf < 0.01 {
            return m;
        }
        m += 1;
        term *= lambda / m as f64;
    }
}

fn criterion_4() -> Check {
    let start = Instant::now();
    let (eps, delta, d_bar, k) = (0.15, 1e-10, 1000usize, 50usize);
    let slice = HistogramSlice::from_counts((0..d_bar).map(|i| (format!("e{i:04}"), 1u64)), d_bar + 1, Aggregation::Distinct);
    let params = PrivacyParams::new(eps, delta).unwrap();
    let trials = 10_000_000u64;
    let mut hits = 0u64;
    for t in 0..trials {
        let r = gumbel_unknown(&slice, k, d_bar, 1.0, params, &seed_for(4, t)).map_err(|e| e.to_string())?;
        hits += u64::from(!r.entries.is_empty());
    }
    let elapsed = start.elapsed();
    let bound = threshold_breach_bound(eps, delta, 30, d_bar as u64).map_err(|e| e.to_string())?.per_query;
    let allowed = one_sided_allowance(bound * trials as f64);
    ensure(hits <= allowed, || format!("{hits} releases in {trials} trials, allowed {allowed} at bound {bound:e}"))?;
    within(elapsed, Duration::from_secs(300))?;
    Ok(format!("{hits}/{trials} releases, per-query bound {bound:.3e} (allowed {allowed}) in {elapsed:.1?}"))
}

// 5 ------------------------------------------------------------------------

#[derive(Clone, Debug)]
struct Step {
    class: QueryClass,
    k: usize,
    result: DpResult,
}

fn random_step(rng: &mut StdRng) -> Step {
    let class = match rng.gen_range(0..4) {
        0 => QueryClass::KnownRestricted { delta: rng.gen_range(1..6) },
        1 => QueryClass::UnknownRestricted { delta: rng.gen_range(1..6) },
        2 => QueryClass::KnownUnrestricted,
        _ => QueryClass::UnknownUnrestricted,
    };
    let k = rng.gen_range(1..80);
    let n = rng.gen_range(0..=k);
    let result = DpResult {
        entries: (0..n).map(|i| ReleasedEntry { element: i.to_string(), noisy_count: 0.0, selection_value: 0.0 }).collect(),
        terminated_by_bot: n < k || rng.gen_bool(0.2),
        bot_value: None,
    };
    Step { class, k, result }
}

fn criterion_5() -> Check {
    let mut rng = StdRng::seed_from_u64(5);
    let clock = Arc::new(ManualClock::new(Utc.with_ymd_and_hms(2024, 2, 10, 0, 0, 0).unwrap()));
    let mut rejections = 0usize;
    for trace in 0..1000 {
        let max = Cost::new(rng.gen_range(1..3500), rng.gen_range(1..40));
        let config = LedgerConfig { defaults: BudgetLimits { max_info: max.info, max_calls: max.calls }, ..LedgerConfig::default() };
        let ledger = Ledger::in_memory(config, clock.clone());
        let steps: Vec<Step> = (0..rng.gen_range(1..120)).map(|_| random_step(&mut rng)).collect();

        let mut used = Cost::ZERO;
        let (mut first_ledger, mut first_replay) = (None, None);
        for (i, s) in steps.iter().enumerate() {
            let rem = max - used;
            let replay = if rem.info == 0 || rem.calls == 0 {
                Err(AdmissionError::BudgetExhausted)
            } else if !expected_cost(s.class, s.k).fits_within(rem) {
                Err(AdmissionError::InsufficientForQuery)
            } else {
                let c = actual_cost(s.class, s.k, &s.result);
                used = used + c;
                Ok(c)
            };
            let got = match ledger.reserve("analyst", expected_cost(s.class, s.k)) {
                Ok(r) => {
                    let c = actual_cost(s.class, s.k, &s.result);
                    r.settle(c).map_err(|e| e.to_string())?;
                    Ok(c)
                }
                Err(BudgetError::Admission(a)) => Err(a),
                Err(e) => return Err(e.to_string()),
            };
            if replay.is_err() && first_replay.is_none() {
                first_replay = Some(i);
            }
            if got.is_err() && first_ledger.is_none() {
                first_ledger = Some(i);
            }
            ensure(got == replay, || format!("trace {trace} step {i}: ledger {got:?}, replay {replay:?}"))?;
            let rec = ledger.get_budget("analyst").map_err(|e| e.to_string())?;
            ensure(rec.used() == used, || format!("trace {trace} step {i}: used {:?} vs {used:?}", rec.used()))?;
            ensure(rec.used().fits_within(rec.max()), || format!("trace {trace}: negative budget"))?;
        }
        ensure(first_ledger == first_replay, || format!("trace {trace}: first rejection {first_ledger:?} vs {first_replay:?}"))?;
        rejections += usize::from(first_replay.is_some());
    }
    Ok(format!("1000 traces agree with replay ({rejections} reach a rejection)"))
}

// 6 ------------------------------------------------------------------------

fn zipf_records(top: f64, items: usize, as_of: NaiveDate) -> Vec<EventRecord> {
    let mut out = Vec::new();
    for r in 1..=items {
        let c = (top / (r as f64).powf(1.1)).round() as usize;
        for m in 0..c {
            out.push(EventRecord {
                member_id: format!("m{m}"),
                item: format!("item{r:05}"),
                event_date: as_of - chrono::Days::new((m % 20) as u64),
                dimensions: BTreeMap::new(),
            });
        }
    }
    out
}

fn criterion_6() -> Check {
    let as_of = NaiveDate::from_ymd_opt(2024, 5, 31).unwrap();
    let table = Table::ingest(TableSchema::new("events"), &zipf_records(14_500.0, 3000, as_of), IngestOptions { as_of })
        .map_err(|e| e.to_string())?
        .table;
    let params = PrivacyParams::new(0.15, 1e-10).unwrap();
    let engine_for = |rep: u64| {
        let mut key = [0x42u8; 32];
        key[..8].copy_from_slice(&rep.to_le_bytes());
        let ledger = Arc::new(Ledger::in_memory(LedgerConfig::default(), Arc::new(SystemClock)));
        Arc::new(QueryEngine::new(ledger, SecretKey::new(key).unwrap(), params, FetchRule::default()).with_table(table.clone()))
    };
    let query = QuerySpec::new("analyst", "events", 50);
    let mut tally = BTreeMap::new();
    for rep in 0..50u64 {
        let engine = engine_for(rep);
        let barrier = Arc::new(Barrier::new(100));
        let handles: Vec<_> = (0..100)
            .map(|_| {
                let (engine, barrier, q) = (engine.clone(), barrier.clone(), query.clone());
                std::thread::spawn(move || {
                    barrier.wait();
                    engine.execute(&q).ok().map(|r| r.cost_charged)
                })
            })
            .collect();
        let charged: Vec<Cost> = handles.into_iter().filter_map(|h| h.join().unwrap()).collect();
        let rec = engine.ledger().get_budget("analyst").map_err(|e| e.to_string())?;
        let total = charged.iter().fold(Cost::ZERO, |a, &c| a + c);
        ensure(rec.used() == total, || format!("rep {rep}: ledger {:?} vs charged {total:?}", rec.used()))?;
        ensure(charged.len() == 29 || charged.len() == 30, || format!("rep {rep}: {} succeeded", charged.len()))?;

        // Serialized replay of the same 100 requests on a fresh ledger.
        let serial = engine_for(rep);
        let serial_charged: Vec<Cost> = (0..100).filter_map(|_| serial.execute(&query).ok().map(|r| r.cost_charged)).collect();
        ensure(serial_charged.len() == charged.len(), || {
            format!("rep {rep}: parallel {} vs serial {}", charged.len(), serial_charged.len())
        })?;
        ensure(serial.ledger().get_budget("analyst").map_err(|e| e.to_string())?.used() == rec.used(), || {
            format!("rep {rep}: serial usage differs")
        })?;
        *tally.entry(charged.len()).or_insert(0) += 1;
    }
    Ok(format!("successes per repetition {tally:?}, all match serial replay"))
}

// 7 ------------------------------------------------------------------------

fn dpolap(args: &[&str]) -> Result<Vec<u8>, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_dpolap")).args(args).output().map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("dpolap {args:?}: {}", String::from_utf8_lossy(&out.stderr)));
    }
    Ok(out.stdout)
}

fn write_config(dir: &Path, name: &str, snapshot: &str) -> String {
    let path = dir.join(name);
    std::fs::write(
        &path,
        format!(
            "state_dir = \"state-{name}\"\ntables = [\"{snapshot}\"]\nsecret_hex = \"{}\"\n[privacy]\neps_per = 0.15\ndelta = 1e-10\n",
            "ab".repeat(32)
        ),
    )
    .unwrap();
    path.display().to_string()
}

fn criterion_7() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let d = dir.path();
    let as_of = NaiveDate::from_ymd_opt(2024, 5, 31).unwrap();
    let lines: Vec<String> = zipf_records(800.0, 400, as_of).iter().map(|r| serde_json::to_string(r).unwrap()).collect();
    std::fs::write(d.join("events.ndjson"), lines.join("\n")).unwrap();
    std::fs::write(d.join("schema.toml"), "[[table]]\nname = \"events\"\n").unwrap();
    let p = |f: &str| d.join(f).display().to_string();
    for (date, snap) in [("2024-05-31", "a.json"), ("2024-06-01", "b.json")] {
        dpolap(&["ingest", "--schema", &p("schema.toml"), "--as-of", date, "-o", &p(snap), &p("events.ndjson")])?;
    }
    let cfg_a = write_config(d, "a.toml", "a.json");
    let cfg_b = write_config(d, "b.toml", "b.json");
    let query = |cfg: &str| dpolap(&["query", "--config", cfg, "--analyst", "x", "--table", "events", "--k", "20", "--verbose"]);

    let first = query(&cfg_a)?;
    std::fs::remove_dir_all(d.join("state-a.toml")).map_err(|e| e.to_string())?;
    let second = query(&cfg_a)?;
    ensure(first == second, || "responses differ across restarts".into())?;
    let other_date = query(&cfg_b)?;
    let raw = |bytes: &[u8]| serde_json::from_slice::<serde_json::Value>(bytes).unwrap()["verbose"]["raw_counts"].clone();
    ensure(raw(&first) != raw(&other_date), || "changing the date did not change the noise".into())?;
    Ok(format!("{} identical bytes across restarts; next day's noise differs", first.len()))
}

// 8 ------------------------------------------------------------------------

fn criterion_8() -> Check {
    let start = Instant::now();
    let counts: Vec<(String, u64)> = (1..=5000).map(|r| (format!("e{r:04}"), (1e5 / (r as f64).powf(1.1)).round() as u64)).collect();
    let eps_grid = [0.02, 0.05, 0.08, 0.14, 0.2];
    let d_grid = [75usize, 100, 200, 1000];
    let trials = 1000u64;
    let mut mean = [[0.0f64; 4]; 5];
    for (ei, &eps) in eps_grid.iter().enumerate() {
        let params = PrivacyParams::new(eps, 1e-10).unwrap();
        for (di, &d_bar) in d_grid.iter().enumerate() {
            let slice = HistogramSlice::from_counts(counts.clone(), d_bar + 1, Aggregation::Distinct);
            let mut found = 0usize;
            // Common random numbers: trial t uses the same seed in every cell.
            for t in 0..trials {
                found += gumbel_unknown(&slice, 50, d_bar, 1.0, params, &seed_for(8, t)).map_err(|e| e.to_string())?.entries.len();
            }
            mean[ei][di] = found as f64 / trials as f64;
        }
    }
    let elapsed = start.elapsed();
    for ei in 0..5 {
        for di in 0..4 {
            if di > 0 {
                ensure(mean[ei][di] >= mean[ei][di - 1], || format!("not monotone in d_bar at eps {}: {:?}", eps_grid[ei], mean[ei]))?;
            }
            if ei > 0 {
                ensure(mean[ei][di] >= mean[ei - 1][di], || format!("not monotone in eps at d_bar {}", d_grid[di]))?;
            }
        }
    }
    within(elapsed, Duration::from_secs(120))?;
    let rows: Vec<String> = mean.iter().map(|r| format!("{:.1}/{:.1}/{:.1}/{:.1}", r[0], r[1], r[2], r[3])).collect();
    Ok(format!("means by eps (d_bar 75/100/200/1000): {} in {elapsed:.1?}", rows.join(" | ")))
}

// 9 ------------------------------------------------------------------------

fn criterion_9() -> Check {
    let mut worst = 0.0f64;
    let mut points = 0;
    for i in 0..5 {
        let delta = 10f64.powf(-15.0 + 12.0 * i as f64 / 4.0);
        for j in 0..5 {
            let eps = 0.01 * 200f64.powf(j as f64 / 4.0);
            for dc in [1u32, 4, 11, 20] {
                let x = solve_delta_hat(delta, eps, dc).map_err(|e| format!("delta {delta:e} eps {eps} dc {dc}: {e}"))?;
                let residual = ((delta_hat_equation(x, eps, dc) - delta) / delta).abs();
                worst = worst.max(residual);
                points += 1;
            }
        }
    }
    ensure(points == 100, || format!("{points} points"))?;
    ensure(worst <= 1e-12, || format!("worst relative residual {worst:e}"))?;
    Ok(format!("{points} grid points, worst relative residual {worst:.2e}"))
}

// 10 -----------------------------------------------------------------------

fn criterion_10() -> Check {
    let mut rng = StdRng::seed_from_u64(10);
    let as_of = NaiveDate::from_ymd_opt(2024, 1, 31).unwrap();
    let schema = TableSchema::new("t").with_column(
        dpolap::store::ColumnMeta::new("region", dpolap::store::Domain::Unknown, dpolap::store::Sensitivity::Unrestricted, 1.0).unwrap(),
    );
    let start = Instant::now();
    for table_no in 0..100 {
        let items = rng.gen_range(5..3000u32);
        let members = rng.gen_range(10..20_000u32);
        let records: Vec<EventRecord> = (0..100_000)
            .map(|_| {
                // Squaring skews toward low ids and produces many ties in the tail.
                let u: f64 = rng.gen();
                let mut dimensions = BTreeMap::new();
                if rng.gen_bool(0.9) {
                    dimensions.insert("region".to_string(), format!("r{}", rng.gen_range(0..5)));
                }
                EventRecord {
                    member_id: format!("m{}", rng.gen_range(0..members)),
                    item: format!("i{}", (u * u * items as f64) as u32),
                    event_date: as_of - chrono::Days::new(rng.gen_range(0..35)),
                    dimensions,
                }
            })
            .collect();
        let table = Table::ingest(schema.clone(), &records, IngestOptions { as_of }).map_err(|e| e.to_string())?.table;
        let filter = if rng.gen_bool(0.5) {
            Filter::all().and(Predicate::any_of("region", ["r0", "r2", "r4"].into_iter().filter(|_| rng.gen_bool(0.7))))
        } else {
            Filter::all()
        };
        let agg = if rng.gen_bool(0.5) { Aggregation::Distinct } else { Aggregation::Raw };
        let limit = rng.gen_range(1..(items as usize + 50));

        let allowed: Option<HashSet<String>> = filter.normalized().get("region").map(|v| v.iter().cloned().collect());
        let mut raw: HashMap<&str, u64> = HashMap::new();
        let mut distinct: HashMap<&str, HashSet<&str>> = HashMap::new();
        for r in records.iter().filter(|r| r.event_date <= as_of && (as_of - r.event_date).num_days() < 30) {
            if let Some(allowed) = &allowed {
                if !r.dimensions.get("region").is_some_and(|v| allowed.contains(v)) {
                    continue;
                }
            }
            *raw.entry(&r.item).or_default() += 1;
            distinct.entry(&r.item).or_default().insert(&r.member_id);
        }
        let mut want: Vec<(String, u64)> = match agg {
            Aggregation::Raw => raw.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
            Aggregation::Distinct => distinct.into_iter().map(|(k, v)| (k.to_string(), v.len() as u64)).collect(),
        };
        want.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        want.truncate(limit);
        let got = table.top_counts("item", &filter, limit, agg).map_err(|e| e.to_string())?;
        ensure(got.entries == want, || format!("table {table_no}: top_counts differs from brute force"))?;
    }
    Ok(format!("100 tables of 100000 rows match brute force in {:.1?}", start.elapsed()))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("overall guarantee", criterion_1),
        ("calibration constants", criterion_2),
        ("gumbel top-1 is softmax", criterion_3),
        ("all-ones breach rate", criterion_4),
        ("budget replay oracle", criterion_5),
        ("parallel clients", criterion_6),
        ("reproducible responses", criterion_7),
        ("discovery trend", criterion_8),
        ("delta-hat residual", criterion_9),
        ("top_counts brute force", criterion_10),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let n = i + 1;
        if !filter.is_empty() && !filter.iter().any(|a| a == &n.to_string()) {
            continue;
        }
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        match outcome {
            Ok(detail) => println!("criterion {n:>2} {name:<26} PASS  {detail}"),
            Err(why) => {
                failed += 1;
                println!("criterion {n:>2} {name:<26} FAIL  {why}");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
