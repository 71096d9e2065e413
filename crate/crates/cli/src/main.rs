use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use dpolap::budget::{Ledger, SystemClock};
use dpolap::calibration::{full_report, ReportInput};
use dpolap::composition::{br_compose, overall_guarantee, solve_eps_per, PerQueryParams, SystemPrivacyBudget};
use dpolap::service::config::ServiceConfig;
use dpolap::service::server;
use dpolap::store::{read_records, Aggregation, Filter, IngestOptions, Predicate, SchemaFile, Snapshot, Table};
use dpolap::QuerySpec;

#[derive(Parser)]
#[command(name = "dpolap", version, about = "Differentially private top-k analytics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate record files against a schema and write a table snapshot.
    Ingest(IngestArgs),
    /// Run one query and print the JSON response.
    Query(QueryArgs),
    /// Serve the newline-delimited JSON protocol.
    Serve {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `listen` from the config.
        #[arg(long)]
        listen: Option<String>,
    },
    /// Composition what-ifs.
    #[command(subcommand)]
    Accountant(AccountantCmd),
    /// Print the attack-probability report.
    Calibrate(CalibrateArgs),
    /// Inspect or reset analyst budgets.
    #[command(subcommand)]
    Budget(BudgetCmd),
}

#[derive(Args)]
struct IngestArgs {
    /// Schema TOML.
    #[arg(long)]
    schema: PathBuf,
    /// Table to build; may be omitted when the schema declares one table.
    #[arg(long)]
    table: Option<String>,
    /// Snapshot date (YYYY-MM-DD).
    #[arg(long)]
    as_of: NaiveDate,
    #[arg(long, short)]
    out: PathBuf,
    /// NDJSON files, or CSV when the extension is `.csv`.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
}

#[derive(Args)]
struct QueryArgs {
    #[arg(long)]
    config: PathBuf,
    /// Full query as JSON; the other query flags are then ignored.
    #[arg(long, conflicts_with_all = ["analyst", "table"])]
    json: Option<String>,
    #[arg(long, required_unless_present = "json")]
    analyst: Option<String>,
    #[arg(long, required_unless_present = "json")]
    table: Option<String>,
    #[arg(long, default_value = "item")]
    group_by: String,
    #[arg(long, default_value_t = 10)]
    k: usize,
    /// `column=v1,v2`; repeatable, conjuncts are ANDed.
    #[arg(long = "filter", value_name = "COL=VALUES")]
    filters: Vec<String>,
    #[arg(long)]
    as_of: Option<NaiveDate>,
    /// Count rows instead of distinct members.
    #[arg(long)]
    raw: bool,
    #[arg(long)]
    verbose: bool,
}

#[derive(Subcommand)]
enum AccountantCmd {
    /// ε′ of `t` composed ε-BR mechanisms at slack δ′.
    Compose {
        #[arg(long)]
        eps: f64,
        #[arg(long)]
        t: u64,
        #[arg(long)]
        delta_prime: f64,
    },
    /// System (ε, δ) from per-call parameters and budgets.
    Guarantee {
        #[arg(long, default_value_t = 0.15)]
        eps_per: f64,
        #[arg(long, default_value_t = 1e-10)]
        delta: f64,
        #[arg(long, default_value_t = 1e-9)]
        delta_prime: f64,
        #[arg(long, default_value_t = 3000)]
        k_star: u64,
        #[arg(long, default_value_t = 30)]
        ell_star: u64,
    },
    /// Largest per-call ε meeting a system target.
    Solve {
        #[arg(long)]
        eps_max: f64,
        #[arg(long)]
        delta_star: f64,
        #[arg(long, default_value_t = 3000)]
        k_star: u64,
        #[arg(long, default_value_t = 30)]
        ell_star: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Table,
    Json,
    Both,
}

#[derive(Args)]
struct CalibrateArgs {
    #[arg(long, default_value_t = 0.15)]
    eps_per: f64,
    #[arg(long, default_value_t = 1e-10)]
    delta: f64,
    #[arg(long, default_value_t = 1e-9)]
    delta_prime: f64,
    #[arg(long, default_value_t = 3000)]
    k_star: u64,
    #[arg(long, default_value_t = 30)]
    ell_star: u64,
    #[arg(long, default_value_t = 30)]
    n_days: u32,
    #[arg(long, default_value_t = 1000)]
    d_bar: u64,
    #[arg(long, value_enum, default_value = "both")]
    format: Format,
}

#[derive(Subcommand)]
enum BudgetCmd {
    /// Print budget records as JSON (all known analysts when none is named).
    Inspect {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        analyst: Option<String>,
    },
    /// Zero an analyst's usage.
    Reset {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        analyst: String,
    },
    /// Fold the journal into the snapshot.
    Compact {
        #[arg(long)]
        config: PathBuf,
    },
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn print_json(v: &impl serde::Serialize) -> Result<()> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, v)?;
    writeln!(out)?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Ingest(a) => ingest(a),
        Command::Query(a) => query(a),
        Command::Serve { config, listen } => {
            let cfg = ServiceConfig::load(&config)?;
            let engine = Arc::new(cfg.build_engine(Arc::new(SystemClock))?);
            let addr = listen.unwrap_or_else(|| cfg.listen.clone());
            let handle = server::serve(engine, addr.as_str()).with_context(|| format!("cannot listen on {addr}"))?;
            eprintln!("listening on {}", handle.local_addr());
            handle.wait()?;
            Ok(())
        }
        Command::Accountant(cmd) => accountant(cmd),
        Command::Calibrate(a) => {
            let report = full_report(ReportInput {
                eps_per: a.eps_per,
                delta: a.delta,
                delta_prime: a.delta_prime,
                k_star: a.k_star,
                ell_star: a.ell_star,
                n_days: a.n_days,
                d_bar: a.d_bar,
            })?;
            if matches!(a.format, Format::Table | Format::Both) {
                print!("{}", report.to_table());
            }
            if matches!(a.format, Format::Json | Format::Both) {
                println!("{}", report.to_json());
            }
            Ok(())
        }
        Command::Budget(cmd) => budget(cmd),
    }
}

fn ingest(a: IngestArgs) -> Result<()> {
    let schemas = SchemaFile::load(&a.schema)?;
    let schema = match (&a.table, schemas.tables.as_slice()) {
        (Some(name), _) => schemas.table(name).ok_or_else(|| anyhow!("schema has no table `{name}`"))?.clone(),
        (None, [only]) => only.clone(),
        (None, _) => bail!("schema declares several tables; pass --table"),
    };
    let mut records = Vec::new();
    for path in &a.inputs {
        records.extend(read_records(path).with_context(|| format!("reading {}", path.display()))?);
    }
    let report = Table::ingest(schema.clone(), &records, IngestOptions { as_of: a.as_of })?;
    let kept: Vec<_> = records
        .into_iter()
        .filter(|r| schema.retains(a.as_of, r.event_date))
        .collect();
    Snapshot::new(schema, a.as_of, kept).save(&a.out)?;
    print_json(&json!({
        "table": report.table.name(),
        "rows": report.table.num_rows(),
        "outside_retention": report.rejected,
        "snapshot": a.out,
    }))
}

fn parse_filter(specs: &[String]) -> Result<Filter> {
    let mut f = Filter::all();
    for s in specs {
        let (col, vals) = s.split_once('=').ok_or_else(|| anyhow!("filter `{s}` is not COL=VALUES"))?;
        f = f.and(Predicate::any_of(col, vals.split(',')));
    }
    Ok(f)
}

fn query(a: QueryArgs) -> Result<()> {
    let spec: QuerySpec = match &a.json {
        Some(text) => serde_json::from_str(text).context("parsing --json")?,
        None => QuerySpec {
            analyst_id: a.analyst.clone().unwrap_or_default(),
            table: a.table.clone().unwrap_or_default(),
            group_by: a.group_by.clone(),
            filter: parse_filter(&a.filters)?,
            k: a.k,
            as_of_date: a.as_of,
            aggregation: if a.raw { Aggregation::Raw } else { Aggregation::Distinct },
            verbose: a.verbose,
        },
    };
    let cfg = ServiceConfig::load(&a.config)?;
    let engine = cfg.build_engine(Arc::new(SystemClock))?;
    let result = engine.execute(&spec);
    engine.ledger().sync()?;
    print_json(&result?)
}

fn accountant(cmd: AccountantCmd) -> Result<()> {
    match cmd {
        AccountantCmd::Compose { eps, t, delta_prime } => {
            print_json(&json!({ "eps": eps, "t": t, "delta_prime": delta_prime, "eps_composed": br_compose(eps, t, delta_prime)? }))
        }
        AccountantCmd::Guarantee { eps_per, delta, delta_prime, k_star, ell_star } => {
            let (eps_max, delta_star) =
                overall_guarantee(PerQueryParams { eps_per, delta, delta_prime }, k_star, ell_star)?;
            print_json(&json!({ "eps_max": eps_max, "delta_star": delta_star }))
        }
        AccountantCmd::Solve { eps_max, delta_star, k_star, ell_star } => {
            print_json(&solve_eps_per(SystemPrivacyBudget::new(eps_max, delta_star, k_star, ell_star)?)?)
        }
    }
}

fn open_ledger(config: &Path) -> Result<Ledger> {
    let cfg = ServiceConfig::load(config)?;
    Ok(Ledger::open(&cfg.state_dir, cfg.ledger_config()?, Arc::new(SystemClock))?)
}

fn budget(cmd: BudgetCmd) -> Result<()> {
    match cmd {
        BudgetCmd::Inspect { config, analyst } => {
            let ledger = open_ledger(&config)?;
            match analyst {
                Some(id) => print_json(&ledger.get_budget(&id)?),
                None => print_json(&ledger.records()?),
            }
        }
        BudgetCmd::Reset { config, analyst } => {
            let ledger = open_ledger(&config)?;
            let record = ledger.reset(&analyst)?;
            ledger.sync()?;
            print_json(&record)
        }
        BudgetCmd::Compact { config } => {
            let ledger = open_ledger(&config)?;
            ledger.compact()?;
            print_json(&json!({ "compacted": true }))
        }
    }
}
