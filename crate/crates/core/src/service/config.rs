//! Service configuration file (TOML).
//!
//! ```toml
//! listen = "127.0.0.1:7070"        # serve address
//! state_dir = "state"              # budget journal and snapshot
//! tables = ["events.snapshot.json"] # table snapshots written by `ingest`
//! secret_env = "DPOLAP_SECRET"     # env var holding the hex secret, or
//! # secret_hex = "..."             # the hex secret inline (>= 32 bytes)
//!
//! [privacy]                         # either explicit per-call parameters
//! eps_per = 0.15
//! delta = 1e-10
//! # or a system target solved for eps_per:
//! # eps_max = 34.9
//! # delta_star = 7e-9
//! # k_star = 3000
//! # ell_star = 30
//!
//! [fetch]                           # unknown-domain d_bar = max(multiplier·k, minimum)
//! multiplier = 10
//! minimum = 1000
//!
//! [budget]
//! period = "monthly"                # or { days = 7 }
//! [budget.defaults]
//! max_info = 3000
//! max_calls = 30
//! [budget.overrides.alice]
//! max_info = 6000
//! max_calls = 60
//! ```
//!
//! Relative paths resolve against the config file's directory. When only the
//! system target is given and `[budget.defaults]` is absent, the defaults are
//! `(k_star, ell_star)`.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::budget::{BudgetLimits, Clock, Ledger, LedgerConfig};
use crate::composition::{solve_eps_per, CompositionError, SystemPrivacyBudget};
use crate::mechanisms::{FetchRule, MechanismError, PrivacyParams};
use crate::noise::{NoiseError, SecretKey};
use crate::store::Snapshot;

use super::QueryEngine;

pub const DEFAULT_LISTEN: &str = "127.0.0.1:7070";
pub const DEFAULT_SECRET_ENV: &str = "DPOLAP_SECRET";

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {reason}")]
    Read { path: PathBuf, reason: String },
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("secret: {0}")]
    Secret(#[from] NoiseError),
    #[error(transparent)]
    Composition(#[from] CompositionError),
    #[error(transparent)]
    Mechanism(#[from] MechanismError),
    #[error(transparent)]
    Store(#[from] crate::store::StoreError),
    #[error(transparent)]
    Journal(#[from] crate::budget::journal::JournalError),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrivacySection {
    pub eps_per: Option<f64>,
    pub delta: Option<f64>,
    pub eps_max: Option<f64>,
    pub delta_star: Option<f64>,
    pub k_star: Option<u64>,
    pub ell_star: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetSection {
    #[serde(default)]
    pub period: crate::budget::RefreshPeriod,
    pub defaults: Option<BudgetLimits>,
    #[serde(default)]
    pub overrides: std::collections::BTreeMap<String, BudgetLimits>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceConfig {
    #[serde(default = "default_listen")]
    pub listen: String,
    #[serde(default = "default_state_dir")]
    pub state_dir: PathBuf,
    #[serde(default)]
    pub tables: Vec<PathBuf>,
    pub secret_hex: Option<String>,
    pub secret_env: Option<String>,
    #[serde(default)]
    pub privacy: PrivacySection,
    #[serde(default)]
    pub fetch: FetchRule,
    #[serde(default)]
    pub budget: BudgetSection,
}

fn default_listen() -> String {
    DEFAULT_LISTEN.to_string()
}

fn default_state_dir() -> PathBuf {
    PathBuf::from("state")
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            listen: default_listen(),
            state_dir: default_state_dir(),
            tables: Vec::new(),
            secret_hex: None,
            secret_env: None,
            privacy: PrivacySection::default(),
            fetch: FetchRule::default(),
            budget: BudgetSection::default(),
        }
    }
}

impl ServiceConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    /// Reads the file and makes relative paths absolute against its directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Read { path: path.to_path_buf(), reason: e.to_string() })?;
        let mut cfg = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let rebase = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        rebase(&mut cfg.state_dir);
        cfg.tables.iter_mut().for_each(rebase);
        Ok(cfg)
    }

    fn system_budget(&self) -> Result<Option<SystemPrivacyBudget>, ConfigError> {
        let p = &self.privacy;
        match (p.eps_max, p.delta_star, p.k_star, p.ell_star) {
            (None, None, None, None) => Ok(None),
            (Some(e), Some(d), Some(k), Some(l)) => Ok(Some(SystemPrivacyBudget::new(e, d, k, l)?)),
            _ => Err(ConfigError::Invalid("eps_max, delta_star, k_star and ell_star must be given together".into())),
        }
    }

    /// Per-call parameters: explicit values win, otherwise solved from the
    /// system target.
    pub fn privacy_params(&self) -> Result<PrivacyParams, ConfigError> {
        match (self.privacy.eps_per, self.privacy.delta) {
            (Some(e), Some(d)) => Ok(PrivacyParams::new(e, d)?),
            (None, None) => match self.system_budget()? {
                Some(b) => {
                    let p = solve_eps_per(b)?;
                    Ok(PrivacyParams::new(p.eps_per, p.delta)?)
                }
                None => Err(ConfigError::Invalid("[privacy] needs eps_per and delta, or a system target".into())),
            },
            _ => Err(ConfigError::Invalid("eps_per and delta must be given together".into())),
        }
    }

    pub fn ledger_config(&self) -> Result<LedgerConfig, ConfigError> {
        let defaults = match (self.budget.defaults, self.system_budget()?) {
            (Some(d), _) => d,
            (None, Some(b)) => BudgetLimits { max_info: b.k_star, max_calls: b.ell_star },
            (None, None) => BudgetLimits::default(),
        };
        Ok(LedgerConfig { defaults, overrides: self.budget.overrides.clone(), period: self.budget.period })
    }

    /// Loads every table snapshot and opens the persistent ledger.
    pub fn build_engine(&self, clock: Arc<dyn Clock>) -> Result<QueryEngine, ConfigError> {
        let ledger = Ledger::open(&self.state_dir, self.ledger_config()?, clock)?;
        let mut engine = QueryEngine::new(Arc::new(ledger), self.secret()?, self.privacy_params()?, self.fetch);
        for path in &self.tables {
            engine = engine.with_table(Snapshot::load(path)?.to_table()?);
        }
        Ok(engine)
    }

    /// Inline hex first, then the named (or default) environment variable.
    pub fn secret(&self) -> Result<SecretKey, ConfigError> {
        if let Some(hex) = &self.secret_hex {
            return Ok(SecretKey::from_hex(hex)?);
        }
        let var = self.secret_env.as_deref().unwrap_or(DEFAULT_SECRET_ENV);
        let hex = std::env::var(var).map_err(|_| ConfigError::Invalid(format!("secret not configured: set {var}")))?;
        Ok(SecretKey::from_hex(&hex)?)
    }
}
