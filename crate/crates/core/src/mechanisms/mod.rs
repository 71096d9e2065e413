//! Histogram and top-k release mechanisms.
//!
//! | domain  | restricted (Δ)   | unrestricted          |
//! |---------|------------------|-----------------------|
//! | known   | [`lap_known`]    | [`exp_known`]         |
//! | unknown | [`lap_unknown`]  | [`gumbel_unknown`]    |
//!
//! All four are pure functions of their input counts, parameters and a
//! [`NoiseSeed`]. Every noise value is drawn from a substream keyed by the
//! element it perturbs, so the output does not depend on how ties in the input
//! were ordered beyond the documented tie-break.

mod known;
mod unknown;

use serde::{Deserialize, Serialize};

use crate::noise::{Gumbel, Laplace, NoiseError, NoiseRole, NoiseSeed, NoiseStream};
use crate::store::DomainSize;

pub use known::{exp_known, lap_known};
pub use unknown::{delta_hat_equation, gumbel_unknown, lap_unknown, solve_delta_hat};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum MechanismError {
    #[error("eps_per must be positive and finite, got {0}")]
    BadEpsilon(f64),
    #[error("delta must lie in (0, 1) for unknown-domain mechanisms, got {0}")]
    BadDelta(f64),
    #[error("tau must be a finite value >= 1, got {0}")]
    BadTau(f64),
    #[error("restricted sensitivity needs delta_count >= 1")]
    ZeroSensitivity,
    #[error("k must be at least 1")]
    ZeroK,
    #[error("k = {k} exceeds the domain size {d}")]
    KExceedsDomain { k: usize, d: usize },
    #[error("histogram over a known domain must not be empty")]
    EmptyDomain,
    #[error("fetch limit d_bar + 1 = {fetched} must exceed {what} = {value}")]
    FetchTooSmall { fetched: usize, what: &'static str, value: usize },
    #[error("input slice is not sorted by count descending")]
    UnsortedSlice,
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error(transparent)]
    Noise(#[from] NoiseError),
}

/// Per-call privacy parameters shared by every mechanism.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrivacyParams {
    /// Per-unit bounded-range parameter.
    pub eps_per: f64,
    /// Only read by the unknown-domain mechanisms.
    pub delta: f64,
}

impl PrivacyParams {
    pub fn new(eps_per: f64, delta: f64) -> Result<Self, MechanismError> {
        let p = Self { eps_per, delta };
        p.check_eps()?;
        if !(0.0..1.0).contains(&delta) {
            return Err(MechanismError::BadDelta(delta));
        }
        Ok(p)
    }

    fn check_eps(&self) -> Result<(), MechanismError> {
        if self.eps_per > 0.0 && self.eps_per.is_finite() {
            Ok(())
        } else {
            Err(MechanismError::BadEpsilon(self.eps_per))
        }
    }

    fn check_delta(&self) -> Result<(), MechanismError> {
        if self.delta > 0.0 && self.delta < 1.0 {
            Ok(())
        } else {
            Err(MechanismError::BadDelta(self.delta))
        }
    }
}

fn check_tau(tau: f64) -> Result<(), MechanismError> {
    if tau >= 1.0 && tau.is_finite() {
        Ok(())
    } else {
        Err(MechanismError::BadTau(tau))
    }
}

/// One released element.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReleasedEntry {
    pub element: String,
    pub noisy_count: f64,
    /// The noisy value the element was ranked by. Equal to `noisy_count` for
    /// the Laplace mechanisms; a Gumbel-noised count otherwise, which is not
    /// meant to be shown to analysts.
    pub selection_value: f64,
}

/// Output of one mechanism invocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DpResult {
    pub entries: Vec<ReleasedEntry>,
    /// The release ended with the ⊥ sentinel.
    pub terminated_by_bot: bool,
    /// Noisy threshold, when the mechanism releases it.
    pub bot_value: Option<f64>,
}

/// Cell of the domain × sensitivity table, which fixes the mechanism and its
/// cost rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "cell", rename_all = "snake_case")]
pub enum QueryClass {
    KnownRestricted { delta: u32 },
    KnownUnrestricted,
    UnknownRestricted { delta: u32 },
    UnknownUnrestricted,
}

impl QueryClass {
    pub fn is_known_domain(self) -> bool {
        matches!(self, QueryClass::KnownRestricted { .. } | QueryClass::KnownUnrestricted)
    }

    pub fn restricted_delta(self) -> Option<u32> {
        match self {
            QueryClass::KnownRestricted { delta } | QueryClass::UnknownRestricted { delta } => Some(delta),
            _ => None,
        }
    }
}

/// How many ranks to request for an unknown-domain query: `max(multiplier·k,
/// minimum)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FetchRule {
    pub multiplier: usize,
    pub minimum: usize,
}

impl Default for FetchRule {
    fn default() -> Self {
        Self { multiplier: 10, minimum: 1000 }
    }
}

/// Translates a top-k request into the number of elements to fetch: the whole
/// domain when it is known, `d_bar` otherwise. The store is then asked for
/// `d_bar + 1` ranks.
pub fn translate_query(k: usize, domain: DomainSize, rule: FetchRule) -> usize {
    match domain {
        DomainSize::Known(d) => d,
        DomainSize::Unknown => rule.multiplier.saturating_mul(k).max(rule.minimum),
    }
}

/// Where mechanism noise comes from. The zero source exists only for unit
/// tests of the deterministic skeleton.
#[derive(Clone, Copy)]
pub(crate) enum NoiseSource<'a> {
    Keyed(&'a NoiseSeed),
    #[cfg(test)]
    Zero,
}

impl NoiseSource<'_> {
    fn laplace(&self, dist: Laplace, role: NoiseRole, id: &str) -> f64 {
        match self {
            NoiseSource::Keyed(seed) => dist.sample(&mut seed.substream(role, id)),
            #[cfg(test)]
            NoiseSource::Zero => 0.0,
        }
    }

    fn gumbel(&self, dist: Gumbel, role: NoiseRole, id: &str) -> f64 {
        match self {
            NoiseSource::Keyed(seed) => dist.sample(&mut seed.substream(role, id)),
            #[cfg(test)]
            NoiseSource::Zero => 0.0,
        }
    }

    /// The stream behind `(role, id)`, or `None` when noise is off.
    fn stream(&self, role: NoiseRole, id: &str) -> Option<NoiseStream> {
        match self {
            NoiseSource::Keyed(seed) => Some(seed.substream(role, id)),
            #[cfg(test)]
            NoiseSource::Zero => None,
        }
    }
}

/// Descending by value, then ascending by element id.
fn by_selection_desc(a: &ReleasedEntry, b: &ReleasedEntry) -> std::cmp::Ordering {
    b.selection_value.total_cmp(&a.selection_value).then_with(|| a.element.cmp(&b.element))
}
