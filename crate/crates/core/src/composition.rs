//! Bounded-range composition accounting.
//!
//! For `t` adaptively chosen ε-BR mechanisms and any `δ′ ∈ (0, 1)`, the
//! composition is `(ε′, δ′)`-DP with
//!
//! ```text
//! ε′ = min( tε,  t(r − 1 − ln r) + ε·sqrt(t/2 · ln(1/δ′)) ),   r = ε / (1 − e^{−ε})
//! ```

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CompositionError {
    #[error("invalid parameter {name} = {value}")]
    BadParam { name: &'static str, value: f64 },
    #[error("overall delta {0} must be below 1")]
    DeltaTooLarge(f64),
    #[error("numeric failure: {0}")]
    Numeric(String),
}

fn bad(name: &'static str, value: f64) -> CompositionError {
    CompositionError::BadParam { name, value }
}

/// System-wide monthly guarantee and the budgets that realize it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemPrivacyBudget {
    pub eps_max: f64,
    pub delta_star: f64,
    /// Information budget k*.
    pub k_star: u64,
    /// Call budget ℓ*.
    pub ell_star: u64,
}

impl SystemPrivacyBudget {
    pub fn new(eps_max: f64, delta_star: f64, k_star: u64, ell_star: u64) -> Result<Self, CompositionError> {
        let b = Self { eps_max, delta_star, k_star, ell_star };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<(), CompositionError> {
        if !(self.eps_max > 0.0 && self.eps_max.is_finite()) {
            return Err(bad("eps_max", self.eps_max));
        }
        if !(self.delta_star > 0.0 && self.delta_star < 1.0) {
            return Err(bad("delta_star", self.delta_star));
        }
        if self.k_star == 0 {
            return Err(bad("k_star", 0.0));
        }
        if self.ell_star == 0 {
            return Err(bad("ell_star", 0.0));
        }
        Ok(())
    }
}

/// Per-call parameters plus the composition slack δ′.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerQueryParams {
    pub eps_per: f64,
    pub delta: f64,
    pub delta_prime: f64,
}

/// `x − ln(1 + x)` without cancellation near zero.
fn x_minus_ln1p(x: f64) -> f64 {
    if x.abs() < 1e-3 {
        // x²/2 − x³/3 + x⁴/4 − x⁵/5 + …
        let mut term = x * x;
        let mut sum = 0.0;
        for n in 2..12 {
            sum += term / n as f64 * if n % 2 == 0 { 1.0 } else { -1.0 };
            term *= x;
        }
        sum
    } else {
        x - x.ln_1p()
    }
}

/// `r − 1` where `r = ε/(1 − e^{−ε})`.
fn r_minus_one(eps: f64) -> f64 {
    if eps < 1e-4 {
        // ε/2 + ε²/12 − ε⁴/720
        eps / 2.0 + eps * eps / 12.0 - eps.powi(4) / 720.0
    } else {
        eps / -(-eps).exp_m1() - 1.0
    }
}

/// Composed ε′ of `t` ε-BR mechanisms at slack `delta_prime`.
pub fn br_compose(eps: f64, t: u64, delta_prime: f64) -> Result<f64, CompositionError> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(bad("eps", eps));
    }
    if t == 0 {
        return Err(bad("t", 0.0));
    }
    if !(0.0..1.0).contains(&delta_prime) {
        return Err(bad("delta_prime", delta_prime));
    }
    let t = t as f64;
    let linear = t * eps;
    if delta_prime == 0.0 {
        return Ok(linear);
    }
    let bounded = t * x_minus_ln1p(r_minus_one(eps)) + eps * (t / 2.0 * (1.0 / delta_prime).ln()).sqrt();
    Ok(linear.min(bounded))
}

/// `(ε_max, δ*)` implied by running at most `k_star` BR units and `ell_star`
/// unknown-domain calls with the given per-call parameters.
pub fn overall_guarantee(params: PerQueryParams, k_star: u64, ell_star: u64) -> Result<(f64, f64), CompositionError> {
    if !(0.0..1.0).contains(&params.delta) {
        return Err(bad("delta", params.delta));
    }
    let delta_star = 2.0 * ell_star as f64 * params.delta + params.delta_prime;
    if delta_star >= 1.0 {
        return Err(CompositionError::DeltaTooLarge(delta_star));
    }
    let eps_max = br_compose(params.eps_per, k_star, params.delta_prime)?;
    Ok((eps_max, delta_star))
}

/// Splits δ* as `δ = δ*/(4ℓ*)`, `δ′ = δ*/2` and solves for the per-unit ε̇
/// whose composition over k* units reaches ε_max.
pub fn solve_eps_per(budget: SystemPrivacyBudget) -> Result<PerQueryParams, CompositionError> {
    budget.validate()?;
    let delta = budget.delta_star / (4.0 * budget.ell_star as f64);
    let delta_prime = budget.delta_star / 2.0;
    let f = |e: f64| br_compose(e, budget.k_star, delta_prime);

    let mut lo = 1e-8_f64;
    if f(lo)? >= budget.eps_max {
        return Err(CompositionError::Numeric(format!("eps_max {} is below the smallest reachable value", budget.eps_max)));
    }
    let mut hi = budget.eps_max.max(lo * 2.0);
    let mut widen = 0;
    while f(hi)? < budget.eps_max {
        hi *= 2.0;
        widen += 1;
        if widen > 200 || !hi.is_finite() {
            return Err(CompositionError::Numeric("could not bracket eps_per".into()));
        }
    }
    for _ in 0..300 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid)? < budget.eps_max {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let eps_per = 0.5 * (lo + hi);
    let residual = (f(eps_per)? - budget.eps_max).abs() / budget.eps_max;
    if residual > 1e-10 {
        return Err(CompositionError::Numeric(format!("eps_per residual {residual:e} too large")));
    }
    Ok(PerQueryParams { eps_per, delta, delta_prime })
}
