//! Closed-form attack calculators used to pick per-query and monthly
//! parameters, with Monte Carlo cross-checks driven by keyed noise.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::composition::{overall_guarantee, CompositionError, PerQueryParams};
use crate::noise::{Laplace, NoiseRole, NoiseSeed};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CalibrationError {
    #[error("invalid parameter {name} = {value}")]
    BadParam { name: &'static str, value: f64 },
    #[error("invalid hypergeometric arguments k = {k}, m = {m}, s = {s}")]
    Combinatorial { k: u64, m: u64, s: u64 },
    #[error(transparent)]
    Composition(#[from] CompositionError),
}

fn positive(name: &'static str, v: f64) -> Result<(), CalibrationError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CalibrationError::BadParam { name, value: v })
    }
}

/// Standard normal CDF.
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Probability that averaging `n_days` releases of the same count, each with
/// `Lap(2/ε)` noise, lands within ½ of the truth (normal approximation).
pub fn averaging_attack_prob(eps_per: f64, n_days: u32) -> Result<f64, CalibrationError> {
    if !(eps_per >= 0.0 && eps_per.is_finite()) {
        return Err(CalibrationError::BadParam { name: "eps_per", value: eps_per });
    }
    if n_days == 0 {
        return Err(CalibrationError::BadParam { name: "n_days", value: 0.0 });
    }
    let z = eps_per * f64::from(n_days).sqrt() / (4.0 * std::f64::consts::SQRT_2);
    Ok((2.0 * std_normal_cdf(z) - 1.0).clamp(0.0, 1.0))
}

/// `p = Pr[|Lap(2/ε)| < ½] = 1 − e^{−ε/4}`.
pub fn small_noise_prob(eps_per: f64) -> Result<f64, CalibrationError> {
    if !(eps_per >= 0.0 && eps_per.is_finite()) {
        return Err(CalibrationError::BadParam { name: "eps_per", value: eps_per });
    }
    Ok(-(-eps_per / 4.0).exp_m1())
}

/// Largest `k` whose expected overlap `p²k` of two independent small-noise
/// sets stays below one: `⌊1/p²⌋`.
pub fn max_k(p: f64) -> Result<u64, CalibrationError> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(CalibrationError::BadParam { name: "p", value: p });
    }
    Ok((1.0 / (p * p)).floor() as u64)
}

/// Expected size of the overlap of two independent `p`-subsets of `k` items.
pub fn differencing_overlap(k: u64, p: f64) -> f64 {
    p * p * k as f64
}

/// Information budget that lets an attacker run the differencing attack twice
/// at `max_k`: `4·max_k + 2`.
pub fn suggested_info_budget(max_k: u64) -> u64 {
    4 * max_k + 2
}

fn ln_choose(n: u64, r: u64) -> f64 {
    ln_gamma(n as f64 + 1.0) - ln_gamma(r as f64 + 1.0) - ln_gamma((n - r) as f64 + 1.0)
}

/// `C(m, s)·C(k − m, m − s) / C(k, m)`: the chance two independent `m`-subsets
/// of `k` items share exactly `s` items.
pub fn hypergeometric_pmf(k: u64, m: u64, s: u64) -> Result<f64, CalibrationError> {
    if s > m || m > k {
        return Err(CalibrationError::Combinatorial { k, m, s });
    }
    if m - s > k - m {
        return Ok(0.0);
    }
    Ok((ln_choose(m, s) + ln_choose(k - m, m - s) - ln_choose(k, m)).exp())
}

/// `m = ⌊pk⌋`.
pub fn subset_size(k: u64, p: f64) -> u64 {
    (p * k as f64).floor() as u64
}

/// Bounds on the chance that an element below the threshold is released.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BreachBounds {
    /// `d̄(1 − 1/(1 + e^{−ε}δ/d̄))` for one call.
    pub per_query: f64,
    /// `δe^{−ε}`.
    pub relaxed: f64,
    /// `ℓ*δe^{−ε}` across every call in the period.
    pub all_calls: f64,
}

pub fn threshold_breach_bound(eps_per: f64, delta: f64, ell_star: u64, d_bar: u64) -> Result<BreachBounds, CalibrationError> {
    positive("eps_per", eps_per)?;
    if !(0.0..1.0).contains(&delta) {
        return Err(CalibrationError::BadParam { name: "delta", value: delta });
    }
    if d_bar == 0 {
        return Err(CalibrationError::BadParam { name: "d_bar", value: 0.0 });
    }
    let relaxed = delta * (-eps_per).exp();
    let d = d_bar as f64;
    // 1 − 1/(1+x) = x/(1+x)
    let x = relaxed / d;
    Ok(BreachBounds { per_query: d * x / (1.0 + x), relaxed, all_calls: ell_star as f64 * relaxed })
}

/// Inputs to [`full_report`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReportInput {
    pub eps_per: f64,
    pub delta: f64,
    pub delta_prime: f64,
    pub k_star: u64,
    pub ell_star: u64,
    pub n_days: u32,
    pub d_bar: u64,
}

impl Default for ReportInput {
    fn default() -> Self {
        Self { eps_per: 0.15, delta: 1e-10, delta_prime: 1e-9, k_star: 3000, ell_star: 30, n_days: 30, d_bar: 1000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackReport {
    pub input: ReportInput,
    pub averaging_prob: f64,
    pub small_noise_p: f64,
    pub max_k: u64,
    pub expected_overlap_at_max_k: f64,
    pub suggested_info_budget: u64,
    pub breach_bound: BreachBounds,
    pub eps_max: f64,
    pub delta_star: f64,
}

pub fn full_report(input: ReportInput) -> Result<AttackReport, CalibrationError> {
    let averaging_prob = averaging_attack_prob(input.eps_per, input.n_days)?;
    let p = small_noise_prob(input.eps_per)?;
    let mk = max_k(p)?;
    let breach_bound = threshold_breach_bound(input.eps_per, input.delta, input.ell_star, input.d_bar)?;
    let params = PerQueryParams { eps_per: input.eps_per, delta: input.delta, delta_prime: input.delta_prime };
    let (eps_max, delta_star) = overall_guarantee(params, input.k_star, input.ell_star)?;
    Ok(AttackReport {
        input,
        averaging_prob,
        small_noise_p: p,
        max_k: mk,
        expected_overlap_at_max_k: differencing_overlap(mk, p),
        suggested_info_budget: suggested_info_budget(mk),
        breach_bound,
        eps_max,
        delta_star,
    })
}

impl AttackReport {
    /// Two-column plain-text rendering.
    pub fn to_table(&self) -> String {
        let i = &self.input;
        let rows: Vec<(String, String)> = vec![
            ("per-unit epsilon".into(), format!("{}", i.eps_per)),
            ("per-call delta".into(), format!("{:e}", i.delta)),
            ("composition delta'".into(), format!("{:e}", i.delta_prime)),
            ("information budget k*".into(), i.k_star.to_string()),
            ("call budget l*".into(), i.ell_star.to_string()),
            (format!("averaging attack, {} days", i.n_days), format!("{:.4}", self.averaging_prob)),
            ("small-noise probability p".into(), format!("{:.4}", self.small_noise_p)),
            ("max k = floor(1/p^2)".into(), self.max_k.to_string()),
            ("expected overlap at max k".into(), format!("{:.4}", self.expected_overlap_at_max_k)),
            ("suggested information budget".into(), self.suggested_info_budget.to_string()),
            (format!("threshold breach, one call (d_bar {})", i.d_bar), format!("{:.4e}", self.breach_bound.per_query)),
            ("threshold breach, relaxed".into(), format!("{:.4e}", self.breach_bound.relaxed)),
            ("threshold breach, all calls".into(), format!("{:.4e}", self.breach_bound.all_calls)),
            ("monthly epsilon".into(), format!("{:.4}", self.eps_max)),
            ("monthly delta".into(), format!("{:e}", self.delta_star)),
        ];
        let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
        let mut out = String::new();
        for (k, v) in rows {
            let _ = writeln!(out, "{k:<width$}  {v}");
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Fraction of `trials` in which the mean of `n_days` independent `Lap(2/ε)`
/// draws has absolute value below ½.
pub fn monte_carlo_averaging(eps_per: f64, n_days: u32, trials: u64, seed: &NoiseSeed) -> Result<f64, CalibrationError> {
    positive("eps_per", eps_per)?;
    let lap = Laplace::new(2.0 / eps_per).map_err(|_| CalibrationError::BadParam { name: "eps_per", value: eps_per })?;
    let mut stream = seed.substream(NoiseRole::Count, "averaging");
    let mut hits = 0u64;
    for _ in 0..trials {
        let sum: f64 = (0..n_days).map(|_| lap.sample(&mut stream)).sum();
        if (sum / f64::from(n_days)).abs() < 0.5 {
            hits += 1;
        }
    }
    Ok(hits as f64 / trials as f64)
}

/// Fraction of `draws` Laplace(2/ε) samples with absolute value below ½.
pub fn monte_carlo_small_noise(eps_per: f64, draws: u64, seed: &NoiseSeed) -> Result<f64, CalibrationError> {
    positive("eps_per", eps_per)?;
    let lap = Laplace::new(2.0 / eps_per).map_err(|_| CalibrationError::BadParam { name: "eps_per", value: eps_per })?;
    let mut stream = seed.substream(NoiseRole::Count, "small-noise");
    let hits = (0..draws).filter(|_| lap.sample(&mut stream).abs() < 0.5).count();
    Ok(hits as f64 / draws as f64)
}
