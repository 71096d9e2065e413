use crate::noise::{Gumbel, Laplace, NoiseRole, NoiseSeed};

use super::{by_selection_desc, check_tau, DpResult, MechanismError, NoiseSource, PrivacyParams, ReleasedEntry};

/// Laplace mechanism over a known domain: every count gets `Lap(2τ/ε)`.
///
/// `histogram` must list the whole domain, zero-filled. The output keeps the
/// input order. `delta_count` is only validated; the budget charges it.
pub fn lap_known(
    histogram: &[(String, u64)],
    delta_count: u32,
    tau: f64,
    params: PrivacyParams,
    seed: &NoiseSeed,
) -> Result<DpResult, MechanismError> {
    lap_known_with(histogram, delta_count, tau, params, NoiseSource::Keyed(seed))
}

pub(crate) fn lap_known_with(
    histogram: &[(String, u64)],
    delta_count: u32,
    tau: f64,
    params: PrivacyParams,
    noise: NoiseSource<'_>,
) -> Result<DpResult, MechanismError> {
    params.check_eps()?;
    check_tau(tau)?;
    if delta_count == 0 {
        return Err(MechanismError::ZeroSensitivity);
    }
    if histogram.is_empty() {
        return Err(MechanismError::EmptyDomain);
    }
    let lap = Laplace::new(2.0 * tau / params.eps_per)?;
    let entries = histogram
        .iter()
        .map(|(element, count)| {
            let v = *count as f64 + noise.laplace(lap, NoiseRole::Count, element);
            ReleasedEntry { element: element.clone(), noisy_count: v, selection_value: v }
        })
        .collect();
    Ok(DpResult { entries, terminated_by_bot: false, bot_value: None })
}

/// Exponential mechanism over a known domain, run as one-shot Gumbel top-k:
/// `Gumbel(τ/ε)` on every count, keep the k largest, then release each with a
/// fresh `Lap(2τ/ε)` count.
pub fn exp_known(
    histogram: &[(String, u64)],
    k: usize,
    tau: f64,
    params: PrivacyParams,
    seed: &NoiseSeed,
) -> Result<DpResult, MechanismError> {
    exp_known_with(histogram, k, tau, params, NoiseSource::Keyed(seed))
}

pub(crate) fn exp_known_with(
    histogram: &[(String, u64)],
    k: usize,
    tau: f64,
    params: PrivacyParams,
    noise: NoiseSource<'_>,
) -> Result<DpResult, MechanismError> {
    params.check_eps()?;
    check_tau(tau)?;
    if k == 0 {
        return Err(MechanismError::ZeroK);
    }
    if k > histogram.len() {
        return Err(MechanismError::KExceedsDomain { k, d: histogram.len() });
    }
    let gum = Gumbel::new(tau / params.eps_per)?;
    let lap = Laplace::new(2.0 * tau / params.eps_per)?;

    let mut ranked: Vec<ReleasedEntry> = histogram
        .iter()
        .map(|(element, count)| ReleasedEntry {
            element: element.clone(),
            noisy_count: *count as f64,
            selection_value: *count as f64 + noise.gumbel(gum, NoiseRole::Selection, element),
        })
        .collect();
    ranked.sort_by(by_selection_desc);
    ranked.truncate(k);
    for e in &mut ranked {
        e.noisy_count += noise.laplace(lap, NoiseRole::Count, &e.element);
    }
    Ok(DpResult { entries: ranked, terminated_by_bot: false, bot_value: None })
}
