use crate::noise::{Gumbel, Laplace, NoiseRole, NoiseSeed, NoiseStream, BOT_THRESHOLD_ID};
use crate::store::HistogramSlice;

use super::{by_selection_desc, check_tau, DpResult, MechanismError, NoiseSource, PrivacyParams, ReleasedEntry};

/// Right-hand side of the δ̂ equation: `x/4 · (e^{ε/2} + 1) · (3 + ln(Δ/x))`.
pub fn delta_hat_equation(x: f64, eps_per: f64, delta_count: u32) -> f64 {
    x / 4.0 * ((eps_per / 2.0).exp() + 1.0) * (3.0 + f64::from(delta_count).ln() - x.ln())
}

/// Solves `delta = delta_hat_equation(δ̂)` for δ̂ ∈ (0, delta).
///
/// The right-hand side is increasing on `(0, Δ·e²)` and exceeds `delta` at
/// `delta` itself, so bisection on `ln δ̂` brackets the unique root.
pub fn solve_delta_hat(delta: f64, eps_per: f64, delta_count: u32) -> Result<f64, MechanismError> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(MechanismError::BadDelta(delta));
    }
    if !(eps_per > 0.0 && eps_per.is_finite()) {
        return Err(MechanismError::BadEpsilon(eps_per));
    }
    if delta_count == 0 {
        return Err(MechanismError::ZeroSensitivity);
    }
    let f = |ln_x: f64| delta_hat_equation(ln_x.exp(), eps_per, delta_count);
    let (mut lo, mut hi) = (f64::MIN_POSITIVE.ln(), delta.ln());
    if !(f(lo) < delta && f(hi) >= delta) {
        return Err(MechanismError::Numeric(format!("no root of the delta-hat equation below delta = {delta}")));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < delta {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // Pick whichever bracket end has the smaller residual.
    let x = if (f(lo) - delta).abs() <= (f(hi) - delta).abs() { lo.exp() } else { hi.exp() };
    let residual = (delta_hat_equation(x, eps_per, delta_count) - delta).abs() / delta;
    if residual > 1e-12 {
        return Err(MechanismError::Numeric(format!("delta-hat residual {residual:e} too large")));
    }
    Ok(x)
}

fn check_sorted(slice: &HistogramSlice) -> Result<(), MechanismError> {
    if slice.entries.windows(2).all(|w| w[0].1 >= w[1].1) {
        Ok(())
    } else {
        Err(MechanismError::UnsortedSlice)
    }
}

/// Laplace mechanism over an unknown domain with Δ-restricted sensitivity.
///
/// With `b = 2τΔ/ε`, the threshold is
/// `v_⊥ = h_(d̄+1) + τ(1 + 2Δ ln(Δ/δ̂)/ε) + Lap(b)` and each of the top `d̄`
/// elements gets `v_i = h_(i) + Lap(b)`. Elements above `v_⊥` are released in
/// descending order with `v_i` as their count, followed by `(⊥, v_⊥)`.
pub fn lap_unknown(
    slice: &HistogramSlice,
    delta_count: u32,
    d_bar: usize,
    tau: f64,
    params: PrivacyParams,
    seed: &NoiseSeed,
) -> Result<DpResult, MechanismError> {
    lap_unknown_with(slice, delta_count, d_bar, tau, params, NoiseSource::Keyed(seed))
}

pub(crate) fn lap_unknown_with(
    slice: &HistogramSlice,
    delta_count: u32,
    d_bar: usize,
    tau: f64,
    params: PrivacyParams,
    noise: NoiseSource<'_>,
) -> Result<DpResult, MechanismError> {
    params.check_eps()?;
    params.check_delta()?;
    check_tau(tau)?;
    if delta_count == 0 {
        return Err(MechanismError::ZeroSensitivity);
    }
    if d_bar < delta_count as usize {
        return Err(MechanismError::FetchTooSmall { fetched: d_bar + 1, what: "Delta", value: delta_count as usize });
    }
    check_sorted(slice)?;

    let eps = params.eps_per;
    let dc = f64::from(delta_count);
    let delta_hat = solve_delta_hat(params.delta, eps, delta_count)?;
    let lap = Laplace::new(2.0 * tau * dc / eps)?;

    let v_bot = slice.rank_count(d_bar + 1) as f64
        + tau * (1.0 + 2.0 * dc * (dc / delta_hat).ln() / eps)
        + noise.laplace(lap, NoiseRole::Threshold, BOT_THRESHOLD_ID);

    let mut released: Vec<ReleasedEntry> = slice
        .entries
        .iter()
        .take(d_bar)
        .filter_map(|(element, count)| {
            let v = *count as f64 + noise.laplace(lap, NoiseRole::Selection, element);
            (v > v_bot).then(|| ReleasedEntry { element: element.clone(), noisy_count: v, selection_value: v })
        })
        .collect();
    released.sort_by(by_selection_desc);
    Ok(DpResult { entries: released, terminated_by_bot: true, bot_value: Some(v_bot) })
}

/// Unknown-domain top-k with unrestricted sensitivity and an optimized
/// threshold rank.
///
/// 1. For `i ∈ {k..d̄}`: `v_i = h_(i+1) + τ + τ ln(i/δ)/ε + Gumbel(τ/ε)`;
///    `k̄ = argmin v_i`.
/// 2. `v_⊥ = h_(k̄+1) + τ(1 + ln(min{k̄, d̄−k̄}/δ)/ε) + Gumbel(τ/ε)`, with the
///    `min` floored at 1.
/// 3. Every `j ≤ k̄` with `h_(j) > h_(k̄+1)` gets `h_(j) + Gumbel(τ/ε)`.
/// 4. Candidates above `v_⊥` are kept in descending order, at most `k`.
/// 5. Survivors are released with `h + Lap(2τ/ε)`; ⊥ ends the release when
///    fewer than `k` survive.
pub fn gumbel_unknown(
    slice: &HistogramSlice,
    k: usize,
    d_bar: usize,
    tau: f64,
    params: PrivacyParams,
    seed: &NoiseSeed,
) -> Result<DpResult, MechanismError> {
    gumbel_unknown_with(slice, k, d_bar, tau, params, NoiseSource::Keyed(seed))
}

pub(crate) fn gumbel_unknown_with(
    slice: &HistogramSlice,
    k: usize,
    d_bar: usize,
    tau: f64,
    params: PrivacyParams,
    noise: NoiseSource<'_>,
) -> Result<DpResult, MechanismError> {
    params.check_eps()?;
    params.check_delta()?;
    check_tau(tau)?;
    if k == 0 {
        return Err(MechanismError::ZeroK);
    }
    if d_bar < k {
        return Err(MechanismError::FetchTooSmall { fetched: d_bar + 1, what: "k", value: k });
    }
    check_sorted(slice)?;

    let eps = params.eps_per;
    let ln_delta = params.delta.ln();
    let gum = Gumbel::new(tau / eps)?;
    let lap = Laplace::new(2.0 * tau / eps)?;
    let h = |rank: usize| slice.rank_count(rank) as f64;

    let scan = noise.stream(NoiseRole::ThresholdScan, "");
    let k_bar = optimal_rank(slice, k, d_bar, tau / eps, scan.as_ref());

    let h_cut = h(k_bar + 1);
    let spread = k_bar.min(d_bar - k_bar).max(1) as f64;
    let h_bot = h_cut + tau * (1.0 + (spread.ln() - ln_delta) / eps);
    let v_bot = h_bot + noise.gumbel(gum, NoiseRole::Threshold, BOT_THRESHOLD_ID);

    let mut candidates: Vec<ReleasedEntry> = slice
        .entries
        .iter()
        .take(k_bar)
        .take_while(|(_, count)| *count as f64 > h_cut)
        .filter_map(|(element, count)| {
            let v = *count as f64 + noise.gumbel(gum, NoiseRole::Selection, element);
            (v > v_bot).then(|| ReleasedEntry { element: element.clone(), noisy_count: *count as f64, selection_value: v })
        })
        .collect();
    candidates.sort_by(by_selection_desc);
    candidates.truncate(k);
    for e in &mut candidates {
        e.noisy_count += noise.laplace(lap, NoiseRole::Count, &e.element);
    }
    let terminated_by_bot = candidates.len() < k;
    Ok(DpResult { entries: candidates, terminated_by_bot, bot_value: None })
}

/// `argmin_{k ≤ i ≤ d̄} h_(i+1) + b·ln(i) + Gumbel(b)_i` with `b = τ/ε`, the
/// Gumbel for rank `i` taken from counter `i` of `scan` (zero when `None`).
/// The first index wins ties.
///
/// Scaled by 1/b, the objective is `h_(i+1)/b − ln(E_i/i)` with `E_i = −ln u_i`
/// the exponential behind the Gumbel draw. Over a run of equal `h` it is
/// minimized by the largest `E_i/i`. Rank `i` can only beat the current best
/// `g` if `u_i < exp(−g·i)`, so a per-block bound avoids most logarithms.
fn optimal_rank(slice: &HistogramSlice, k: usize, d_bar: usize, b: f64, scan: Option<&NoiseStream>) -> usize {
    const BLOCK: usize = 32;
    let exp_at = |i: usize| scan.map_or(1.0, |s| -s.uniform_at(i as u64).ln());
    let mut k_bar = k;
    let mut best = f64::INFINITY;
    let mut i = k;
    while i <= d_bar {
        let run_h = slice.rank_count(i + 1);
        let (mut g, mut run_arg) = (exp_at(i) / i as f64, i);
        let mut j = i + 1;
        let mut bound = (j, f64::INFINITY);
        while j <= d_bar && slice.rank_count(j + 1) == run_h {
            let pass = match scan {
                Some(s) => {
                    if j >= bound.0 {
                        bound = (j + BLOCK, (-g * j as f64).exp() * (1.0 + 1e-9));
                    }
                    s.uniform_at(j as u64) < bound.1
                }
                None => true,
            };
            if pass {
                let r = exp_at(j) / j as f64;
                if r > g {
                    g = r;
                    run_arg = j;
                    bound.0 = j + 1;
                }
            }
            j += 1;
        }
        let w = run_h as f64 / b - g.ln();
        if w < best {
            best = w;
            k_bar = run_arg;
        }
        i = j;
    }
    k_bar
}
