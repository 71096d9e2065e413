use astro_float::{BigFloat, Consts, RoundingMode};
use dpolap::composition::{br_compose, overall_guarantee, solve_eps_per, PerQueryParams, SystemPrivacyBudget};

const P: usize = 256;
const RM: RoundingMode = RoundingMode::ToEven;

fn to_f64(x: &BigFloat) -> f64 {
    x.to_string().parse().expect("decimal")
}

/// `min(tε, t(r − 1 − ln r) + ε√(t/2 · ln(1/δ′)))` with `r = ε/(1 − e^{−ε})`,
/// in 256-bit arithmetic.
fn oracle(eps: f64, t: u64, delta_prime: f64) -> f64 {
    let mut cc = Consts::new().unwrap();
    let e = BigFloat::from_f64(eps, P);
    let tb = BigFloat::from_u64(t, P);
    let one = BigFloat::from_u64(1, P);
    let denom = one.sub(&e.neg().exp(P, RM, &mut cc), P, RM);
    let r = e.div(&denom, P, RM);
    let kl = r.sub(&one, P, RM).sub(&r.ln(P, RM, &mut cc), P, RM);
    let inv = one.div(&BigFloat::from_f64(delta_prime, P), P, RM).ln(P, RM, &mut cc);
    let root = tb.mul(&inv, P, RM).div(&BigFloat::from_u64(2, P), P, RM).sqrt(P, RM);
    let bounded = tb.mul(&kl, P, RM).add(&e.mul(&root, P, RM), P, RM);
    to_f64(&bounded).min(t as f64 * eps)
}

#[test]
fn matches_high_precision_oracle() {
    let mut worst = 0.0f64;
    for &eps in &[1e-7, 1e-5, 1e-3, 0.01, 0.05, 0.15, 0.5, 1.0, 3.0] {
        for &t in &[1u64, 10, 300, 3000, 100_000] {
            for &dp in &[1e-12, 1e-9, 1e-6, 1e-2] {
                let got = br_compose(eps, t, dp).unwrap();
                let want = oracle(eps, t, dp);
                let rel = ((got - want) / want).abs();
                worst = worst.max(rel);
                assert!(rel < 1e-9, "eps {eps} t {t} dp {dp}: {got} vs {want}");
            }
        }
    }
    assert!(worst < 1e-9);
}

#[test]
fn headline_guarantee_against_oracle() {
    let p = PerQueryParams { eps_per: 0.15, delta: 1e-10, delta_prime: 1e-9 };
    let (eps, delta) = overall_guarantee(p, 3000, 30).unwrap();
    assert!(((eps - oracle(0.15, 3000, 1e-9)) / eps).abs() < 1e-6);
    assert!((eps - 34.9).abs() < 0.05);
    assert_eq!(delta, 7e-9);
}

#[test]
fn solved_parameters_compose_back() {
    for &(eps_max, delta_star) in &[(34.9, 7e-9), (10.0, 1e-8), (1.0, 1e-6)] {
        let b = SystemPrivacyBudget::new(eps_max, delta_star, 3000, 30).unwrap();
        let p = solve_eps_per(b).unwrap();
        let (e, d) = overall_guarantee(p, 3000, 30).unwrap();
        assert!(((e - eps_max) / eps_max).abs() < 1e-9);
        assert!(d <= delta_star * (1.0 + 1e-12));
        assert!(((oracle(p.eps_per, 3000, p.delta_prime) - eps_max) / eps_max).abs() < 1e-9);
    }
}
