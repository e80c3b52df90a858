//! Closed-form values checked against independent computations: explicit
//! polynomial roots, and a Monte Carlo average over sampled birth times.

use rand_distr::{Distribution, Exp1};

use treedim_core::malthus::{
    entropy_closed_form, hausdorff_dimension, rho_hat_prime, solve_malthusian, MalthusReport,
    DEFAULT_TOL,
};
use treedim_core::stats::MeanSe;
use treedim_core::{SeedSpec, WeightFunction};

/// Root of `q + q^2 + ... + q^k = 1` in (0, 1), by plain bisection on `q`.
fn equal_rate_root(k: i32) -> f64 {
    let f = |q: f64| (1..=k).map(|j| q.powi(j)).sum::<f64>() - 1.0;
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    1.0 / lo - 1.0
}

/// Average of `lambda s_i exp(-lambda s_i)` over `i = 1..K`, where `s_i` is
/// the birth time of the `i`-th child: a sum of exponentials with rates
/// `w(0) .. w(i-1)`.
fn sampled_entropy(w: &WeightFunction, lambda: f64, draws: usize, seed: SeedSpec) -> MeanSe {
    let mut rng = seed.rng();
    let xs: Vec<f64> = (0..draws)
        .map(|_| {
            let mut s = 0.0;
            let mut total = 0.0;
            for &rate in w.rates() {
                let e: f64 = Exp1.sample(&mut rng);
                s += e / rate;
                total += lambda * s * (-lambda * s).exp();
            }
            total
        })
        .collect();
    MeanSe::from_slice(&xs)
}

#[test]
fn binary_equal_rates_match_the_golden_ratio() {
    let w = WeightFunction::new(vec![1.0, 1.0]).unwrap();
    let lambda = (5f64.sqrt() - 1.0) / 2.0;
    let phi = 1.0 + lambda;
    let h = lambda * (phi.powi(-2) + 2.0 * phi.powi(-3));

    let report = MalthusReport::compute(&w, 0.5, DEFAULT_TOL).unwrap();
    assert!((report.lambda_star - lambda).abs() < 1e-11);
    assert!((report.h - h).abs() < 1e-11);
    assert!((report.dimension - h / 2f64.ln()).abs() < 1e-11);
    assert!((rho_hat_prime(&w, lambda).unwrap() + phi.powi(-2) + 2.0 * phi.powi(-3)).abs() < 1e-12);

    assert!((lambda - 0.6180339887498948).abs() < 1e-15);
    assert!((h - 0.5278640450004206).abs() < 1e-15);
}

#[test]
fn equal_rates_follow_the_polynomial_root() {
    for k in 2..=6 {
        let w = WeightFunction::new(vec![1.0; k as usize]).unwrap();
        let root = solve_malthusian(&w, DEFAULT_TOL).unwrap();
        assert!((root.lambda - equal_rate_root(k)).abs() < 1e-10, "k={k}");
    }
    assert!((equal_rate_root(3) - 0.8392867552141611).abs() < 1e-12);
}

#[test]
fn dimension_at_inverse_e_is_the_entropy() {
    let w = WeightFunction::new(vec![1.0, 1.0]).unwrap();
    let h = entropy_closed_form(&w).unwrap();
    assert!((hausdorff_dimension(&w, (-1f64).exp()).unwrap() - h).abs() < 1e-14);
}

#[test]
fn entropy_matches_sampled_birth_times() {
    for (i, rates) in [
        vec![1.0, 1.0],
        vec![1.0, 2.0, 0.5],
        vec![3.0, 0.2, 1.0, 4.0],
    ]
    .into_iter()
    .enumerate()
    {
        let w = WeightFunction::new(rates).unwrap();
        let lambda = solve_malthusian(&w, DEFAULT_TOL).unwrap().lambda;
        let m = sampled_entropy(&w, lambda, 1_000_000, SeedSpec::new(5, i as u64));
        let h = entropy_closed_form(&w).unwrap();
        assert!(m.within(h, 4.0), "{:?}: {m:?} vs {h}", w.rates());
    }
}
