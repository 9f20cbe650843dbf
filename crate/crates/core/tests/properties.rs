//! Cross-module properties of the public library API.

use gibbs_rates::bounds::{
    random_scan_lower, random_scan_rate, random_scan_upper, random_scan_upper_threshold,
};
use gibbs_rates::families::{BetaBinomialFamily, PoissonGammaFamily};
use gibbs_rates::numerics::{reversible_spectrum, tv_curve, StepCount};
use gibbs_rates::scan_compare::{compare, pg_mixing_demo, CompareConfig, MonteCarloConfig};
use gibbs_rates::spectral::{alpha_scan_eigenvalues, spectral_gap};
use proptest::prelude::*;

#[test]
fn comparison_reports_have_no_bound_violations() {
    for n in [2u64, 5, 17, 40, 100] {
        let report = compare(&CompareConfig::new(n, 3 * n as usize, 0.01)).unwrap();
        assert!(
            report.violations().is_empty(),
            "n={n}: {:?}",
            report.violations()
        );
        let m = &report.min_steps;
        assert!(m.eigen_lower.get() <= m.exact_systematic as u128, "n={n}");
        assert!(
            m.exact_systematic as u128 <= m.systematic_upper.get(),
            "n={n}"
        );
        assert!(
            m.random_scan_lower.get() <= m.random_scan_upper.get(),
            "n={n}"
        );
    }
}

#[test]
fn comparison_with_monte_carlo_is_seed_deterministic() {
    let mut cfg = CompareConfig::new(8, 20, 0.01);
    cfg.monte_carlo = Some(MonteCarloConfig {
        samples: 2000,
        seed: 5,
        max_steps: 6,
    });
    let a = compare(&cfg).unwrap();
    let b = compare(&cfg).unwrap();
    assert_eq!(a.to_csv().unwrap(), b.to_csv().unwrap());
    assert_eq!(a.monte_carlo, b.monte_carlo);
}

#[test]
fn pg_demo_chi_square_dominates_exact() {
    let fam = PoissonGammaFamily::new(1.0, 1.0, 300).unwrap();
    let demo = pg_mixing_demo(&fam, &[0, 1, 2, 4, 8, 16, 32, 64], 0.01).unwrap();
    // Start 1 sits at the stationary mean and beats start 0; monotone beyond.
    for w in demo.rows[2..].windows(2) {
        assert!(w[0].exact_min_steps <= w[1].exact_min_steps);
        assert!(w[0].chisq_min_steps <= w[1].chisq_min_steps);
    }
    for r in &demo.rows {
        assert!(
            r.exact_min_steps as u128 <= r.chisq_min_steps.get(),
            "start {}",
            r.start
        );
        assert!((r.start_mass - 0.5f64.powi(r.start as i32 + 1)).abs() < 1e-15);
    }
}

#[test]
fn pg_second_eigenvalue_tracks_rate() {
    for (shape, rate) in [(1.0, 1.0), (2.5, 1.0), (1.0, 3.0)] {
        let chain = PoissonGammaFamily::new(shape, rate, 200).unwrap().x_chain();
        let spec = reversible_spectrum(&chain.kernel, &chain.stationary).unwrap();
        assert!(
            (spec[1] - 1.0 / (rate + 1.0)).abs() < 1e-8,
            "shape {shape} rate {rate}: {}",
            spec[1]
        );
    }
}

#[test]
fn random_scan_top_eigenvalue_matches_closed_form() {
    for n in [1u64, 3, 10, 50, 100, 500] {
        let data = BetaBinomialFamily::uniform(n)
            .unwrap()
            .spectral_data()
            .unwrap();
        let top = alpha_scan_eigenvalues(0.5, &data).unwrap().top().unwrap();
        assert!((top - random_scan_rate(n)).abs() < 1e-12, "n={n}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn exact_tv_is_nonincreasing(n in 1u64..30, start_frac in 0.0f64..=1.0) {
        let chain = BetaBinomialFamily::uniform(n).unwrap().x_chain();
        let start = (start_frac * n as f64).round() as usize;
        let curve = tv_curve(&chain.kernel, start, &chain.stationary, 60).unwrap();
        for w in curve.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-13);
        }
    }

    #[test]
    fn random_scan_bounds_are_ordered(n in 2u64..200, extra in 0u64..400) {
        let l = random_scan_upper_threshold(n) + extra;
        let lo = random_scan_lower(n, StepCount(l as u128)).unwrap();
        let hi = random_scan_upper(n, StepCount(l as u128)).unwrap();
        prop_assert!(lo <= hi, "n={} l={} lower {} upper {}", n, l, lo, hi);
    }

    #[test]
    fn gap_never_exceeds_the_half_scan_gap(q in 0.0f64..0.999, a in 0.001f64..0.999) {
        prop_assert!(spectral_gap(a, q).unwrap() <= spectral_gap(0.5, q).unwrap() + 1e-15);
    }
}
