//! Diagonalization of the weighted random-scan operator
//! `K_alpha = alpha P1 + (1 - alpha) P2`.
//!
//! On the span of `p_k(x)` and `q_k(theta)` the operator acts as a 2x2 block
//! whose eigenvalues are `(1 +- sqrt((1-2a)^2 + 4a(1-a) mu_k eta_k)) / 2`, with
//! eigenfunctions `p_k + u q_k` for the two roots `u` of the coupling equation
//! `a u (1 + mu_k u) = (1 - a)(eta_k + u)`. Degrees at or beyond the cutoff
//! contribute the eigenvalue `1 - a` on `q_k` alone.
//!
//! Throughout, `scan_weight` is the probability of refreshing `theta` (the
//! `P1` move).

use serde::Serialize;

use crate::error::{Error, Result};
use crate::families::{Cutoff, SpectralData};
use crate::numerics::StepCount;

fn check_weight(scan_weight: f64) -> Result<()> {
    if (0.0..=1.0).contains(&scan_weight) {
        Ok(())
    } else {
        Err(Error::invalid(
            "scan_weight",
            format!("need 0 <= scan_weight <= 1, got {scan_weight}"),
        ))
    }
}

fn check_product(product: f64) -> Result<()> {
    if (0.0..=1.0).contains(&product) {
        Ok(())
    } else {
        Err(Error::invalid(
            "product",
            format!("need 0 <= mu*eta <= 1, got {product}"),
        ))
    }
}

/// `sqrt((1 - 2a)^2 + 4a(1 - a)q)`, with round-off negatives clamped to zero.
fn discriminant_root(scan_weight: f64, product: f64) -> f64 {
    let a = scan_weight;
    let d = (1.0 - 2.0 * a).powi(2) + 4.0 * a * (1.0 - a) * product;
    if d < 0.0 && d > -1e-15 {
        0.0
    } else {
        d.sqrt()
    }
}

/// Roots of the coupling equation `a u (1 + mu u) = (1 - a)(eta + u)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CouplingRoots {
    Quadratic {
        plus: f64,
        minus: f64,
    },
    /// `mu = 0`: the equation is linear in `u` and has this single root.
    Linear(f64),
}

impl CouplingRoots {
    pub fn roots(&self) -> Vec<f64> {
        match *self {
            CouplingRoots::Quadratic { plus, minus } => vec![plus, minus],
            CouplingRoots::Linear(u) => vec![u],
        }
    }
}

/// `u = [(1 - 2a) +- sqrt((1 - 2a)^2 + 4a(1 - a) mu eta)] / (2 a mu)`.
pub fn coupling_u(scan_weight: f64, mu: f64, eta: f64) -> Result<CouplingRoots> {
    let a = scan_weight;
    if !(a > 0.0 && a < 1.0) {
        return Err(Error::AlphaBoundary(a));
    }
    if mu == 0.0 {
        if a == 0.5 {
            return Err(Error::DegenerateCoupling);
        }
        return Ok(CouplingRoots::Linear((1.0 - a) * eta / (2.0 * a - 1.0)));
    }
    let root = discriminant_root(a, mu * eta);
    let denom = 2.0 * a * mu;
    Ok(CouplingRoots::Quadratic {
        plus: ((1.0 - 2.0 * a) + root) / denom,
        minus: ((1.0 - 2.0 * a) - root) / denom,
    })
}

/// `a u (1 + mu u) - (1 - a)(eta + u)`.
pub fn coupling_residual(scan_weight: f64, mu: f64, eta: f64, u: f64) -> f64 {
    let a = scan_weight;
    a * u * (1.0 + mu * u) - (1.0 - a) * (eta + u)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ScanLevel {
    pub k: usize,
    pub lambda_plus: f64,
    pub lambda_minus: f64,
    /// Coefficient on `q_k` in the eigenfunction `p_k + u q_k`; absent when
    /// only the product `mu_k eta_k` is known.
    pub u_plus: Option<f64>,
    pub u_minus: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScanSpectrum {
    pub scan_weight: f64,
    pub levels: Vec<ScanLevel>,
    /// `1 - a`, present when the cutoff is finite.
    pub tail_eigenvalue: Option<f64>,
}

impl ScanSpectrum {
    /// Largest eigenvalue below the constant function's 1.
    pub fn top(&self) -> Option<f64> {
        self.levels
            .iter()
            .map(|l| l.lambda_plus)
            .chain(self.tail_eigenvalue)
            .reduce(f64::max)
    }
}

/// Eigenvalues of the weighted random-scan operator for every known degree.
pub fn alpha_scan_eigenvalues(scan_weight: f64, data: &SpectralData) -> Result<ScanSpectrum> {
    check_weight(scan_weight)?;
    let levels = data
        .levels
        .iter()
        .enumerate()
        .map(|(i, level)| {
            let q = level.product();
            check_product(q)?;
            let root = discriminant_root(scan_weight, q);
            let (u_plus, u_minus) = match level.factors() {
                Some((mu, eta)) => match coupling_u(scan_weight, mu, eta) {
                    Ok(CouplingRoots::Quadratic { plus, minus }) => (Some(plus), Some(minus)),
                    Ok(CouplingRoots::Linear(u)) => (Some(u), None),
                    Err(_) => (None, None),
                },
                None => (None, None),
            };
            Ok(ScanLevel {
                k: i + 1,
                lambda_plus: 0.5 * (1.0 + root),
                lambda_minus: 0.5 * (1.0 - root),
                u_plus,
                u_minus,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ScanSpectrum {
        scan_weight,
        levels,
        tail_eigenvalue: match data.cutoff {
            Cutoff::Finite(_) => Some(1.0 - scan_weight),
            Cutoff::Unbounded => None,
        },
    })
}

/// `(1 - sqrt((1 - 2a)^2 + 4a(1 - a) mu_1 eta_1)) / 2`.
pub fn spectral_gap(scan_weight: f64, product: f64) -> Result<f64> {
    check_weight(scan_weight)?;
    check_product(product)?;
    Ok(0.5 * (1.0 - discriminant_root(scan_weight, product)))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GapOptimum {
    /// Golden-section maximizer.
    pub scan_weight: f64,
    pub gap: f64,
    /// Closed-form maximizer 1/2 and gap `(1 - sqrt(q)) / 2`.
    pub analytic_scan_weight: f64,
    pub analytic_gap: f64,
}

const GOLDEN_TOL: f64 = 1e-9;

/// Maximizes the spectral gap over the scan weight by golden-section search.
pub fn argmax_gap(product: f64) -> Result<GapOptimum> {
    if !(0.0..1.0).contains(&product) {
        return Err(Error::invalid(
            "product",
            format!("need 0 <= mu*eta < 1, got {product}"),
        ));
    }
    let f = |a: f64| 0.5 * (1.0 - discriminant_root(a, product));
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let mut c = hi - inv_phi * (hi - lo);
    let mut d = lo + inv_phi * (hi - lo);
    let (mut fc, mut fd) = (f(c), f(d));
    while hi - lo > GOLDEN_TOL {
        if fc >= fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - inv_phi * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + inv_phi * (hi - lo);
            fd = f(d);
        }
    }
    let best = 0.5 * (lo + hi);
    Ok(GapOptimum {
        scan_weight: best,
        gap: f(best),
        analytic_scan_weight: 0.5,
        analytic_gap: 0.5 * (1.0 - product.sqrt()),
    })
}

/// `constant * lambda^l`: a TV lower bound from an eigenfunction whose
/// normalization makes `constant` valid.
pub fn eigen_lower_bound(lambda: f64, steps: StepCount, constant: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::InvalidRatio(lambda));
    }
    if steps.get() == 0 {
        return Ok(constant);
    }
    if lambda == 0.0 {
        return Ok(0.0);
    }
    Ok(constant * (steps.as_f64() * lambda.ln()).exp())
}

/// Default constant in [`eigen_lower_bound`].
pub const EIGEN_LOWER_CONSTANT: f64 = 1.0 / 3.0;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::BetaBinomialFamily;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn coupling_examples() {
        let r = coupling_u(0.5, 1.0, 1.0 / 3.0).unwrap();
        let s = (1.0f64 / 3.0).sqrt();
        assert_eq!(r.roots().len(), 2);
        assert!(close(r.roots()[0], s, 1e-15) && close(r.roots()[1], -s, 1e-15));

        let a = 0.3;
        let r = coupling_u(a, 2.0, 0.0).unwrap();
        let mut roots = r.roots();
        roots.sort_by(f64::total_cmp);
        let other = (1.0 - 2.0 * a) / (a * 2.0);
        assert!(close(roots[0], 0.0, 1e-15) && close(roots[1], other, 1e-15));

        assert_eq!(coupling_u(0.0, 1.0, 1.0), Err(Error::AlphaBoundary(0.0)));
        assert_eq!(coupling_u(1.0, 1.0, 1.0), Err(Error::AlphaBoundary(1.0)));
        assert_eq!(coupling_u(0.5, 0.0, 1.0), Err(Error::DegenerateCoupling));
        assert_eq!(
            coupling_u(0.25, 0.0, 1.0).unwrap(),
            CouplingRoots::Linear(0.75 / -0.5)
        );
    }

    #[test]
    fn coupling_reproduces_phi() {
        // Degree-1 factors for n = 1: mu = 1/(n+2), eta = n.
        for n in [1u64, 4, 10, 100] {
            let fam = BetaBinomialFamily::uniform(n).unwrap();
            let data = fam.spectral_data().unwrap();
            let (mu, eta) = data.levels[0].factors().unwrap();
            let CouplingRoots::Quadratic { plus, .. } = coupling_u(0.5, mu, eta).unwrap() else {
                panic!("quadratic expected");
            };
            // p1 + u q1 at (x, theta) against phi.
            for (x, theta) in [(0u64, 0.9), (n, 0.1), (n / 2, 0.7)] {
                let eig = (x as f64 - n as f64 / 2.0) + plus * (theta - 0.5);
                assert!(close(eig, fam.eigenfunction_phi(x, theta).unwrap(), 1e-9));
            }
            let lambda = 0.5 * (1.0 + mu * plus);
            assert!(close(lambda, fam.phi_eigenvalue(), 1e-14));
        }
    }

    #[test]
    fn scan_eigenvalue_examples() {
        let data = SpectralData::from_products(&[100.0 / 102.0], Cutoff::Finite(101));
        let s = alpha_scan_eigenvalues(0.5, &data).unwrap();
        assert!(close(s.levels[0].lambda_plus, 0.9950738, 1e-7));
        assert!(close(s.levels[0].lambda_minus, 0.0049262, 1e-7));
        assert!(s.levels[0].u_plus.is_none());

        let zero = SpectralData::from_products(&[0.0], Cutoff::Finite(2));
        let s = alpha_scan_eigenvalues(0.5, &zero).unwrap();
        assert_eq!(s.levels[0].lambda_plus, 0.5);
        assert_eq!(s.levels[0].lambda_minus, 0.5);
        assert_eq!(s.tail_eigenvalue, Some(0.5));

        let s = alpha_scan_eigenvalues(0.25, &zero).unwrap();
        assert_eq!(s.levels[0].lambda_plus, 0.75);
        assert_eq!(s.levels[0].lambda_minus, 0.25);
        assert_eq!(s.tail_eigenvalue, Some(0.75));

        let unbounded = SpectralData::from_products(&[0.5], Cutoff::Unbounded);
        assert_eq!(
            alpha_scan_eigenvalues(0.5, &unbounded)
                .unwrap()
                .tail_eigenvalue,
            None
        );
        assert!(alpha_scan_eigenvalues(1.5, &unbounded).is_err());
    }

    #[test]
    fn gap_examples() {
        assert!(close(
            spectral_gap(0.5, 1.0 / 3.0).unwrap(),
            0.2113249,
            1e-7
        ));
        assert_eq!(spectral_gap(0.5, 1.0).unwrap(), 0.0);
        assert_eq!(spectral_gap(0.0, 0.3).unwrap(), 0.0);
        assert_eq!(spectral_gap(1.0, 0.3).unwrap(), 0.0);
    }

    #[test]
    fn argmax_examples() {
        for (q, gap) in [(0.5, 0.1464466), (0.0, 0.5), (0.98, 0.0050253)] {
            let opt = argmax_gap(q).unwrap();
            assert!(close(opt.scan_weight, 0.5, 1e-6), "{q}: {opt:?}");
            assert!(close(opt.gap, gap, 1e-7));
            assert!(close(opt.analytic_gap, gap, 1e-7));
        }
        assert!(argmax_gap(1.0).is_err());
    }

    #[test]
    fn eigen_lower_examples() {
        assert!(close(
            eigen_lower_bound(0.5, 3u64.into(), EIGEN_LOWER_CONSTANT).unwrap(),
            1.0 / 24.0,
            1e-15
        ));
        assert!(close(
            eigen_lower_bound(1.0, 12345u64.into(), EIGEN_LOWER_CONSTANT).unwrap(),
            1.0 / 3.0,
            1e-15
        ));
        let v = eigen_lower_bound(0.9950738, 200u64.into(), EIGEN_LOWER_CONSTANT).unwrap();
        assert!(close(v, 0.1241472, 1e-6));
    }

    #[test]
    fn random_scan_matches_exact_chain() {
        for n in 1..=20u64 {
            let fam = BetaBinomialFamily::uniform(n).unwrap();
            let chain = fam.x_chain();
            let values =
                crate::numerics::reversible_spectrum(&chain.kernel, &chain.stationary).unwrap();
            let data = SpectralData::from_products(&[values[1]], Cutoff::Finite(n + 1));
            let s = alpha_scan_eigenvalues(0.5, &data).unwrap();
            assert!(close(
                s.levels[0].lambda_plus,
                0.5 + 0.5 * values[1].sqrt(),
                1e-10
            ));
            assert!(close(s.levels[0].lambda_plus, fam.phi_eigenvalue(), 1e-10));
        }
    }

    proptest! {
        #[test]
        fn pair_identities(a in 0.0f64..=1.0, q in 0.0f64..=1.0) {
            let data = SpectralData::from_products(&[q], Cutoff::Finite(2));
            let s = alpha_scan_eigenvalues(a, &data).unwrap();
            let l = s.levels[0];
            prop_assert!((l.lambda_plus + l.lambda_minus - 1.0).abs() <= 1e-12);
            prop_assert!((l.lambda_plus * l.lambda_minus - a * (1.0 - a) * (1.0 - q)).abs() <= 1e-12);
            prop_assert!((0.0..=1.0).contains(&l.lambda_minus) && (0.0..=1.0).contains(&l.lambda_plus));
        }

        #[test]
        fn gap_is_symmetric(a in 0.0f64..=1.0, q in 0.0f64..=1.0) {
            let g = spectral_gap(a, q).unwrap();
            prop_assert!((g - spectral_gap(1.0 - a, q).unwrap()).abs() <= 1e-15);
        }

        #[test]
        fn coupling_roots_solve_equation(a in 0.01f64..0.99, mu in 0.01f64..10.0, q in 0.0f64..=1.0) {
            let eta = q / mu;
            for u in coupling_u(a, mu, eta).unwrap().roots() {
                prop_assert!(coupling_residual(a, mu, eta, u).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn half_maximizes_gap_on_grid() {
        for q in [0.01, 0.3, 0.7, 0.999] {
            let best = spectral_gap(0.5, q).unwrap();
            for i in 0..=1000 {
                let a = i as f64 / 1000.0;
                if i != 500 {
                    assert!(spectral_gap(a, q).unwrap() < best, "q={q} a={a}");
                }
            }
        }
    }
}
