//! Analytic total-variation bounds and the step counts they imply.
//!
//! Every bound here is a finite sum of geometric terms
//! `c * rho^(steps + offset)`, so one representation ([`BoundCurve`]) serves
//! evaluation, plotting and the minimal-step solve. Values are kept in log
//! domain throughout; the drift/minorization bound needs this to resolve
//! `(1 - 2^-100)^(r l)` at all.
//!
//! Bounds may exceed one. They are returned as-is and flagged vacuous rather
//! than clamped.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::{
    eval_geometric, min_steps_geometric, Distribution, GeometricTerm, LogMagnitude, StepCount,
};

/// Drift `E[V(X_1) | x] <= lambda V(x) + b` plus minorization with mass `epsilon`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DriftMinorization {
    lambda: f64,
    b: f64,
    epsilon: LogMagnitude,
    v_x0: f64,
}

impl DriftMinorization {
    pub fn new(lambda: f64, b: f64, epsilon: LogMagnitude, v_x0: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&lambda) {
            return Err(Error::invalid(
                "lambda",
                format!("need 0 <= lambda < 1, got {lambda}"),
            ));
        }
        if !(b >= 0.0 && b.is_finite()) {
            return Err(Error::invalid("b", format!("need b >= 0, got {b}")));
        }
        if epsilon.is_zero() || epsilon.ln() > 0.0 {
            return Err(Error::invalid(
                "epsilon",
                format!("need 0 < epsilon <= 1, got {epsilon}"),
            ));
        }
        if !(v_x0 >= 0.0 && v_x0.is_finite()) {
            return Err(Error::invalid(
                "v_x0",
                format!("need V(x0) >= 0, got {v_x0}"),
            ));
        }
        Ok(DriftMinorization {
            lambda,
            b,
            epsilon,
            v_x0,
        })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn epsilon(&self) -> LogMagnitude {
        self.epsilon
    }

    pub fn v_x0(&self) -> f64 {
        self.v_x0
    }

    /// Smallest admissible `d`, namely `2b / (1 - lambda)`.
    pub fn min_d(&self) -> f64 {
        2.0 * self.b / (1.0 - self.lambda)
    }
}

/// Tuning knobs of the drift/minorization bound.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RosenthalParams {
    pub d: f64,
    pub r: f64,
}

impl RosenthalParams {
    pub fn new(d: f64, r: f64) -> Self {
        RosenthalParams { d, r }
    }
}

/// `(1 + d) / (1 + 2b + lambda d)`.
pub fn rosenthal_alpha(cert: &DriftMinorization, d: f64) -> f64 {
    (1.0 + d) / (1.0 + 2.0 * cert.b + cert.lambda * d)
}

/// `1 + 2(lambda d + b)`.
pub fn rosenthal_u(cert: &DriftMinorization, d: f64) -> f64 {
    1.0 + 2.0 * (cert.lambda * d + cert.b)
}

fn rosenthal_terms(cert: &DriftMinorization, p: &RosenthalParams) -> Result<[GeometricTerm; 2]> {
    let min_d = cert.min_d();
    if !(p.d >= min_d) {
        return Err(Error::InvalidD { d: p.d, min: min_d });
    }
    if !(p.r > 0.0 && p.r < 1.0) {
        return Err(Error::InvalidR(p.r));
    }
    let alpha = rosenthal_alpha(cert, p.d);
    let u = rosenthal_u(cert, p.d);
    let log_contraction = p.r * u.ln() - (1.0 - p.r) * alpha.ln();
    if log_contraction > 0.0 {
        return Err(Error::NonContracting(log_contraction.exp()));
    }
    // (1 - eps)^(r l), resolved through log1p.
    let coupling = GeometricTerm::from_log_ratio(
        LogMagnitude::ONE,
        p.r * (-cert.epsilon.value()).ln_1p(),
        0.0,
    )?;
    let drift = GeometricTerm::from_log_ratio(
        LogMagnitude::new(1.0 + cert.b / (1.0 - cert.lambda) + cert.v_x0),
        log_contraction,
        0.0,
    )?;
    Ok([coupling, drift])
}

/// `(1 - eps)^(r l) + (u^r / alpha^(1-r))^l (1 + b/(1 - lambda) + V(x0))`.
///
/// A contraction factor of exactly one is accepted (the bound is then
/// constant); anything larger is rejected as non-contracting.
pub fn rosenthal_bound(
    cert: &DriftMinorization,
    p: &RosenthalParams,
    steps: StepCount,
) -> Result<LogMagnitude> {
    Ok(eval_geometric(&rosenthal_terms(cert, p)?, steps))
}

pub fn rosenthal_min_steps(
    cert: &DriftMinorization,
    p: &RosenthalParams,
    target: f64,
) -> Result<StepCount> {
    check_target(target)?;
    min_steps_geometric(&rosenthal_terms(cert, p)?, LogMagnitude::new(target))
}

fn check_target(target: f64) -> Result<()> {
    if target > 0.0 && target < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(
            "target",
            format!("need 0 < target < 1, got {target}"),
        ))
    }
}

/// A grid point left out of [`rosenthal_grid_optimize`] and why.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SkippedPoint {
    pub d: f64,
    pub r: f64,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GridOptimum {
    pub params: RosenthalParams,
    pub min_steps: StepCount,
    pub skipped: Vec<SkippedPoint>,
}

/// Minimizes the required step count over a `(d, r)` grid.
///
/// Infeasible points are skipped and reported. Ties go to the smaller `d`,
/// then the smaller `r`.
pub fn rosenthal_grid_optimize(
    cert: &DriftMinorization,
    target: f64,
    d_grid: &[f64],
    r_grid: &[f64],
) -> Result<GridOptimum> {
    check_target(target)?;
    if d_grid.is_empty() || r_grid.is_empty() {
        return Err(Error::invalid("grid", "d and r grids must be non-empty"));
    }
    let mut best: Option<(RosenthalParams, StepCount)> = None;
    let mut skipped = Vec::new();
    for &d in d_grid {
        for &r in r_grid {
            let params = RosenthalParams::new(d, r);
            match rosenthal_min_steps(cert, &params, target) {
                Ok(steps) => {
                    let better = match best {
                        None => true,
                        Some((bp, bs)) => (steps, d, r) < (bs, bp.d, bp.r),
                    };
                    if better {
                        best = Some((params, steps));
                    }
                }
                Err(e) => skipped.push(SkippedPoint {
                    d,
                    r,
                    reason: e.to_string(),
                }),
            }
        }
    }
    let (params, min_steps) = best.ok_or(Error::EmptyFeasibleGrid)?;
    Ok(GridOptimum {
        params,
        min_steps,
        skipped,
    })
}

fn check_unit_ratio(name: &'static str, v: f64) -> Result<()> {
    if (0.0..1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::invalid(
            name,
            format!("need 0 <= {name} < 1, got {v}"),
        ))
    }
}

fn two_term_terms(a: f64, b: f64, weight: f64) -> Result<[GeometricTerm; 2]> {
    check_unit_ratio("a", a)?;
    check_unit_ratio("b", b)?;
    if !(weight >= 0.0 && weight.is_finite()) {
        return Err(Error::invalid(
            "weight",
            format!("need weight >= 0, got {weight}"),
        ));
    }
    Ok([
        GeometricTerm::new(LogMagnitude::ONE, a, 0.0)?,
        GeometricTerm::new(LogMagnitude::new(weight), b, 0.0)?,
    ])
}

/// `a^l + weight * b^l`, the two-rate bound shape (`weight = 2 + x`).
pub fn two_term_bound(a: f64, b: f64, weight: f64, steps: StepCount) -> Result<f64> {
    Ok(eval_geometric(&two_term_terms(a, b, weight)?, steps).value())
}

pub fn two_term_min_steps(a: f64, b: f64, weight: f64, target: f64) -> Result<StepCount> {
    if !(target > 0.0) {
        return Err(Error::invalid("target", "must be positive"));
    }
    min_steps_geometric(&two_term_terms(a, b, weight)?, LogMagnitude::new(target))
}

/// Which systematic sweep a bound refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Sweep {
    /// `K = P2 P1`.
    #[serde(rename = "K")]
    K,
    /// `K~ = P1 P2`.
    #[serde(rename = "Ktilde")]
    KTilde,
}

/// `ceil(3n/4)`: first step count where the random-scan upper bound applies.
pub fn random_scan_upper_threshold(n: u64) -> u64 {
    (3 * n).div_ceil(4)
}

/// `ceil(3n/16)`: first step count where the systematic-scan bounds apply.
pub fn systematic_threshold(n: u64) -> u64 {
    (3 * n).div_ceil(16)
}

/// Random-scan eigenvalue `1/2 + (1/2) sqrt(n/(n+2))` of the beta/binomial chain.
pub fn random_scan_rate(n: u64) -> f64 {
    let nf = n as f64;
    0.5 + 0.5 * (1.0 - 2.0 / (nf + 2.0)).sqrt()
}

/// Systematic-scan x-chain eigenvalue `1 - 2/(n+2)`.
pub fn systematic_rate(n: u64) -> f64 {
    1.0 - 2.0 / (n as f64 + 2.0)
}

/// The family a [`BoundCurve`] belongs to, with its defining constants.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BoundKind {
    Rosenthal {
        cert: DriftMinorization,
        params: RosenthalParams,
    },
    TwoTerm {
        a: f64,
        b: f64,
        weight: f64,
    },
    /// `(1/3)(1 - 1/(n+2))^l` for the random-scan beta/binomial chain.
    RandomScanLower {
        n: u64,
    },
    /// `3 e^{-(l-1)/8} + 10 sqrt((n+2)/n) (1/2 + 1/2 (1 - 2/(n+2))^{1/2})^{l-1}`.
    RandomScanUpper {
        n: u64,
    },
    /// `10 (1 - 2/(n+2))^l` for `K`, exponent `l - 1/2` for `K~`.
    Systematic {
        n: u64,
        sweep: Sweep,
    },
    /// `sqrt(1/m(j)) rate^l`.
    ChiSquare {
        stationary_mass: f64,
        rate: f64,
    },
    /// `constant * lambda^l`.
    Eigen {
        lambda: f64,
        constant: f64,
    },
}

/// A bound as a function of the step count, with its validity threshold.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundCurve {
    pub kind: BoundKind,
    pub label: String,
    pub valid_from: u64,
    /// Lower bounds on the distance (as opposed to upper bounds).
    pub is_lower: bool,
    /// Conditions the bound assumes but this crate does not check.
    pub applicability: Option<String>,
    #[serde(skip)]
    terms: Vec<GeometricTerm>,
}

/// A bound value with its vacuity flag (`value >= 1` says nothing about TV).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BoundValue {
    pub value: LogMagnitude,
    pub vacuous: bool,
}

const RANDOM_SCAN_START: &str = "random-scan joint chain started at theta >= 1/2";

impl BoundCurve {
    pub fn rosenthal(cert: DriftMinorization, params: RosenthalParams) -> Result<Self> {
        let terms = rosenthal_terms(&cert, &params)?.to_vec();
        Ok(BoundCurve {
            kind: BoundKind::Rosenthal { cert, params },
            label: "drift/minorization".into(),
            valid_from: 0,
            is_lower: false,
            applicability: None,
            terms,
        })
    }

    pub fn two_term(a: f64, b: f64, weight: f64) -> Result<Self> {
        Ok(BoundCurve {
            kind: BoundKind::TwoTerm { a, b, weight },
            label: "two-term geometric".into(),
            valid_from: 0,
            is_lower: false,
            applicability: None,
            terms: two_term_terms(a, b, weight)?.to_vec(),
        })
    }

    pub fn random_scan_lower(n: u64) -> Result<Self> {
        check_n(n)?;
        let nf = n as f64;
        Ok(BoundCurve {
            kind: BoundKind::RandomScanLower { n },
            label: "random-scan lower".into(),
            valid_from: 0,
            is_lower: true,
            applicability: Some(RANDOM_SCAN_START.into()),
            terms: vec![GeometricTerm::new(
                LogMagnitude::new(1.0 / 3.0),
                1.0 - 1.0 / (nf + 2.0),
                0.0,
            )?],
        })
    }

    pub fn random_scan_upper(n: u64) -> Result<Self> {
        check_n(n)?;
        let nf = n as f64;
        Ok(BoundCurve {
            kind: BoundKind::RandomScanUpper { n },
            label: "random-scan upper".into(),
            valid_from: random_scan_upper_threshold(n),
            is_lower: false,
            applicability: Some(RANDOM_SCAN_START.into()),
            terms: vec![
                GeometricTerm::from_log_ratio(LogMagnitude::new(3.0), -1.0 / 8.0, -1.0)?,
                GeometricTerm::new(
                    LogMagnitude::new(10.0 * ((nf + 2.0) / nf).sqrt()),
                    random_scan_rate(n),
                    -1.0,
                )?,
            ],
        })
    }

    pub fn systematic(n: u64, sweep: Sweep) -> Result<Self> {
        check_n(n)?;
        let offset = match sweep {
            Sweep::K => 0.0,
            Sweep::KTilde => -0.5,
        };
        Ok(BoundCurve {
            kind: BoundKind::Systematic { n, sweep },
            label: format!("systematic {sweep:?} upper"),
            valid_from: systematic_threshold(n),
            is_lower: false,
            applicability: Some("beta/binomial systematic scan, theta >= 1/2 start".into()),
            terms: vec![GeometricTerm::new(
                LogMagnitude::new(10.0),
                systematic_rate(n),
                offset,
            )?],
        })
    }

    /// `sqrt(1/m(start)) rate^l` for the chain started at `start`.
    pub fn chi_square(stationary: &Distribution, start: usize, rate: f64) -> Result<Self> {
        let mass = *stationary
            .weights()
            .get(start)
            .ok_or(Error::StateOutOfRange {
                state: start as u64,
                max: stationary.len() as u64 - 1,
            })?;
        if mass <= 0.0 {
            return Err(Error::invalid("stationary", "start state has zero mass"));
        }
        Ok(BoundCurve {
            kind: BoundKind::ChiSquare {
                stationary_mass: mass,
                rate,
            },
            label: "chi-square".into(),
            valid_from: 0,
            is_lower: false,
            applicability: None,
            terms: vec![GeometricTerm::new(
                LogMagnitude::from_ln(-0.5 * mass.ln()),
                rate,
                0.0,
            )?],
        })
    }

    pub fn eigen_lower(lambda: f64, constant: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&lambda) {
            return Err(Error::InvalidRatio(lambda));
        }
        if !(constant >= 0.0 && constant.is_finite()) {
            return Err(Error::invalid("constant", "must be nonnegative"));
        }
        Ok(BoundCurve {
            kind: BoundKind::Eigen { lambda, constant },
            label: "eigenvalue lower".into(),
            valid_from: 0,
            is_lower: true,
            applicability: None,
            terms: vec![GeometricTerm::new(
                LogMagnitude::new(constant),
                lambda,
                0.0,
            )?],
        })
    }

    pub fn terms(&self) -> &[GeometricTerm] {
        &self.terms
    }

    /// Bound value at `steps`; errors below the validity threshold.
    pub fn evaluate(&self, steps: StepCount) -> Result<LogMagnitude> {
        if steps.get() < self.valid_from as u128 {
            return Err(Error::BelowValidityThreshold {
                steps: steps.get(),
                threshold: self.valid_from as u128,
            });
        }
        Ok(eval_geometric(&self.terms, steps))
    }

    pub fn evaluate_flagged(&self, steps: StepCount) -> Result<BoundValue> {
        let value = self.evaluate(steps)?;
        Ok(BoundValue {
            value,
            vacuous: !self.is_lower && value.ln() >= 0.0,
        })
    }

    /// Smallest valid step count with bound `<= target`.
    pub fn min_steps(&self, target: f64) -> Result<StepCount> {
        if !(target > 0.0) {
            return Err(Error::invalid("target", "must be positive"));
        }
        let solved = min_steps_geometric(&self.terms, LogMagnitude::new(target))?;
        Ok(solved.max(StepCount::from(self.valid_from)))
    }
}

fn check_n(n: u64) -> Result<()> {
    if n == 0 {
        Err(Error::invalid("n", "must be at least 1"))
    } else {
        Ok(())
    }
}

/// `(1/3)(1 - 1/(n+2))^l`.
pub fn random_scan_lower(n: u64, steps: StepCount) -> Result<f64> {
    Ok(BoundCurve::random_scan_lower(n)?.evaluate(steps)?.value())
}

/// The random-scan upper bound; requires `steps >= ceil(3n/4)`.
pub fn random_scan_upper(n: u64, steps: StepCount) -> Result<f64> {
    Ok(BoundCurve::random_scan_upper(n)?.evaluate(steps)?.value())
}

/// `10 (1 - 2/(n+2))^(l - 1/2)` for `K~`, `10 (1 - 2/(n+2))^l` for `K`;
/// requires `steps >= ceil(3n/16)`.
pub fn systematic_upper(n: u64, steps: StepCount, sweep: Sweep) -> Result<f64> {
    Ok(BoundCurve::systematic(n, sweep)?.evaluate(steps)?.value())
}

/// `sqrt(1/m(j)) (1/2)^l` for the Poisson/gamma chain with shape = rate = 1.
pub fn chisq_bound_pg(stationary: &Distribution, start: usize, steps: StepCount) -> Result<f64> {
    Ok(BoundCurve::chi_square(stationary, start, 0.5)?
        .evaluate(steps)?
        .value())
}

/// `ln(1 - 2/(n+2)) / ln(1/2 + 1/2 (1 - 2/(n+2))^{1/2})`: how many random-scan
/// steps one systematic step is worth, asymptotically in the step count.
pub fn scan_time_ratio(n: u64) -> f64 {
    systematic_rate(n).ln() / random_scan_rate(n).ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    fn n100() -> DriftMinorization {
        let l = 100.0 / 102.0;
        DriftMinorization::new(
            l,
            l,
            LogMagnitude::from_ln(-100.0 * std::f64::consts::LN_2),
            0.0,
        )
        .unwrap()
    }

    #[test]
    fn rosenthal_degenerate_parameters() {
        let cert = DriftMinorization::new(0.0, 0.0, LogMagnitude::new(0.5), 0.0).unwrap();
        let p = RosenthalParams::new(0.0, 0.5);
        let v = rosenthal_bound(&cert, &p, 2u64.into()).unwrap();
        assert!(close(v.value(), 1.5, 1e-15));
    }

    #[test]
    fn rosenthal_at_zero_steps() {
        let cert = n100();
        let p = RosenthalParams::new(1000.0, 0.001);
        let v = rosenthal_bound(&cert, &p, StepCount::ZERO).unwrap();
        let b = cert.b() / (1.0 - cert.lambda());
        assert!(close(v.value(), 2.0 + b, 1e-12));
    }

    #[test]
    fn rosenthal_n100_reaches_1e33_scale() {
        let cert = n100();
        let p = RosenthalParams::new(1000.0, 0.001);
        let l = rosenthal_min_steps(&cert, &p, 0.01).unwrap();
        // 60-digit oracle: 5.8377e33.
        assert!((l.log10() - 33.76624525).abs() < 1e-6, "{l}");
        let at = rosenthal_bound(&cert, &p, StepCount(10u128.pow(33))).unwrap();
        assert!(at.value() > 0.01 && at.value() < 1.0);
    }

    #[test]
    fn rosenthal_full_minorization() {
        let cert = DriftMinorization::new(0.0, 0.0, LogMagnitude::ONE, 0.0).unwrap();
        let p = RosenthalParams::new(0.0, 0.9);
        // d = 0 gives alpha = u = 1: the drift term stays at 1 forever.
        assert_eq!(rosenthal_min_steps(&cert, &p, 0.01), Err(Error::NoSolution));
        let p = RosenthalParams::new(1.0, 0.1);
        // alpha = 2, u = 1: the drift term contracts by 2^-0.9 per step.
        let l = rosenthal_min_steps(&cert, &p, 0.01).unwrap();
        assert_eq!(l, StepCount(8));
        let first = rosenthal_bound(&cert, &p, 1u64.into()).unwrap().value();
        assert!(close(first, 2f64.powf(-0.9), 1e-15));
    }

    #[test]
    fn rosenthal_solver_self_check_n1() {
        let l = 1.0 / 3.0;
        let cert = DriftMinorization::new(l, l, LogMagnitude::new(0.5), 0.0).unwrap();
        let p = RosenthalParams::new(10.0, 0.1);
        let steps = rosenthal_min_steps(&cert, &p, 0.01).unwrap();
        let at = rosenthal_bound(&cert, &p, steps).unwrap().value();
        let before = rosenthal_bound(&cert, &p, StepCount(steps.get() - 1))
            .unwrap()
            .value();
        assert!(at <= 0.01 && before > 0.01);
    }

    #[test]
    fn rosenthal_errors() {
        let cert = n100();
        assert!(matches!(
            rosenthal_bound(&cert, &RosenthalParams::new(10.0, 0.001), StepCount::ZERO),
            Err(Error::InvalidD { .. })
        ));
        assert!(matches!(
            rosenthal_bound(&cert, &RosenthalParams::new(1000.0, 1.0), StepCount::ZERO),
            Err(Error::InvalidR(_))
        ));
        assert!(matches!(
            rosenthal_bound(&cert, &RosenthalParams::new(1000.0, 0.1), StepCount::ZERO),
            Err(Error::NonContracting(_))
        ));
    }

    #[test]
    fn grid_optimize_cases() {
        let cert = n100();
        let single = rosenthal_grid_optimize(&cert, 0.01, &[1000.0], &[0.001]).unwrap();
        assert_eq!(single.params, RosenthalParams::new(1000.0, 0.001));

        let ds = [10.0, 100.0, 1000.0, 1e4];
        let rs = [1e-4, 1e-3, 1e-2, 1e-1];
        let best = rosenthal_grid_optimize(&cert, 0.01, &ds, &rs).unwrap();
        assert!(best.min_steps.log10() >= 30.0);
        assert!(!best.skipped.is_empty());

        assert_eq!(
            rosenthal_grid_optimize(&cert, 0.01, &[10.0], &[0.5]),
            Err(Error::EmptyFeasibleGrid)
        );
    }

    #[test]
    fn grid_tie_prefers_smaller_d() {
        // With eps = 1 and V large the coupling term vanishes after one step,
        // so both d values give the same answer when the drift term is tiny.
        let cert = DriftMinorization::new(0.0, 0.0, LogMagnitude::ONE, 0.0).unwrap();
        let best = rosenthal_grid_optimize(&cert, 0.5, &[1e6, 1e5], &[0.01]).unwrap();
        let a = rosenthal_min_steps(&cert, &RosenthalParams::new(1e5, 0.01), 0.5).unwrap();
        let b = rosenthal_min_steps(&cert, &RosenthalParams::new(1e6, 0.01), 0.5).unwrap();
        assert_eq!(a, b);
        assert_eq!(best.params.d, 1e5);
    }

    #[test]
    fn two_term_cases() {
        let l = two_term_min_steps(0.99986, 0.998497, 2.0, 0.01).unwrap();
        assert_eq!(l, StepCount(32892));
        assert!(two_term_bound(0.99986, 0.998497, 2.0, 34_000u64.into()).unwrap() <= 0.01);
        assert_eq!(
            two_term_min_steps(0.5, 0.3, 0.0, 0.5).unwrap(),
            StepCount(1)
        );
        assert_eq!(two_term_bound(0.5, 0.3, 4.0, StepCount::ZERO).unwrap(), 5.0);
        assert!(two_term_bound(1.0, 0.3, 4.0, StepCount::ZERO).is_err());
    }

    #[test]
    fn random_scan_values() {
        assert!(close(
            random_scan_lower(1, 1u64.into()).unwrap(),
            2.0 / 9.0,
            1e-15
        ));
        let at112 = random_scan_lower(100, 112u64.into()).unwrap();
        assert!(close(
            at112,
            (1.0 / 3.0) * (101.0f64 / 102.0).powi(112),
            1e-15
        ));
        assert!(random_scan_lower(0, 1u64.into()).is_err());

        let want = 3.0 * (-0.25f64).exp()
            + 10.0 * 1.5f64.sqrt() * (0.5 + 0.5 * (2.0f64 / 3.0).sqrt()).powi(2);
        assert!(close(
            random_scan_upper(4, 3u64.into()).unwrap(),
            want,
            1e-12
        ));
        assert!(close(want, 12.44, 0.01));
        assert!(matches!(
            random_scan_upper(4, 2u64.into()),
            Err(Error::BelowValidityThreshold { .. })
        ));
    }

    #[test]
    fn random_scan_upper_dominated_by_second_term() {
        let c = BoundCurve::random_scan_upper(20).unwrap();
        let [azuma, geometric] = [c.terms()[0], c.terms()[1]];
        let l = 400.0;
        assert!(geometric.ln_at(l) > azuma.ln_at(l));
    }

    #[test]
    fn systematic_values() {
        let k = systematic_upper(16, 3u64.into(), Sweep::K).unwrap();
        assert!(close(k, 10.0 * (8.0f64 / 9.0).powi(3), 1e-12));
        assert!(close(k, 7.023, 1e-3));
        let kt = systematic_upper(16, 3u64.into(), Sweep::KTilde).unwrap();
        assert!(close(kt / k, (8.0f64 / 9.0).powf(-0.5), 1e-12));
        assert!(systematic_upper(16, 2u64.into(), Sweep::K).is_err());
    }

    #[test]
    fn thresholds_round_up() {
        assert_eq!(random_scan_upper_threshold(4), 3);
        assert_eq!(random_scan_upper_threshold(5), 4);
        assert_eq!(systematic_threshold(16), 3);
        assert_eq!(systematic_threshold(17), 4);
        assert_eq!(systematic_threshold(1), 1);
    }

    #[test]
    fn chi_square_values() {
        let m =
            Distribution::from_unnormalized((0..80).map(|x| 0.5f64.powi(x + 1)).collect()).unwrap();
        assert!(close(
            chisq_bound_pg(&m, 0, StepCount::ZERO).unwrap(),
            2f64.sqrt(),
            1e-12
        ));
        assert!(close(
            chisq_bound_pg(&m, 0, 3u64.into()).unwrap(),
            2f64.sqrt() / 8.0,
            1e-12
        ));
        assert!(chisq_bound_pg(&m, 80, StepCount::ZERO).is_err());
        let steps = |j: usize| {
            BoundCurve::chi_square(&m, j, 0.5)
                .unwrap()
                .min_steps(0.01)
                .unwrap()
                .get()
        };
        for j in 2..=40 {
            assert_eq!(steps(j) - steps(j - 2), 1, "j = {j}");
        }
    }

    #[test]
    fn scan_time_ratio_values() {
        assert!(scan_time_ratio(1) > 1.0 && scan_time_ratio(1).is_finite());
        // ln(1 - 2/(n+2)) ~ -2/(n+2) while ln(random rate) ~ -1/(2(n+2)).
        assert!(close(scan_time_ratio(100), 4.0, 0.05));
        assert!(close(scan_time_ratio(1_000_000), 4.0, 1e-4));
    }

    #[test]
    fn vacuous_flag() {
        let c = BoundCurve::random_scan_upper(4).unwrap();
        assert!(c.evaluate_flagged(3u64.into()).unwrap().vacuous);
        assert!(!c.evaluate_flagged(400u64.into()).unwrap().vacuous);
    }

    proptest! {
        #[test]
        fn rosenthal_non_increasing(
            lambda in 0.0f64..0.99, b in 0.0f64..5.0, log_eps in -80.0f64..0.0,
            v in 0.0f64..10.0, extra in 0.0f64..100.0, r in 0.001f64..0.999,
            l in 0u64..100_000,
        ) {
            let cert = DriftMinorization::new(lambda, b, LogMagnitude::from_ln(log_eps), v).unwrap();
            let p = RosenthalParams::new(cert.min_d() + extra, r);
            if let Ok(now) = rosenthal_bound(&cert, &p, l.into()) {
                let next = rosenthal_bound(&cert, &p, (l + 1).into()).unwrap();
                prop_assert!(next <= now);
            }
        }

        #[test]
        fn two_term_bracket(a in 0.5f64..0.9999, b in 0.0f64..0.9999, w in 0.0f64..10.0, t in 1e-4f64..0.5) {
            let l = two_term_min_steps(a, b, w, t).unwrap().get();
            prop_assume!(l <= 1_000_000);
            let f = |s: u128| two_term_bound(a, b, w, StepCount(s)).unwrap();
            prop_assert!(f(l) <= t);
            if l > 0 {
                prop_assert!(f(l - 1) > t);
            }
        }

        #[test]
        fn random_scan_lower_below_upper(n in 2u64..=40, extra in 0u64..400) {
            let l = StepCount::from(random_scan_upper_threshold(n) + extra);
            let upper = random_scan_upper(n, l).unwrap();
            if upper < 1.0 {
                prop_assert!(random_scan_lower(n, l).unwrap() <= upper);
            }
        }
    }
}
