//! Systematic versus random scan on the beta/binomial chain, bounds versus
//! exact distances, and the Poisson/gamma start-state demo.

use serde::Serialize;
use statrs::function::factorial::ln_binomial;

use crate::bounds::{
    random_scan_rate, random_scan_upper_threshold, rosenthal_bound, rosenthal_min_steps,
    systematic_rate, BoundCurve, RosenthalParams, Sweep,
};
use crate::error::{Error, Result};
use crate::families::{BetaBinomialFamily, PoissonGammaFamily};
use crate::numerics::{
    exact_min_steps, worst_start_tv_curve, LogMagnitude, StepCount, MAX_EXACT_STEPS,
};
use crate::operators::{
    collapse_census, eigenfunction_decay_curve, DecayEstimate, JointState, Letter, MAX_WORD_LEN,
};
use crate::report;

/// Largest `n` for which the exact `(n+1)`-state matrices are built.
pub const MAX_EXACT_N: u64 = 2000;
/// Largest step count for which the upper bound is rebuilt term by term.
pub const MAX_REBUILD_STEPS: u64 = 10_000;
const EXACT_STEP_CAP: usize = 1_000_000;

/// The random-scan upper bound assembled from its ingredients.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RandomScanRebuild {
    pub n: u64,
    pub steps: u64,
    /// `3 e^{-(l-1)/8}`.
    pub azuma_term: f64,
    /// `2^{-(l-1)} sum_m count(l, m) x^{m-1}` over `P1`-initial reduced words
    /// of length `m`, with `x = sqrt(n/(n+2))`.
    pub census_sum: f64,
    /// `"enumeration"` for `l <= 20`, `"binomial"` beyond.
    pub census_source: &'static str,
    pub rebuilt: f64,
    pub closed_form: f64,
    pub relative_gap: f64,
}

pub const REBUILD_TOL: f64 = 1e-9;

impl RandomScanRebuild {
    pub fn agrees(&self) -> bool {
        self.relative_gap <= REBUILD_TOL
    }
}

/// Rebuilds the random-scan upper bound from word counts, checking it against
/// the closed form.
pub fn rebuild_random_scan_upper(n: u64, steps: u64) -> Result<RandomScanRebuild> {
    let curve = BoundCurve::random_scan_upper(n)?;
    let threshold = random_scan_upper_threshold(n);
    if steps < threshold || steps == 0 {
        return Err(Error::BelowValidityThreshold {
            steps: steps as u128,
            threshold: threshold.max(1) as u128,
        });
    }
    if steps > MAX_REBUILD_STEPS {
        return Err(Error::TooManySteps(steps as u128));
    }
    let nf = n as f64;
    let ln_x = 0.5 * (nf / (nf + 2.0)).ln();
    let m1 = steps - 1;
    let ln_half_pow = -(m1 as f64) * std::f64::consts::LN_2;

    let (census_sum, census_source) = if steps as usize <= MAX_WORD_LEN {
        let census = collapse_census(steps as usize)?;
        let sum = census
            .counts
            .iter()
            .filter(|(w, _)| w.first == Letter::P1)
            .map(|(w, &c)| {
                LogMagnitude::from_ln((c as f64).ln() + (w.len - 1) as f64 * ln_x + ln_half_pow)
            })
            .fold(LogMagnitude::ZERO, |a, b| a + b);
        (sum, "enumeration")
    } else {
        let sum = (0..=m1)
            .map(|k| LogMagnitude::from_ln(ln_binomial(m1, k) + k as f64 * ln_x + ln_half_pow))
            .fold(LogMagnitude::ZERO, |a, b| a + b);
        (sum, "binomial")
    };

    let azuma_term = 3.0 * (-(m1 as f64) / 8.0).exp();
    let coefficient = LogMagnitude::new(10.0 * ((nf + 2.0) / nf).sqrt());
    let rebuilt = (LogMagnitude::new(azuma_term) + coefficient * census_sum).value();
    let closed_form = curve.evaluate(StepCount::from(steps))?.value();
    Ok(RandomScanRebuild {
        n,
        steps,
        azuma_term,
        census_sum: census_sum.value(),
        census_source,
        rebuilt,
        closed_form,
        relative_gap: (rebuilt - closed_form).abs() / closed_form,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MonteCarloConfig {
    pub samples: usize,
    pub seed: u64,
    pub max_steps: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CompareConfig {
    pub n: u64,
    pub max_steps: usize,
    pub target: f64,
    /// Drift/minorization parameters; the drift function starts at `x0 = 0`.
    pub rosenthal: Option<RosenthalParams>,
    pub monte_carlo: Option<MonteCarloConfig>,
}

impl CompareConfig {
    pub fn new(n: u64, max_steps: usize, target: f64) -> Self {
        CompareConfig {
            n,
            max_steps,
            target,
            rosenthal: None,
            monte_carlo: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub steps: u64,
    /// Worst-start TV of the systematic x-chain.
    pub exact_tv_systematic: f64,
    pub worst_start: usize,
    /// `10 (1 - 2/(n+2))^l`; absent below its validity threshold.
    pub systematic_bound: Option<f64>,
    pub random_scan_lower: f64,
    /// Absent below `ceil(3n/4)`.
    pub random_scan_upper: Option<f64>,
    /// `(1/2) (n/(n+2))^l`.
    pub eigen_lower: f64,
    pub rosenthal: Option<LogMagnitude>,
}

/// Minimal step counts reaching the target, per method.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MinStepsSummary {
    pub exact_systematic: u64,
    pub systematic_upper: StepCount,
    /// Steps below which the eigenvalue lower bound still exceeds the target.
    pub eigen_lower: StepCount,
    pub random_scan_lower: StepCount,
    pub random_scan_upper: StepCount,
    pub rosenthal: Option<StepCount>,
    pub rosenthal_log10: Option<f64>,
    /// `random_scan_upper / systematic_upper`.
    pub random_over_systematic: f64,
    /// `ln(n/(n+2)) / ln(1/2 + (1/2) sqrt(n/(n+2)))`, random steps per systematic sweep.
    pub rate_ratio: f64,
    /// `rate_ratio / 2`: a sweep performs two coordinate updates.
    pub rate_ratio_per_update: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub config: CompareConfig,
    pub rows: Vec<ComparisonRow>,
    pub min_steps: MinStepsSummary,
    pub monte_carlo: Option<Vec<DecayEstimate>>,
    pub notes: Vec<String>,
}

impl ComparisonReport {
    /// Row-ordering violations; empty when the report is consistent.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        for r in &self.rows {
            if r.eigen_lower > r.exact_tv_systematic + 1e-12 {
                out.push(format!(
                    "l={}: eigen lower {} > exact {}",
                    r.steps, r.eigen_lower, r.exact_tv_systematic
                ));
            }
            if let Some(b) = r.systematic_bound {
                if r.exact_tv_systematic > b + 1e-12 {
                    out.push(format!(
                        "l={}: exact {} > systematic bound {b}",
                        r.steps, r.exact_tv_systematic
                    ));
                }
            }
            if let Some(u) = r.random_scan_upper {
                if u < 1.0 && r.random_scan_lower > u {
                    out.push(format!(
                        "l={}: random lower {} > upper {u}",
                        r.steps, r.random_scan_lower
                    ));
                }
            }
        }
        out
    }

    pub fn to_csv(&self) -> Result<String> {
        let header = [
            "steps",
            "exact_tv_systematic",
            "worst_start",
            "systematic_bound",
            "random_scan_lower",
            "random_scan_upper",
            "eigen_lower",
            "rosenthal_mantissa",
            "rosenthal_exponent",
        ];
        let rows: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| {
                let (m, e) = r.rosenthal.map(|v| v.scientific()).unzip();
                vec![
                    r.steps.to_string(),
                    report::cell(Some(r.exact_tv_systematic)),
                    r.worst_start.to_string(),
                    report::cell(r.systematic_bound),
                    report::cell(Some(r.random_scan_lower)),
                    report::cell(r.random_scan_upper),
                    report::cell(Some(r.eigen_lower)),
                    report::cell(m),
                    e.map(|e| e.to_string()).unwrap_or_default(),
                ]
            })
            .collect();
        report::to_csv(&header, &rows)
    }
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

/// Exact, bound-based and (optionally) Monte Carlo view of one `n`.
pub fn compare(config: &CompareConfig) -> Result<ComparisonReport> {
    let n = config.n;
    if n == 0 {
        return Err(Error::invalid("n", "must be at least 1"));
    }
    if n > MAX_EXACT_N {
        return Err(Error::InfeasibleN(n));
    }
    check_target(config.target)?;
    if config.max_steps as u128 > MAX_EXACT_STEPS {
        return Err(Error::TooManySteps(config.max_steps as u128));
    }
    let fam = BetaBinomialFamily::uniform(n)?;
    let chain = fam.x_chain();
    let lambda = systematic_rate(n);

    let systematic = BoundCurve::systematic(n, Sweep::K)?;
    let lower = BoundCurve::random_scan_lower(n)?;
    let upper = BoundCurve::random_scan_upper(n)?;
    let eigen = BoundCurve::eigen_lower(lambda, 0.5)?;
    let cert = fam.drift_minorization(0)?;
    let rosenthal = config.rosenthal.map(|p| (cert, p));

    let exact = worst_start_tv_curve(&chain.kernel, &chain.stationary, config.max_steps)?;
    let rows = exact
        .iter()
        .enumerate()
        .map(|(l, &(tv, start))| {
            let s = StepCount::from(l as u64);
            Ok(ComparisonRow {
                steps: l as u64,
                exact_tv_systematic: tv,
                worst_start: start,
                systematic_bound: systematic.evaluate(s).ok().map(LogMagnitude::value),
                random_scan_lower: lower.evaluate(s)?.value(),
                random_scan_upper: upper.evaluate(s).ok().map(LogMagnitude::value),
                eigen_lower: eigen.evaluate(s)?.value(),
                rosenthal: rosenthal
                    .as_ref()
                    .map(|(c, p)| rosenthal_bound(c, p, s))
                    .transpose()?,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let exact_steps = worst_start_min_steps(&fam, config.target)?;
    let systematic_steps = systematic.min_steps(config.target)?;
    let upper_steps = upper.min_steps(config.target)?;
    let rosenthal_steps = rosenthal
        .as_ref()
        .map(|(c, p)| rosenthal_min_steps(c, p, config.target))
        .transpose()?;
    let rate_ratio = lambda.ln() / random_scan_rate(n).ln();
    let min_steps = MinStepsSummary {
        exact_systematic: exact_steps,
        systematic_upper: systematic_steps,
        eigen_lower: eigen.min_steps(config.target)?,
        random_scan_lower: lower.min_steps(config.target)?,
        random_scan_upper: upper_steps,
        rosenthal: rosenthal_steps,
        rosenthal_log10: rosenthal_steps.map(StepCount::log10),
        random_over_systematic: upper_steps.as_f64() / systematic_steps.as_f64(),
        rate_ratio,
        rate_ratio_per_update: rate_ratio / 2.0,
    };

    let monte_carlo = config
        .monte_carlo
        .map(|mc| {
            eigenfunction_decay_curve(
                &fam,
                JointState::new(0, 0.9),
                0.5,
                mc.max_steps,
                mc.samples,
                mc.seed,
            )
        })
        .transpose()?;

    let mut notes = vec![
        "exact_tv_systematic is the x-chain (x -> theta' -> x') from the worst starting x; the random-scan bounds concern the joint chain started at theta >= 1/2".to_string(),
        format!("systematic_bound valid for l >= {}", systematic.valid_from),
        format!("random_scan_upper valid for l >= {}", upper.valid_from),
        "eigen_lower uses f(x) = (x - n/2)/(n/2) from x0 = 0: TV >= (1/2) (n/(n+2))^l".to_string(),
        format!(
            "rate_ratio {:.6} counts sweeps against single updates; per coordinate update the ratio is {:.6}",
            rate_ratio,
            rate_ratio / 2.0
        ),
    ];
    if monte_carlo.is_some() {
        notes.push("monte_carlo rows are statistical estimates of E[phi] under random scan at weight 1/2 from (x, theta) = (0, 0.9)".to_string());
    }

    Ok(ComparisonReport {
        config: config.clone(),
        rows,
        min_steps,
        monte_carlo,
        notes,
    })
}

/// First `l` at which every starting state is within `target` of stationarity.
///
/// TV to stationarity never increases, so this is the largest per-start answer.
pub fn worst_start_min_steps(fam: &BetaBinomialFamily, target: f64) -> Result<u64> {
    use rayon::prelude::*;
    let chain = fam.x_chain();
    let per_start = (0..chain.kernel.dim())
        .into_par_iter()
        .map(|s| exact_min_steps(&chain.kernel, s, &chain.stationary, target, EXACT_STEP_CAP))
        .collect::<Result<Vec<_>>>()?;
    per_start.into_iter().try_fold(0u64, |acc, v| {
        v.map(|v| acc.max(v)).ok_or(Error::NoSolution)
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PgDemoRow {
    pub start: u64,
    pub exact_min_steps: u64,
    pub chisq_min_steps: StepCount,
    /// Stationary mass of the start state.
    pub start_mass: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PgDemo {
    pub family: PoissonGammaFamily,
    pub target: f64,
    /// Second x-chain eigenvalue `1/(rate + 1)`, used by the chi-square bound.
    pub rate: f64,
    pub rows: Vec<PgDemoRow>,
}

impl PgDemo {
    pub fn to_csv(&self) -> Result<String> {
        let rows: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| {
                vec![
                    r.start.to_string(),
                    r.exact_min_steps.to_string(),
                    r.chisq_min_steps.to_string(),
                    report::cell(Some(r.start_mass)),
                ]
            })
            .collect();
        report::to_csv(
            &["start", "exact_min_steps", "chisq_min_steps", "start_mass"],
            &rows,
        )
    }
}

/// Exact and chi-square-implied step counts from each starting state.
pub fn pg_mixing_demo(fam: &PoissonGammaFamily, starts: &[u64], target: f64) -> Result<PgDemo> {
    check_target(target)?;
    for &j in starts {
        fam.validate_start(j)?;
    }
    let chain = fam.x_chain();
    let rate = 1.0 / (fam.rate() + 1.0);
    let rows = starts
        .iter()
        .map(|&j| {
            let exact = exact_min_steps(
                &chain.kernel,
                j as usize,
                &chain.stationary,
                target,
                EXACT_STEP_CAP,
            )?
            .ok_or(Error::NoSolution)?;
            let chisq =
                BoundCurve::chi_square(&chain.stationary, j as usize, rate)?.min_steps(target)?;
            Ok(PgDemoRow {
                start: j,
                exact_min_steps: exact,
                chisq_min_steps: chisq,
                start_mass: chain.stationary.weights()[j as usize],
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PgDemo {
        family: *fam,
        target,
        rate,
        rows,
    })
}
