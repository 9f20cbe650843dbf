//! Conjugate two-component models and their exact marginal x-chains.
//!
//! For a Gibbs pair `(x, theta)` the x-chain is the marginal of the
//! systematic sweep `x -> theta' ~ pi(. | x) -> x' ~ f(. | theta')`. Both
//! families here have closed-form x-chain rows: beta-binomial rows for the
//! beta/binomial pair and negative-binomial rows for the Poisson/gamma pair.

use serde::Serialize;
use statrs::function::gamma::ln_gamma;

use crate::bounds::DriftMinorization;
use crate::error::{Error, Result};
use crate::numerics::{reversible_spectrum, Distribution, LogMagnitude, StochasticMatrix};

/// Largest truncated tail mass accepted for the Poisson/gamma chain.
pub const TRUNCATION_TOL: f64 = 1e-12;

/// Marginal chain on the data coordinate together with its stationary law.
#[derive(Clone, Debug)]
pub struct XChain {
    pub kernel: StochasticMatrix,
    pub stationary: Distribution,
}

fn ln_choose(n: u64, k: u64) -> f64 {
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

/// Exponentiate a row of log-weights and normalize it by log-sum-exp.
fn normalize_log_row(logs: &[f64]) -> Vec<f64> {
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let scaled: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = scaled.iter().sum();
    scaled.into_iter().map(|v| v / total).collect()
}

/// Binomial(n, theta) data with a Beta(a, b) prior on theta.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BetaBinomialFamily {
    n: u64,
    a: f64,
    b: f64,
}

impl BetaBinomialFamily {
    pub fn new(n: u64, a: f64, b: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("n", "must be at least 1"));
        }
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::invalid("a", format!("must be positive, got {a}")));
        }
        if !(b > 0.0 && b.is_finite()) {
            return Err(Error::invalid("b", format!("must be positive, got {b}")));
        }
        Ok(BetaBinomialFamily { n, a, b })
    }

    /// Uniform prior, the case with closed-form drift, minorization and eigenfunction.
    pub fn uniform(n: u64) -> Result<Self> {
        Self::new(n, 1.0, 1.0)
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn has_uniform_prior(&self) -> bool {
        self.a == 1.0 && self.b == 1.0
    }

    fn require_uniform(&self) -> Result<()> {
        if self.has_uniform_prior() {
            Ok(())
        } else {
            Err(Error::UnsupportedPrior {
                a: self.a,
                b: self.b,
            })
        }
    }

    /// The `(n+1)`-state x-chain
    /// `K(x, x') = C(n, x') B(x + x' + a, 2n - x - x' + b) / B(x + a, n - x + b)`
    /// and its beta-binomial stationary law.
    pub fn x_chain(&self) -> XChain {
        let n = self.n;
        let dim = n as usize + 1;
        let nf = n as f64;
        // Entries depend on x + x' through two log-gamma tables.
        let joint: Vec<f64> = (0..=2 * n)
            .map(|s| {
                let s = s as f64;
                ln_gamma(s + self.a) + ln_gamma(2.0 * nf - s + self.b)
            })
            .collect();
        let choose: Vec<f64> = (0..=n).map(|k| ln_choose(n, k)).collect();
        let mut entries = Vec::with_capacity(dim * dim);
        for x in 0..dim {
            let logs: Vec<f64> = (0..dim).map(|y| choose[y] + joint[x + y]).collect();
            entries.extend(normalize_log_row(&logs));
        }
        let kernel = StochasticMatrix::new(dim, entries).expect("normalized rows");
        let stationary = Distribution::from_unnormalized(normalize_log_row(
            &(0..=n)
                .map(|x| {
                    let x = x as f64;
                    choose[x as usize] + ln_beta(x + self.a, nf - x + self.b)
                        - ln_beta(self.a, self.b)
                })
                .collect::<Vec<_>>(),
        ))
        .expect("normalized law");
        XChain { kernel, stationary }
    }

    /// Drift and minorization constants for the uniform prior with `V(x, theta) = x`.
    pub fn drift_minorization(&self, x0: u64) -> Result<DriftMinorization> {
        self.require_uniform()?;
        if x0 > self.n {
            return Err(Error::StateOutOfRange {
                state: x0,
                max: self.n,
            });
        }
        let rate = self.n as f64 / (self.n as f64 + 2.0);
        let epsilon = LogMagnitude::from_ln(-(self.n as f64) * std::f64::consts::LN_2);
        DriftMinorization::new(rate, rate, epsilon, x0 as f64)
    }

    /// Coupling coefficients per polynomial degree.
    ///
    /// Degree 1 is exact in the basis `p1(x) = x - n/2`, `q1(theta) = theta - 1/2`:
    /// `E[q1(theta') | x] = p1(x) / (n+2)` and `E[p1(x') | theta] = n q1(theta)`.
    /// Higher degrees carry only the product, read off the numeric x-chain spectrum.
    pub fn spectral_data(&self) -> Result<SpectralData> {
        self.require_uniform()?;
        let chain = self.x_chain();
        let values = reversible_spectrum(&chain.kernel, &chain.stationary)?;
        let nf = self.n as f64;
        let mut levels = vec![LevelCoefficients::Factors {
            mu: 1.0 / (nf + 2.0),
            eta: nf,
        }];
        levels.extend(
            values
                .iter()
                .skip(2)
                .map(|v| LevelCoefficients::ProductOnly(v.clamp(0.0, 1.0))),
        );
        Ok(SpectralData {
            levels,
            cutoff: Cutoff::Finite(self.n + 1),
            basis_note: format!(
                "degree 1: p1(x) = x - {n}/2, q1(theta) = theta - 1/2; degrees >= 2: products from the numeric x-chain spectrum",
                n = self.n
            ),
        })
    }

    /// `phi(x, theta) = (x - n/2) + sqrt(n(n+2)) (theta - 1/2)`, an eigenfunction
    /// of the uniform random-scan operator.
    pub fn eigenfunction_phi(&self, x: u64, theta: f64) -> Result<f64> {
        self.require_uniform()?;
        if x > self.n {
            return Err(Error::StateOutOfRange {
                state: x,
                max: self.n,
            });
        }
        if !(0.0..=1.0).contains(&theta) {
            return Err(Error::invalid("theta", format!("{theta} not in [0, 1]")));
        }
        let nf = self.n as f64;
        Ok((x as f64 - nf / 2.0) + (nf * (nf + 2.0)).sqrt() * (theta - 0.5))
    }

    /// Random-scan eigenvalue of `phi` at scan weight 1/2.
    pub fn phi_eigenvalue(&self) -> f64 {
        let nf = self.n as f64;
        0.5 + 0.5 * (nf / (nf + 2.0)).sqrt()
    }
}

/// Poisson(theta) data with a Gamma(shape, rate) prior, truncated to `0..=x_max`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PoissonGammaFamily {
    shape: f64,
    rate: f64,
    x_max: u64,
}

/// Log pmf of the number of failures before the `r`-th success, success prob `p`.
fn ln_negative_binomial(y: u64, r: f64, p: f64) -> f64 {
    let y = y as f64;
    ln_gamma(y + r) - ln_gamma(r) - ln_gamma(y + 1.0) + r * p.ln() + y * (1.0 - p).ln()
}

fn negative_binomial_tail_above(cut: u64, r: f64, p: f64) -> f64 {
    let q = 1.0 - p;
    let mut y = cut + 1;
    let mut term = ln_negative_binomial(y, r, p).exp();
    let mut total = 0.0;
    // Past the mode the term ratio (y + r) q / (y + 1) is below one.
    loop {
        total += term;
        let ratio = (y as f64 + r) * q / (y as f64 + 1.0);
        term *= ratio;
        y += 1;
        if ratio < 1.0 && term <= total * 1e-17 {
            break;
        }
        if term == 0.0 && ratio < 1.0 {
            break;
        }
    }
    total
}

impl PoissonGammaFamily {
    /// Validates that the stationary law loses less than 1e-12 mass to truncation.
    pub fn new(shape: f64, rate: f64, x_max: u64) -> Result<Self> {
        if !(shape > 0.0 && shape.is_finite()) {
            return Err(Error::invalid(
                "shape",
                format!("must be positive, got {shape}"),
            ));
        }
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(Error::invalid(
                "rate",
                format!("must be positive, got {rate}"),
            ));
        }
        if x_max == 0 {
            return Err(Error::invalid("x_max", "must be at least 1"));
        }
        let fam = PoissonGammaFamily { shape, rate, x_max };
        let tail = fam.stationary_tail();
        if tail >= TRUNCATION_TOL {
            return Err(Error::TruncationTooSmall(tail));
        }
        Ok(fam)
    }

    /// Checks that the chain started from `start` loses less than 1e-12 mass
    /// to truncation on its first step. Returns that mass.
    pub fn validate_start(&self, start: u64) -> Result<f64> {
        if start > self.x_max {
            return Err(Error::StateOutOfRange {
                state: start,
                max: self.x_max,
            });
        }
        let tail = self.row_tail(start);
        if tail >= TRUNCATION_TOL {
            return Err(Error::TruncationTooSmall(tail));
        }
        Ok(tail)
    }

    pub fn shape(&self) -> f64 {
        self.shape
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn x_max(&self) -> u64 {
        self.x_max
    }

    fn posterior_success(&self) -> f64 {
        (self.rate + 1.0) / (self.rate + 2.0)
    }

    fn stationary_tail(&self) -> f64 {
        negative_binomial_tail_above(self.x_max, self.shape, self.rate / (self.rate + 1.0))
    }

    fn row_tail(&self, x: u64) -> f64 {
        negative_binomial_tail_above(self.x_max, x as f64 + self.shape, self.posterior_success())
    }

    /// Untruncated x-chain transition probability: `x' | x` is negative binomial
    /// with `x + shape` successes and success probability `(rate+1)/(rate+2)`.
    pub fn transition_probability(&self, x: u64, y: u64) -> f64 {
        ln_negative_binomial(y, x as f64 + self.shape, self.posterior_success()).exp()
    }

    /// Truncated x-chain with renormalized rows and the negative-binomial
    /// prior-predictive law renormalized on `0..=x_max`.
    pub fn x_chain(&self) -> XChain {
        let dim = self.x_max as usize + 1;
        let p = self.posterior_success();
        let mut entries = Vec::with_capacity(dim * dim);
        for x in 0..dim as u64 {
            let logs: Vec<f64> = (0..dim as u64)
                .map(|y| ln_negative_binomial(y, x as f64 + self.shape, p))
                .collect();
            entries.extend(normalize_log_row(&logs));
        }
        let kernel = StochasticMatrix::new(dim, entries).expect("normalized rows");
        let prior_p = self.rate / (self.rate + 1.0);
        let stationary = Distribution::from_unnormalized(normalize_log_row(
            &(0..dim as u64)
                .map(|y| ln_negative_binomial(y, self.shape, prior_p))
                .collect::<Vec<_>>(),
        ))
        .expect("normalized law");
        XChain { kernel, stationary }
    }

    /// Products `mu_k eta_k` from the numeric spectrum of the truncated chain.
    pub fn spectral_data(&self) -> Result<SpectralData> {
        let chain = self.x_chain();
        let values = reversible_spectrum(&chain.kernel, &chain.stationary)?;
        Ok(SpectralData {
            levels: values
                .iter()
                .skip(1)
                .map(|v| LevelCoefficients::ProductOnly(v.clamp(0.0, 1.0)))
                .collect(),
            cutoff: Cutoff::Unbounded,
            basis_note: format!(
                "products only, from the x-chain truncated at {}",
                self.x_max
            ),
        })
    }
}

/// Either conjugate pair, for code that runs the joint sampler.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ConjugateFamily {
    BetaBinomial(BetaBinomialFamily),
    PoissonGamma(PoissonGammaFamily),
}

impl ConjugateFamily {
    pub fn x_chain(&self) -> XChain {
        match self {
            ConjugateFamily::BetaBinomial(f) => f.x_chain(),
            ConjugateFamily::PoissonGamma(f) => f.x_chain(),
        }
    }
}

impl From<BetaBinomialFamily> for ConjugateFamily {
    fn from(f: BetaBinomialFamily) -> Self {
        ConjugateFamily::BetaBinomial(f)
    }
}

impl From<PoissonGammaFamily> for ConjugateFamily {
    fn from(f: PoissonGammaFamily) -> Self {
        ConjugateFamily::PoissonGamma(f)
    }
}

/// Coupling coefficients at one polynomial degree.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LevelCoefficients {
    /// `E_x[q_k(theta')] = mu p_k(x)` and `E_theta[p_k(x')] = eta q_k(theta)`.
    Factors { mu: f64, eta: f64 },
    /// Only `mu_k eta_k` is known; the split depends on normalization.
    ProductOnly(f64),
}

impl LevelCoefficients {
    pub fn product(&self) -> f64 {
        match *self {
            LevelCoefficients::Factors { mu, eta } => mu * eta,
            LevelCoefficients::ProductOnly(p) => p,
        }
    }

    pub fn factors(&self) -> Option<(f64, f64)> {
        match *self {
            LevelCoefficients::Factors { mu, eta } => Some((mu, eta)),
            LevelCoefficients::ProductOnly(_) => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Cutoff {
    Finite(u64),
    Unbounded,
}

/// Coefficients `(mu_k, eta_k)` for `1 <= k < c`; `levels[0]` is degree 1.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpectralData {
    pub levels: Vec<LevelCoefficients>,
    pub cutoff: Cutoff,
    pub basis_note: String,
}

impl SpectralData {
    /// Single-level data with known factors.
    pub fn from_factors(mu: f64, eta: f64, cutoff: Cutoff) -> Self {
        SpectralData {
            levels: vec![LevelCoefficients::Factors { mu, eta }],
            cutoff,
            basis_note: "caller-supplied basis".to_string(),
        }
    }

    pub fn from_products(products: &[f64], cutoff: Cutoff) -> Self {
        SpectralData {
            levels: products
                .iter()
                .map(|&p| LevelCoefficients::ProductOnly(p))
                .collect(),
            cutoff,
            basis_note: "products only".to_string(),
        }
    }

    pub fn products(&self) -> Vec<f64> {
        self.levels.iter().map(LevelCoefficients::product).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{stationary_distribution, tv_distance};

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn bb_n1_matrix() {
        let c = BetaBinomialFamily::uniform(1).unwrap().x_chain();
        let want = [[2.0 / 3.0, 1.0 / 3.0], [1.0 / 3.0, 2.0 / 3.0]];
        for i in 0..2 {
            for j in 0..2 {
                assert!(close(c.kernel.get(i, j), want[i][j], 1e-13));
            }
            assert!(close(c.kernel.row(i).iter().sum(), 1.0, 1e-15));
            assert!(close(c.stationary.weights()[i], 0.5, 1e-13));
        }
    }

    #[test]
    fn bb_n2_matrix() {
        let c = BetaBinomialFamily::uniform(2).unwrap().x_chain();
        let want = [[0.6, 0.3, 0.1], [0.3, 0.4, 0.3], [0.1, 0.3, 0.6]];
        for i in 0..3 {
            for j in 0..3 {
                assert!(close(c.kernel.get(i, j), want[i][j], 1e-13));
            }
        }
        let pi = stationary_distribution(&c.kernel).unwrap();
        for w in pi.weights() {
            assert!(close(*w, 1.0 / 3.0, 1e-12));
        }
    }

    #[test]
    fn bb_general_prior_stationary_is_invariant() {
        let c = BetaBinomialFamily::new(12, 2.5, 0.7).unwrap().x_chain();
        let numeric = stationary_distribution(&c.kernel).unwrap();
        assert!(tv_distance(&numeric, &c.stationary).unwrap() < 1e-10);
    }

    #[test]
    fn drift_constants() {
        let d = BetaBinomialFamily::uniform(100)
            .unwrap()
            .drift_minorization(0)
            .unwrap();
        assert!(close(d.lambda(), 100.0 / 102.0, 1e-15));
        assert!(close(d.b(), 100.0 / 102.0, 1e-15));
        assert!(close(
            d.epsilon().ln() / std::f64::consts::LN_2,
            -100.0,
            1e-12
        ));
        assert_eq!(d.v_x0(), 0.0);

        let d = BetaBinomialFamily::uniform(1)
            .unwrap()
            .drift_minorization(0)
            .unwrap();
        assert!(close(d.lambda(), 1.0 / 3.0, 1e-15));
        assert!(close(d.epsilon().value(), 0.5, 1e-15));

        let d = BetaBinomialFamily::uniform(2)
            .unwrap()
            .drift_minorization(2)
            .unwrap();
        assert_eq!(d.v_x0(), 2.0);
    }

    #[test]
    fn uniform_prior_required() {
        let f = BetaBinomialFamily::new(5, 2.0, 1.0).unwrap();
        assert!(matches!(
            f.drift_minorization(0),
            Err(Error::UnsupportedPrior { .. })
        ));
        assert!(matches!(
            f.spectral_data(),
            Err(Error::UnsupportedPrior { .. })
        ));
        assert!(f.eigenfunction_phi(0, 0.5).is_err());
    }

    #[test]
    fn spectral_data_products() {
        let s = BetaBinomialFamily::uniform(1)
            .unwrap()
            .spectral_data()
            .unwrap();
        assert!(close(s.products()[0], 1.0 / 3.0, 1e-15));
        assert_eq!(s.cutoff, Cutoff::Finite(2));

        let s = BetaBinomialFamily::uniform(100)
            .unwrap()
            .spectral_data()
            .unwrap();
        assert!(close(s.products()[0], 100.0 / 102.0, 1e-15));
        let p = s.products();
        assert!(p.windows(2).all(|w| w[1] <= w[0] + 1e-12));

        let s = BetaBinomialFamily::uniform(2)
            .unwrap()
            .spectral_data()
            .unwrap();
        let p = s.products();
        assert!(close(p[0], 0.5, 1e-12) && close(p[1], 0.1, 1e-12));
    }

    #[test]
    fn phi_values() {
        let f = BetaBinomialFamily::uniform(2).unwrap();
        assert_eq!(f.eigenfunction_phi(1, 0.5).unwrap(), 0.0);
        let f = BetaBinomialFamily::uniform(1).unwrap();
        assert!(close(
            f.eigenfunction_phi(1, 1.0).unwrap(),
            0.5 + 3f64.sqrt() * 0.5,
            1e-15
        ));
        let f = BetaBinomialFamily::uniform(100).unwrap();
        assert_eq!(f.eigenfunction_phi(50, 0.5).unwrap(), 0.0);
        assert!(f.eigenfunction_phi(101, 0.5).is_err());
        assert!(f.eigenfunction_phi(1, 1.5).is_err());
    }

    #[test]
    fn pg_first_row() {
        let f = PoissonGammaFamily::new(1.0, 1.0, 200).unwrap();
        for y in 0..30 {
            let want = (2.0 / 3.0) * (1.0f64 / 3.0).powi(y as i32);
            assert!(close(
                f.transition_probability(0, y),
                want,
                1e-14 * want.max(1e-300)
            ));
        }
        let c = f.x_chain();
        for i in 0..=200 {
            assert!(close(c.kernel.row(i).iter().sum(), 1.0, 1e-13));
        }
    }

    #[test]
    fn pg_stationary_is_geometric_half() {
        let c = PoissonGammaFamily::new(1.0, 1.0, 200).unwrap().x_chain();
        for (x, w) in c.stationary.weights().iter().enumerate().take(60) {
            let want = 0.5f64.powi(x as i32 + 1);
            assert!(close(*w, want, 1e-12 * want));
        }
        let numeric = stationary_distribution(&c.kernel).unwrap();
        assert!(tv_distance(&numeric, &c.stationary).unwrap() < 1e-10);
    }

    #[test]
    fn pg_truncation_check() {
        assert!(matches!(
            PoissonGammaFamily::new(1.0, 1.0, 20),
            Err(Error::TruncationTooSmall(_))
        ));
        let f = PoissonGammaFamily::new(1.0, 1.0, 60).unwrap();
        // Row from 60 has mean 30.5 and leaks ~7.7e-5 past the truncation.
        assert!(matches!(
            f.validate_start(60),
            Err(Error::TruncationTooSmall(_))
        ));
        assert!(f.validate_start(10).is_ok());
        let f = PoissonGammaFamily::new(1.0, 1.0, 400).unwrap();
        assert!(f.validate_start(128).unwrap() < 1e-20);
    }

    #[test]
    fn pg_spectral_products() {
        let s = PoissonGammaFamily::new(1.0, 1.0, 200)
            .unwrap()
            .spectral_data()
            .unwrap();
        let p = s.products();
        assert!(close(p[0], 0.5, 1e-6));
        assert!(p[..8].windows(2).all(|w| w[1] < w[0]));
    }
}
