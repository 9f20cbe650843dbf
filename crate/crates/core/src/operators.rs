//! Executable Gibbs updates and the word algebra of the two projections.
//!
//! `P1` refreshes `theta` from its conditional given `x`; `P2` refreshes `x`
//! given `theta`. A random-scan step applies `P1` with probability
//! `scan_weight`, otherwise `P2`.
//!
//! Variates come from `rand_distr`: `Beta` (Cheng's BB/BC algorithms),
//! `Gamma` (Marsaglia-Tsang), `Binomial` (BTPE / inversion) and `Poisson`
//! (PTRS / Knuth). Every trajectory draws from its own ChaCha8 stream,
//! selected by the trajectory index, so parallel batches are reproducible.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Binomial, Distribution as _, Gamma, Poisson};
use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::bounds::Sweep;
use crate::error::{Error, Result};
use crate::families::{BetaBinomialFamily, ConjugateFamily};
use crate::spectral::{coupling_u, CouplingRoots};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct JointState {
    pub x: u64,
    pub theta: f64,
}

impl JointState {
    pub fn new(x: u64, theta: f64) -> Self {
        JointState { x, theta }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScanStrategy {
    Systematic { sweep: Sweep },
    Random { scan_weight: f64 },
}

impl ScanStrategy {
    pub fn random(scan_weight: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&scan_weight) {
            return Err(Error::invalid(
                "scan_weight",
                format!("need 0 <= scan_weight <= 1, got {scan_weight}"),
            ));
        }
        Ok(ScanStrategy::Random { scan_weight })
    }
}

/// Generator for trajectory `index` under `seed`.
pub fn trajectory_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

pub fn validate_state(fam: &ConjugateFamily, s: JointState) -> Result<()> {
    match fam {
        ConjugateFamily::BetaBinomial(f) => {
            if s.x > f.n() {
                return Err(Error::StateOutOfRange {
                    state: s.x,
                    max: f.n(),
                });
            }
            if !(0.0..=1.0).contains(&s.theta) {
                return Err(Error::invalid(
                    "theta",
                    format!("{} not in [0, 1]", s.theta),
                ));
            }
        }
        ConjugateFamily::PoissonGamma(_) => {
            if !(s.theta > 0.0 && s.theta.is_finite()) {
                return Err(Error::invalid(
                    "theta",
                    format!("{} not in (0, inf)", s.theta),
                ));
            }
        }
    }
    Ok(())
}

fn refresh_theta<R: Rng>(fam: &ConjugateFamily, x: u64, rng: &mut R) -> f64 {
    match fam {
        ConjugateFamily::BetaBinomial(f) => {
            let xf = x as f64;
            Beta::new(f.a() + xf, f.b() + f.n() as f64 - xf)
                .expect("positive beta parameters")
                .sample(rng)
        }
        ConjugateFamily::PoissonGamma(f) => {
            Gamma::new(f.shape() + x as f64, 1.0 / (f.rate() + 1.0))
                .expect("positive gamma parameters")
                .sample(rng)
        }
    }
}

fn refresh_x<R: Rng>(fam: &ConjugateFamily, theta: f64, rng: &mut R) -> u64 {
    match fam {
        ConjugateFamily::BetaBinomial(f) => Binomial::new(f.n(), theta.clamp(0.0, 1.0))
            .expect("probability in [0, 1]")
            .sample(rng),
        ConjugateFamily::PoissonGamma(_) => {
            if theta <= 0.0 {
                0
            } else {
                Poisson::new(theta).expect("positive mean").sample(rng) as u64
            }
        }
    }
}

fn step_unchecked<R: Rng>(
    fam: &ConjugateFamily,
    s: JointState,
    strategy: ScanStrategy,
    rng: &mut R,
) -> JointState {
    let p1 = |s: JointState, rng: &mut R| JointState {
        theta: refresh_theta(fam, s.x, rng),
        ..s
    };
    let p2 = |s: JointState, rng: &mut R| JointState {
        x: refresh_x(fam, s.theta, rng),
        ..s
    };
    match strategy {
        ScanStrategy::Systematic {
            sweep: Sweep::KTilde,
        } => {
            let s = p1(s, rng);
            p2(s, rng)
        }
        ScanStrategy::Systematic { sweep: Sweep::K } => {
            let s = p2(s, rng);
            p1(s, rng)
        }
        ScanStrategy::Random { scan_weight } => {
            if rng.random::<f64>() < scan_weight {
                p1(s, rng)
            } else {
                p2(s, rng)
            }
        }
    }
}

/// One update of the sampler.
pub fn step<R: Rng>(
    fam: &ConjugateFamily,
    s: JointState,
    strategy: ScanStrategy,
    rng: &mut R,
) -> Result<JointState> {
    validate_state(fam, s)?;
    if let ScanStrategy::Random { scan_weight } = strategy {
        ScanStrategy::random(scan_weight)?;
    }
    Ok(step_unchecked(fam, s, strategy, rng))
}

/// States `s0, s1, ..., s_steps` of one trajectory drawn from stream 0 of `seed`.
pub fn simulate_trajectory(
    fam: &ConjugateFamily,
    s0: JointState,
    strategy: ScanStrategy,
    steps: usize,
    seed: u64,
) -> Result<Vec<JointState>> {
    let mut rng = trajectory_rng(seed, 0);
    let mut out = Vec::with_capacity(steps + 1);
    out.push(s0);
    let mut s = s0;
    for _ in 0..steps {
        s = step(fam, s, strategy, &mut rng)?;
        out.push(s);
    }
    Ok(out)
}

/// Final `x` of `samples` independent trajectories after `burn_in` steps,
/// tallied per state `0..=n`.
pub fn x_marginal_counts(
    fam: &BetaBinomialFamily,
    s0: JointState,
    strategy: ScanStrategy,
    burn_in: usize,
    samples: usize,
    seed: u64,
) -> Result<Vec<u64>> {
    let cf = ConjugateFamily::from(*fam);
    step(&cf, s0, strategy, &mut trajectory_rng(seed, u64::MAX))?;
    let n = fam.n() as usize;
    Ok((0..samples as u64)
        .into_par_iter()
        .fold(
            || vec![0u64; n + 1],
            |mut acc, i| {
                let mut rng = trajectory_rng(seed, i);
                let mut s = s0;
                for _ in 0..burn_in {
                    s = step_unchecked(&cf, s, strategy, &mut rng);
                }
                acc[s.x as usize] += 1;
                acc
            },
        )
        .reduce(
            || vec![0u64; n + 1],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        ))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DecayEstimate {
    pub steps: usize,
    pub estimate: f64,
    pub std_error: f64,
    /// `lambda^steps * psi(s0)` for the eigenfunction `psi`.
    pub expected: f64,
}

impl DecayEstimate {
    /// `|estimate - expected|` in standard errors (0 when both agree exactly).
    pub fn z_score(&self) -> f64 {
        let diff = (self.estimate - self.expected).abs();
        if diff == 0.0 {
            0.0
        } else {
            diff / self.std_error
        }
    }
}

/// Degree-1 eigenfunction `psi = p1 + u q1` of the random-scan operator and
/// its eigenvalue. At weight 1/2, `psi` is `phi` with eigenvalue
/// `1/2 + (1/2) sqrt(n/(n+2))`.
fn decay_eigenpair(fam: &BetaBinomialFamily, scan_weight: f64) -> Result<(f64, f64)> {
    let data = fam.spectral_data()?;
    let (mu, eta) = data.levels[0]
        .factors()
        .expect("degree-1 factors are always known");
    let u = match coupling_u(scan_weight, mu, eta)? {
        CouplingRoots::Quadratic { plus, .. } => plus,
        CouplingRoots::Linear(u) => u,
    };
    Ok((u, scan_weight * (1.0 + mu * u)))
}

const MIN_DECAY_SAMPLES: usize = 1000;
const DECAY_CHUNK: u64 = 1024;

/// Monte Carlo estimates of `E[psi(X_l, Theta_l)]` for every `l` in
/// `0..=max_steps`, all read off the same `samples` trajectories.
pub fn eigenfunction_decay_curve(
    fam: &BetaBinomialFamily,
    s0: JointState,
    scan_weight: f64,
    max_steps: usize,
    samples: usize,
    seed: u64,
) -> Result<Vec<DecayEstimate>> {
    if samples < MIN_DECAY_SAMPLES {
        return Err(Error::invalid(
            "samples",
            format!("need at least {MIN_DECAY_SAMPLES}, got {samples}"),
        ));
    }
    let cf = ConjugateFamily::from(*fam);
    validate_state(&cf, s0)?;
    let strategy = ScanStrategy::random(scan_weight)?;
    let (u, lambda) = decay_eigenpair(fam, scan_weight)?;
    let half_n = fam.n() as f64 / 2.0;
    let psi = |s: JointState| (s.x as f64 - half_n) + u * (s.theta - 0.5);

    // Fixed chunks summed in order keep the floating-point totals reproducible.
    let chunks: Vec<u64> = (0..(samples as u64).div_ceil(DECAY_CHUNK)).collect();
    let partial: Vec<(Vec<f64>, Vec<f64>)> = chunks
        .par_iter()
        .map(|&c| {
            let mut sum = vec![0.0; max_steps + 1];
            let mut sq = vec![0.0; max_steps + 1];
            let end = ((c + 1) * DECAY_CHUNK).min(samples as u64);
            for i in c * DECAY_CHUNK..end {
                let mut rng = trajectory_rng(seed, i);
                let mut s = s0;
                for l in 0..=max_steps {
                    if l > 0 {
                        s = step_unchecked(&cf, s, strategy, &mut rng);
                    }
                    let v = psi(s);
                    sum[l] += v;
                    sq[l] += v * v;
                }
            }
            (sum, sq)
        })
        .collect();

    let m = samples as f64;
    let psi0 = psi(s0);
    Ok((0..=max_steps)
        .map(|l| {
            let (sum, sq) = partial
                .iter()
                .fold((0.0, 0.0), |(a, b), (s, q)| (a + s[l], b + q[l]));
            let mean = sum / m;
            let var = ((sq - m * mean * mean) / (m - 1.0)).max(0.0);
            let (estimate, std_error) = if l == 0 {
                (psi0, 0.0)
            } else {
                (mean, (var / m).sqrt())
            };
            DecayEstimate {
                steps: l,
                estimate,
                std_error,
                expected: lambda.powi(l as i32) * psi0,
            }
        })
        .collect())
}

/// Monte Carlo estimate of `E[psi(X_l, Theta_l)]` at a single `l`.
pub fn eigenfunction_decay(
    fam: &BetaBinomialFamily,
    s0: JointState,
    scan_weight: f64,
    steps: usize,
    samples: usize,
    seed: u64,
) -> Result<DecayEstimate> {
    let curve = eigenfunction_decay_curve(fam, s0, scan_weight, steps, samples, seed)?;
    Ok(curve[steps])
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Letter {
    P1,
    P2,
}

impl Letter {
    fn other(self) -> Letter {
        match self {
            Letter::P1 => Letter::P2,
            Letter::P2 => Letter::P1,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Word(pub Vec<Letter>);

impl Word {
    pub fn parse(s: &str) -> Result<Word> {
        let mut letters = Vec::new();
        let mut rest = s.trim();
        while !rest.is_empty() {
            let letter = match rest.get(..2) {
                Some("P1") => Letter::P1,
                Some("P2") => Letter::P2,
                _ => return Err(Error::invalid("word", format!("cannot parse `{s}`"))),
            };
            letters.push(letter);
            rest = &rest[2..];
        }
        Ok(Word(letters))
    }

    /// Compact form of a reduced nonempty word.
    pub fn compact(&self) -> Option<ReducedWord> {
        let first = *self.0.first()?;
        let alternates = self.0.windows(2).all(|w| w[0] != w[1]);
        alternates.then_some(ReducedWord {
            first,
            len: self.0.len(),
        })
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for l in &self.0 {
            write!(f, "{l:?}")?;
        }
        Ok(())
    }
}

/// Collapses runs of equal letters, using `P1 P1 = P1` and `P2 P2 = P2`.
pub fn word_reduce(w: &Word) -> Word {
    let mut out: Vec<Letter> = Vec::with_capacity(w.0.len());
    for &l in &w.0 {
        if out.last() != Some(&l) {
            out.push(l);
        }
    }
    Word(out)
}

/// An alternating word, determined by its first letter and length.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ReducedWord {
    pub first: Letter,
    pub len: usize,
}

impl ReducedWord {
    pub fn to_word(self) -> Word {
        let mut letters = Vec::with_capacity(self.len);
        let mut l = self.first;
        for _ in 0..self.len {
            letters.push(l);
            l = l.other();
        }
        Word(letters)
    }
}

impl fmt::Display for ReducedWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.to_word().fmt(f)
    }
}

impl Serialize for ReducedWord {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

pub const MAX_WORD_LEN: usize = 20;

fn check_word_len(len: usize) -> Result<()> {
    if (1..=MAX_WORD_LEN).contains(&len) {
        Ok(())
    } else {
        Err(Error::WordLengthOutOfRange(len))
    }
}

/// Raw word `mask` of length `len` (bit `i` set means letter `i` is `P2`):
/// its reduced form and its number of `P1` letters.
fn classify(mask: u32, len: usize) -> (ReducedWord, usize) {
    let first = if mask & 1 == 0 {
        Letter::P1
    } else {
        Letter::P2
    };
    let inner = if len > 1 { (1u32 << (len - 1)) - 1 } else { 0 };
    let switches = ((mask ^ (mask >> 1)) & inner).count_ones() as usize;
    let p2 = (mask & ((1u32 << len) - 1)).count_ones() as usize;
    (
        ReducedWord {
            first,
            len: 1 + switches,
        },
        len - p2,
    )
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CollapseCensus {
    pub len: usize,
    pub counts: BTreeMap<ReducedWord, u64>,
}

impl CollapseCensus {
    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    pub fn count(&self, w: ReducedWord) -> u64 {
        self.counts.get(&w).copied().unwrap_or(0)
    }
}

/// Per reduced word, counts of raw words indexed by their number of `P1`s.
fn tally_by_p1(len: usize) -> BTreeMap<ReducedWord, Vec<u64>> {
    let total = 1u32 << len;
    let merge = |mut a: BTreeMap<ReducedWord, Vec<u64>>, b: BTreeMap<ReducedWord, Vec<u64>>| {
        for (w, v) in b {
            let e = a.entry(w).or_insert_with(|| vec![0; len + 1]);
            e.iter_mut().zip(v).for_each(|(x, y)| *x += y);
        }
        a
    };
    (0..total)
        .into_par_iter()
        .fold(BTreeMap::new, |mut acc, mask| {
            let (w, p1) = classify(mask, len);
            acc.entry(w).or_insert_with(|| vec![0; len + 1])[p1] += 1;
            acc
        })
        .reduce(BTreeMap::new, merge)
}

/// Tally of the `2^len` words over `{P1, P2}` by their reduced form.
pub fn collapse_census(len: usize) -> Result<CollapseCensus> {
    check_word_len(len)?;
    Ok(CollapseCensus {
        len,
        counts: tally_by_p1(len)
            .into_iter()
            .map(|(w, v)| (w, v.iter().sum()))
            .collect(),
    })
}

/// `sum_i c_i a^i (1 - a)^(len - i)` with integer `c_i`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct MultiplierPolynomial {
    pub len: usize,
    /// `coefficients[i]` multiplies `a^i (1 - a)^(len - i)`.
    pub coefficients: Vec<u64>,
}

impl MultiplierPolynomial {
    pub fn evaluate(&self, a: f64) -> f64 {
        self.coefficients
            .iter()
            .enumerate()
            .map(|(i, &c)| c as f64 * a.powi(i as i32) * (1.0 - a).powi((self.len - i) as i32))
            .sum()
    }

    pub fn evaluate_exact(&self, a: &BigRational) -> BigRational {
        let one = BigRational::from_integer(BigInt::from(1));
        let b = &one - a;
        self.coefficients.iter().enumerate().fold(
            BigRational::from_integer(BigInt::from(0)),
            |acc, (i, &c)| {
                let term = num_traits::pow(a.clone(), i) * num_traits::pow(b.clone(), self.len - i);
                acc + term * BigRational::from_integer(BigInt::from(c))
            },
        )
    }
}

/// Weighted-scan multipliers of each reduced word in `(a P1 + (1 - a) P2)^len`.
pub fn alpha_multipliers(len: usize) -> Result<BTreeMap<ReducedWord, MultiplierPolynomial>> {
    check_word_len(len)?;
    Ok(tally_by_p1(len)
        .into_iter()
        .map(|(w, coefficients)| (w, MultiplierPolynomial { len, coefficients }))
        .collect())
}
