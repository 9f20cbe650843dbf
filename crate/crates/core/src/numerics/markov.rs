use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::Serialize;

use super::StepCount;
use crate::error::{Error, Result};

const ROW_SUM_TOL: f64 = 1e-12;
const NEGATIVE_CLIP: f64 = -1e-15;
const INVARIANCE_TOL: f64 = 1e-10;
const BALANCE_TOL: f64 = 1e-10;
const POWER_ITERATION_TOL: f64 = 1e-13;
const POWER_ITERATION_CAP: usize = 1_000_000;
const EIGEN_TOL: f64 = 1e-12;

/// Longest chain run by explicit iteration.
pub const MAX_EXACT_STEPS: u128 = 10_000_000;

/// Dense row-stochastic matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct StochasticMatrix {
    dim: usize,
    entries: Vec<f64>,
}

impl StochasticMatrix {
    /// Validates stochasticity; negatives down to -1e-15 are clipped to zero.
    pub fn new(dim: usize, mut entries: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dim", "must be positive"));
        }
        if entries.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                left: entries.len(),
                right: dim * dim,
            });
        }
        for e in entries.iter_mut() {
            if !e.is_finite() || *e < NEGATIVE_CLIP {
                return Err(Error::invalid(
                    "matrix",
                    format!("entry {e} is not a probability"),
                ));
            }
            if *e < 0.0 {
                *e = 0.0;
            }
        }
        for (i, row) in entries.chunks(dim).enumerate() {
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::invalid("matrix", format!("row {i} sums to {s}")));
            }
        }
        Ok(StochasticMatrix { dim, entries })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::invalid("matrix", "rows must form a square matrix"));
        }
        Self::new(dim, rows.concat())
    }

    pub fn identity(dim: usize) -> Self {
        let mut entries = vec![0.0; dim * dim];
        for i in 0..dim {
            entries[i * dim + i] = 1.0;
        }
        StochasticMatrix { dim, entries }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.dim + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.dim..(i + 1) * self.dim]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    /// Row vector times matrix: one step of the chain applied to a law.
    pub fn left_apply(&self, v: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for (i, &vi) in v.iter().enumerate() {
            if vi == 0.0 {
                continue;
            }
            for (o, &k) in out.iter_mut().zip(self.row(i)) {
                *o += vi * k;
            }
        }
    }

    /// Matrix times column vector: the conditional expectation `E[f(X_1) | X_0 = i]`.
    pub fn right_apply(&self, f: &[f64]) -> Vec<f64> {
        (0..self.dim)
            .map(|i| self.row(i).iter().zip(f).map(|(k, x)| k * x).sum())
            .collect()
    }

    fn max_invariance_residual(&self, pi: &Distribution) -> f64 {
        let mut next = vec![0.0; self.dim];
        self.left_apply(pi.weights(), &mut next);
        next.iter()
            .zip(pi.weights())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    fn max_balance_residual(&self, pi: &Distribution) -> f64 {
        let w = pi.weights();
        let mut worst = 0.0f64;
        for i in 0..self.dim {
            for j in (i + 1)..self.dim {
                worst = worst.max((w[i] * self.get(i, j) - w[j] * self.get(j, i)).abs());
            }
        }
        worst
    }
}

/// Probability vector over `0..len`.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Distribution {
    weights: Vec<f64>,
}

impl Distribution {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::invalid("distribution", "must be non-empty"));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::invalid(
                "distribution",
                "weights must be nonnegative",
            ));
        }
        let s: f64 = weights.iter().sum();
        if (s - 1.0).abs() > ROW_SUM_TOL {
            return Err(Error::invalid(
                "distribution",
                format!("weights sum to {s}"),
            ));
        }
        Ok(Distribution { weights })
    }

    /// Normalizes nonnegative weights.
    pub fn from_unnormalized(mut weights: Vec<f64>) -> Result<Self> {
        let s: f64 = weights.iter().sum();
        if !(s > 0.0) || !s.is_finite() {
            return Err(Error::invalid(
                "distribution",
                "total mass must be positive",
            ));
        }
        weights.iter_mut().for_each(|w| *w /= s);
        Self::new(weights)
    }

    pub fn uniform(len: usize) -> Self {
        Distribution {
            weights: vec![1.0 / len as f64; len],
        }
    }

    pub fn point_mass(len: usize, at: usize) -> Self {
        let mut weights = vec![0.0; len];
        weights[at] = 1.0;
        Distribution { weights }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn mean(&self, f: &[f64]) -> f64 {
        self.weights.iter().zip(f).map(|(w, x)| w * x).sum()
    }
}

fn tv_slices(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Total variation distance `(1/2) sum |p_i - q_i|`.
pub fn tv_distance(p: &Distribution, q: &Distribution) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch {
            left: p.len(),
            right: q.len(),
        });
    }
    Ok(tv_slices(p.weights(), q.weights()))
}

fn check_chain_inputs(k: &StochasticMatrix, start: usize, pi: &Distribution) -> Result<()> {
    if pi.len() != k.dim() {
        return Err(Error::DimensionMismatch {
            left: pi.len(),
            right: k.dim(),
        });
    }
    if start >= k.dim() {
        return Err(Error::StateOutOfRange {
            state: start as u64,
            max: k.dim() as u64 - 1,
        });
    }
    let residual = k.max_invariance_residual(pi);
    if residual > INVARIANCE_TOL {
        return Err(Error::NotInvariant(residual));
    }
    Ok(())
}

/// `|| K^steps(start, .) - pi ||_TV` by repeated vector-matrix products.
pub fn matrix_power_tv(
    k: &StochasticMatrix,
    start: usize,
    pi: &Distribution,
    steps: StepCount,
) -> Result<f64> {
    if steps.get() > MAX_EXACT_STEPS {
        return Err(Error::TooManySteps(steps.get()));
    }
    check_chain_inputs(k, start, pi)?;
    let mut cur = Distribution::point_mass(k.dim(), start).weights;
    let mut next = vec![0.0; k.dim()];
    for _ in 0..steps.get() {
        k.left_apply(&cur, &mut next);
        std::mem::swap(&mut cur, &mut next);
    }
    Ok(tv_slices(&cur, pi.weights()))
}

/// TV distances for every step count `0..=max_steps` from a single start.
pub fn tv_curve(
    k: &StochasticMatrix,
    start: usize,
    pi: &Distribution,
    max_steps: usize,
) -> Result<Vec<f64>> {
    check_chain_inputs(k, start, pi)?;
    Ok(tv_curve_unchecked(k, start, pi, max_steps))
}

fn tv_curve_unchecked(
    k: &StochasticMatrix,
    start: usize,
    pi: &Distribution,
    max_steps: usize,
) -> Vec<f64> {
    let mut cur = Distribution::point_mass(k.dim(), start).weights;
    let mut next = vec![0.0; k.dim()];
    let mut out = Vec::with_capacity(max_steps + 1);
    out.push(tv_slices(&cur, pi.weights()));
    for _ in 0..max_steps {
        k.left_apply(&cur, &mut next);
        std::mem::swap(&mut cur, &mut next);
        out.push(tv_slices(&cur, pi.weights()));
    }
    out
}

/// Worst-case TV over all starting states, for each step count `0..=max_steps`.
///
/// Returns `(tv, argmax start)` per step; ties go to the smallest start.
pub fn worst_start_tv_curve(
    k: &StochasticMatrix,
    pi: &Distribution,
    max_steps: usize,
) -> Result<Vec<(f64, usize)>> {
    check_chain_inputs(k, 0, pi)?;
    let curves: Vec<Vec<f64>> = (0..k.dim())
        .into_par_iter()
        .map(|s| tv_curve_unchecked(k, s, pi, max_steps))
        .collect();
    Ok((0..=max_steps)
        .map(|l| {
            curves
                .iter()
                .enumerate()
                .fold((f64::NEG_INFINITY, 0), |best, (s, c)| {
                    // Round-off differences between symmetric starts are not real maxima.
                    if c[l] > best.0 + 1e-14 {
                        (c[l], s)
                    } else {
                        best
                    }
                })
        })
        .collect())
}

/// First step count at which the TV from `start` is at most `target`, up to `cap`.
pub fn exact_min_steps(
    k: &StochasticMatrix,
    start: usize,
    pi: &Distribution,
    target: f64,
    cap: usize,
) -> Result<Option<u64>> {
    check_chain_inputs(k, start, pi)?;
    let mut cur = Distribution::point_mass(k.dim(), start).weights;
    let mut next = vec![0.0; k.dim()];
    for l in 0..=cap {
        if tv_slices(&cur, pi.weights()) <= target {
            return Ok(Some(l as u64));
        }
        k.left_apply(&cur, &mut next);
        std::mem::swap(&mut cur, &mut next);
    }
    Ok(None)
}

/// Stationary law by power iteration from the uniform vector.
///
/// Stops once successive iterates are within 1e-13 in TV; fails after 1e6 steps.
pub fn stationary_distribution(k: &StochasticMatrix) -> Result<Distribution> {
    let mut cur = Distribution::uniform(k.dim()).weights;
    let mut next = vec![0.0; k.dim()];
    for _ in 0..POWER_ITERATION_CAP {
        k.left_apply(&cur, &mut next);
        let delta = tv_slices(&cur, &next);
        std::mem::swap(&mut cur, &mut next);
        if delta < POWER_ITERATION_TOL {
            return Distribution::from_unnormalized(cur);
        }
    }
    Err(Error::NoConvergence(POWER_ITERATION_CAP))
}

/// Eigenvalues and right eigenvectors of a reversible kernel.
#[derive(Clone, Debug)]
pub struct ReversibleSpectrum {
    /// Descending.
    pub values: Vec<f64>,
    /// `vectors[i]` is the right eigenvector for `values[i]`, scaled to unit
    /// norm in `L^2(pi)`.
    pub vectors: Vec<Vec<f64>>,
}

/// Full spectral decomposition of a kernel reversible with respect to `pi`.
///
/// Conjugates by `sqrt(pi)` to a symmetric matrix and diagonalizes that.
pub fn reversible_decomposition(
    k: &StochasticMatrix,
    pi: &Distribution,
) -> Result<ReversibleSpectrum> {
    if pi.len() != k.dim() {
        return Err(Error::DimensionMismatch {
            left: pi.len(),
            right: k.dim(),
        });
    }
    let residual = k.max_balance_residual(pi);
    if residual > BALANCE_TOL {
        return Err(Error::DetailedBalance(residual));
    }
    let n = k.dim();
    let root: Vec<f64> = pi.weights().iter().map(|w| w.sqrt()).collect();
    if root.contains(&0.0) {
        return Err(Error::invalid(
            "stationary",
            "every state needs positive mass",
        ));
    }
    let sym = DMatrix::from_fn(n, n, |i, j| {
        let a = root[i] * k.get(i, j) / root[j];
        let b = root[j] * k.get(j, i) / root[i];
        0.5 * (a + b)
    });
    let eig = SymmetricEigen::try_new(sym, EIGEN_TOL, 0).ok_or(Error::NoConvergence(usize::MAX))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = order
        .iter()
        .map(|&c| (0..n).map(|r| eig.eigenvectors[(r, c)] / root[r]).collect())
        .collect();
    Ok(ReversibleSpectrum { values, vectors })
}

/// All eigenvalues of a reversible kernel, descending.
pub fn reversible_spectrum(k: &StochasticMatrix, pi: &Distribution) -> Result<Vec<f64>> {
    reversible_decomposition(k, pi).map(|s| s.values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn two_state() -> StochasticMatrix {
        StochasticMatrix::from_rows(&[vec![2.0 / 3.0, 1.0 / 3.0], vec![1.0 / 3.0, 2.0 / 3.0]])
            .unwrap()
    }

    fn bb2() -> StochasticMatrix {
        StochasticMatrix::from_rows(&[
            vec![0.6, 0.3, 0.1],
            vec![0.3, 0.4, 0.3],
            vec![0.1, 0.3, 0.6],
        ])
        .unwrap()
    }

    #[test]
    fn tv_examples() {
        let p = Distribution::new(vec![1.0, 0.0]).unwrap();
        let q = Distribution::new(vec![0.0, 1.0]).unwrap();
        assert_eq!(tv_distance(&p, &p).unwrap(), 0.0);
        assert_eq!(tv_distance(&p, &q).unwrap(), 1.0);
        let a = Distribution::new(vec![2.0 / 3.0, 1.0 / 3.0]).unwrap();
        let b = Distribution::uniform(2);
        assert!((tv_distance(&a, &b).unwrap() - 1.0 / 6.0).abs() < 1e-15);
        let c = Distribution::uniform(3);
        assert!(matches!(
            tv_distance(&a, &c),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn matrix_power_tv_examples() {
        let k = two_state();
        let pi = Distribution::uniform(2);
        let tv = |l: u64| matrix_power_tv(&k, 0, &pi, l.into()).unwrap();
        assert!((tv(0) - 0.5).abs() < 1e-15);
        assert!((tv(1) - 1.0 / 6.0).abs() < 1e-15);
        assert!((tv(3) - 0.5 / 27.0).abs() < 1e-15);
    }

    #[test]
    fn matrix_power_tv_errors() {
        let k = two_state();
        let skewed = Distribution::new(vec![0.9, 0.1]).unwrap();
        assert!(matches!(
            matrix_power_tv(&k, 0, &skewed, 1u64.into()),
            Err(Error::NotInvariant(_))
        ));
        let pi = Distribution::uniform(2);
        assert!(matches!(
            matrix_power_tv(&k, 0, &pi, StepCount(MAX_EXACT_STEPS + 1)),
            Err(Error::TooManySteps(_))
        ));
    }

    #[test]
    fn stationary_examples() {
        let pi = stationary_distribution(&two_state()).unwrap();
        assert!((pi.weights()[0] - 0.5).abs() < 1e-12);
        let pi = stationary_distribution(&bb2()).unwrap();
        for w in pi.weights() {
            assert!((w - 1.0 / 3.0).abs() < 1e-12);
        }
        let one = StochasticMatrix::identity(1);
        assert_eq!(stationary_distribution(&one).unwrap().weights(), &[1.0]);
    }

    #[test]
    fn periodic_chain_does_not_converge() {
        // Bipartite chain: the uniform start oscillates with period 2 forever.
        let k = StochasticMatrix::from_rows(&[
            vec![0.0, 1.0, 0.0],
            vec![0.5, 0.0, 0.5],
            vec![0.0, 1.0, 0.0],
        ])
        .unwrap();
        assert!(matches!(
            stationary_distribution(&k),
            Err(Error::NoConvergence(_))
        ));
    }

    #[test]
    fn spectrum_examples() {
        let s = reversible_spectrum(&two_state(), &Distribution::uniform(2)).unwrap();
        assert!((s[0] - 1.0).abs() < 1e-12 && (s[1] - 1.0 / 3.0).abs() < 1e-12);
        let s = reversible_spectrum(&bb2(), &Distribution::uniform(3)).unwrap();
        for (got, want) in s.iter().zip([1.0, 0.5, 0.1]) {
            assert!((got - want).abs() < 1e-12, "{s:?}");
        }
        let s =
            reversible_spectrum(&StochasticMatrix::identity(2), &Distribution::uniform(2)).unwrap();
        assert_eq!(s, vec![1.0, 1.0]);
    }

    #[test]
    fn spectrum_rejects_irreversible() {
        let k = StochasticMatrix::from_rows(&[
            vec![0.0, 0.9, 0.1],
            vec![0.1, 0.0, 0.9],
            vec![0.9, 0.1, 0.0],
        ])
        .unwrap();
        let pi = Distribution::uniform(3);
        assert!(matches!(
            reversible_spectrum(&k, &pi),
            Err(Error::DetailedBalance(_))
        ));
    }

    #[test]
    fn rejects_bad_rows() {
        assert!(StochasticMatrix::from_rows(&[vec![0.5, 0.4], vec![0.5, 0.5]]).is_err());
        let clipped =
            StochasticMatrix::from_rows(&[vec![1.0 + 1e-16, -1e-16], vec![0.5, 0.5]]).unwrap();
        assert_eq!(clipped.get(0, 1), 0.0);
    }

    /// Random reversible chain: symmetric positive weights normalized by row.
    fn reversible_from(w: &[f64], n: usize) -> (StochasticMatrix, Distribution) {
        let mut sym = vec![0.0; n * n];
        let mut idx = 0;
        for i in 0..n {
            for j in i..n {
                sym[i * n + j] = w[idx];
                sym[j * n + i] = w[idx];
                idx += 1;
            }
        }
        let deg: Vec<f64> = (0..n)
            .map(|i| sym[i * n..(i + 1) * n].iter().sum())
            .collect();
        let total: f64 = deg.iter().sum();
        let mut k = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                k[i * n + j] = sym[i * n + j] / deg[i];
            }
        }
        (
            StochasticMatrix::new(n, k).unwrap(),
            Distribution::from_unnormalized(deg.iter().map(|d| d / total).collect()).unwrap(),
        )
    }

    proptest! {
        #[test]
        fn tv_is_a_metric(
            a in proptest::collection::vec(0.0f64..1.0, 5),
            b in proptest::collection::vec(0.0f64..1.0, 5),
            c in proptest::collection::vec(0.0f64..1.0, 5),
        ) {
            prop_assume!(a.iter().sum::<f64>() > 0.0 && b.iter().sum::<f64>() > 0.0 && c.iter().sum::<f64>() > 0.0);
            let (p, q, r) = (
                Distribution::from_unnormalized(a).unwrap(),
                Distribution::from_unnormalized(b).unwrap(),
                Distribution::from_unnormalized(c).unwrap(),
            );
            let pq = tv_distance(&p, &q).unwrap();
            prop_assert_eq!(pq, tv_distance(&q, &p).unwrap());
            prop_assert!(pq <= tv_distance(&p, &r).unwrap() + tv_distance(&r, &q).unwrap() + 1e-12);
            prop_assert!((0.0..=1.0 + 1e-15).contains(&pq));
        }

        #[test]
        fn tv_to_stationarity_never_increases(w in proptest::collection::vec(0.01f64..1.0, 10), start in 0usize..4) {
            let (k, pi) = reversible_from(&w, 4);
            let curve = tv_curve(&k, start, &pi, 50).unwrap();
            for pair in curve.windows(2) {
                prop_assert!(pair[1] <= pair[0] + 1e-14);
            }
        }

        #[test]
        fn reversible_spectrum_in_unit_interval(w in proptest::collection::vec(0.01f64..1.0, 15)) {
            let (k, pi) = reversible_from(&w, 5);
            let s = reversible_spectrum(&k, &pi).unwrap();
            prop_assert!((s[0] - 1.0).abs() < 1e-10);
            for v in s {
                prop_assert!((-1.0 - 1e-10..=1.0 + 1e-10).contains(&v));
            }
        }
    }
}
