//! Conversion from a distribution over ordered action pairs to a mixed
//! strategy: each pair `(i -> j)` moves the mass of `i` onto `j`, and the
//! played strategy is a fixed point of the resulting mixture of moves.

use serde::{Deserialize, Serialize};

use crate::common::{renormalize_checked, MixedStrategy, PROB_TOLERANCE};
use crate::error::{Error, Result};

pub const FIXED_POINT_TOLERANCE: f64 = 1e-10;
pub const FIXED_POINT_MAX_ITERATIONS: usize = 100_000;

/// Position of the ordered pair `(i -> j)`, `i != j`, in a flat vector of
/// length `n (n - 1)`.
pub fn pair_index(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i != j && i < n && j < n);
    i * (n - 1) + if j < i { j } else { j - 1 }
}

/// Inverse of [`pair_index`].
pub fn pair_of(n: usize, index: usize) -> (usize, usize) {
    let i = index / (n - 1);
    let r = index % (n - 1);
    (i, if r < i { r } else { r + 1 })
}

/// A probability vector over the ordered pairs of distinct actions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairDistribution {
    n: usize,
    delta: Vec<f64>,
}

impl PairDistribution {
    pub fn new(n: usize, delta: Vec<f64>) -> Result<Self> {
        if n < 2 {
            return Err(Error::domain("pair distribution needs at least two actions"));
        }
        if delta.len() != n * (n - 1) {
            return Err(Error::domain(format!(
                "pair distribution over {n} actions needs {} entries, got {}",
                n * (n - 1),
                delta.len()
            )));
        }
        if delta.iter().any(|d| !d.is_finite() || *d < 0.0) {
            return Err(Error::domain("pair distribution has a negative or non-finite entry"));
        }
        let total: f64 = delta.iter().sum();
        if (total - 1.0).abs() > PROB_TOLERANCE {
            return Err(Error::domain(format!("pair distribution sums to {total}")));
        }
        Ok(PairDistribution { n, delta })
    }

    pub fn uniform(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::domain("pair distribution needs at least two actions"));
        }
        let m = n * (n - 1);
        Ok(PairDistribution {
            n,
            delta: vec![1.0 / m as f64; m],
        })
    }

    /// Normalizes nonnegative weights, absorbing round-off drift.
    pub fn from_weights(n: usize, weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total.is_finite() && total > 0.0) {
            return Err(Error::domain("pair weights have no finite positive mass"));
        }
        let mut delta: Vec<f64> = weights.into_iter().map(|w| w / total).collect();
        let drift: f64 = 1.0 - delta.iter().sum::<f64>();
        if let Some(max) = delta.iter_mut().max_by(|a, b| a.total_cmp(b)) {
            *max += drift;
        }
        PairDistribution::new(n, delta)
    }

    pub fn num_actions(&self) -> usize {
        self.n
    }

    pub fn values(&self) -> &[f64] {
        &self.delta
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.delta[pair_index(self.n, i, j)]
    }
}

/// Moves the mass of action `i` onto action `j`.
pub fn swap_strategy(p: &MixedStrategy, i: usize, j: usize) -> Result<MixedStrategy> {
    let n = p.len();
    if i == j || i >= n || j >= n {
        return Err(Error::domain(format!("invalid swap ({i} -> {j}) over {n} actions")));
    }
    let mut q = p.probs().to_vec();
    q[j] += q[i];
    q[i] = 0.0;
    Ok(MixedStrategy::from_normalized(q))
}

/// Column-stochastic matrix `S` with `S p = sum delta(i -> j) swap(p, i, j)`,
/// stored row-major.
pub fn swap_matrix(delta: &PairDistribution) -> Vec<f64> {
    let n = delta.n;
    let mut s = vec![0.0; n * n];
    for i in 0..n {
        let mut leave = 0.0;
        for j in (0..n).filter(|&j| j != i) {
            let d = delta.get(i, j);
            s[j * n + i] = d;
            leave += d;
        }
        s[i * n + i] = 1.0 - leave;
    }
    s
}

fn check_column_stochastic(s: &[f64], n: usize) -> Result<()> {
    for c in 0..n {
        let sum: f64 = (0..n).map(|r| s[r * n + c]).sum();
        if (sum - 1.0).abs() > 1e-9 || (0..n).any(|r| s[r * n + c] < -1e-15) {
            return Err(Error::Internal(format!("swap matrix column {c} sums to {sum}")));
        }
    }
    Ok(())
}

fn apply(s: &[f64], p: &[f64], n: usize, out: &mut [f64]) {
    for (r, o) in out.iter_mut().enumerate() {
        *o = s[r * n..(r + 1) * n].iter().zip(p).map(|(a, b)| a * b).sum();
    }
}

fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// L1 distance between `p` and the mixture of its swaps under `delta`.
pub fn fixed_point_residual(delta: &PairDistribution, p: &MixedStrategy) -> f64 {
    let n = delta.n;
    let s = swap_matrix(delta);
    let mut out = vec![0.0; n];
    apply(&s, p.probs(), n, &mut out);
    l1(&out, p.probs())
}

/// Stationary strategy of `delta`, iterating from the uniform strategy.
pub fn solve_fixed_point(delta: &PairDistribution) -> Result<MixedStrategy> {
    solve_fixed_point_from(delta, &MixedStrategy::uniform(delta.n))
}

/// Stationary strategy of `delta` by power iteration from `start`, with a
/// dense linear solve when iteration stalls.
pub fn solve_fixed_point_from(delta: &PairDistribution, start: &MixedStrategy) -> Result<MixedStrategy> {
    let n = delta.n;
    if start.len() != n {
        return Err(Error::domain("fixed-point start has the wrong dimension"));
    }
    let s = swap_matrix(delta);
    check_column_stochastic(&s, n)?;

    // Averaging with the identity keeps the same fixed points and removes
    // the periodic behaviour of plain iteration (e.g. two actions swapped
    // with certainty).
    let lazy: Vec<f64> = s
        .iter()
        .enumerate()
        .map(|(k, v)| 0.5 * v + if k / n == k % n { 0.5 } else { 0.0 })
        .collect();

    let mut p = start.probs().to_vec();
    let mut next = vec![0.0; n];
    let mut checkpoint_step = f64::INFINITY;
    let mut step = f64::INFINITY;
    for iteration in 1..=FIXED_POINT_MAX_ITERATIONS {
        apply(&lazy, &p, n, &mut next);
        step = l1(&next, &p);
        std::mem::swap(&mut p, &mut next);
        if step <= FIXED_POINT_TOLERANCE / 2.0 {
            // a lazy step of size d means the plain residual is 2d
            return renormalize_checked(&p);
        }
        if iteration % STALL_WINDOW == 0 {
            if step > 0.5 * checkpoint_step {
                if let Some(solution) = try_dense(delta, &s, n) {
                    return Ok(solution);
                }
            }
            checkpoint_step = step;
        }
    }
    try_dense(delta, &s, n).ok_or(Error::Solver {
        iterations: FIXED_POINT_MAX_ITERATIONS,
        residual: 2.0 * step,
    })
}

/// Iterations between stall checks of the power iteration.
const STALL_WINDOW: usize = 1000;

fn try_dense(delta: &PairDistribution, s: &[f64], n: usize) -> Option<MixedStrategy> {
    let dense = dense_stationary(s, n)?;
    let candidate = renormalize_checked(&dense).ok()?;
    (fixed_point_residual(delta, &candidate) <= FIXED_POINT_TOLERANCE).then_some(candidate)
}

/// Solves `(S - I) p = 0, sum p = 1` by replacing the last equation with the
/// normalization row.
fn dense_stationary(s: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut a = nalgebra::DMatrix::from_fn(n, n, |r, c| s[r * n + c] - if r == c { 1.0 } else { 0.0 });
    let mut b = nalgebra::DVector::zeros(n);
    for c in 0..n {
        a[(n - 1, c)] = 1.0;
    }
    b[n - 1] = 1.0;
    let x = a.lu().solve(&b)?;
    x.iter().all(|v| v.is_finite()).then(|| x.iter().map(|v| v.max(0.0)).collect())
}

/// `(1 - gamma) p + gamma / N` per entry.
pub fn mix_uniform(p: &MixedStrategy, gamma: f64) -> Result<MixedStrategy> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::domain(format!("exploration rate {gamma} outside [0, 1]")));
    }
    let floor = gamma / p.len() as f64;
    let mixed: Vec<f64> = p.probs().iter().map(|x| (1.0 - gamma) * x + floor).collect();
    renormalize_checked(&mixed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn strat(p: &[f64]) -> MixedStrategy {
        MixedStrategy::new(p.to_vec()).unwrap()
    }

    fn random_delta(rng: &mut impl Rng, n: usize) -> PairDistribution {
        let w: Vec<f64> = (0..n * (n - 1)).map(|_| rng.random::<f64>()).collect();
        PairDistribution::from_weights(n, w).unwrap()
    }

    #[test]
    fn pair_indexing_round_trips() {
        for n in 2..7 {
            for k in 0..n * (n - 1) {
                let (i, j) = pair_of(n, k);
                assert_ne!(i, j);
                assert_eq!(pair_index(n, i, j), k);
            }
        }
    }

    #[test]
    fn swap_examples() {
        assert_eq!(swap_strategy(&strat(&[0.5, 0.5]), 0, 1).unwrap().probs(), &[0.0, 1.0]);
        assert_eq!(
            swap_strategy(&strat(&[1.0, 0.0, 0.0]), 1, 2).unwrap().probs(),
            &[1.0, 0.0, 0.0]
        );
        assert_eq!(
            swap_strategy(&strat(&[0.2, 0.3, 0.5]), 2, 0).unwrap().probs(),
            &[0.7, 0.3, 0.0]
        );
        assert!(swap_strategy(&strat(&[0.5, 0.5]), 1, 1).is_err());
    }

    #[test]
    fn symmetric_pairs_give_uniform() {
        let d = PairDistribution::uniform(2).unwrap();
        let p = solve_fixed_point(&d).unwrap();
        assert!((p.prob(0) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn single_pair_is_absorbing() {
        let d = PairDistribution::new(2, vec![1.0, 0.0]).unwrap();
        let p = solve_fixed_point(&d).unwrap();
        assert!(p.prob(1) > 1.0 - 1e-9, "{p:?}");
    }

    #[test]
    fn matrix_columns_sum_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for n in 2..9 {
            let d = random_delta(&mut rng, n);
            check_column_stochastic(&swap_matrix(&d), n).unwrap();
        }
    }

    #[test]
    fn matrix_matches_swap_mixture() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 4;
        let d = random_delta(&mut rng, n);
        let p = strat(&[0.1, 0.2, 0.3, 0.4]);
        let mut mixture = vec![0.0; n];
        for k in 0..n * (n - 1) {
            let (i, j) = pair_of(n, k);
            let q = swap_strategy(&p, i, j).unwrap();
            for (m, x) in mixture.iter_mut().zip(q.probs()) {
                *m += d.values()[k] * x;
            }
        }
        let mut via_matrix = vec![0.0; n];
        apply(&swap_matrix(&d), p.probs(), n, &mut via_matrix);
        assert!(l1(&mixture, &via_matrix) < 1e-15);
    }

    #[test]
    fn agrees_with_eigenvector_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let n = 4;
            let d = random_delta(&mut rng, n);
            let s = swap_matrix(&d);
            // eigenvector of S for eigenvalue 1 via the nullspace of S - I (SVD)
            let m = nalgebra::DMatrix::from_fn(n, n, |r, c| s[r * n + c] - if r == c { 1.0 } else { 0.0 });
            let svd = m.svd(false, true);
            let v_t = svd.v_t.unwrap();
            let (k, _) = svd
                .singular_values
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.total_cmp(b.1))
                .unwrap();
            let row = v_t.row(k);
            let total: f64 = row.iter().sum();
            let oracle: Vec<f64> = row.iter().map(|x| x / total).collect();
            let p = solve_fixed_point(&d).unwrap();
            assert!(l1(p.probs(), &oracle) < 1e-6, "{p:?} vs {oracle:?}");
        }
    }

    #[test]
    fn dense_fallback_matches_power_iteration() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let d = random_delta(&mut rng, 5);
        let dense = dense_stationary(&swap_matrix(&d), 5).unwrap();
        let p = solve_fixed_point(&d).unwrap();
        assert!(l1(p.probs(), &dense) < 1e-8);
    }

    #[test]
    fn warm_start_reaches_the_same_point_on_irreducible_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let d = random_delta(&mut rng, 6);
        let a = solve_fixed_point(&d).unwrap();
        let b = solve_fixed_point_from(&d, &MixedStrategy::point_mass(6, 2)).unwrap();
        assert!(a.l1_distance(&b) < 1e-8);
    }

    #[test]
    fn mixing_examples() {
        let p = strat(&[1.0, 0.0]);
        assert_eq!(mix_uniform(&p, 0.0).unwrap().probs(), &[1.0, 0.0]);
        assert_eq!(mix_uniform(&p, 1.0).unwrap().probs(), &[0.5, 0.5]);
        assert_eq!(mix_uniform(&p, 0.5).unwrap().probs(), &[0.75, 0.25]);
        assert!(mix_uniform(&p, 1.5).is_err());
        assert!(mix_uniform(&p, -0.1).is_err());
    }

    #[test]
    fn residual_bound_on_many_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let n = rng.random_range(2..=8);
            let d = random_delta(&mut rng, n);
            let p = solve_fixed_point(&d).unwrap();
            assert!(fixed_point_residual(&d, &p) <= 1e-9);
        }
    }

    proptest! {
        #[test]
        fn sparse_deltas_still_solve(n in 2usize..7, seed in 0u64..10_000, keep in 1usize..4) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m = n * (n - 1);
            let mut w = vec![0.0; m];
            for _ in 0..keep {
                w[rng.random_range(0..m)] = rng.random::<f64>() + 1e-6;
            }
            let d = PairDistribution::from_weights(n, w).unwrap();
            let p = solve_fixed_point(&d).unwrap();
            prop_assert!(fixed_point_residual(&d, &p) <= 1e-9);
            prop_assert!((p.probs().iter().sum::<f64>() - 1.0).abs() <= PROB_TOLERANCE);
        }

        #[test]
        fn mixing_floor(raw in prop::collection::vec(0.0f64..1.0, 2..10), gamma in 0.0f64..=1.0) {
            prop_assume!(raw.iter().sum::<f64>() > 1e-6);
            let p = crate::common::project_to_simplex(&raw).unwrap();
            let q = mix_uniform(&p, gamma).unwrap();
            prop_assert!(q.min_prob() >= gamma / raw.len() as f64 - 1e-15);
        }
    }
}
