//! Selection probabilities of the perturbed leader: for values `x` and
//! i.i.d. Laplace perturbations of scale `b`, the probability that each
//! `x_a + mu_a` is the largest.

use rand::Rng;

use crate::error::{Error, Result};

/// Values this far below the leader (in scale units) never win.
const CUTOFF: f64 = 80.0;

pub fn laplace_pdf(x: f64, b: f64) -> f64 {
    (-x.abs() / b).exp() / (2.0 * b)
}

pub fn laplace_cdf(x: f64, b: f64) -> f64 {
    if x < 0.0 {
        0.5 * (x / b).exp()
    } else {
        1.0 - 0.5 * (-x / b).exp()
    }
}

pub fn sample_laplace(b: f64, rng: &mut impl Rng) -> f64 {
    let u: f64 = rng.random::<f64>() - 0.5;
    -b * u.signum() * (1.0 - 2.0 * u.abs()).ln()
}

/// Probability that the leader of two values `gap >= 0` apart stays ahead:
/// the law of the difference of two independent Laplace variables.
pub fn two_value_lead_probability(gap: f64, b: f64) -> f64 {
    let z = gap.abs() / b;
    let lead = 1.0 - 0.5 * (-z).exp() * (1.0 + 0.5 * z);
    if gap >= 0.0 { lead } else { 1.0 - lead }
}

fn check(values: &[f64], b: f64) -> Result<()> {
    if values.is_empty() {
        return Err(Error::domain("no values to perturb"));
    }
    if !(b.is_finite() && b > 0.0) {
        return Err(Error::domain(format!("perturbation scale {b} must be positive")));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain("non-finite perturbed value"));
    }
    Ok(())
}

/// Selection probabilities `P(a wins) = int f(m - x_a) prod_{c != a} F(m - x_c) dm`.
///
/// Between consecutive values the integrand is a sum of exponentials in `m`,
/// so each piece is integrated exactly. Sweeping the pieces left to right,
/// the factors `1 - exp(x_c - m) / 2` of the values already passed are kept
/// as a polynomial in `exp(-m)`.
pub fn argmax_probabilities(values: &[f64], b: f64) -> Result<Vec<f64>> {
    check(values, b)?;
    let top = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    // work in scale units relative to the leader
    let z: Vec<f64> = values.iter().map(|v| (v - top) / b).collect();
    let mut live: Vec<f64> = z.iter().copied().filter(|&v| v >= -CUTOFF).collect();
    live.sort_by(f64::total_cmp);
    let mut probs = vec![0.0; z.len()];
    let mut rivals = Vec::with_capacity(live.len());
    for (a, &za) in z.iter().enumerate() {
        if za < -CUTOFF {
            continue;
        }
        rivals.clear();
        let mut skipped = false;
        for &v in &live {
            if !skipped && v == za {
                skipped = true;
            } else {
                rivals.push(v);
            }
        }
        probs[a] = win_probability(za, &rivals);
    }
    let total: f64 = probs.iter().sum();
    if !(total > 0.0 && total.is_finite()) {
        return Err(Error::Internal("perturbed-leader probabilities vanished".into()));
    }
    Ok(probs.into_iter().map(|p| (p / total).max(0.0)).collect())
}

/// `int_0^len exp(log_scale + lambda s) ds`. For `lambda > 0` the caller
/// guarantees `log_scale + lambda len <= 0`, so nothing overflows.
fn exp_integral(log_scale: f64, lambda: f64, len: f64) -> f64 {
    if len.is_infinite() {
        return log_scale.exp() / -lambda;
    }
    if lambda > 0.0 {
        (log_scale + lambda * len).exp() * -(-lambda * len).exp_m1() / lambda
    } else if lambda < 0.0 {
        log_scale.exp() * -(lambda * len).exp_m1() / -lambda
    } else {
        log_scale.exp() * len
    }
}

/// Win probability of `za` against sorted `rivals`, unit-scale noise.
fn win_probability(za: f64, rivals: &[f64]) -> f64 {
    let ln2 = std::f64::consts::LN_2;
    let mut cuts: Vec<f64> = rivals.to_vec();
    cuts.insert(cuts.partition_point(|&v| v < za), za);

    // rivals at or above the current piece contribute exp(m - z_c) / 2
    let mut above_const: f64 = rivals.iter().map(|z| -ln2 - z).sum();
    let mut n_above = rivals.len();
    // piece (-inf, cuts[0]): every rival above, m below za
    let beta = 1.0 + n_above as f64;
    let mut total = (-ln2 - za + above_const + beta * cuts[0]).exp() / beta;

    // coefficients of prod over passed rivals of (1 - exp(z_c - m) / 2) as a
    // polynomial in y = exp(-(m - reference))
    let mut poly: Vec<f64> = Vec::with_capacity(rivals.len() + 1);
    poly.push(1.0);
    let mut reference = cuts[0];
    let mut next_rival = 0;
    for i in 0..cuts.len() {
        let lo = cuts[i];
        let hi = cuts.get(i + 1).copied().unwrap_or(f64::INFINITY);
        if lo != reference {
            let step = (reference - lo).exp();
            let mut scale = 1.0;
            for q in poly.iter_mut().skip(1) {
                scale *= step;
                *q *= scale;
            }
            reference = lo;
        }
        while next_rival < rivals.len() && rivals[next_rival] <= lo {
            let zc = rivals[next_rival];
            let w = 0.5 * (zc - lo).exp();
            poly.push(0.0);
            for k in (1..poly.len()).rev() {
                poly[k] -= w * poly[k - 1];
            }
            above_const += ln2 + zc;
            n_above -= 1;
            next_rival += 1;
        }
        let len = hi - lo;
        if len == 0.0 {
            continue;
        }
        let (a_const, a_beta) = if lo >= za { (za - ln2, -1.0) } else { (-za - ln2, 1.0) };
        let beta = a_beta + n_above as f64;
        let log_scale = a_const + above_const + beta * lo;
        total += poly
            .iter()
            .enumerate()
            .map(|(k, q)| q * exp_integral(log_scale, beta - k as f64, len))
            .sum::<f64>();
    }
    total
}

/// Selection frequencies over `samples` independent perturbation draws.
pub fn argmax_frequencies(values: &[f64], b: f64, samples: usize, rng: &mut impl Rng) -> Result<Vec<f64>> {
    check(values, b)?;
    if samples == 0 {
        return Err(Error::domain("Monte Carlo estimate needs samples"));
    }
    let mut counts = vec![0u64; values.len()];
    for _ in 0..samples {
        let mut best = 0;
        let mut best_value = f64::NEG_INFINITY;
        for (a, v) in values.iter().enumerate() {
            let x = v + sample_laplace(b, rng);
            if x > best_value {
                best = a;
                best_value = x;
            }
        }
        counts[best] += 1;
    }
    Ok(counts.iter().map(|&c| c as f64 / samples as f64).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let whole = (b - a) / 6.0 * (f(a) + 4.0 * f(m) + f(b));
        let left = (m - a) / 6.0 * (f(a) + 4.0 * f(0.5 * (a + m)) + f(m));
        let right = (b - m) / 6.0 * (f(m) + 4.0 * f(0.5 * (m + b)) + f(b));
        if depth == 0 || (left + right - whole).abs() < 1e-14 {
            left + right
        } else {
            simpson(f, a, m, depth - 1) + simpson(f, m, b, depth - 1)
        }
    }

    /// Adaptive Simpson on the integral itself, split at every kink.
    fn integrated(values: &[f64], b: f64) -> Vec<f64> {
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min) - 40.0 * b;
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 40.0 * b;
        let mut cuts: Vec<f64> = values.to_vec();
        cuts.extend([lo, hi]);
        cuts.sort_by(f64::total_cmp);
        (0..values.len())
            .map(|a| {
                let f = |m: f64| {
                    let mut v = laplace_pdf(m - values[a], b);
                    for (c, x) in values.iter().enumerate() {
                        if c != a {
                            v *= laplace_cdf(m - x, b);
                        }
                    }
                    v
                };
                cuts.windows(2).map(|w| simpson(&f, w[0], w[1], 30)).sum()
            })
            .collect()
    }

    #[test]
    fn matches_direct_integration() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..40 {
            let m = rng.random_range(2..=12);
            let b = rng.random_range(0.05..2.0);
            let mut values: Vec<f64> = (0..m).map(|_| rng.random_range(-3.0..3.0)).collect();
            values[m - 1] = values[0];
            let exact = argmax_probabilities(&values, b).unwrap();
            let numeric = integrated(&values, b);
            for (x, y) in exact.iter().zip(&numeric) {
                assert!((x - y).abs() < 1e-9, "{exact:?} vs {numeric:?}");
            }
        }
    }

    #[test]
    fn many_values_stay_accurate() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let values: Vec<f64> = (0..30).map(|_| rng.random_range(-1.0..1.0)).collect();
        let exact = argmax_probabilities(&values, 0.5).unwrap();
        let sampled = argmax_frequencies(&values, 0.5, 400_000, &mut rng).unwrap();
        for (x, y) in exact.iter().zip(&sampled) {
            assert!((x - y).abs() < 4e-3);
        }
    }

    #[test]
    fn equal_values_share_evenly() {
        for m in [1, 2, 5, 12] {
            let p = argmax_probabilities(&vec![3.0; m], 0.2).unwrap();
            for x in p {
                assert!((x - 1.0 / m as f64).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn two_values_match_closed_form() {
        for gap in [0.0, 0.01, 0.1, 0.5, 1.0, 3.0] {
            let b = 0.3;
            let p = argmax_probabilities(&[1.0, 1.0 - gap], b).unwrap();
            let exact = two_value_lead_probability(gap, b);
            assert!((p[0] - exact).abs() <= 1e-6, "gap {gap}: {} vs {exact}", p[0]);
        }
    }

    #[test]
    fn closed_form_matches_difference_sampling() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (gap, b) = (0.2, 0.25);
        let n = 400_000;
        let hits = (0..n)
            .filter(|_| sample_laplace(b, &mut rng) - sample_laplace(b, &mut rng) <= gap)
            .count();
        let freq = hits as f64 / n as f64;
        assert!((freq - two_value_lead_probability(gap, b)).abs() < 4e-3);
    }

    #[test]
    fn laplace_sampler_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let b = 0.7;
        let n = 400_000;
        let xs: Vec<f64> = (0..n).map(|_| sample_laplace(b, &mut rng)).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| x * x).sum::<f64>() / n as f64 - mean * mean;
        assert!(mean.abs() < 0.01);
        assert!((var - 2.0 * b * b).abs() < 0.02);
    }

    #[test]
    fn quadrature_matches_sampling() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..3 {
            let m = rng.random_range(2..=12);
            let values: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
            let b = 0.4;
            let q = argmax_probabilities(&values, b).unwrap();
            let f = argmax_frequencies(&values, b, 200_000, &mut rng).unwrap();
            for (x, y) in q.iter().zip(&f) {
                assert!((x - y).abs() < 6e-3, "{q:?} vs {f:?}");
            }
        }
    }

    #[test]
    fn distant_leader_takes_everything() {
        let p = argmax_probabilities(&[0.0, -100.0, -200.0], 0.5).unwrap();
        assert_eq!(p, vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(argmax_probabilities(&[f64::NAN, 1.0], 0.1).is_err());
        assert!(argmax_probabilities(&[1.0], 0.0).is_err());
        assert!(argmax_probabilities(&[], 0.1).is_err());
    }

    proptest! {
        #[test]
        fn raising_a_value_never_lowers_its_probability(
            values in prop::collection::vec(-2.0f64..2.0, 2..8),
            which in 0usize..8,
            bump in 0.0f64..1.0,
            b in 0.05f64..1.0,
        ) {
            let a = which % values.len();
            let before = argmax_probabilities(&values, b).unwrap();
            let mut raised = values.clone();
            raised[a] += bump;
            let after = argmax_probabilities(&raised, b).unwrap();
            prop_assert!(after[a] >= before[a] - 1e-9);
        }

        #[test]
        fn probabilities_form_a_distribution(values in prop::collection::vec(-50.0f64..50.0, 1..15), b in 0.01f64..2.0) {
            let p = argmax_probabilities(&values, b).unwrap();
            prop_assert!(p.iter().all(|x| *x >= 0.0));
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
