//! Seeded synthetic generators for testing the estimators.
//!
//! A population of triads evolves under a known sequence of transition
//! matrices; the observed type counts give empirical matrices and
//! proportions exactly as the census pipeline would.

use ndarray::{Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};

use crate::error::{Error, Result};
use crate::markov::{normalize_rows, TransitionMatrix, ZeroRowPolicy};
use crate::triads::TransitionCounts;

/// Random row-stochastic matrix with `self_weight` on the diagonal and the
/// remaining mass spread by normalized Gamma(`shape`, 1) draws. Small
/// shapes give sparse rows.
pub fn random_transition<R: Rng>(rng: &mut R, dim: usize, self_weight: f64, shape: f64) -> Array2<f64> {
    assert!((0.0..=1.0).contains(&self_weight));
    let gamma = Gamma::new(shape, 1.0).expect("positive shape");
    let mut p = Array2::from_shape_fn((dim, dim), |_| gamma.sample(rng));
    for (i, mut row) in p.axis_iter_mut(Axis(0)).enumerate() {
        let s = row.sum();
        if s > 0.0 {
            row.mapv_inplace(|x| x / s * (1.0 - self_weight));
        } else {
            row.fill((1.0 - self_weight) / dim as f64);
        }
        row[i] += self_weight;
    }
    p
}

/// `a` for the first `first_len` steps, then `b` for `second_len` steps.
pub fn piecewise_constant(a: &Array2<f64>, b: &Array2<f64>, first_len: usize, second_len: usize) -> Vec<Array2<f64>> {
    std::iter::repeat_n(a.clone(), first_len)
        .chain(std::iter::repeat_n(b.clone(), second_len))
        .collect()
}

/// Linear interpolation from `a` to `b` over `len` steps.
pub fn smooth_drift(a: &Array2<f64>, b: &Array2<f64>, len: usize) -> Vec<Array2<f64>> {
    (0..len)
        .map(|t| {
            let w = if len > 1 { t as f64 / (len - 1) as f64 } else { 0.0 };
            a * (1.0 - w) + b * w
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct SampledChain {
    /// Type proportions for periods `0..=T`.
    pub proportions: Vec<Vec<f64>>,
    /// Empirical matrices for steps `t -> t+1`, `t = 0..T`.
    pub empirical: Vec<TransitionMatrix>,
    pub counts: Vec<TransitionCounts>,
}

/// Evolves `population` independent walkers, uniformly initialized over the
/// states, through the given transition sequence.
pub fn sample_population(truth: &[Array2<f64>], population: usize, seed: u64) -> Result<SampledChain> {
    let dim = truth
        .first()
        .ok_or_else(|| Error::InvalidArgument("empty transition sequence".into()))?
        .nrows();
    if population == 0 {
        return Err(Error::InvalidArgument("population must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut states: Vec<usize> = (0..population).map(|_| rng.random_range(0..dim)).collect();
    let proportions_of = |states: &[usize]| {
        let mut p = vec![0.0; dim];
        for &s in states {
            p[s] += 1.0;
        }
        p.iter_mut().for_each(|x| *x /= states.len() as f64);
        p
    };
    let mut proportions = vec![proportions_of(&states)];
    let mut empirical = Vec::with_capacity(truth.len());
    let mut counts_seq = Vec::with_capacity(truth.len());
    for (t, p) in truth.iter().enumerate() {
        let cumulative: Vec<Vec<f64>> = p
            .axis_iter(Axis(0))
            .map(|row| {
                let mut acc = 0.0;
                row.iter()
                    .map(|x| {
                        acc += x;
                        acc
                    })
                    .collect()
            })
            .collect();
        let mut counts = vec![0u64; dim * dim];
        for s in states.iter_mut() {
            let row = &cumulative[*s];
            let u: f64 = rng.random::<f64>() * row[dim - 1];
            let next = row.partition_point(|&c| c <= u).min(dim - 1);
            counts[*s * dim + next] += 1;
            *s = next;
        }
        let tc = TransitionCounts::new(t, t + 1, dim, counts)?;
        empirical.push(normalize_rows(&tc, ZeroRowPolicy::Identity));
        counts_seq.push(tc);
        proportions.push(proportions_of(&states));
    }
    Ok(SampledChain {
        proportions,
        empirical,
        counts: counts_seq,
    })
}
