//! Row-stochastic transition matrices over triad types.

use ndarray::{Array2, ArrayView1, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::ScalarSeries;
use crate::triads::{BalanceModel, TransitionCounts, TriadTypeTable};

/// Row-sum tolerance accepted by [`TransitionMatrix::new`].
pub const ROW_SUM_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    pub from_period: usize,
    p: Array2<f64>,
}

impl TransitionMatrix {
    /// Validates squareness, nonnegativity and unit row sums.
    pub fn new(from_period: usize, p: Array2<f64>) -> Result<Self> {
        if p.nrows() != p.ncols() || p.nrows() == 0 {
            return Err(Error::ShapeMismatch(format!(
                "transition matrix must be square and nonempty, got {}x{}",
                p.nrows(),
                p.ncols()
            )));
        }
        if p.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
            return Err(Error::InvalidArgument("transition matrix has a negative or non-finite entry".into()));
        }
        for (i, row) in p.axis_iter(Axis(0)).enumerate() {
            let s: f64 = row.sum();
            if (s - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::InvalidArgument(format!("row {i} sums to {s}")));
            }
        }
        Ok(Self { from_period, p })
    }

    pub(crate) fn new_unchecked(from_period: usize, p: Array2<f64>) -> Self {
        Self { from_period, p }
    }

    pub fn identity(from_period: usize, dim: usize) -> Self {
        Self::new_unchecked(from_period, Array2::eye(dim))
    }

    pub fn dim(&self) -> usize {
        self.p.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.p[[i, j]]
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.p.row(i)
    }

    pub fn as_array(&self) -> &Array2<f64> {
        &self.p
    }

    pub fn into_array(self) -> Array2<f64> {
        self.p
    }
}

impl std::borrow::Borrow<Array2<f64>> for TransitionMatrix {
    fn borrow(&self) -> &Array2<f64> {
        &self.p
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ZeroRowPolicy {
    /// Unobserved types keep their mass.
    #[default]
    Identity,
    Uniform,
}

pub fn normalize_rows(counts: &TransitionCounts, policy: ZeroRowPolicy) -> TransitionMatrix {
    let dim = counts.dim;
    let mut p = Array2::zeros((dim, dim));
    for i in 0..dim {
        let row = counts.row(i);
        let total: u64 = row.iter().sum();
        if total > 0 {
            let total = total as f64;
            for (j, &c) in row.iter().enumerate() {
                p[[i, j]] = c as f64 / total;
            }
        } else {
            match policy {
                ZeroRowPolicy::Identity => p[[i, i]] = 1.0,
                ZeroRowPolicy::Uniform => p.row_mut(i).fill(1.0 / dim as f64),
            }
        }
    }
    TransitionMatrix::new_unchecked(counts.from_period, p)
}

/// Entrywise mean; labelled with the first matrix's period.
pub fn average_transition(mats: &[TransitionMatrix]) -> Result<TransitionMatrix> {
    let first = mats
        .first()
        .ok_or_else(|| Error::InvalidArgument("cannot average an empty sequence".into()))?;
    let mut sum = Array2::<f64>::zeros(first.p.raw_dim());
    for m in mats {
        if m.p.raw_dim() != first.p.raw_dim() {
            return Err(Error::ShapeMismatch("matrices differ in shape".into()));
        }
        sum += &m.p;
    }
    sum /= mats.len() as f64;
    Ok(TransitionMatrix::new_unchecked(first.from_period, sum))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationaryOptions {
    pub tol: f64,
    /// Weight of the uniform matrix mixed into `P`.
    pub epsilon: f64,
    pub max_iters: usize,
    /// Starting distribution; uniform when absent. Only matters when
    /// `epsilon == 0` and the chain is reducible.
    pub start: Option<Vec<f64>>,
}

impl Default for StationaryOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            epsilon: 1e-8,
            max_iters: 100_000,
            start: None,
        }
    }
}

/// `x P'` with `P' = (1 - eps) P + eps / n * J`, for `x` summing to one.
fn step(x: &[f64], p: &Array2<f64>, eps: f64) -> Vec<f64> {
    let n = x.len();
    let mass: f64 = x.iter().sum();
    let mut y = vec![eps * mass / n as f64; n];
    for (i, &xi) in x.iter().enumerate() {
        if xi == 0.0 {
            continue;
        }
        let w = (1.0 - eps) * xi;
        for (yj, &pij) in y.iter_mut().zip(p.row(i)) {
            *yj += w * pij;
        }
    }
    y
}

fn l1_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// Stationary vector of a strictly positive stochastic matrix by
/// Grassmann-Taksar-Heyman elimination (no subtractions).
fn gth_stationary(p: &Array2<f64>) -> Option<Vec<f64>> {
    let n = p.nrows();
    let mut a = p.clone();
    for k in (1..n).rev() {
        let s: f64 = (0..k).map(|j| a[[k, j]]).sum();
        if !(s > 0.0) {
            return None;
        }
        for i in 0..k {
            a[[i, k]] /= s;
        }
        for i in 0..k {
            let aik = a[[i, k]];
            if aik == 0.0 {
                continue;
            }
            for j in 0..k {
                a[[i, j]] += aik * a[[k, j]];
            }
        }
    }
    let mut pi = vec![0.0; n];
    pi[0] = 1.0;
    for k in 1..n {
        pi[k] = (0..k).map(|i| pi[i] * a[[i, k]]).sum();
    }
    let total: f64 = pi.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return None;
    }
    pi.iter_mut().for_each(|x| *x /= total);
    Some(pi)
}

/// Fixed point of the smoothed chain `P'`, reached by lazy power iteration
/// (`x <- (x + x P') / 2`, which has the same fixed points and no
/// periodicity) until `||x P' - x||_1 < tol`.
///
/// With `epsilon > 0`, `P'` is strictly positive and its fixed point is
/// unique; the iteration then starts from the direct elimination solution,
/// which avoids the `1 - epsilon` contraction rate on nearly reducible
/// chains.
pub fn stationary(mat: &TransitionMatrix, opts: &StationaryOptions) -> Result<Vec<f64>> {
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidArgument("tol must be positive".into()));
    }
    if !(0.0..=1.0).contains(&opts.epsilon) {
        return Err(Error::InvalidArgument("epsilon must lie in [0, 1]".into()));
    }
    let n = mat.dim();
    let eps = opts.epsilon;
    let mut x = match (&opts.start, eps > 0.0) {
        (Some(s), _) if s.len() != n => {
            return Err(Error::ShapeMismatch(format!("start vector of length {} for {n} states", s.len())))
        }
        (_, true) => {
            let smoothed = mat.p.mapv(|v| (1.0 - eps) * v + eps / n as f64);
            gth_stationary(&smoothed).unwrap_or_else(|| vec![1.0 / n as f64; n])
        }
        (Some(s), false) => {
            let total: f64 = s.iter().sum();
            if s.iter().any(|&v| v < 0.0) || !(total > 0.0) {
                return Err(Error::InvalidArgument("start vector must be a nonnegative, nonzero vector".into()));
            }
            s.iter().map(|v| v / total).collect()
        }
        (None, false) => vec![1.0 / n as f64; n],
    };
    let mut residual = f64::INFINITY;
    for _ in 0..opts.max_iters {
        let y = step(&x, &mat.p, eps);
        residual = l1_gap(&x, &y);
        if residual < opts.tol {
            return Ok(x);
        }
        for (xi, yi) in x.iter_mut().zip(&y) {
            *xi = 0.5 * (*xi + yi);
        }
        let total: f64 = x.iter().sum();
        x.iter_mut().for_each(|v| *v /= total);
    }
    Err(Error::NotConverged {
        iterations: opts.max_iters,
        residual,
    })
}

pub fn frobenius_distance(a: &TransitionMatrix, b: &TransitionMatrix) -> Result<f64> {
    if a.p.raw_dim() != b.p.raw_dim() {
        return Err(Error::ShapeMismatch("matrices differ in shape".into()));
    }
    Ok(a.p
        .iter()
        .zip(b.p.iter())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt())
}

/// `||P_{k+1} - P_k||_F` for consecutive matrices, labelled with the
/// `from_period` of the later matrix.
pub fn frobenius_diff_series(mats: &[TransitionMatrix]) -> Result<ScalarSeries> {
    if mats.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 matrices, got {}",
            mats.len()
        )));
    }
    let mut labels = Vec::with_capacity(mats.len() - 1);
    let mut values = Vec::with_capacity(mats.len() - 1);
    for w in mats.windows(2) {
        labels.push(w[1].from_period.to_string());
        values.push(Some(frobenius_distance(&w[1], &w[0])?));
    }
    ScalarSeries::new(labels, values)
}

/// Minimum, quartiles (linear interpolation) and maximum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FiveNumber {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub count: usize,
}

impl FiveNumber {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let q = |f: f64| {
            let pos = f * (v.len() - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = pos.ceil() as usize;
            v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
        };
        Some(Self {
            min: v[0],
            q1: q(0.25),
            median: q(0.5),
            q3: q(0.75),
            max: v[v.len() - 1],
            count: v.len(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuadrantSummary {
    pub model: BalanceModel,
    pub balanced_to_balanced: Option<FiveNumber>,
    pub balanced_to_unbalanced: Option<FiveNumber>,
    pub unbalanced_to_balanced: Option<FiveNumber>,
    pub unbalanced_to_unbalanced: Option<FiveNumber>,
}

/// Per (matrix, from-type) mass sent to balanced and unbalanced types.
/// Returns `(from_balanced, to_balanced_mass, to_unbalanced_mass)`.
pub fn quadrant_masses(
    mat: &TransitionMatrix,
    table: &TriadTypeTable,
    model: BalanceModel,
) -> Result<Vec<(bool, f64, f64)>> {
    if mat.dim() != table.num_types() {
        return Err(Error::ShapeMismatch(format!(
            "matrix has {} states, table has {} types",
            mat.dim(),
            table.num_types()
        )));
    }
    Ok((0..mat.dim())
        .map(|i| {
            let (mut to_b, mut to_u) = (0.0, 0.0);
            for (j, &p) in mat.row(i).iter().enumerate() {
                if table.is_balanced(j, model) {
                    to_b += p;
                } else {
                    to_u += p;
                }
            }
            (table.is_balanced(i, model), to_b, to_u)
        })
        .collect())
}

pub fn quadrant_summary(
    mats: &[TransitionMatrix],
    table: &TriadTypeTable,
    model: BalanceModel,
) -> Result<QuadrantSummary> {
    if mats.is_empty() {
        return Err(Error::InvalidArgument("quadrant summary needs at least one matrix".into()));
    }
    let (mut bb, mut bu, mut ub, mut uu) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for m in mats {
        for (from_b, to_b, to_u) in quadrant_masses(m, table, model)? {
            if from_b {
                bb.push(to_b);
                bu.push(to_u);
            } else {
                ub.push(to_b);
                uu.push(to_u);
            }
        }
    }
    Ok(QuadrantSummary {
        model,
        balanced_to_balanced: FiveNumber::of(&bb),
        balanced_to_unbalanced: FiveNumber::of(&bu),
        unbalanced_to_balanced: FiveNumber::of(&ub),
        unbalanced_to_unbalanced: FiveNumber::of(&uu),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::triads::NUM_TYPES;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_stochastic(rng: &mut ChaCha8Rng, n: usize) -> TransitionMatrix {
        let mut p = Array2::from_shape_fn((n, n), |_| rng.random::<f64>().powi(3));
        for mut row in p.axis_iter_mut(Axis(0)) {
            let s = row.sum();
            row /= s;
        }
        TransitionMatrix::new(0, p).unwrap()
    }

    fn counts(dim: usize, entries: &[(usize, usize, u64)]) -> TransitionCounts {
        let mut c = vec![0u64; dim * dim];
        for &(i, j, v) in entries {
            c[i * dim + j] = v;
        }
        TransitionCounts::new(0, 1, dim, c).unwrap()
    }

    #[test]
    fn normalize_basic_rows() {
        let m = normalize_rows(&counts(4, &[(0, 0, 2), (0, 1, 2)]), ZeroRowPolicy::Identity);
        assert_eq!(m.row(0).to_vec(), vec![0.5, 0.5, 0.0, 0.0]);
        assert_eq!(m.row(2).to_vec(), vec![0.0, 0.0, 1.0, 0.0]);
        let m = normalize_rows(&counts(4, &[]), ZeroRowPolicy::Uniform);
        assert!(m.row(1).iter().all(|&x| x == 0.25));
    }

    #[test]
    fn normalized_random_counts_are_stochastic() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let c: Vec<u64> = (0..NUM_TYPES * NUM_TYPES)
            .map(|_| if rng.random_bool(0.1) { rng.random_range(0..50) } else { 0 })
            .collect();
        let tc = TransitionCounts::new(0, 1, NUM_TYPES, c).unwrap();
        for policy in [ZeroRowPolicy::Identity, ZeroRowPolicy::Uniform] {
            let m = normalize_rows(&tc, policy);
            TransitionMatrix::new(0, m.as_array().clone()).unwrap();
        }
    }

    #[test]
    fn averages() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let m = random_stochastic(&mut rng, 5);
        let avg = average_transition(&[m.clone(), m.clone()]).unwrap();
        assert!(frobenius_distance(&avg, &m).unwrap() < 1e-15);

        let uniform = TransitionMatrix::new(0, Array2::from_elem((4, 4), 0.25)).unwrap();
        let avg = average_transition(&[TransitionMatrix::identity(0, 4), uniform]).unwrap();
        TransitionMatrix::new(0, avg.into_array()).unwrap();

        let swap = TransitionMatrix::new(0, ndarray::array![[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [1.0, 0.0, 0.0]]).unwrap();
        let avg = average_transition(&[TransitionMatrix::identity(0, 3), swap]).unwrap();
        for row in avg.as_array().axis_iter(Axis(0)) {
            assert_eq!(row.iter().filter(|&&x| x == 0.5).count(), 2);
        }
        assert!(average_transition(&[]).is_err());
    }

    #[test]
    fn stationary_of_identity() {
        let id = TransitionMatrix::identity(0, NUM_TYPES);
        let mut start = vec![0.0; NUM_TYPES];
        start[3] = 0.25;
        start[7] = 0.75;
        let opts = StationaryOptions {
            epsilon: 0.0,
            start: Some(start.clone()),
            ..StationaryOptions::default()
        };
        assert_eq!(stationary(&id, &opts).unwrap(), start);
        let pi = stationary(&id, &StationaryOptions::default()).unwrap();
        assert!(pi.iter().all(|&x| (x - 1.0 / NUM_TYPES as f64).abs() < 1e-12));
    }

    #[test]
    fn stationary_of_embedded_two_state_chain() {
        // Balance equations: 0.1 pi_0 = 0.5 pi_1 with pi_0 + pi_1 = 1.
        let (pi0, pi1) = (5.0 / 6.0, 1.0 / 6.0);
        let mut p = Array2::eye(NUM_TYPES);
        p[[0, 0]] = 0.9;
        p[[0, 1]] = 0.1;
        p[[1, 0]] = 0.5;
        p[[1, 1]] = 0.5;
        let m = TransitionMatrix::new(0, p).unwrap();
        let mut start = vec![0.0; NUM_TYPES];
        start[0] = 0.5;
        start[1] = 0.5;
        let opts = StationaryOptions {
            epsilon: 0.0,
            start: Some(start),
            ..StationaryOptions::default()
        };
        let pi = stationary(&m, &opts).unwrap();
        assert!((pi[0] - pi0).abs() < 1e-11);
        assert!((pi[1] - pi1).abs() < 1e-11);
        assert!(pi[2..].iter().all(|&x| x == 0.0));
    }

    #[test]
    fn stationary_of_doubly_stochastic_and_periodic() {
        let n = 6;
        let mut p = Array2::zeros((n, n));
        for i in 0..n {
            p[[i, (i + 1) % n]] = 0.7;
            p[[i, (i + 2) % n]] = 0.3;
        }
        let m = TransitionMatrix::new(0, p).unwrap();
        for eps in [0.0, 1e-8] {
            let opts = StationaryOptions {
                epsilon: eps,
                ..StationaryOptions::default()
            };
            let pi = stationary(&m, &opts).unwrap();
            assert!(pi.iter().all(|&x| (x - 1.0 / n as f64).abs() < 1e-12));
        }
        // Pure rotation is periodic; the lazy step still converges.
        let mut p = Array2::zeros((n, n));
        for i in 0..n {
            p[[i, (i + 1) % n]] = 1.0;
        }
        let m = TransitionMatrix::new(0, p).unwrap();
        let mut start = vec![0.0; n];
        start[0] = 1.0;
        let opts = StationaryOptions {
            epsilon: 0.0,
            start: Some(start),
            ..StationaryOptions::default()
        };
        let pi = stationary(&m, &opts).unwrap();
        assert!(pi.iter().all(|&x| (x - 1.0 / n as f64).abs() < 1e-12));
    }

    #[test]
    fn stationary_residual_holds_on_random_and_reducible_chains() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for k in 0..5 {
            let mut p = random_stochastic(&mut rng, NUM_TYPES).into_array();
            if k % 2 == 1 {
                // Absorbing states, as produced by the identity zero-row policy.
                for i in 0..40 {
                    p.row_mut(i).fill(0.0);
                    p[[i, i]] = 1.0;
                }
            }
            let m = TransitionMatrix::new(0, p).unwrap();
            let opts = StationaryOptions::default();
            let pi = stationary(&m, &opts).unwrap();
            let y = step(&pi, m.as_array(), opts.epsilon);
            assert!(l1_gap(&pi, &y) < opts.tol);
            assert!((pi.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            assert!(pi.iter().all(|&x| x >= 0.0));
        }
    }

    #[test]
    fn non_convergence_reports_residual() {
        let mut p = Array2::eye(3);
        p[[0, 0]] = 0.5;
        p[[0, 1]] = 0.5;
        let m = TransitionMatrix::new(0, p).unwrap();
        let opts = StationaryOptions {
            epsilon: 0.0,
            max_iters: 2,
            ..StationaryOptions::default()
        };
        assert!(matches!(stationary(&m, &opts), Err(Error::NotConverged { iterations: 2, .. })));
    }

    #[test]
    fn frobenius_series() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let a = random_stochastic(&mut rng, 5);
        let s = frobenius_diff_series(&[a.clone(), a.clone()]).unwrap();
        assert_eq!(s.values, vec![Some(0.0)]);

        let mut p = Array2::from_elem((3, 3), 1.0 / 3.0);
        let base = TransitionMatrix::new(0, p.clone()).unwrap();
        p[[1, 0]] += 0.1;
        p[[1, 2]] -= 0.1;
        let moved = TransitionMatrix::new(1, p).unwrap();
        let s = frobenius_diff_series(&[base, moved]).unwrap();
        assert!((s.values[0].unwrap() - 0.02f64.sqrt()).abs() < 1e-15);
        assert_eq!(s.labels, vec!["1"]);

        let many: Vec<TransitionMatrix> = (0..101).map(|_| a.clone()).collect();
        assert_eq!(frobenius_diff_series(&many).unwrap().len(), 100);
        assert!(frobenius_diff_series(&[a]).is_err());
    }

    #[test]
    fn frobenius_series_is_permutation_covariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let n = 7;
        let mats: Vec<TransitionMatrix> = (0..4).map(|_| random_stochastic(&mut rng, n)).collect();
        let perm = [3, 0, 6, 1, 5, 2, 4];
        let permuted: Vec<TransitionMatrix> = mats
            .iter()
            .map(|m| {
                TransitionMatrix::new(0, Array2::from_shape_fn((n, n), |(i, j)| m.get(perm[i], perm[j])))
                    .unwrap()
            })
            .collect();
        let a = frobenius_diff_series(&mats).unwrap();
        let b = frobenius_diff_series(&permuted).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!((x.unwrap() - y.unwrap()).abs() < 1e-14);
        }
    }

    #[test]
    fn quadrants() {
        let table = TriadTypeTable::global();
        for model in BalanceModel::ALL {
            let q = quadrant_summary(&[TransitionMatrix::identity(0, NUM_TYPES)], table, model).unwrap();
            let bb = q.balanced_to_balanced.unwrap();
            let uu = q.unbalanced_to_unbalanced.unwrap();
            assert_eq!((bb.min, bb.max, uu.min, uu.max), (1.0, 1.0, 1.0, 1.0));
            assert_eq!(q.balanced_to_unbalanced.unwrap().max, 0.0);
            assert_eq!(q.unbalanced_to_balanced.unwrap().max, 0.0);
            assert_eq!(bb.count, table.balanced_count(model));

            let target = (0..NUM_TYPES).find(|&t| table.is_balanced(t, model)).unwrap();
            let mut p = Array2::zeros((NUM_TYPES, NUM_TYPES));
            p.column_mut(target).fill(1.0);
            let q = quadrant_summary(&[TransitionMatrix::new(0, p).unwrap()], table, model).unwrap();
            let ub = q.unbalanced_to_balanced.unwrap();
            assert_eq!((ub.min, ub.max), (1.0, 1.0));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let m = random_stochastic(&mut rng, NUM_TYPES);
        for (_, b, u) in quadrant_masses(&m, table, BalanceModel::Transitivity).unwrap() {
            assert!((b + u - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn five_number_interpolates() {
        let f = FiveNumber::of(&[4.0, 1.0, 3.0, 2.0]).unwrap();
        assert_eq!((f.min, f.q1, f.median, f.q3, f.max), (1.0, 1.75, 2.5, 3.25, 4.0));
        assert!(FiveNumber::of(&[]).is_none());
    }
}
