//! Joint estimation of a smoothly time-varying sequence of transition
//! matrices.
//!
//! Given empirical matrices `Phat_1..Phat_T`, the estimator solves
//!
//! ```text
//! minimize  1/(2T) sum_t ||Phat_t - P_t||_F^2
//!           + sum_{t>=2} lambda1 ||P_t - P_{t-1}||_1 + lambda2 ||P_t - P_{t-1}||_G
//! s.t.      (P_t)_ij >= floor,  every row of P_t sums to 1
//! ```
//!
//! where `||.||_G` is the Frobenius norm of the whole difference
//! ([`PenaltyMode::Matrix`]) or the sum of row-wise Euclidean norms
//! ([`PenaltyMode::RowGroups`]).
//!
//! The solver is ADMM on the splitting `Z = D P`, `Q = P`, with `D` the
//! first-difference operator in time:
//!
//! * the `P` update is an exact solve of a symmetric tridiagonal system in
//!   time, shared by every matrix entry;
//! * the `Z` update is the sparse-group-lasso proximal map (soft threshold,
//!   then block shrinkage);
//! * the `Q` update is a row-wise Euclidean projection onto the floored
//!   simplex.
//!
//! `Q` is feasible at every iterate. The solver keeps the feasible iterate
//! with the lowest objective seen so far and returns it; the objective trace
//! records that incumbent, so it never increases.

use std::borrow::Borrow;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::markov::TransitionMatrix;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PenaltyMode {
    /// Frobenius norm of the whole difference matrix.
    #[default]
    Matrix,
    /// Sum of Euclidean norms of the rows of the difference matrix.
    RowGroups,
}

impl std::str::FromStr for PenaltyMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "matrix" => Ok(PenaltyMode::Matrix),
            "row-groups" => Ok(PenaltyMode::RowGroups),
            other => Err(Error::InvalidArgument(format!("unknown penalty mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub lambda1: f64,
    pub lambda2: f64,
    /// Lower bound on every entry; stands in for strict positivity.
    pub epsilon_floor: f64,
    /// Relative objective tolerance; also scales the ADMM residual tests.
    pub tol: f64,
    pub max_iters: usize,
    pub penalty_mode: PenaltyMode,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            lambda1: 0.5,
            lambda2: 0.05,
            epsilon_floor: 1e-9,
            tol: 1e-7,
            max_iters: 20_000,
            penalty_mode: PenaltyMode::Matrix,
        }
    }
}

impl SolverConfig {
    pub fn with_lambdas(lambda1: f64, lambda2: f64) -> Self {
        Self {
            lambda1,
            lambda2,
            ..Self::default()
        }
    }

    fn validate(&self, dim: usize) -> Result<()> {
        if !(self.lambda1 >= 0.0 && self.lambda1.is_finite()) || !(self.lambda2 >= 0.0 && self.lambda2.is_finite()) {
            return Err(Error::InvalidArgument("lambda1 and lambda2 must be finite and nonnegative".into()));
        }
        if !(self.epsilon_floor > 0.0) || self.epsilon_floor * dim as f64 >= 1.0 {
            return Err(Error::InvalidArgument(format!(
                "epsilon_floor must lie in (0, 1/{dim})"
            )));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidArgument("tol must be positive".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidArgument("max_iters must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveResult {
    #[serde(skip)]
    pub matrices: Vec<TransitionMatrix>,
    pub objective_trace: Vec<f64>,
    pub final_objective: f64,
    pub converged: bool,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
}

/// Objective value with the whole-matrix group penalty.
pub fn objective<A, B>(p_seq: &[A], phat_seq: &[B], lambda1: f64, lambda2: f64) -> Result<f64>
where
    A: Borrow<Array2<f64>>,
    B: Borrow<Array2<f64>>,
{
    objective_with_mode(p_seq, phat_seq, lambda1, lambda2, PenaltyMode::Matrix)
}

pub fn objective_with_mode<A, B>(
    p_seq: &[A],
    phat_seq: &[B],
    lambda1: f64,
    lambda2: f64,
    mode: PenaltyMode,
) -> Result<f64>
where
    A: Borrow<Array2<f64>>,
    B: Borrow<Array2<f64>>,
{
    if p_seq.is_empty() || p_seq.len() != phat_seq.len() {
        return Err(Error::ShapeMismatch(format!(
            "sequences of length {} and {}",
            p_seq.len(),
            phat_seq.len()
        )));
    }
    let shape = p_seq[0].borrow().raw_dim();
    if p_seq.iter().map(Borrow::borrow).chain(phat_seq.iter().map(Borrow::borrow)).any(|m| m.raw_dim() != shape) {
        return Err(Error::ShapeMismatch("matrices differ in shape".into()));
    }
    let t_len = p_seq.len() as f64;
    let fidelity: f64 = p_seq
        .iter()
        .zip(phat_seq)
        .map(|(p, h)| {
            p.borrow()
                .iter()
                .zip(h.borrow().iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
        })
        .sum();
    let n = shape[1];
    let mut penalty = 0.0;
    for w in p_seq.windows(2) {
        let diff: Vec<f64> = w[1]
            .borrow()
            .iter()
            .zip(w[0].borrow().iter())
            .map(|(a, b)| a - b)
            .collect();
        penalty += penalty_value(&diff, n, lambda1, lambda2, mode);
    }
    Ok(fidelity / (2.0 * t_len) + penalty)
}

fn penalty_value(diff: &[f64], n: usize, lambda1: f64, lambda2: f64, mode: PenaltyMode) -> f64 {
    let l1 = lane_sum(diff, f64::abs);
    let group = match mode {
        PenaltyMode::Matrix => sq_norm(diff).sqrt(),
        PenaltyMode::RowGroups => diff.chunks_exact(n).map(norm2).sum(),
    };
    lambda1 * l1 + lambda2 * group
}

#[inline]
fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Entrywise `sum_t ||P_t - P_{t-1}||_1`.
pub fn total_variation<A: Borrow<Array2<f64>>>(p_seq: &[A]) -> Result<f64> {
    if p_seq.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "total variation needs at least 2 matrices, got {}",
            p_seq.len()
        )));
    }
    let mut tv = 0.0;
    for w in p_seq.windows(2) {
        if w[0].borrow().raw_dim() != w[1].borrow().raw_dim() {
            return Err(Error::ShapeMismatch("matrices differ in shape".into()));
        }
        tv += w[1]
            .borrow()
            .iter()
            .zip(w[0].borrow().iter())
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>();
    }
    Ok(tv)
}

/// Euclidean projection of `v` onto `{p : p_i >= floor, sum p_i = 1}`.
///
/// Shifts by `floor` and projects onto the simplex of mass
/// `1 - len * floor`. The threshold is found by Michelot's iteration:
/// average the surviving coordinates, drop those at or below the average
/// shift, repeat until nothing is dropped.
pub fn project_row_simplex(v: &[f64], floor: f64) -> Vec<f64> {
    let mut out = v.to_vec();
    let mut scratch = Vec::with_capacity(v.len());
    project_in_place(&mut out, floor, &mut scratch);
    out
}

fn project_in_place(row: &mut [f64], floor: f64, scratch: &mut Vec<f64>) {
    let n = row.len();
    let mass = 1.0 - n as f64 * floor;
    debug_assert!(mass > 0.0);
    scratch.clear();
    scratch.extend(row.iter().map(|x| x - floor));
    let theta = loop {
        let theta = (scratch.iter().sum::<f64>() - mass) / scratch.len() as f64;
        let before = scratch.len();
        scratch.retain(|&u| u > theta);
        if scratch.len() == before {
            break theta;
        }
    };
    for x in row.iter_mut() {
        *x = (*x - floor - theta).max(0.0) + floor;
    }
}

/// Flat storage for a sequence of `len` matrices of `stride` entries.
struct Seq {
    data: Vec<f64>,
    stride: usize,
}

impl Seq {
    fn zeros(len: usize, stride: usize) -> Self {
        Self {
            data: vec![0.0; len * stride],
            stride,
        }
    }

    fn at(&self, t: usize) -> &[f64] {
        &self.data[t * self.stride..(t + 1) * self.stride]
    }

    fn at_mut(&mut self, t: usize) -> &mut [f64] {
        &mut self.data[t * self.stride..(t + 1) * self.stride]
    }

    fn len(&self) -> usize {
        self.data.len() / self.stride
    }
}

/// `dst_t = src_{t+1} - src_t`.
fn diff_into(dst: &mut Seq, src: &Seq) {
    let stride = src.stride;
    for (t, out) in dst.data.chunks_exact_mut(stride).enumerate() {
        let (a, b) = (src.at(t), src.at(t + 1));
        for ((o, x), y) in out.iter_mut().zip(b).zip(a) {
            *o = x - y;
        }
    }
}

/// `dst += coef * D' src`, i.e. `dst_t += coef * (src_{t-1} - src_t)`.
fn adjoint_add(dst: &mut Seq, src: &Seq, coef: f64) {
    let stride = src.stride;
    for (t, s) in src.data.chunks_exact(stride).enumerate() {
        for (o, x) in dst.at_mut(t).iter_mut().zip(s) {
            *o -= coef * x;
        }
        for (o, x) in dst.at_mut(t + 1).iter_mut().zip(s) {
            *o += coef * x;
        }
    }
}

const LANES: usize = 8;

/// Sum of `f(x)` with independent accumulators so the loop vectorizes.
#[inline]
fn lane_sum(v: &[f64], f: impl Fn(f64) -> f64) -> f64 {
    let mut acc = [0.0; LANES];
    let chunks = v.chunks_exact(LANES);
    let rest: f64 = chunks.remainder().iter().map(|&x| f(x)).sum();
    for c in chunks {
        for (a, &x) in acc.iter_mut().zip(c) {
            *a += f(x);
        }
    }
    acc.iter().sum::<f64>() + rest
}

#[inline]
fn sq_norm(v: &[f64]) -> f64 {
    lane_sum(v, |x| x * x)
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; LANES];
    let (ca, cb) = (a.chunks_exact(LANES), b.chunks_exact(LANES));
    let rest: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| (x - y) * (x - y)).sum();
    for (x, y) in ca.zip(cb) {
        for ((s, p), q) in acc.iter_mut().zip(x).zip(y) {
            *s += (p - q) * (p - q);
        }
    }
    acc.iter().sum::<f64>() + rest
}

/// Factorization of `(w + rho) I + rho D'D` for the Thomas algorithm.
struct Tridiag {
    rho: f64,
    /// Reciprocal pivots.
    inv_pivot: Vec<f64>,
}

impl Tridiag {
    fn new(t_len: usize, w: f64, rho: f64) -> Self {
        let diag = |s: usize| {
            let degree = if t_len == 1 {
                0.0
            } else if s == 0 || s + 1 == t_len {
                1.0
            } else {
                2.0
            };
            w + rho + rho * degree
        };
        let mut inv_pivot = Vec::with_capacity(t_len);
        let mut prev_c = 0.0;
        for s in 0..t_len {
            let pivot = diag(s) + rho * prev_c;
            let inv = 1.0 / pivot;
            inv_pivot.push(inv);
            // c'_s = -rho / pivot; stored implicitly as rho * inv.
            prev_c = -rho * inv;
        }
        Self { rho, inv_pivot }
    }

    /// Solves in place; `rhs` holds one right-hand side per entry.
    fn solve(&self, rhs: &mut Seq) {
        let t_len = rhs.len();
        let stride = rhs.stride;
        let rho = self.rho;
        for s in 0..t_len {
            let inv = self.inv_pivot[s];
            if s == 0 {
                rhs.at_mut(0).iter_mut().for_each(|x| *x *= inv);
            } else {
                let (head, tail) = rhs.data.split_at_mut(s * stride);
                let prev = &head[(s - 1) * stride..];
                for (x, p) in tail[..stride].iter_mut().zip(prev) {
                    *x = (*x + rho * p) * inv;
                }
            }
        }
        for s in (0..t_len.saturating_sub(1)).rev() {
            let factor = rho * self.inv_pivot[s];
            let (head, tail) = rhs.data.split_at_mut((s + 1) * stride);
            let cur = &mut head[s * stride..];
            for (x, nx) in cur.iter_mut().zip(&tail[..stride]) {
                *x += factor * nx;
            }
        }
    }
}

fn check_inputs(phat_seq: &[TransitionMatrix]) -> Result<usize> {
    let first = phat_seq
        .first()
        .ok_or_else(|| Error::InvalidArgument("need at least one empirical matrix".into()))?;
    let dim = first.dim();
    if phat_seq.iter().any(|m| m.dim() != dim) {
        return Err(Error::ShapeMismatch("empirical matrices differ in shape".into()));
    }
    Ok(dim)
}

fn to_matrices(seq: &Seq, dim: usize, periods: &[usize]) -> Vec<TransitionMatrix> {
    (0..seq.len())
        .map(|t| {
            let p = Array2::from_shape_vec((dim, dim), seq.at(t).to_vec()).expect("dim*dim entries");
            TransitionMatrix::new_unchecked(periods[t], p)
        })
        .collect()
}

fn flat_objective(q: &Seq, phat: &Seq, dim: usize, cfg: &SolverConfig) -> f64 {
    let t_len = q.len();
    let fidelity = sq_dist(&q.data, &phat.data);
    let mut penalty = 0.0;
    let mut diff = vec![0.0; q.stride];
    for t in 1..t_len {
        for ((d, a), b) in diff.iter_mut().zip(q.at(t)).zip(q.at(t - 1)) {
            *d = a - b;
        }
        penalty += penalty_value(&diff, dim, cfg.lambda1, cfg.lambda2, cfg.penalty_mode);
    }
    fidelity / (2.0 * t_len as f64) + penalty
}

/// Sparse-group-lasso proximal map with thresholds `k1` (entrywise) and
/// `k2` (per group), in place.
fn prox_penalty(v: &mut [f64], dim: usize, k1: f64, k2: f64, mode: PenaltyMode) {
    if k1 > 0.0 {
        for x in v.iter_mut() {
            *x = x.signum() * (x.abs() - k1).max(0.0);
        }
    }
    if k2 > 0.0 {
        let shrink = |g: &mut [f64]| {
            let norm = norm2(g);
            let scale = if norm > k2 { 1.0 - k2 / norm } else { 0.0 };
            g.iter_mut().for_each(|x| *x *= scale);
        };
        match mode {
            PenaltyMode::Matrix => shrink(v),
            PenaltyMode::RowGroups => v.chunks_exact_mut(dim).for_each(shrink),
        }
    }
}

const WINDOW: usize = 50;
const RHO_UPDATE_EVERY: usize = 10;
const RESIDUAL_RATIO: f64 = 10.0;
const RHO_FACTOR: f64 = 2.0;

/// Estimates the smoothed sequence. Never fails on non-convergence; check
/// [`SolveResult::converged`].
pub fn estimate(phat_seq: &[TransitionMatrix], config: &SolverConfig) -> Result<SolveResult> {
    let dim = check_inputs(phat_seq)?;
    config.validate(dim)?;
    let t_len = phat_seq.len();
    let stride = dim * dim;
    let floor = config.epsilon_floor;
    let periods: Vec<usize> = phat_seq.iter().map(|m| m.from_period).collect();

    let mut phat = Seq::zeros(t_len, stride);
    for (t, m) in phat_seq.iter().enumerate() {
        for (dst, src) in phat.at_mut(t).iter_mut().zip(m.as_array().iter()) {
            *dst = *src;
        }
    }
    let mut scratch = Vec::with_capacity(dim);
    let mut q = Seq::zeros(t_len, stride);
    q.data.copy_from_slice(&phat.data);
    for row in q.data.chunks_exact_mut(dim) {
        project_in_place(row, floor, &mut scratch);
    }

    let start_objective = flat_objective(&q, &phat, dim, config);
    let separable = t_len == 1 || (config.lambda1 == 0.0 && config.lambda2 == 0.0);
    let varying = varying_rows(&phat, dim);
    if separable || varying.is_empty() {
        return Ok(SolveResult {
            matrices: to_matrices(&q, dim, &periods),
            objective_trace: vec![start_objective],
            final_objective: start_objective,
            converged: true,
            iterations: 0,
            primal_residual: 0.0,
            dual_residual: 0.0,
        });
    }

    // Rows constant in time keep their projection at the optimum: it
    // minimizes their fidelity term and zeroes their share of every
    // penalty. Only the remaining rows need the iterative solve.
    let gather = |src: &Seq| {
        let mut out = Seq::zeros(t_len, varying.len() * dim);
        for t in 0..t_len {
            let from = src.at(t);
            for (k, &i) in varying.iter().enumerate() {
                out.at_mut(t)[k * dim..(k + 1) * dim].copy_from_slice(&from[i * dim..(i + 1) * dim]);
            }
        }
        out
    };
    let phat_r = gather(&phat);
    let q_r = gather(&q);
    let offset = start_objective - flat_objective(&q_r, &phat_r, dim, config);
    let run = admm(&phat_r, q_r, dim, config);
    for t in 0..t_len {
        for (k, &i) in varying.iter().enumerate() {
            let src = &run.best.at(t)[k * dim..(k + 1) * dim];
            q.at_mut(t)[i * dim..(i + 1) * dim].copy_from_slice(src);
        }
    }
    Ok(SolveResult {
        matrices: to_matrices(&q, dim, &periods),
        objective_trace: run.trace.iter().map(|v| v + offset).collect(),
        final_objective: flat_objective(&q, &phat, dim, config),
        converged: run.converged,
        iterations: run.iterations,
        primal_residual: run.r_pri,
        dual_residual: run.r_dual,
    })
}

/// Indices of rows that differ between some pair of time steps.
fn varying_rows(phat: &Seq, dim: usize) -> Vec<usize> {
    let first = phat.at(0);
    (0..dim)
        .filter(|&i| {
            let row = &first[i * dim..(i + 1) * dim];
            (1..phat.len()).any(|t| &phat.at(t)[i * dim..(i + 1) * dim] != row)
        })
        .collect()
}

struct Admm {
    best: Seq,
    trace: Vec<f64>,
    converged: bool,
    iterations: usize,
    r_pri: f64,
    r_dual: f64,
}

fn admm(phat: &Seq, mut q: Seq, dim: usize, config: &SolverConfig) -> Admm {
    let t_len = phat.len();
    let stride = phat.stride;
    let floor = config.epsilon_floor;
    let mut scratch = Vec::with_capacity(dim);
    let start_objective = flat_objective(&q, phat, dim, config);

    let weight = 1.0 / t_len as f64;
    let mut rho = weight;
    let mut solver = Tridiag::new(t_len, weight, rho);

    let mut p = Seq::zeros(t_len, stride);
    p.data.copy_from_slice(&q.data);
    let mut z = Seq::zeros(t_len - 1, stride);
    diff_into(&mut z, &q);
    let mut u = Seq::zeros(t_len - 1, stride);
    let mut w = Seq::zeros(t_len, stride);
    let mut z_old = Seq::zeros(t_len - 1, stride);
    let mut q_old = Seq::zeros(t_len, stride);
    let mut dp = Seq::zeros(t_len - 1, stride);
    let mut tmp_short = Seq::zeros(t_len - 1, stride);
    let mut tmp_long = Seq::zeros(t_len, stride);

    let mut best = Seq::zeros(t_len, stride);
    best.data.copy_from_slice(&q.data);
    let mut best_objective = start_objective;
    let mut trace = Vec::with_capacity(config.max_iters.min(100_000));

    let eps_abs = config.tol * 1e-3;
    let eps_rel = config.tol;
    let (mut r_pri, mut r_dual) = (f64::INFINITY, f64::INFINITY);
    let mut converged = false;
    let mut iterations = 0;

    for k in 1..=config.max_iters {
        iterations = k;
        // P-update: solve with rhs = w*Phat + rho*(Q - W) + rho*D'(Z - U).
        for (((x, h), qv), wv) in p.data.iter_mut().zip(&phat.data).zip(&q.data).zip(&w.data) {
            *x = weight * h + rho * (qv - wv);
        }
        for ((a, zv), uv) in tmp_short.data.iter_mut().zip(&z.data).zip(&u.data) {
            *a = zv - uv;
        }
        adjoint_add(&mut p, &tmp_short, rho);
        solver.solve(&mut p);

        // Z-update: prox at D P + U.
        diff_into(&mut dp, &p);
        std::mem::swap(&mut z, &mut z_old);
        for ((zv, d), uv) in z.data.iter_mut().zip(&dp.data).zip(&u.data) {
            *zv = d + uv;
        }
        for zt in z.data.chunks_exact_mut(stride) {
            prox_penalty(zt, dim, config.lambda1 / rho, config.lambda2 / rho, config.penalty_mode);
        }

        // Q-update: projection of P + W.
        std::mem::swap(&mut q, &mut q_old);
        for ((dst, a), b) in q.data.iter_mut().zip(&p.data).zip(&w.data) {
            *dst = a + b;
        }
        for row in q.data.chunks_exact_mut(dim) {
            project_in_place(row, floor, &mut scratch);
        }

        // Residuals, then scaled dual updates.
        let pri_sq = sq_dist(&dp.data, &z.data) + sq_dist(&p.data, &q.data);
        let ax_sq = sq_norm(&dp.data) + sq_norm(&p.data);
        let bz_sq = sq_norm(&z.data) + sq_norm(&q.data);
        for ((uv, d), zv) in u.data.iter_mut().zip(&dp.data).zip(&z.data) {
            *uv += d - zv;
        }
        for ((wv, a), b) in w.data.iter_mut().zip(&p.data).zip(&q.data) {
            *wv += a - b;
        }
        for ((a, x), y) in tmp_long.data.iter_mut().zip(&q.data).zip(&q_old.data) {
            *a = x - y;
        }
        for ((a, x), y) in tmp_short.data.iter_mut().zip(&z.data).zip(&z_old.data) {
            *a = x - y;
        }
        adjoint_add(&mut tmp_long, &tmp_short, 1.0);
        let dual_sq = sq_norm(&tmp_long.data);
        tmp_long.data.copy_from_slice(&w.data);
        adjoint_add(&mut tmp_long, &u, 1.0);
        let ydual_sq = sq_norm(&tmp_long.data);

        r_pri = pri_sq.sqrt();
        r_dual = rho * dual_sq.sqrt();
        let m_rows = ((2 * t_len - 1) * stride) as f64;
        let eps_pri = m_rows.sqrt() * eps_abs + eps_rel * ax_sq.sqrt().max(bz_sq.sqrt());
        let eps_dual = ((t_len * stride) as f64).sqrt() * eps_abs + eps_rel * rho * ydual_sq.sqrt();

        let obj = flat_objective(&q, phat, dim, config);
        if obj < best_objective {
            best_objective = obj;
            best.data.copy_from_slice(&q.data);
        }
        trace.push(best_objective);

        let window_ok = trace.len() > WINDOW && {
            let old = trace[trace.len() - 1 - WINDOW];
            (old - best_objective) <= config.tol * best_objective.abs().max(f64::MIN_POSITIVE)
        };
        if r_pri <= eps_pri && r_dual <= eps_dual && window_ok {
            converged = true;
            break;
        }

        if k % RHO_UPDATE_EVERY == 0 {
            let new_rho = if r_pri > RESIDUAL_RATIO * r_dual {
                rho * RHO_FACTOR
            } else if r_dual > RESIDUAL_RATIO * r_pri {
                rho / RHO_FACTOR
            } else {
                rho
            };
            if new_rho != rho {
                let scale = rho / new_rho;
                u.data.iter_mut().for_each(|x| *x *= scale);
                w.data.iter_mut().for_each(|x| *x *= scale);
                rho = new_rho;
                solver = Tridiag::new(t_len, weight, rho);
            }
        }
    }

    Admm {
        best,
        trace,
        converged,
        iterations,
        r_pri,
        r_dual,
    }
}
