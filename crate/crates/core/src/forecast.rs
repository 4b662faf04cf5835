//! One-step forecasting of triad-type proportions and walk-forward
//! hyperparameter selection.
//!
//! Proportions are indexed by period `0..N`; empirical matrix `k` maps
//! period `k` to `k + 1`. Forecasting period `s` may only use proportions
//! `0..s` and matrices `0..s-1`, which every method here respects.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::markov::TransitionMatrix;
use crate::tvsolver::{estimate, SolverConfig};

/// Row vector times matrix, renormalized to unit mass.
pub fn forecast_one_step(prop: &[f64], p: &TransitionMatrix) -> Result<Vec<f64>> {
    let n = p.dim();
    if prop.len() != n {
        return Err(Error::ShapeMismatch(format!(
            "proportion of length {} against a {n}x{n} matrix",
            prop.len()
        )));
    }
    if prop.iter().any(|&x| !(x >= 0.0)) {
        return Err(Error::InvalidArgument("proportion has a negative or NaN entry".into()));
    }
    let mut out = vec![0.0; n];
    for (i, &w) in prop.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        for (o, &pij) in out.iter_mut().zip(p.row(i).iter()) {
            *o += w * pij;
        }
    }
    let total: f64 = out.iter().sum();
    if !(total > 0.0) {
        return Err(Error::InvalidArgument("proportion has zero mass".into()));
    }
    out.iter_mut().for_each(|x| *x /= total);
    Ok(out)
}

/// Root-mean-square error over all entries, or over `subset` when given.
pub fn rmse(pred: &[f64], truth: &[f64], subset: Option<&[usize]>) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::ShapeMismatch(format!("{} predictions for {} targets", pred.len(), truth.len())));
    }
    let sq = |i: usize| (pred[i] - truth[i]).powi(2);
    let (sum, count) = match subset {
        Some(idx) => {
            if let Some(&bad) = idx.iter().find(|&&i| i >= pred.len()) {
                return Err(Error::InvalidArgument(format!("type {bad} out of range")));
            }
            (idx.iter().map(|&i| sq(i)).sum::<f64>(), idx.len())
        }
        None => ((0..pred.len()).map(sq).sum::<f64>(), pred.len()),
    };
    if count == 0 {
        return Err(Error::InvalidArgument("rmse over an empty set".into()));
    }
    Ok((sum / count as f64).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    TimeVarying,
    IndividualMarkov,
    LastProportion,
    AverageProportion,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::TimeVarying,
        Method::IndividualMarkov,
        Method::LastProportion,
        Method::AverageProportion,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::TimeVarying => "time-varying",
            Method::IndividualMarkov => "individual-markov",
            Method::LastProportion => "last-proportion",
            Method::AverageProportion => "average-proportion",
        }
    }
}

fn check_sequences(props: &[Vec<f64>], phats: &[TransitionMatrix]) -> Result<()> {
    if props.len() != phats.len() + 1 {
        return Err(Error::ShapeMismatch(format!(
            "{} proportion vectors need {} matrices, got {}",
            props.len(),
            props.len().saturating_sub(1),
            phats.len()
        )));
    }
    let dim = props.first().map_or(0, Vec::len);
    if props.iter().any(|p| p.len() != dim) || phats.iter().any(|m| m.dim() != dim) {
        return Err(Error::ShapeMismatch("inconsistent dimensions".into()));
    }
    Ok(())
}

/// Forecast of period `s` by `method` from the prefix before it.
pub fn predict(
    method: Method,
    props: &[Vec<f64>],
    phats: &[TransitionMatrix],
    s: usize,
    solver: &SolverConfig,
) -> Result<Vec<f64>> {
    check_sequences(props, phats)?;
    if s < 2 || s >= props.len() {
        return Err(Error::InvalidArgument(format!(
            "forecast step {s} outside 2..{}",
            props.len()
        )));
    }
    let last = &props[s - 1];
    match method {
        Method::LastProportion => Ok(last.clone()),
        Method::AverageProportion => {
            let mut avg = vec![0.0; last.len()];
            for p in &props[..s] {
                avg.iter_mut().zip(p).for_each(|(a, x)| *a += x);
            }
            avg.iter_mut().for_each(|a| *a /= s as f64);
            Ok(avg)
        }
        Method::IndividualMarkov => forecast_one_step(last, &phats[s - 2]),
        Method::TimeVarying => {
            let res = estimate(&phats[..s - 1], solver)?;
            let p = res.matrices.last().expect("nonempty estimate");
            forecast_one_step(last, p)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ForecastReport {
    pub steps: Vec<usize>,
    pub rmse: BTreeMap<Method, Vec<f64>>,
}

impl ForecastReport {
    pub fn mean_rmse(&self, method: Method) -> Option<f64> {
        let v = self.rmse.get(&method)?;
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }
}

/// Walk-forward evaluation over the last `holdout` periods.
pub fn evaluate_methods(
    props: &[Vec<f64>],
    phats: &[TransitionMatrix],
    methods: &[Method],
    solver: &SolverConfig,
    holdout: usize,
    subset: Option<&[usize]>,
) -> Result<ForecastReport> {
    check_sequences(props, phats)?;
    let n = props.len();
    if holdout == 0 || holdout + 2 > n {
        return Err(Error::InvalidArgument(format!(
            "holdout of {holdout} needs between 1 and {} periods",
            n.saturating_sub(2)
        )));
    }
    let steps: Vec<usize> = (n - holdout..n).collect();
    let jobs: Vec<(Method, usize)> = methods
        .iter()
        .flat_map(|&m| steps.iter().map(move |&s| (m, s)))
        .collect();
    let scores: Vec<f64> = jobs
        .par_iter()
        .map(|&(m, s)| {
            let pred = predict(m, props, phats, s, solver)?;
            rmse(&pred, &props[s], subset)
        })
        .collect::<Result<_>>()?;
    let mut rmse_by = BTreeMap::new();
    for ((m, _), v) in jobs.iter().zip(scores) {
        rmse_by.entry(*m).or_insert_with(Vec::new).push(v);
    }
    Ok(ForecastReport { steps, rmse: rmse_by })
}

pub fn default_grid() -> Vec<(f64, f64)> {
    let l1 = [0.05, 0.1, 0.5, 1.0, 5.0];
    let l2 = [0.005, 0.05, 0.5];
    l1.iter().flat_map(|&a| l2.iter().map(move |&b| (a, b))).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TuneResult {
    pub lambda1: f64,
    pub lambda2: f64,
    pub score: f64,
    /// `(lambda1, lambda2, mean rmse)` in grid order.
    pub scores: Vec<(f64, f64, f64)>,
}

/// Picks the grid point with the lowest mean walk-forward RMSE of the
/// time-varying method over the last `validation` periods. Exact ties go
/// to the larger `lambda1`, then the larger `lambda2`.
pub fn tune_hyperparams(
    props: &[Vec<f64>],
    phats: &[TransitionMatrix],
    grid: &[(f64, f64)],
    validation: usize,
    base: &SolverConfig,
    subset: Option<&[usize]>,
) -> Result<TuneResult> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("empty hyperparameter grid".into()));
    }
    let scores: Vec<(f64, f64, f64)> = grid
        .par_iter()
        .map(|&(l1, l2)| {
            let cfg = SolverConfig {
                lambda1: l1,
                lambda2: l2,
                ..base.clone()
            };
            let report = evaluate_methods(props, phats, &[Method::TimeVarying], &cfg, validation, subset)?;
            let score = report.mean_rmse(Method::TimeVarying).expect("nonempty holdout");
            Ok((l1, l2, score))
        })
        .collect::<Result<_>>()?;
    let best = scores
        .iter()
        .copied()
        .min_by(|a, b| {
            a.2.total_cmp(&b.2)
                .then(b.0.total_cmp(&a.0))
                .then(b.1.total_cmp(&a.1))
        })
        .expect("nonempty grid");
    Ok(TuneResult {
        lambda1: best.0,
        lambda2: best.1,
        score: best.2,
        scores,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn two_state(a: f64, b: f64, period: usize) -> TransitionMatrix {
        TransitionMatrix::new(period, array![[a, 1.0 - a], [b, 1.0 - b]]).unwrap()
    }

    #[test]
    fn one_step_example() {
        let p = two_state(0.9, 0.2, 0);
        let out = forecast_one_step(&[0.5, 0.5], &p).unwrap();
        assert!((out[0] - 0.55).abs() < 1e-15);
        assert!((out[1] - 0.45).abs() < 1e-15);
        assert!(forecast_one_step(&[1.0], &p).is_err());
    }

    #[test]
    fn rmse_examples() {
        assert_eq!(rmse(&[0.5, 0.5], &[0.5, 0.5], None).unwrap(), 0.0);
        assert!((rmse(&[1.0, 0.0], &[0.0, 1.0], None).unwrap() - 1.0).abs() < 1e-15);
        assert!((rmse(&[1.0, 0.0, 0.0], &[0.0, 0.0, 0.0], Some(&[0, 1])).unwrap() - 0.5f64.sqrt()).abs() < 1e-15);
        assert!(rmse(&[1.0], &[1.0, 2.0], None).is_err());
    }

    #[test]
    fn baselines_use_only_the_prefix() {
        let props = vec![vec![1.0, 0.0], vec![0.5, 0.5], vec![0.0, 1.0], vec![0.2, 0.8]];
        let phats = vec![two_state(0.5, 0.0, 0), two_state(0.0, 0.0, 1), two_state(1.0, 0.5, 2)];
        let cfg = SolverConfig::default();
        let last = predict(Method::LastProportion, &props, &phats, 2, &cfg).unwrap();
        assert_eq!(last, vec![0.5, 0.5]);
        let avg = predict(Method::AverageProportion, &props, &phats, 3, &cfg).unwrap();
        assert!((avg[0] - 0.5).abs() < 1e-15);
        let ind = predict(Method::IndividualMarkov, &props, &phats, 3, &cfg).unwrap();
        // props[2] times phats[1].
        assert!((ind[1] - 1.0).abs() < 1e-15);
        // Changing data at or after the target leaves the forecast unchanged.
        let mut altered = props.clone();
        altered[3] = vec![0.9, 0.1];
        let mut alt_phats = phats.clone();
        alt_phats[2] = two_state(0.3, 0.3, 2);
        for m in Method::ALL {
            assert_eq!(
                predict(m, &props, &phats, 3, &cfg).unwrap(),
                predict(m, &altered, &alt_phats, 3, &cfg).unwrap()
            );
        }
        assert!(predict(Method::LastProportion, &props, &phats, 1, &cfg).is_err());
    }

    #[test]
    fn evaluation_shapes() {
        let props: Vec<Vec<f64>> = (0..6).map(|k| vec![0.1 * k as f64, 1.0 - 0.1 * k as f64]).collect();
        let phats: Vec<TransitionMatrix> = (0..5).map(|k| two_state(0.9, 0.1, k)).collect();
        let report = evaluate_methods(&props, &phats, &Method::ALL, &SolverConfig::default(), 3, None).unwrap();
        assert_eq!(report.steps, vec![3, 4, 5]);
        assert!(report.rmse.values().all(|v| v.len() == 3));
        assert!(evaluate_methods(&props, &phats, &Method::ALL, &SolverConfig::default(), 5, None).is_err());
    }

    #[test]
    fn tuning_breaks_ties_toward_larger_lambdas() {
        // A constant chain forecasts identically for every grid point.
        let props = vec![vec![0.5, 0.5]; 6];
        let phats: Vec<TransitionMatrix> = (0..5).map(|k| two_state(0.5, 0.5, k)).collect();
        let grid = vec![(0.1, 0.5), (5.0, 0.005), (5.0, 0.5), (1.0, 0.05)];
        let res = tune_hyperparams(&props, &phats, &grid, 2, &SolverConfig::default(), None).unwrap();
        assert_eq!((res.lambda1, res.lambda2), (5.0, 0.5));
        assert_eq!(res.scores.len(), 4);
        assert_eq!(default_grid().len(), 15);
    }
}
