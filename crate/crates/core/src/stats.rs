//! Stability statistics against exogenous series: alignment, Pearson
//! correlation and Granger causality.
//!
//! Tail probabilities come from the regularized incomplete beta and gamma
//! functions of `statrs`.

use std::collections::BTreeMap;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;
use statrs::function::gamma::gamma_ur;

use crate::error::{Error, Result};
use crate::ingest::ScalarSeries;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlignMode {
    /// Pair values whose labels match exactly.
    Exact,
    /// Average each series within calendar years, then pair by year.
    #[default]
    Annualize,
    /// Place annual values of the second series at mid-year and
    /// interpolate linearly at the dates of the first.
    Interpolate,
}

impl std::str::FromStr for AlignMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(AlignMode::Exact),
            "annualize" => Ok(AlignMode::Annualize),
            "interpolate" => Ok(AlignMode::Interpolate),
            other => Err(Error::InvalidArgument(format!("unknown alignment mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Invert {
    #[default]
    None,
    First,
    Second,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlignOptions {
    pub mode: AlignMode,
    pub invert: Invert,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlignedPairs {
    pub labels: Vec<String>,
    pub first: Vec<f64>,
    pub second: Vec<f64>,
}

impl AlignedPairs {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

fn year_of(label: &str) -> Option<i32> {
    let head = label.get(..4)?;
    if !head.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    head.parse().ok()
}

/// Fractional year of a label: dates map to `year + (day - 0.5) / days`,
/// bare years to mid-year.
fn fractional_year(label: &str) -> Option<f64> {
    if let Ok(d) = NaiveDate::parse_from_str(label, "%Y-%m-%d") {
        let days = if d.leap_year() { 366.0 } else { 365.0 };
        return Some(f64::from(d.year()) + (f64::from(d.ordinal()) - 0.5) / days);
    }
    if label.len() == 4 {
        return year_of(label).map(|y| f64::from(y) + 0.5);
    }
    None
}

fn present(series: &ScalarSeries) -> impl Iterator<Item = (&str, f64)> {
    series
        .iter()
        .filter_map(|(l, v)| v.filter(|x| x.is_finite()).map(|x| (l, x)))
}

fn annual_means(series: &ScalarSeries) -> BTreeMap<i32, f64> {
    let mut acc: BTreeMap<i32, (f64, usize)> = BTreeMap::new();
    for (label, v) in present(series) {
        if let Some(y) = year_of(label) {
            let e = acc.entry(y).or_default();
            e.0 += v;
            e.1 += 1;
        }
    }
    acc.into_iter().map(|(y, (s, c))| (y, s / c as f64)).collect()
}

/// Pairs the two series, drops missing or non-finite values and applies
/// the optional inversion. Fails with fewer than 3 pairs.
pub fn align_series(first: &ScalarSeries, second: &ScalarSeries, opts: AlignOptions) -> Result<AlignedPairs> {
    let mut out = AlignedPairs {
        labels: Vec::new(),
        first: Vec::new(),
        second: Vec::new(),
    };
    let mut push = |label: String, a: f64, b: f64| {
        out.labels.push(label);
        out.first.push(a);
        out.second.push(b);
    };
    match opts.mode {
        AlignMode::Exact => {
            let lookup: BTreeMap<&str, f64> = present(second).collect();
            for (label, a) in present(first) {
                if let Some(&b) = lookup.get(label) {
                    push(label.to_owned(), a, b);
                }
            }
        }
        AlignMode::Annualize => {
            let b = annual_means(second);
            for (year, a) in annual_means(first) {
                if let Some(&bv) = b.get(&year) {
                    push(year.to_string(), a, bv);
                }
            }
        }
        AlignMode::Interpolate => {
            let mut knots: Vec<(f64, f64)> = present(second)
                .filter_map(|(l, v)| year_of(l).map(|y| (f64::from(y) + 0.5, v)))
                .collect();
            knots.sort_by(|a, b| a.0.total_cmp(&b.0));
            knots.dedup_by(|a, b| a.0 == b.0);
            for (label, a) in present(first) {
                let Some(x) = fractional_year(label) else { continue };
                let k = knots.partition_point(|&(kx, _)| kx < x);
                let value = if k < knots.len() && knots[k].0 == x {
                    Some(knots[k].1)
                } else if k == 0 || k == knots.len() {
                    None
                } else {
                    let (x0, y0) = knots[k - 1];
                    let (x1, y1) = knots[k];
                    Some(y0 + (y1 - y0) * (x - x0) / (x1 - x0))
                };
                if let Some(b) = value {
                    push(label.to_owned(), a, b);
                }
            }
        }
    }
    if opts.invert != Invert::None {
        let mut kept = AlignedPairs {
            labels: Vec::new(),
            first: Vec::new(),
            second: Vec::new(),
        };
        for ((l, a), b) in out.labels.into_iter().zip(out.first).zip(out.second) {
            let (a, b) = match opts.invert {
                Invert::First => (1.0 / a, b),
                Invert::Second => (a, 1.0 / b),
                Invert::None => unreachable!(),
            };
            if a.is_finite() && b.is_finite() {
                kept.labels.push(l);
                kept.first.push(a);
                kept.second.push(b);
            }
        }
        out = kept;
    }
    if out.len() < 3 {
        return Err(Error::TooFewPairs(out.len()));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PearsonResult {
    pub r: f64,
    /// Two-sided p-value from the t distribution with `n - 2` degrees of
    /// freedom.
    pub p: f64,
    pub n: usize,
}

/// Two-sided tail probability of Student's t.
pub fn t_two_sided(t: f64, df: f64) -> f64 {
    if t.is_infinite() {
        return 0.0;
    }
    beta_reg(df / 2.0, 0.5, df / (df + t * t))
}

/// Upper tail of the F distribution.
pub fn f_upper(f: f64, d1: f64, d2: f64) -> f64 {
    if f <= 0.0 {
        return 1.0;
    }
    if f.is_infinite() {
        return 0.0;
    }
    beta_reg(d2 / 2.0, d1 / 2.0, d2 / (d2 + d1 * f))
}

/// Upper tail of the chi-square distribution.
pub fn chi2_upper(x: f64, k: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x.is_infinite() {
        return 0.0;
    }
    gamma_ur(k / 2.0, x / 2.0)
}

pub fn pearson(x: &[f64], y: &[f64]) -> Result<PearsonResult> {
    if x.len() != y.len() {
        return Err(Error::ShapeMismatch(format!("{} and {} observations", x.len(), y.len())));
    }
    let n = x.len();
    if n < 3 {
        return Err(Error::TooFewPairs(n));
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / n as f64;
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::ZeroVariance);
    }
    let mut r = (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0);
    // Exact linear relations lose a few ulps in the ratio above.
    if 1.0 - r.abs() < 8.0 * f64::EPSILON {
        r = r.signum();
    }
    let df = (n - 2) as f64;
    let p = if r.abs() == 1.0 {
        0.0
    } else {
        t_two_sided(r * (df / (1.0 - r * r)).sqrt(), df)
    };
    Ok(PearsonResult { r, p, n })
}

/// Least squares by the normal equations, solved with a pivoted Cholesky
/// factorization of the column-equilibrated Gram matrix.
///
/// `columns` are the regressors (include a constant column for an
/// intercept). Returns the coefficients and the residual sum of squares.
pub fn ols(columns: &[Vec<f64>], y: &[f64]) -> Result<(Vec<f64>, f64)> {
    const RANK_TOL: f64 = 1e-10;
    let k = columns.len();
    let n = y.len();
    if k == 0 || columns.iter().any(|c| c.len() != n) {
        return Err(Error::ShapeMismatch("design columns must match the response length".into()));
    }
    let scale: Vec<f64> = columns
        .iter()
        .map(|c| {
            let s = c.iter().map(|v| v * v).sum::<f64>().sqrt();
            if s > 0.0 { 1.0 / s } else { 0.0 }
        })
        .collect();
    if scale.contains(&0.0) {
        return Err(Error::RankDeficient { pivot: 0.0 });
    }
    let mut g = vec![0.0; k * k];
    let mut rhs = vec![0.0; k];
    for a in 0..k {
        for b in a..k {
            let v: f64 = columns[a].iter().zip(&columns[b]).map(|(p, q)| p * q).sum::<f64>() * scale[a] * scale[b];
            g[a * k + b] = v;
            g[b * k + a] = v;
        }
        rhs[a] = columns[a].iter().zip(y).map(|(p, q)| p * q).sum::<f64>() * scale[a];
    }
    // Pivoted Cholesky G[perm, perm] = L L'.
    let mut perm: Vec<usize> = (0..k).collect();
    let mut l = vec![0.0; k * k];
    let mut diag: Vec<f64> = (0..k).map(|i| g[i * k + i]).collect();
    for j in 0..k {
        let (best, &dmax) = diag[j..]
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, d)| (i + j, d))
            .expect("nonempty");
        if !(dmax > RANK_TOL) {
            return Err(Error::RankDeficient { pivot: dmax });
        }
        perm.swap(j, best);
        diag.swap(j, best);
        for c in 0..j {
            l.swap(j * k + c, best * k + c);
        }
        let ljj = dmax.sqrt();
        l[j * k + j] = ljj;
        for i in j + 1..k {
            let mut v = g[perm[i] * k + perm[j]];
            for c in 0..j {
                v -= l[i * k + c] * l[j * k + c];
            }
            let lij = v / ljj;
            l[i * k + j] = lij;
            diag[i] -= lij * lij;
        }
    }
    // Solve L L' z = rhs[perm].
    let mut z: Vec<f64> = perm.iter().map(|&p| rhs[p]).collect();
    for i in 0..k {
        for c in 0..i {
            z[i] -= l[i * k + c] * z[c];
        }
        z[i] /= l[i * k + i];
    }
    for i in (0..k).rev() {
        for c in i + 1..k {
            z[i] -= l[c * k + i] * z[c];
        }
        z[i] /= l[i * k + i];
    }
    let mut beta = vec![0.0; k];
    for (pos, &p) in perm.iter().enumerate() {
        beta[p] = z[pos] * scale[p];
    }
    let rss = (0..n)
        .map(|t| {
            let fit: f64 = columns.iter().zip(&beta).map(|(c, b)| c[t] * b).sum();
            (y[t] - fit).powi(2)
        })
        .sum();
    Ok((beta, rss))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrangerResult {
    pub lags: usize,
    pub n: usize,
    pub f_stat: f64,
    pub f_p: f64,
    pub chi2_stat: f64,
    pub chi2_p: f64,
    pub rss_restricted: f64,
    pub rss_unrestricted: f64,
}

/// Tests whether lags of `x` help predict `y` beyond lags of `y`.
pub fn granger(x: &[f64], y: &[f64], lags: usize) -> Result<GrangerResult> {
    if x.len() != y.len() {
        return Err(Error::ShapeMismatch(format!("{} and {} observations", x.len(), y.len())));
    }
    if lags == 0 {
        return Err(Error::InvalidArgument("lag order must be positive".into()));
    }
    let total = x.len();
    if total <= 3 * lags + 3 {
        return Err(Error::TooFewPairs(total));
    }
    let n = total - lags;
    let target: Vec<f64> = y[lags..].to_vec();
    let lagged = |s: &[f64], l: usize| -> Vec<f64> { (lags..total).map(|t| s[t - l]).collect() };
    let mut restricted = vec![vec![1.0; n]];
    restricted.extend((1..=lags).map(|l| lagged(y, l)));
    let mut unrestricted = restricted.clone();
    unrestricted.extend((1..=lags).map(|l| lagged(x, l)));

    let (_, rss_r) = ols(&restricted, &target)?;
    let (_, rss_u) = ols(&unrestricted, &target)?;
    assert!(
        rss_u <= rss_r * (1.0 + 1e-8) + 1e-12,
        "nested regression increased the residual sum of squares: {rss_u} > {rss_r}"
    );
    let dof = (n - 2 * lags - 1) as f64;
    let numerator = (rss_r - rss_u).max(0.0) / lags as f64;
    let f_stat = if rss_u > 0.0 {
        numerator / (rss_u / dof)
    } else if numerator > 0.0 {
        f64::INFINITY
    } else {
        0.0
    };
    let chi2_stat = lags as f64 * f_stat;
    Ok(GrangerResult {
        lags,
        n,
        f_stat,
        f_p: f_upper(f_stat, lags as f64, dof),
        chi2_stat,
        chi2_p: chi2_upper(chi2_stat, lags as f64),
        rss_restricted: rss_r,
        rss_unrestricted: rss_u,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityReport {
    pub pearson: PearsonResult,
    /// The stability series Granger-causing the exogenous series.
    pub granger_xy: Option<GrangerResult>,
    /// The exogenous series Granger-causing the stability series.
    pub granger_yx: Option<GrangerResult>,
    pub alignment: AlignOptions,
    pub pairs: usize,
}

/// Aligns, correlates and runs both Granger directions at `lags`. Granger
/// results are omitted when the aligned series is too short for the lag.
pub fn stability_vs_exogenous(
    stability: &ScalarSeries,
    exogenous: &ScalarSeries,
    opts: AlignOptions,
    lags: usize,
) -> Result<StabilityReport> {
    let pairs = align_series(stability, exogenous, opts)?;
    let pearson = pearson(&pairs.first, &pairs.second)?;
    let run = |a: &[f64], b: &[f64]| match granger(a, b, lags) {
        Ok(g) => Ok(Some(g)),
        Err(Error::TooFewPairs(_)) => Ok(None),
        Err(e) => Err(e),
    };
    Ok(StabilityReport {
        pearson,
        granger_xy: run(&pairs.first, &pairs.second)?,
        granger_yx: run(&pairs.second, &pairs.first)?,
        alignment: opts,
        pairs: pairs.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn series(labels: &[&str], values: &[Option<f64>]) -> ScalarSeries {
        ScalarSeries::new(labels.iter().map(|s| s.to_string()).collect(), values.to_vec()).unwrap()
    }

    #[test]
    fn pearson_examples() {
        let r = pearson(&[1.0, 2.0, 3.0, 4.0], &[2.0, 4.0, 6.0, 8.0]).unwrap();
        assert!((r.r - 1.0).abs() < 1e-15 && r.p == 0.0 && r.n == 4);
        let r = pearson(&[1.0, 2.0, 3.0, 4.0], &[8.0, 6.0, 4.0, 2.0]).unwrap();
        assert!((r.r + 1.0).abs() < 1e-15);
        assert!(matches!(pearson(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]), Err(Error::ZeroVariance)));
        assert!(matches!(pearson(&[1.0, 2.0], &[1.0, 2.0]), Err(Error::TooFewPairs(2))));
    }

    #[test]
    fn pearson_is_symmetric_and_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let x: Vec<f64> = (0..12).map(|_| rng.random()).collect();
            let y: Vec<f64> = (0..12).map(|_| rng.random()).collect();
            let a = pearson(&x, &y).unwrap();
            let b = pearson(&y, &x).unwrap();
            assert_eq!(a.r, b.r);
            assert!((-1.0..=1.0).contains(&a.r) && (0.0..=1.0).contains(&a.p));
        }
    }

    #[test]
    fn tail_functions_at_known_points() {
        // t with 1 df is Cauchy: P(|T| > 1) = 1/2.
        assert!((t_two_sided(1.0, 1.0) - 0.5).abs() < 1e-14);
        // Chi-square with 2 df is exponential with mean 2.
        assert!((chi2_upper(3.0, 2.0) - (-1.5f64).exp()).abs() < 1e-14);
        // F(2, 2) upper tail is 1 / (1 + f).
        assert!((f_upper(3.0, 2.0, 2.0) - 0.25).abs() < 1e-14);
    }

    #[test]
    fn ols_recovers_exact_coefficients() {
        let x1: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let x2: Vec<f64> = (0..10).map(|i| ((i * 7) % 5) as f64 * 1e4).collect();
        let y: Vec<f64> = (0..10).map(|i| 3.0 + 2.0 * x1[i] - 1e-4 * x2[i]).collect();
        let (beta, rss) = ols(&[vec![1.0; 10], x1.clone(), x2], &y).unwrap();
        assert!((beta[0] - 3.0).abs() < 1e-9);
        assert!((beta[1] - 2.0).abs() < 1e-10);
        assert!((beta[2] + 1e-4).abs() < 1e-14);
        assert!(rss < 1e-18);
        let dup = ols(&[vec![1.0; 10], x1.clone(), x1.iter().map(|v| 2.0 * v).collect()], &y);
        assert!(matches!(dup, Err(Error::RankDeficient { .. })));
    }

    #[test]
    fn granger_detects_lagged_dependence() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let x: Vec<f64> = (0..60).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut y = vec![0.0; 60];
        for t in 1..60 {
            y[t] = 0.9 * x[t - 1] + 0.05 * rng.random_range(-1.0..1.0);
        }
        let fwd = granger(&x, &y, 1).unwrap();
        let back = granger(&y, &x, 1).unwrap();
        assert!(fwd.f_p < 1e-10, "{fwd:?}");
        assert!(back.f_p > 1e-3, "{back:?}");
        assert_eq!(fwd.n, 59);
        assert!((fwd.chi2_stat - fwd.f_stat).abs() < 1e-12);
        assert!(matches!(granger(&x[..6], &y[..6], 1), Err(Error::TooFewPairs(6))));
    }

    #[test]
    fn exact_alignment_drops_missing() {
        let a = series(&["a", "b", "c", "d"], &[Some(1.0), None, Some(3.0), Some(4.0)]);
        let b = series(&["d", "c", "b", "a", "e"], &[Some(4.0), Some(3.0), Some(2.0), Some(1.0), Some(9.0)]);
        let p = align_series(&a, &b, AlignOptions { mode: AlignMode::Exact, invert: Invert::None }).unwrap();
        assert_eq!(p.labels, vec!["a", "c", "d"]);
        assert_eq!(p.second, vec![1.0, 3.0, 4.0]);
        let short = series(&["a", "c"], &[Some(1.0), Some(2.0)]);
        assert!(matches!(
            align_series(&short, &b, AlignOptions { mode: AlignMode::Exact, invert: Invert::None }),
            Err(Error::TooFewPairs(2))
        ));
    }

    #[test]
    fn annual_alignment_averages_and_inverts() {
        let a = series(
            &["2000-01-05", "2000-07-01", "2001-03-01", "2002-03-01"],
            &[Some(1.0), Some(3.0), Some(5.0), Some(6.0)],
        );
        let b = series(&["2000", "2001", "2002"], &[Some(2.0), Some(4.0), Some(0.0)]);
        let inverted = AlignOptions { mode: AlignMode::Annualize, invert: Invert::Second };
        // Inverting a zero drops that year.
        assert!(matches!(align_series(&a, &b, inverted), Err(Error::TooFewPairs(2))));
        let b = series(&["2000", "2001", "2002"], &[Some(2.0), Some(4.0), Some(8.0)]);
        let p = align_series(&a, &b, inverted).unwrap();
        assert_eq!(p.labels, vec!["2000", "2001", "2002"]);
        assert_eq!(p.first, vec![2.0, 5.0, 6.0]);
        assert_eq!(p.second, vec![0.5, 0.25, 0.125]);
    }

    #[test]
    fn interpolation_is_linear_between_mid_years() {
        let a = series(
            &["1999-12-31", "2000-07-02", "2001-01-01", "2001-07-02", "2003-01-01"],
            &[Some(1.0), Some(2.0), Some(3.0), Some(4.0), Some(5.0)],
        );
        let b = series(&["2000", "2001", "2002"], &[Some(10.0), Some(20.0), Some(40.0)]);
        let p = align_series(&a, &b, AlignOptions { mode: AlignMode::Interpolate, invert: Invert::None }).unwrap();
        // Dates before the first mid-year or after the last are dropped.
        assert_eq!(p.labels, vec!["2000-07-02", "2001-01-01", "2001-07-02"]);
        let x = |d: &str| fractional_year(d).unwrap();
        let expect = |d: &str| {
            let t = x(d);
            if t < 2001.5 { 10.0 + 10.0 * (t - 2000.5) } else { 20.0 + 20.0 * (t - 2001.5) }
        };
        for (l, v) in p.labels.iter().zip(&p.second) {
            assert!((v - expect(l)).abs() < 1e-12);
        }
    }
}
