//! Two-sample rank test and paired t-test.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StatsError {
    #[error("samples must be non-empty")]
    EmptySample,
    #[error("paired samples differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("paired test needs at least two pairs")]
    TooFewPairs,
    #[error("samples contain a non-finite value")]
    NonFinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MannWhitney<T: Real> {
    /// U statistic of the first sample.
    pub u: T,
    /// Two-sided p-value; absent when every observation is tied.
    pub p: Option<T>,
    /// Rank-biserial correlation `1 - 2U / (n_a n_b)`.
    pub effect: T,
}

/// Mid-ranks (1-based) of `values`, with tie group sizes.
fn midranks(values: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut ranks = vec![0.0; values.len()];
    let mut ties = Vec::new();
    let mut start = 0;
    while start < idx.len() {
        let mut end = start + 1;
        while end < idx.len() && values[idx[end]] == values[idx[start]] {
            end += 1;
        }
        let rank = (start + end + 1) as f64 / 2.0;
        for &i in &idx[start..end] {
            ranks[i] = rank;
        }
        ties.push(end - start);
        start = end;
    }
    (ranks, ties)
}

/// Mann-Whitney U test with tie correction and a continuity-corrected
/// normal approximation for the p-value.
pub fn mann_whitney_u<T: Real>(a: &[T], b: &[T]) -> Result<MannWhitney<T>, StatsError> {
    if a.is_empty() || b.is_empty() {
        return Err(StatsError::EmptySample);
    }
    let pooled: Vec<f64> = a.iter().chain(b).map(|v| v.as_f64()).collect();
    if pooled.iter().any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let n = na + nb;
    let (ranks, ties) = midranks(&pooled);
    let rank_sum_a: f64 = ranks[..a.len()].iter().sum();
    let u = rank_sum_a - na * (na + 1.0) / 2.0;
    let effect = 1.0 - 2.0 * u / (na * nb);

    let tie_term: f64 = ties.iter().map(|&t| (t * t * t - t) as f64).sum();
    let var = na * nb / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
    let p = if ties.len() <= 1 || var <= 0.0 {
        None
    } else {
        let z = ((u - na * nb / 2.0).abs() - 0.5) / var.sqrt();
        let std = Normal::new(0.0, 1.0).expect("standard normal");
        Some(T::lit((2.0 * std.sf(z)).min(1.0)))
    };
    Ok(MannWhitney { u: T::lit(u), p, effect: T::lit(effect) })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairedT<T: Real> {
    pub t: Option<T>,
    /// Two-sided p-value; absent when the differences have zero variance.
    pub p: Option<T>,
    /// Cohen's d of the differences: `mean / sd`.
    pub cohen_d: Option<T>,
    pub df: usize,
}

/// Paired t-test on `a - b`.
///
/// When all differences are equal the variance is zero and p is absent;
/// t and d are then 0 if the differences are all zero and absent otherwise.
pub fn paired_t<T: Real>(a: &[T], b: &[T]) -> Result<PairedT<T>, StatsError> {
    if a.len() != b.len() {
        return Err(StatsError::LengthMismatch(a.len(), b.len()));
    }
    if a.len() < 2 {
        return Err(StatsError::TooFewPairs);
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x.as_f64() - y.as_f64()).collect();
    if d.iter().any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let n = d.len() as f64;
    let df = d.len() - 1;
    if d.iter().all(|&v| v == d[0]) {
        let zero = (d[0] == 0.0).then(T::zero);
        return Ok(PairedT { t: zero, p: None, cohen_d: zero, df });
    }
    let mean = d.iter().sum::<f64>() / n;
    let var = d.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    let sd = var.sqrt();
    let t = mean / (sd / n.sqrt());
    let dist = StudentsT::new(0.0, 1.0, df as f64).expect("positive degrees of freedom");
    let p = (2.0 * dist.sf(t.abs())).min(1.0);
    Ok(PairedT { t: Some(T::lit(t)), p: Some(T::lit(p)), cohen_d: Some(T::lit(mean / sd)), df })
}
