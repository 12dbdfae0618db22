//! Independent reference implementations for the statistical tests:
//! permutation enumeration for the rank test and the closed-form Student t
//! distribution for integer degrees of freedom.

use std::f64::consts::PI;

/// Upper tail of the standard normal by composite Simpson integration of the density.
pub fn normal_sf(z: f64) -> f64 {
    let n = 20_000;
    let a = z.abs();
    let h = a / n as f64;
    let phi = |x: f64| (-0.5 * x * x).exp() / (2.0 * PI).sqrt();
    let mut s = phi(0.0) + phi(a);
    for i in 1..n {
        s += phi(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    let inner = s * h / 3.0;
    if z >= 0.0 {
        0.5 - inner
    } else {
        0.5 + inner
    }
}

fn midranks(v: &[f64]) -> Vec<f64> {
    v.iter()
        .map(|&x| {
            let below = v.iter().filter(|&&y| y < x).count() as f64;
            let equal = v.iter().filter(|&&y| y == x).count() as f64;
            below + (equal + 1.0) / 2.0
        })
        .collect()
}

/// (U, two-sided p) with U counted pairwise and the null moments of U
/// obtained by enumerating every split of the pooled mid-ranks.
pub fn mann_whitney(a: &[f64], b: &[f64]) -> (f64, Option<f64>) {
    let mut u = 0.0;
    for &x in a {
        for &y in b {
            u += if x > y { 1.0 } else if x == y { 0.5 } else { 0.0 };
        }
    }
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let ranks = midranks(&pooled);
    let n = pooled.len();
    let na = a.len();
    let offset = (na * (na + 1)) as f64 / 2.0;
    let (mut count, mut sum, mut sum_sq) = (0.0, 0.0, 0.0);
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != na {
            continue;
        }
        let us: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| ranks[i]).sum::<f64>() - offset;
        count += 1.0;
        sum += us;
        sum_sq += us * us;
    }
    let mean = sum / count;
    let var = sum_sq / count - mean * mean;
    if var <= 1e-12 {
        return (u, None);
    }
    let z = ((u - mean).abs() - 0.5) / var.sqrt();
    (u, Some((2.0 * normal_sf(z)).min(1.0)))
}

/// P(|T| <= t) for Student's t with integer `df`, by the finite trigonometric series.
pub fn t_central(t: f64, df: usize) -> f64 {
    let theta = (t.abs() / (df as f64).sqrt()).atan();
    let (s, c) = theta.sin_cos();
    let c2 = c * c;
    if df % 2 == 1 {
        if df == 1 {
            return 2.0 * theta / PI;
        }
        let mut term = 1.0;
        let mut acc = 1.0;
        let mut k = 2;
        while k < df - 1 {
            term *= k as f64 / (k + 1) as f64 * c2;
            acc += term;
            k += 2;
        }
        2.0 / PI * (theta + s * c * acc)
    } else {
        let mut term = 1.0;
        let mut acc = 1.0;
        let mut k = 1;
        while k < df - 1 {
            term *= k as f64 / (k + 1) as f64 * c2;
            acc += term;
            k += 2;
        }
        s * acc
    }
}

/// (t, two-sided p, d) of the paired differences; `None` when their variance is zero.
pub fn paired_t(a: &[f64], b: &[f64]) -> Option<(f64, f64, f64)> {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let n = d.len() as f64;
    let mean = d.iter().sum::<f64>() / n;
    let ss: f64 = d.iter().map(|v| (v - mean).powi(2)).sum();
    if d.iter().all(|&v| v == d[0]) {
        return None;
    }
    let sd = (ss / (n - 1.0)).sqrt();
    let t = mean / sd * n.sqrt();
    Some((t, 1.0 - t_central(t, d.len() - 1), mean / sd))
}
