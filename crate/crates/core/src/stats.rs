//! Goodness-of-fit helpers.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Empirical absolute moment next to its limiting value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentComparison {
    pub lambda: f64,
    pub empirical: f64,
    pub limit: f64,
    pub std_err: f64,
}

impl MomentComparison {
    pub fn gap(&self) -> f64 {
        (self.empirical - self.limit).abs()
    }

    pub fn relative_gap(&self) -> f64 {
        self.gap() / self.limit.abs()
    }
}

/// One-sample Kolmogorov–Smirnov statistic `sup_x |F_m(x) − F(x)|`.
pub fn ks_statistic<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::domain("samples", "empty sample"));
    }
    if samples.iter().any(|x| x.is_nan()) {
        return Err(Error::domain("samples", "contains NaN"));
    }
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let m = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max(f - i as f64 / m).max((i + 1) as f64 / m - f);
    }
    Ok(d)
}

/// Two-sample Kolmogorov–Smirnov statistic.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::domain("samples", "empty sample"));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

/// Asymptotic KS critical value `sqrt(−ln(level/2)/2) / sqrt(m)`.
pub fn ks_critical_value(m: usize, level: f64) -> f64 {
    (-(level / 2.0).ln() / 2.0).sqrt() / (m as f64).sqrt()
}

/// Total variation distance `½ Σ |p_l − q_l|` between two pmfs on `0..len`.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    let n = p.len().max(q.len());
    let at = |v: &[f64], i: usize| v.get(i).copied().unwrap_or(0.0);
    0.5 * (0..n).map(|i| (at(p, i) - at(q, i)).abs()).sum::<f64>()
}

/// Empirical pmf of counts with everything `≥ k_max` pooled into the last bin.
pub fn count_histogram(counts: &[u64], k_max: u64) -> Vec<f64> {
    let mut h = vec![0.0; k_max as usize + 1];
    for &c in counts {
        h[c.min(k_max) as usize] += 1.0;
    }
    let m = counts.len().max(1) as f64;
    h.iter_mut().for_each(|v| *v /= m);
    h
}

/// Sample mean and standard error of the mean.
pub fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let m = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / m;
    if values.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0);
    (mean, (var / m).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ks_of_uniform_grid() {
        let xs: Vec<f64> = (0..100).map(|i| (i as f64 + 0.5) / 100.0).collect();
        let d = ks_statistic(&xs, |x| x.clamp(0.0, 1.0)).unwrap();
        assert!((d - 0.005).abs() < 1e-12);
        assert!(ks_statistic(&[], |x| x).is_err());
    }

    #[test]
    fn two_sample_extremes() {
        let a = [1.0, 2.0, 3.0];
        assert_eq!(ks_two_sample(&a, &a).unwrap(), 0.0);
        assert_eq!(ks_two_sample(&a, &[10.0, 11.0]).unwrap(), 1.0);
        let d = ks_two_sample(&[1.0, 3.0], &[2.0, 4.0]).unwrap();
        assert!((d - 0.5).abs() < 1e-15);
    }

    #[test]
    fn critical_value_and_tv() {
        assert!((ks_critical_value(100, 0.05) - 0.1358).abs() < 1e-4);
        assert_eq!(total_variation(&[0.5, 0.5], &[0.5, 0.5]), 0.0);
        assert!((total_variation(&[1.0], &[0.0, 1.0]) - 1.0).abs() < 1e-15);
        assert_eq!(count_histogram(&[0, 1, 5, 7], 2), vec![0.25, 0.25, 0.5]);
    }
}
