//! IID sequences with generalized Weibull-like right tails
//! `S(x) = ρ(x) exp(−C x^τ)`.
//!
//! The left tail is irrelevant for the order-statistic limits, so the law
//! puts an atom of mass `1 − S(x*)` at the left edge `x*` and follows the
//! survival function exactly to the right of it.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::asymptotics::{weibull_normalizers, WeibullNormalizers};
use crate::error::{Error, Result};
use crate::limit_laws::LimitLaw;
use crate::rng::RngStreamPlan;
use crate::stats::{ks_statistic, mean_and_se, MomentComparison};
use crate::suprema::TopK;

/// Residual target `|S(x) − (1 − u)|` of the inversion.
pub const INVERSION_TOLERANCE: f64 = 1e-12;
pub const MAX_ROOT_ITERATIONS: usize = 200;

/// Regularly varying prefactor `ρ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Prefactor {
    One,
    /// `ρ₀ x^γ`.
    Power { rho0: f64, gamma: f64 },
}

impl Prefactor {
    /// `log ρ(x)` as a function of `log x`.
    pub fn log_at_log(&self, log_x: f64) -> f64 {
        match *self {
            Prefactor::One => 0.0,
            Prefactor::Power { rho0, gamma } => rho0.ln() + gamma * log_x,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeibullLikeSpec {
    pub c_rate: f64,
    pub tau: f64,
    pub rho: Prefactor,
    x_star: f64,
}

impl WeibullLikeSpec {
    pub fn new(c_rate: f64, tau: f64, rho: Prefactor) -> Result<Self> {
        if !(c_rate > 0.0 && c_rate.is_finite()) {
            return Err(Error::domain("c_rate", format!("must be positive, got {c_rate}")));
        }
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::domain("tau", format!("must be positive, got {tau}")));
        }
        if let Prefactor::Power { rho0, gamma } = rho {
            if !(rho0 > 0.0 && rho0.is_finite()) {
                return Err(Error::domain("rho0", format!("must be positive, got {rho0}")));
            }
            if !gamma.is_finite() {
                return Err(Error::domain("gamma", "must be finite"));
            }
        }
        let mut spec = Self { c_rate, tau, rho, x_star: 0.0 };
        spec.x_star = spec.left_edge()?;
        Ok(spec)
    }

    /// Survival `exp(−C x)`.
    pub fn exponential(rate: f64) -> Result<Self> {
        Self::new(rate, 1.0, Prefactor::One)
    }

    pub fn x_star(&self) -> f64 {
        self.x_star
    }

    fn log_tail(&self, x: f64) -> f64 {
        self.rho.log_at_log(x.ln()) - self.c_rate * x.powf(self.tau)
    }

    fn log_tail_slope(&self, x: f64) -> f64 {
        let g = match self.rho {
            Prefactor::One => 0.0,
            Prefactor::Power { gamma, .. } => gamma,
        };
        g / x - self.c_rate * self.tau * x.powf(self.tau - 1.0)
    }

    /// Smallest `x` beyond which `ρ(x)e^{−Cx^τ}` is nonincreasing and at most one.
    fn left_edge(&self) -> Result<f64> {
        let (rho0, gamma) = match self.rho {
            Prefactor::One => return Ok(0.0),
            Prefactor::Power { rho0, gamma } => (rho0, gamma),
        };
        let mono = if gamma > 0.0 { (gamma / (self.c_rate * self.tau)).powf(1.0 / self.tau) } else { 0.0 };
        if gamma == 0.0 && rho0 <= 1.0 {
            return Ok(0.0);
        }
        if mono > 0.0 && self.log_tail(mono) <= 0.0 {
            return Ok(mono);
        }
        // log S is decreasing on (mono, ∞) and positive at its left end
        let mut hi = mono.max(1.0);
        while self.log_tail(hi) > 0.0 {
            hi *= 2.0;
        }
        let mut lo = mono;
        for _ in 0..MAX_ROOT_ITERATIONS {
            let mid = 0.5 * (lo + hi);
            if self.log_tail(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 4.0 * f64::EPSILON * hi {
                break;
            }
        }
        Ok(hi)
    }

    pub fn survival(&self, x: f64) -> f64 {
        if x < self.x_star {
            return 1.0;
        }
        if x == 0.0 {
            return 1.0;
        }
        self.log_tail(x).exp().min(1.0)
    }

    pub fn cdf(&self, x: f64) -> f64 {
        1.0 - self.survival(x)
    }

    /// Mass of the atom at `x*`.
    pub fn atom(&self) -> f64 {
        self.cdf(self.x_star)
    }

    /// Generalized inverse `inf{x : F(x) ≥ u}`.
    pub fn quantile(&self, u: f64) -> Result<f64> {
        if !(0.0..1.0).contains(&u) {
            return Err(Error::domain("u", format!("must lie in [0, 1), got {u}")));
        }
        self.inverse_survival(1.0 - u, u)
    }

    /// Solves `S(x) = v` for `v ∈ (0, 1]`; `u` only labels errors.
    fn inverse_survival(&self, v: f64, u: f64) -> Result<f64> {
        if v >= self.survival(self.x_star) {
            return Ok(self.x_star);
        }
        let log_v = v.ln();
        if let Prefactor::One = self.rho {
            return Ok((-log_v / self.c_rate).powf(1.0 / self.tau));
        }
        let g = |x: f64| self.log_tail(x) - log_v;
        let mut lo = self.x_star;
        let mut hi = self.x_star.max(1.0);
        while g(hi) > 0.0 {
            lo = hi;
            hi *= 2.0;
            if !hi.is_finite() {
                return Err(Error::RootFinding { u, lo, hi });
            }
        }
        let mut x = 0.5 * (lo + hi);
        for _ in 0..MAX_ROOT_ITERATIONS {
            let gx = g(x);
            if (gx.exp() - 1.0).abs() * v <= INVERSION_TOLERANCE {
                return Ok(x);
            }
            if gx > 0.0 {
                lo = x;
            } else {
                hi = x;
            }
            let newton = x - gx / self.log_tail_slope(x);
            x = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
            if hi - lo <= f64::EPSILON * hi {
                return Ok(x);
            }
        }
        Err(Error::RootFinding { u, lo, hi })
    }

    /// Inverse-CDF draw. The uniform is used as a survival level so that
    /// far-tail draws keep full precision.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64> {
        let v: f64 = 1.0 - rng.random::<f64>();
        self.inverse_survival(v, 1.0 - v)
    }

    /// `(μ_n, ν_n)` for `log n`.
    pub fn normalizers(&self, log_n: f64) -> WeibullNormalizers {
        weibull_normalizers(log_n, self.c_rate, self.tau, |lx| self.rho.log_at_log(lx))
    }
}

/// Outcome of an IID order-statistic experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IidExperimentResult {
    pub n: u64,
    pub k: usize,
    /// Size of the sample whose normalizers were used (`m_n` when thinned).
    pub m_n: u64,
    pub normalizers: WeibullNormalizers,
    /// `ν^{-1}(Y^{(k)} − μ)` per replication.
    pub normalized: Vec<f64>,
    pub ks: f64,
    pub moments: Vec<MomentComparison>,
}

fn check_design(n: u64, k: usize, reps: usize) -> Result<()> {
    if k == 0 || k as u64 >= n {
        return Err(Error::domain("k", format!("need 1 <= k < n, got k = {k}, n = {n}")));
    }
    if reps < 100 {
        return Err(Error::domain("reps", format!("need at least 100 replications, got {reps}")));
    }
    if n < 3 {
        return Err(Error::domain("n", "must be >= 3"));
    }
    Ok(())
}

/// k-th largest of `n` IID draws, normalized by `(μ_n, ν_n)`, over `reps`
/// replications. Replication `r` uses stream `(r, 0)` of `seed`.
pub fn iid_order_statistic_experiment(
    spec: &WeibullLikeSpec,
    n: u64,
    k: usize,
    reps: usize,
    lambdas: &[f64],
    seed: u64,
) -> Result<IidExperimentResult> {
    check_design(n, k, reps)?;
    run_mixed(spec, spec, n, n, k, reps, lambdas, seed)
}

/// As [`iid_order_statistic_experiment`], but only `m_n = ceil(p n)` draws
/// come from `spec` and the rest from the lighter-tailed `elevated`; the
/// normalizers are those of `m_n`. `p = 1` reproduces the unthinned
/// experiment exactly.
#[allow(clippy::too_many_arguments)]
pub fn thinned_experiment(
    spec: &WeibullLikeSpec,
    elevated: &WeibullLikeSpec,
    p: f64,
    n: u64,
    k: usize,
    reps: usize,
    lambdas: &[f64],
    seed: u64,
) -> Result<IidExperimentResult> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::domain("p", format!("must lie in (0, 1], got {p}")));
    }
    check_design(n, k, reps)?;
    let m_n = if p >= 1.0 { n } else { ((p * n as f64).ceil() as u64).clamp(1, n) };
    if (k as u64) > m_n || m_n < 3 {
        return Err(Error::domain("p", format!("m_n = {m_n} is too small for k = {k}")));
    }
    run_mixed(spec, elevated, n, m_n, k, reps, lambdas, seed)
}

#[allow(clippy::too_many_arguments)]
fn run_mixed(
    spec: &WeibullLikeSpec,
    elevated: &WeibullLikeSpec,
    n: u64,
    m_n: u64,
    k: usize,
    reps: usize,
    lambdas: &[f64],
    seed: u64,
) -> Result<IidExperimentResult> {
    if let Some(l) = lambdas.iter().find(|l| !(**l > 0.0 && l.is_finite())) {
        return Err(Error::domain("lambdas", format!("moment orders must be positive, got {l}")));
    }
    let plan = RngStreamPlan::new(seed);
    let norm = spec.normalizers((m_n as f64).ln());
    let normalized = (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = plan.stream(r as u64, 0);
            let mut top = TopK::new(k);
            for i in 0..n {
                let law = if i < m_n { spec } else { elevated };
                top.push(law.sample(&mut rng)?);
            }
            let kth = top.into_sorted_desc()[k - 1];
            Ok((kth - norm.mu_n) / norm.nu_n)
        })
        .collect::<Result<Vec<f64>>>()?;
    let law = LimitLaw::erlang_log(k as u32)?;
    let ks = ks_statistic(&normalized, |x| law.cdf(x))?;
    let moments = compare_moments(&normalized, &law, lambdas)?;
    Ok(IidExperimentResult { n, k, m_n, normalizers: norm, normalized, ks, moments })
}

/// Empirical `E|Z|^λ` against the limit law's value, per `λ`.
pub fn compare_moments(samples: &[f64], law: &LimitLaw, lambdas: &[f64]) -> Result<Vec<MomentComparison>> {
    lambdas
        .iter()
        .map(|&lambda| {
            let powers: Vec<f64> = samples.iter().map(|z| z.abs().powf(lambda)).collect();
            let (empirical, std_err) = mean_and_se(&powers);
            let limit = law.abs_moment(lambda)?.value;
            Ok(MomentComparison { lambda, empirical, limit, std_err })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_special_case() {
        let s = WeibullLikeSpec::exponential(2.0).unwrap();
        assert_eq!(s.x_star(), 0.0);
        assert_eq!(s.atom(), 0.0);
        let x = s.quantile(1.0 - (-1.0f64).exp()).unwrap();
        assert!((x - 0.5).abs() < 1e-14);
        let n = s.normalizers(1e4f64.ln());
        assert!((n.mu_n - 0.5 * 1e4f64.ln()).abs() < 1e-12);
        assert!((n.nu_n - 0.5).abs() < 1e-15);
    }

    #[test]
    fn deterministic_inversion() {
        let s = WeibullLikeSpec::new(1.0, 2.0, Prefactor::One).unwrap();
        let x = s.quantile(1.0 - (-1.0f64).exp()).unwrap();
        assert!((x - 1.0).abs() < 1e-14);
    }

    #[test]
    fn power_prefactor_residual() {
        let s = WeibullLikeSpec::new(1.0, 2.0, Prefactor::Power { rho0: 1.0, gamma: 1.0 }).unwrap();
        // x e^{-x²} peaks at 1/√2 with value < 1
        assert!((s.x_star() - 0.5f64.sqrt()).abs() < 1e-15);
        let x = s.quantile(0.99).unwrap();
        assert!((x * (-x * x).exp() - 0.01).abs() <= 1e-10);
    }

    #[test]
    fn left_edge_with_large_prefactor() {
        let s = WeibullLikeSpec::new(1.0, 1.0, Prefactor::Power { rho0: 5.0, gamma: -0.5 }).unwrap();
        assert!((s.survival(s.x_star()) - 1.0).abs() < 1e-12);
        assert!(s.atom().abs() < 1e-12);
        let s = WeibullLikeSpec::new(1.0, 1.0, Prefactor::Power { rho0: 3.0, gamma: 0.0 }).unwrap();
        assert!((s.x_star() - 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn inversion_residuals_both_families() {
        let specs = [
            WeibullLikeSpec::new(0.7, 1.5, Prefactor::One).unwrap(),
            WeibullLikeSpec::new(2.0, 0.5, Prefactor::Power { rho0: 0.3, gamma: 1.7 }).unwrap(),
            WeibullLikeSpec::new(1.0, 2.0, Prefactor::Power { rho0: 2.0, gamma: -1.0 }).unwrap(),
        ];
        let mut rng = RngStreamPlan::new(8).stream(0, 0);
        for s in specs {
            for _ in 0..10_000 {
                let u: f64 = rng.random();
                let x = s.quantile(u).unwrap();
                if x > s.x_star() {
                    assert!((s.cdf(x) - u).abs() <= 1e-10, "{s:?} u={u}");
                } else {
                    assert!(u <= s.atom() + 1e-12);
                }
            }
        }
    }

    #[test]
    fn survival_is_nonincreasing() {
        let s = WeibullLikeSpec::new(2.0, 0.5, Prefactor::Power { rho0: 0.3, gamma: 1.7 }).unwrap();
        let span = 50.0 * s.c_rate.powf(-1.0 / s.tau);
        let mut prev = s.survival(s.x_star());
        assert!(prev <= 1.0);
        for i in 1..=10_000 {
            let v = s.survival(s.x_star() + span * i as f64 / 10_000.0);
            assert!(v <= prev);
            prev = v;
        }
    }

    #[test]
    fn preconditions() {
        let s = WeibullLikeSpec::exponential(2.0).unwrap();
        assert!(iid_order_statistic_experiment(&s, 100, 1, 99, &[], 0).is_err());
        assert!(iid_order_statistic_experiment(&s, 100, 100, 200, &[], 0).is_err());
        assert!(thinned_experiment(&s, &s, 0.0, 100, 1, 200, &[], 0).is_err());
        assert!(WeibullLikeSpec::exponential(0.0).is_err());
        assert!(s.quantile(1.0).is_err());
    }

    #[test]
    fn unit_thinning_is_identity() {
        let s = WeibullLikeSpec::exponential(2.0).unwrap();
        let e = WeibullLikeSpec::exponential(3.0).unwrap();
        let a = iid_order_statistic_experiment(&s, 500, 2, 150, &[1.0], 11).unwrap();
        let b = thinned_experiment(&s, &e, 1.0, 500, 2, 150, &[1.0], 11).unwrap();
        assert_eq!(a, b);
    }
}
