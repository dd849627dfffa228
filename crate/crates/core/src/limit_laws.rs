//! Limit laws of normalized order statistics and exceedance counts.
//!
//! * `Λ^(k) = −ln E_k` with `E_k ~ Erlang(k, 1)`; `Λ^(1)` is standard Gumbel.
//! * standard Normal `𝒩`.
//! * the independent sum `Λ^(k) + s 𝒩`.
//!
//! Exceedance counts above `u_n(x)` converge to Poisson(`e^{−x}`) or to a
//! Poisson law mixed over the random intensity `e^{−x + s 𝒩}`.

use rand::Rng;
use rand_distr::{Exp1, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use statrs::function::gamma::{gamma, ln_gamma};

use crate::error::{Error, Result};
use crate::quadrature::integrate_split;

/// The Normal mixing integral is truncated to `[−NORMAL_CUTOFF, NORMAL_CUTOFF]`.
pub const NORMAL_CUTOFF: f64 = 10.0;

/// Absolute error target of the mixture quadratures.
pub const MIXTURE_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum LimitLaw {
    /// `Λ^(k)`.
    ErlangLog { k: u32 },
    Normal,
    /// `Λ^(k) + coeff · 𝒩`, independent summands.
    Mixture { k: u32, coeff: f64 },
}

/// Standard Normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// `P(Λ^(k) ≤ x) = e^{−e^{−x}} Σ_{l<k} e^{−lx} / l!`.
pub fn erlang_log_cdf(k: u32, x: f64) -> f64 {
    if x == f64::INFINITY {
        return 1.0;
    }
    if x == f64::NEG_INFINITY {
        return 0.0;
    }
    // terms exp(−y + l log y − log l!) with y = e^{−x}, log y = −x
    let y = (-x).exp();
    if y == f64::INFINITY {
        return 0.0;
    }
    let mut sum = 0.0;
    let mut log_fact = 0.0;
    for l in 0..k {
        if l > 0 {
            log_fact += (l as f64).ln();
        }
        sum += (-y - l as f64 * x - log_fact).exp();
    }
    sum.min(1.0)
}

/// Density of `Λ^(k)`: `exp(−kx − e^{−x}) / (k−1)!`.
pub fn erlang_log_pdf(k: u32, x: f64) -> f64 {
    let y = (-x).exp();
    if !y.is_finite() {
        return 0.0;
    }
    (-(k as f64) * x - y - ln_gamma(k as f64)).exp()
}

fn check_order(k: u32) -> Result<()> {
    if k == 0 {
        Err(Error::domain("k", "order must be >= 1"))
    } else {
        Ok(())
    }
}

impl LimitLaw {
    pub fn erlang_log(k: u32) -> Result<Self> {
        check_order(k)?;
        Ok(LimitLaw::ErlangLog { k })
    }

    pub fn mixture(k: u32, coeff: f64) -> Result<Self> {
        check_order(k)?;
        if !coeff.is_finite() || coeff < 0.0 {
            return Err(Error::domain("coeff", format!("must be finite and >= 0, got {coeff}")));
        }
        Ok(LimitLaw::Mixture { k, coeff })
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            LimitLaw::ErlangLog { k } => erlang_log_cdf(k, x),
            LimitLaw::Normal => normal_cdf(x),
            LimitLaw::Mixture { k, coeff } => {
                if coeff == 0.0 {
                    return erlang_log_cdf(k, x);
                }
                if !x.is_finite() {
                    return if x > 0.0 { 1.0 } else { 0.0 };
                }
                let q = normal_mixing(|y| erlang_log_cdf(k, x - coeff * y), MIXTURE_TOLERANCE * 0.01);
                q.clamp(0.0, 1.0)
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            LimitLaw::ErlangLog { k } => sample_erlang_log(k, rng),
            LimitLaw::Normal => rng.sample(StandardNormal),
            LimitLaw::Mixture { k, coeff } => {
                let lam = sample_erlang_log(k, rng);
                let z: f64 = rng.sample(StandardNormal);
                lam + coeff * z
            }
        }
    }

    /// `E|L|^λ`. Exact or by quadrature; `std_error` is `None`.
    pub fn abs_moment(&self, lambda: f64) -> Result<MomentValue> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::domain("lambda", format!("must be positive, got {lambda}")));
        }
        let value = match *self {
            LimitLaw::Normal => 2f64.powf(lambda / 2.0) / std::f64::consts::PI.sqrt() * gamma((lambda + 1.0) / 2.0),
            LimitLaw::ErlangLog { k } => erlang_log_abs_moment(k, lambda, 0.0),
            LimitLaw::Mixture { k, coeff } => {
                if coeff == 0.0 {
                    erlang_log_abs_moment(k, lambda, 0.0)
                } else {
                    normal_mixing(|y| erlang_log_abs_moment(k, lambda, coeff * y), MIXTURE_TOLERANCE)
                }
            }
        };
        Ok(MomentValue { value, std_error: None })
    }

    /// Monte Carlo `E|L|^λ` with its standard error.
    pub fn abs_moment_mc<R: Rng + ?Sized>(&self, lambda: f64, draws: usize, rng: &mut R) -> Result<MomentValue> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::domain("lambda", format!("must be positive, got {lambda}")));
        }
        if draws < 2 {
            return Err(Error::domain("draws", "need at least 2 draws"));
        }
        let (mut s, mut s2) = (0.0, 0.0);
        for _ in 0..draws {
            let v = self.sample(rng).abs().powf(lambda);
            s += v;
            s2 += v * v;
        }
        let m = draws as f64;
        let mean = s / m;
        let var = (s2 / m - mean * mean) * m / (m - 1.0);
        Ok(MomentValue { value: mean, std_error: Some((var.max(0.0) / m).sqrt()) })
    }

    /// Kolmogorov–Smirnov label, e.g. `ERLANG_LOG(2)`.
    pub fn label(&self) -> String {
        match self {
            LimitLaw::ErlangLog { k } => format!("ERLANG_LOG({k})"),
            LimitLaw::Normal => "NORMAL".to_string(),
            LimitLaw::Mixture { k, coeff } => format!("MIXTURE({k}, {coeff})"),
        }
    }
}

/// `E g(𝒩)` over the truncated range, split into unit cells so that narrow
/// features of `g` are not stepped over.
fn normal_mixing(g: impl Fn(f64) -> f64, abs_tol: f64) -> f64 {
    let cells = 2.0 * NORMAL_CUTOFF;
    let breaks: Vec<f64> = (1..cells as usize).map(|i| -NORMAL_CUTOFF + i as f64).collect();
    integrate_split(|y| g(y) * normal_pdf(y), -NORMAL_CUTOFF, NORMAL_CUTOFF, &breaks, abs_tol, 0.0).value
}

/// `−ln(E_1 + … + E_k)` with unit exponentials `E_i`.
pub fn sample_erlang_log<R: Rng + ?Sized>(k: u32, rng: &mut R) -> f64 {
    let s: f64 = (0..k).map(|_| rng.sample::<f64, _>(Exp1)).sum();
    -s.ln()
}

/// `E|Λ^(k) + shift|^λ = ∫ |x + shift|^λ f_k(x) dx`.
///
/// Written in `y = e^{−x}` this is `∫_0^∞ |shift − log y|^λ y^{k−1} e^{−y} dy / (k−1)!`;
/// the integral is evaluated in `x` with a breakpoint at the kink `x = −shift`.
fn erlang_log_abs_moment(k: u32, lambda: f64, shift: f64) -> f64 {
    // density < e^{−e^{7}} left of −7; right tail ~ e^{−kx}
    let lo = (-7.0_f64).min(-shift - 1.0);
    let hi = (60.0 + 5.0 * lambda) / k as f64 + shift.abs() + 10.0;
    integrate_split(
        |x| (x + shift).abs().powf(lambda) * erlang_log_pdf(k, x),
        lo,
        hi,
        &[-shift],
        1e-12,
        1e-11,
    )
    .value
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentValue {
    pub value: f64,
    pub std_error: Option<f64>,
}

/// Limit law of the exceedance count `N_n(x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum CountLaw {
    /// Poisson with intensity `e^{−x}`.
    Poisson { x: f64 },
    /// Poisson with random intensity `e^{−x + coeff·𝒩}`.
    MixedPoisson { x: f64, coeff: f64 },
}

fn poisson_pmf(lambda: f64, l: u64) -> f64 {
    if lambda == 0.0 {
        return if l == 0 { 1.0 } else { 0.0 };
    }
    if lambda == f64::INFINITY {
        return 0.0;
    }
    let l = l as f64;
    (-lambda + l * lambda.ln() - ln_gamma(l + 1.0)).exp()
}

impl CountLaw {
    pub fn intensity(&self) -> f64 {
        match *self {
            CountLaw::Poisson { x } | CountLaw::MixedPoisson { x, .. } => (-x).exp(),
        }
    }

    /// `P(N < k)`.
    pub fn count_cdf(&self, k: u64) -> f64 {
        if k == 0 {
            return 0.0;
        }
        // Poisson partial sums; equal to P(Λ^(k) ≤ x) by the order-statistic duality
        let partial = |lambda: f64| (0..k).map(|l| poisson_pmf(lambda, l)).sum::<f64>().min(1.0);
        match *self {
            CountLaw::Poisson { x } => partial((-x).exp()),
            CountLaw::MixedPoisson { x, coeff } => {
                if coeff == 0.0 {
                    return partial((-x).exp());
                }
                normal_mixing(|y| partial((-x + coeff * y).exp()), MIXTURE_TOLERANCE * 0.01).clamp(0.0, 1.0)
            }
        }
    }

    /// `P(N = l)`.
    pub fn pmf(&self, l: u64) -> f64 {
        match *self {
            CountLaw::Poisson { x } => poisson_pmf((-x).exp(), l),
            CountLaw::MixedPoisson { x, coeff } => {
                if coeff == 0.0 {
                    return poisson_pmf((-x).exp(), l);
                }
                normal_mixing(|y| poisson_pmf((-x + coeff * y).exp(), l), MIXTURE_TOLERANCE * 0.01)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStreamPlan;

    const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

    #[test]
    fn erlang_log_cdf_examples() {
        let g = LimitLaw::erlang_log(1).unwrap();
        assert!((g.cdf(0.0) - (-1.0f64).exp()).abs() < 1e-15);
        for x in [-3.0, -0.5, 0.7, 4.0] {
            assert!((g.cdf(x) - (-(-x).exp()).exp()).abs() < 1e-15);
        }
        let e2 = LimitLaw::erlang_log(2).unwrap();
        assert!((e2.cdf(0.0) - 2.0 / std::f64::consts::E).abs() < 1e-15);
        assert_eq!(g.cdf(-1e3), 0.0);
        assert_eq!(g.cdf(1e3), 1.0);
        assert!(LimitLaw::erlang_log(0).is_err());
    }

    #[test]
    fn degenerate_mixture_is_erlang_log() {
        let m = LimitLaw::mixture(1, 0.0).unwrap();
        for x in [-2.0, 0.0, 1.5] {
            assert_eq!(m.cdf(x), erlang_log_cdf(1, x));
        }
    }

    #[test]
    fn mixture_cdf_against_monte_carlo_free_identity() {
        // Λ^(1) + s𝒩 with small s: cdf ≈ G(x) + s²/2 G''(x)
        let s = 1e-3;
        let m = LimitLaw::mixture(1, s).unwrap();
        for x in [-1.0, 0.0, 2.0] {
            let g = |x: f64| (-(-x).exp()).exp();
            let h = 1e-3;
            let g2 = (g(x + h) - 2.0 * g(x) + g(x - h)) / (h * h);
            assert!((m.cdf(x) - (g(x) + 0.5 * s * s * g2)).abs() < 1e-9);
        }
    }

    #[test]
    fn cdfs_are_monotone_with_correct_limits() {
        let laws = [
            LimitLaw::erlang_log(1).unwrap(),
            LimitLaw::erlang_log(3).unwrap(),
            LimitLaw::Normal,
            LimitLaw::mixture(1, 4.0 / 3.0).unwrap(),
            LimitLaw::mixture(2, 0.5).unwrap(),
        ];
        for law in laws {
            let mut prev = 0.0;
            for i in 0..=2000 {
                let x = -20.0 + 40.0 * i as f64 / 2000.0;
                let c = law.cdf(x);
                assert!(c >= prev - 1e-9, "{law:?} at {x}");
                prev = c;
            }
            assert!(law.cdf(-40.0) < 1e-8);
            assert!(law.cdf(60.0) > 1.0 - 1e-8);
        }
    }

    #[test]
    fn higher_orders_are_stochastically_smaller() {
        for k in 1..6 {
            for i in 0..200 {
                let x = -5.0 + 0.05 * i as f64;
                assert!(erlang_log_cdf(k + 1, x) >= erlang_log_cdf(k, x) - 1e-15);
            }
        }
    }

    #[test]
    fn moments_closed_forms() {
        let n = LimitLaw::Normal;
        assert!((n.abs_moment(2.0).unwrap().value - 1.0).abs() < 1e-14);
        assert!((n.abs_moment(1.0).unwrap().value - (2.0 / std::f64::consts::PI).sqrt()).abs() < 1e-14);
        let g = LimitLaw::erlang_log(1).unwrap();
        let want = EULER_GAMMA * EULER_GAMMA + std::f64::consts::PI.powi(2) / 6.0;
        let got = g.abs_moment(2.0).unwrap().value;
        assert!((got / want - 1.0).abs() < 1e-6, "{got} vs {want}");
        assert!((got - 1.978_111_990_655_945_6).abs() < 1e-6);
        assert!(n.abs_moment(0.0).is_err());
        assert!(n.abs_moment(-1.0).is_err());
    }

    #[test]
    fn erlang_log_signed_mean_matches_digamma() {
        // E[Λ^(k)] = −ψ(k); ψ(1) = −γ, ψ(2) = 1 − γ
        for (k, want) in [(1, EULER_GAMMA), (2, EULER_GAMMA - 1.0)] {
            let q = crate::quadrature::integrate(|x| x * erlang_log_pdf(k, x), -10.0, 80.0, 1e-13, 0.0).value;
            assert!((q - want).abs() < 1e-10);
        }
    }

    #[test]
    fn sampler_means() {
        let mut rng = RngStreamPlan::new(2).stream(0, 0);
        let m = 200_000;
        let mean1: f64 = (0..m).map(|_| sample_erlang_log(1, &mut rng)).sum::<f64>() / m as f64;
        assert!((mean1 - EULER_GAMMA).abs() < 0.01);
        let mean2: f64 = (0..m).map(|_| sample_erlang_log(2, &mut rng)).sum::<f64>() / m as f64;
        assert!((mean2 + 0.422_784_335_098_467_1).abs() < 0.01);
    }

    #[test]
    fn normal_moments_match_mc() {
        let mut rng = RngStreamPlan::new(3).stream(0, 0);
        for lambda in [0.5, 1.0, 2.0, 3.7] {
            let exact = LimitLaw::Normal.abs_moment(lambda).unwrap().value;
            let mc = LimitLaw::Normal.abs_moment_mc(lambda, 200_000, &mut rng).unwrap();
            assert!((mc.value - exact).abs() < 3.0 * mc.std_error.unwrap() + 1e-12, "λ={lambda}");
        }
    }

    #[test]
    fn quadrature_moments_match_mc() {
        let mut rng = RngStreamPlan::new(4).stream(0, 0);
        for law in [LimitLaw::erlang_log(2).unwrap(), LimitLaw::mixture(1, 4.0 / 3.0).unwrap()] {
            for lambda in [1.0, 2.0] {
                let q = law.abs_moment(lambda).unwrap().value;
                let mc = law.abs_moment_mc(lambda, 400_000, &mut rng).unwrap();
                assert!((mc.value - q).abs() < 4.0 * mc.std_error.unwrap(), "{law:?} λ={lambda}: {q} vs {mc:?}");
            }
        }
    }

    #[test]
    fn count_cdf_duality() {
        for k in [1u64, 2, 3, 5] {
            for i in 0..100 {
                let x = -3.0 + 8.0 * i as f64 / 99.0;
                let p = CountLaw::Poisson { x }.count_cdf(k);
                assert!((p - erlang_log_cdf(k as u32, x)).abs() < 1e-10, "k={k} x={x}");
            }
        }
        for x in [-1.0, 0.0, 2.0] {
            let m = CountLaw::MixedPoisson { x, coeff: 4.0 / 3.0 }.count_cdf(2);
            assert!((m - LimitLaw::mixture(2, 4.0 / 3.0).unwrap().cdf(x)).abs() < 1e-8);
        }
    }

    #[test]
    fn count_law_examples() {
        let p = CountLaw::Poisson { x: 0.0 };
        assert!((p.count_cdf(1) - (-1.0f64).exp()).abs() < 1e-15);
        assert!((p.count_cdf(3) - 2.5 / std::f64::consts::E).abs() < 1e-15);
        assert!((p.count_cdf(3) - 0.919_698_602_928_605_5).abs() < 1e-14);
        assert_eq!(p.count_cdf(0), 0.0);
        for k in 1..8u64 {
            let s: f64 = (0..k).map(|l| p.pmf(l)).sum();
            assert!((s - p.count_cdf(k)).abs() < 1e-14);
        }
    }

    #[test]
    fn mixed_poisson_degenerates_to_poisson() {
        for x in [-1.0, 0.0, 1.3] {
            for k in [1u64, 2, 5] {
                let p = CountLaw::Poisson { x }.count_cdf(k);
                let m = CountLaw::MixedPoisson { x, coeff: 1e-6 }.count_cdf(k);
                assert!((p - m).abs() < 1e-6);
            }
        }
        let m = CountLaw::MixedPoisson { x: 0.3, coeff: 4.0 / 3.0 };
        let total: f64 = (0..2000).map(|l| m.pmf(l)).sum();
        // mass above 2000 needs 𝒩 > 5.9
        assert!((total - 1.0).abs() < 1e-7, "{total}");
        for k in 1..6u64 {
            let s: f64 = (0..k).map(|l| m.pmf(l)).sum();
            assert!((s - m.count_cdf(k)).abs() < 1e-8);
        }
    }
}
