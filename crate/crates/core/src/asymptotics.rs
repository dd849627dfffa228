//! Closed-form constants, tail asymptotics and normalizing sequences.
//!
//! For `σ_Z(t) = t^H / (1 + c t^β)` the maximizer is
//! `t₀ = (H / (c(β − H)))^{1/β}` with maximum `A`, and
//!
//! ```text
//! P(sup_t X_H(t) − c t^β > u) ≈ R(u) exp(−u^τ / (2A²)),   τ = 2(1 − H/β).
//! ```
//!
//! Centering `b_n` and scale `a_n` follow from treating this tail as a
//! generalized Weibull-like law with `C = 1/(2A²)` and prefactor `ρ = R`.
//!
//! Models with `σ ≠ 1` are handled in units of `σ`: constants are computed for
//! drift `c/σ` and common scale `σ₀/σ`, and every sequence expressed in units
//! of `Q` is multiplied back by `σ`.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelSpec;
use crate::process::{PathSynthesizer, Scratch};
use crate::rng::RngStreamPlan;
use crate::suprema::argmax_time;

/// Tolerance of the knife-edge comparison `β = 2H − H₀`.
pub const REGIME_TOLERANCE: f64 = 1e-12;

/// Known Pickands constants: `H₁ = 1`, `H₂ = 1/√π`.
pub fn known_pickands(alpha: f64) -> Option<f64> {
    if alpha == 1.0 {
        Some(1.0)
    } else if alpha == 2.0 {
        Some(1.0 / PI.sqrt())
    } else {
        None
    }
}

/// Constants of the first-order tail asymptotics of `sup_t X_H(t) − c t^β`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticConstants {
    pub t0: f64,
    pub a: f64,
    pub b: f64,
    pub tau: f64,
    /// `C = 1/(2A²)`.
    pub c_rate: f64,
    /// `α = 2H` for the fBm driver.
    pub alpha: f64,
    pub pickands: f64,
    pub hurst: f64,
    pub beta: f64,
    /// Drift in units of `σ`.
    pub drift: f64,
    pub sigma: f64,
}

/// Constants with the Pickands constant taken from the model or the table.
pub fn compute_constants(model: &ModelSpec) -> Result<AsymptoticConstants> {
    model.validate()?;
    let alpha = model.alpha();
    let pickands = model.pickands.or_else(|| known_pickands(alpha)).ok_or_else(|| {
        Error::domain(
            "model.pickands",
            format!("no closed form for alpha = {alpha}; supply a value or estimate one"),
        )
    })?;
    compute_constants_with(model, pickands)
}

/// Constants with an explicit Pickands constant `H_α`.
pub fn compute_constants_with(model: &ModelSpec, pickands: f64) -> Result<AsymptoticConstants> {
    model.validate()?;
    if !(pickands > 0.0 && pickands.is_finite()) {
        return Err(Error::domain("pickands", format!("must be positive, got {pickands}")));
    }
    let (h, beta) = (model.hurst, model.beta);
    let c = model.drifts.c / model.sigma;
    let ratio = h / (c * (beta - h));
    let t0 = argmax_time(h, beta, c);
    let a = (beta - h) / beta * ratio.powf(h / beta);
    let b = ratio.powf(-(h + 2.0) / beta) * h * beta;
    let tau = 2.0 * (1.0 - h / beta);
    Ok(AsymptoticConstants {
        t0,
        a,
        b,
        tau,
        c_rate: 1.0 / (2.0 * a * a),
        alpha: 2.0 * h,
        pickands,
        hurst: h,
        beta,
        drift: c,
        sigma: model.sigma,
    })
}

impl AsymptoticConstants {
    /// `log K←(s)` for `K←(s) = t₀ s^{1/H}`, the asymptotic inverse of
    /// `K(t) = t₀^{−H} t^H`.
    fn log_k_inverse(&self, log_s: f64) -> f64 {
        self.t0.ln() + log_s / self.hurst
    }

    /// `log` of the `u`-free factor `A^{3/2−2/α} H_α / (2^{1/α} B^{1/2})`.
    fn log_prefactor_constant(&self) -> f64 {
        (1.5 - 2.0 / self.alpha) * self.a.ln() + self.pickands.ln()
            - std::f64::consts::LN_2 / self.alpha
            - 0.5 * self.b.ln()
    }

    /// `log R(u)` from `log u`; stable for very large `u`.
    pub fn log_prefactor_from_log(&self, log_u: f64) -> f64 {
        let h_over_b = self.hurst / self.beta;
        self.log_prefactor_constant() + (2.0 * h_over_b - 2.0) * log_u
            - self.log_k_inverse((h_over_b - 1.0) * log_u)
    }
}

/// `R(u) = A^{3/2−2/α} H_α / (2^{1/α} B^{1/2}) · u^{2H/β−2} / K←(u^{H/β−1})`.
pub fn prefactor_r(u: f64, consts: &AsymptoticConstants) -> Result<f64> {
    if !(u > 0.0 && u.is_finite()) {
        return Err(Error::domain("u", format!("must be positive, got {u}")));
    }
    Ok(consts.log_prefactor_from_log(u.ln()).exp())
}

/// First-order tail approximation, flagged when clamped to 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailApprox {
    pub value: f64,
    pub clamped: bool,
}

/// `R(u) exp(−u^τ / (2A²))` approximating `P(sup_t X_H(t) − c t^β > u)`.
pub fn tail_approx(u: f64, consts: &AsymptoticConstants) -> Result<TailApprox> {
    let log_r = consts.log_prefactor_from_log(positive("u", u)?.ln());
    let value = (log_r - u.powf(consts.tau) * consts.c_rate).exp();
    Ok(if value >= 1.0 {
        TailApprox { value: 1.0, clamped: true }
    } else {
        TailApprox { value, clamped: false }
    })
}

fn positive(field: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::domain(field, format!("must be positive, got {v}")))
    }
}

/// Centering and scaling `(μ_n, ν_n)` of a generalized Weibull-like law
/// `1 − ρ(x) exp(−C x^τ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeibullNormalizers {
    pub mu_n: f64,
    pub nu_n: f64,
}

/// `μ_n = (L/C)^{1/τ} + τ⁻¹ (L/C)^{1/τ−1} C⁻¹ log ρ((L/C)^{1/τ})`,
/// `ν_n = (Cτ)⁻¹ (L/C)^{1/τ−1}`, with `L = log n` and `log_rho(log x) = log ρ(x)`.
pub fn weibull_normalizers(log_n: f64, c_rate: f64, tau: f64, log_rho: impl Fn(f64) -> f64) -> WeibullNormalizers {
    let base = log_n / c_rate;
    let lead = base.powf(1.0 / tau);
    let slope = base.powf(1.0 / tau - 1.0);
    WeibullNormalizers {
        mu_n: lead + slope / tau * log_rho(lead.ln()) / c_rate,
        nu_n: slope / (c_rate * tau),
    }
}

/// Normalizing constants at sample size `n`, in units of `Q`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizingSeq {
    pub log_n: f64,
    pub b_n: f64,
    pub a_n: f64,
    /// Scale of the Normal limit, `σ₀ t₀^{H₀} b_n^{H₀/β}`.
    pub e_n: f64,
}

impl NormalizingSeq {
    /// `n` rounded from `log n`.
    pub fn n(&self) -> f64 {
        self.log_n.exp().round()
    }
}

/// `(b_n, a_n, e_n)` for an integer sample size `n ≥ 3`.
pub fn normalizers(n: u64, consts: &AsymptoticConstants, model: &ModelSpec) -> Result<NormalizingSeq> {
    if n < 3 {
        return Err(Error::domain("n", format!("must be >= 3, got {n}")));
    }
    normalizers_log((n as f64).ln(), consts, model)
}

/// `(b_n, a_n, e_n)` as functions of `log n` (requires `n ≥ 3`).
pub fn normalizers_log(log_n: f64, consts: &AsymptoticConstants, model: &ModelSpec) -> Result<NormalizingSeq> {
    if !(log_n >= 3f64.ln() - 1e-12 && log_n.is_finite()) {
        return Err(Error::domain("log_n", format!("must be >= log 3, got {log_n}")));
    }
    let w = weibull_normalizers(log_n, consts.c_rate, consts.tau, |log_u| consts.log_prefactor_from_log(log_u));
    let sigma = consts.sigma;
    let b_unit = w.mu_n;
    let e_unit = (model.sigma0 / sigma) * consts.t0.powf(model.hurst_common) * b_unit.powf(model.hurst_common / model.beta);
    Ok(NormalizingSeq {
        log_n,
        b_n: sigma * b_unit,
        a_n: sigma * w.nu_n,
        e_n: sigma * e_unit,
    })
}

/// Which limit law governs the normalized order statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RegimeTag {
    NormalLimit,
    ErlangLogLimit,
    MixtureLimit,
}

impl RegimeTag {
    pub fn as_str(&self) -> &'static str {
        match self {
            RegimeTag::NormalLimit => "NORMAL_LIMIT",
            RegimeTag::ErlangLogLimit => "ERLANG_LOG_LIMIT",
            RegimeTag::MixtureLimit => "MIXTURE_LIMIT",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "NORMAL_LIMIT" => Some(RegimeTag::NormalLimit),
            "ERLANG_LOG_LIMIT" => Some(RegimeTag::ErlangLogLimit),
            "MIXTURE_LIMIT" => Some(RegimeTag::MixtureLimit),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Regime {
    pub tag: RegimeTag,
    /// `σ₀ c β / H` (in units of `σ`), only for the mixture regime.
    pub mixture_coeff: Option<f64>,
}

/// Trichotomy `β ≷ 2H − H₀`. Without a common factor (`σ₀ = 0`) the sequence
/// is independent and the Erlang-log limit applies.
pub fn classify_regime(model: &ModelSpec) -> Regime {
    let edge = 2.0 * model.hurst - model.hurst_common;
    let tag = if model.sigma0 == 0.0 {
        RegimeTag::ErlangLogLimit
    } else if (model.beta - edge).abs() <= REGIME_TOLERANCE {
        RegimeTag::MixtureLimit
    } else if model.beta > edge {
        RegimeTag::NormalLimit
    } else {
        RegimeTag::ErlangLogLimit
    };
    let mixture_coeff = (tag == RegimeTag::MixtureLimit).then(|| {
        (model.sigma0 / model.sigma) * (model.drifts.c / model.sigma) * model.beta / model.hurst
    });
    Regime { tag, mixture_coeff }
}

/// `b_n^{H₀/β} / a_n` for each `n` (in units of `σ`).
pub fn check_abn_ratio(model: &ModelSpec, consts: &AsymptoticConstants, n_grid: &[u64]) -> Result<Vec<f64>> {
    n_grid
        .iter()
        .map(|&n| {
            let s = normalizers(n, consts, model)?;
            Ok((s.b_n / consts.sigma).powf(model.hurst_common / model.beta) / (s.a_n / consts.sigma))
        })
        .collect()
}

/// Limit of [`check_abn_ratio`] on the boundary `β = 2H − H₀`.
pub fn abn_ratio_boundary_limit(consts: &AsymptoticConstants) -> f64 {
    consts.tau / (2.0 * consts.a * consts.a)
}

/// Monte Carlo estimator of the Pickands constant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PickandsMethod {
    /// `E[max_t e^{W(t)} / ∫ e^{W(t)} dt]` for the two-sided
    /// `W(t) = √2 B_{α/2}(t) − |t|^α` on `[−T, T]`, integral by a Riemann
    /// sum on the grid. Bounded variance; the grid biases it downward.
    #[default]
    SupOverIntegral,
    /// `(1/T) E[exp(sup_{[0,T]} W(t))]`. Finite `T` biases it upward by
    /// about `1/T`, the grid downward; its variance grows exponentially in `T`.
    Definition,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PickandsEstimate {
    pub alpha: f64,
    pub horizon: f64,
    pub n_points: usize,
    pub reps: usize,
    pub estimate: f64,
    pub std_error: f64,
}

/// Terms more than this far below the maximum are dropped from the log-sum.
const LOG_SUM_CUTOFF: f64 = 60.0;

#[allow(clippy::too_many_arguments)]
fn pickands_replicate(
    alpha: f64,
    horizon: f64,
    n_points: usize,
    method: PickandsMethod,
    synth: Option<&PathSynthesizer>,
    penalty: &[f64],
    rng: &mut crate::rng::RngStream,
    buf: &mut Vec<f64>,
    scratch: &mut Scratch,
) -> f64 {
    let two_sided = method == PickandsMethod::SupOverIntegral;
    let cells = penalty.len() - 1;
    let span = if two_sided { 2.0 * horizon } else { horizon };
    let step = span / cells as f64;
    buf.resize(cells + 1, 0.0);
    match synth {
        // α = 2: B_1(t) = t N
        None => {
            let z: f64 = rng.sample(StandardNormal);
            for (j, v) in buf.iter_mut().enumerate() {
                *v = j as f64 * step * z;
            }
        }
        Some(s) => {
            s.fill_unit(rng, buf, scratch);
            let factor = span.powf(alpha / 2.0);
            buf.iter_mut().for_each(|v| *v *= factor);
        }
    }
    let sqrt2 = std::f64::consts::SQRT_2;
    if two_sided {
        // recentre at t = T: W(t) = √2 (B(t + T) − B(T)) − |t|^α
        let mid = buf[n_points];
        let mut w_max = f64::NEG_INFINITY;
        for (v, p) in buf.iter_mut().zip(penalty) {
            *v = sqrt2 * (*v - mid) - p;
            w_max = w_max.max(*v);
        }
        let floor = w_max - LOG_SUM_CUTOFF;
        let sum: f64 = buf.iter().filter(|&&w| w > floor).map(|&w| (w - w_max).exp()).sum();
        1.0 / (step * sum)
    } else {
        let sup = buf
            .iter()
            .zip(penalty)
            .map(|(v, p)| sqrt2 * v - p)
            .fold(f64::NEG_INFINITY, f64::max);
        sup.exp() / horizon
    }
}

/// Estimates `H_α` with `n_points` grid cells on `[0, T]` (doubled over
/// `[−T, T]` for the two-sided estimator) and `reps` independent paths.
pub fn estimate_pickands(
    alpha: f64,
    horizon: f64,
    n_points: usize,
    reps: usize,
    seed: u64,
    method: PickandsMethod,
) -> Result<PickandsEstimate> {
    if !(alpha > 0.0 && alpha <= 2.0) {
        return Err(Error::domain("alpha", format!("must lie in (0, 2], got {alpha}")));
    }
    positive("T", horizon)?;
    if reps < 100 {
        return Err(Error::domain("reps", format!("must be >= 100, got {reps}")));
    }
    if n_points < 2 {
        return Err(Error::domain("n_points", format!("must be >= 2, got {n_points}")));
    }
    let cells = if method == PickandsMethod::SupOverIntegral { 2 * n_points } else { n_points };
    let synth = if alpha < 2.0 {
        Some(PathSynthesizer::fbm(alpha / 2.0, cells)?)
    } else {
        None
    };
    let step = if method == PickandsMethod::SupOverIntegral { 2.0 * horizon } else { horizon } / cells as f64;
    let origin = if method == PickandsMethod::SupOverIntegral { n_points as f64 } else { 0.0 };
    let penalty: Vec<f64> = (0..=cells).map(|j| ((j as f64 - origin) * step).abs().powf(alpha)).collect();
    let plan = RngStreamPlan::new(seed);
    let values: Vec<f64> = (0..reps as u64)
        .into_par_iter()
        .map_init(
            || (Vec::new(), Scratch::default()),
            |(buf, scratch), rep| {
                let mut rng = plan.stream(rep, 0);
                pickands_replicate(alpha, horizon, n_points, method, synth.as_ref(), &penalty, &mut rng, buf, scratch)
            },
        )
        .collect();
    let m = values.len() as f64;
    let mean = values.iter().sum::<f64>() / m;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0);
    Ok(PickandsEstimate {
        alpha,
        horizon,
        n_points,
        reps,
        estimate: mean,
        std_error: (var / m).sqrt(),
    })
}
