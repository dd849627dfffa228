//! Parameterization of `Q_i = sup_t (σ X_i(t) + σ₀ X(t) − c_i t^β)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::process::check_hurst;

/// Drifts `c_1 = … = c_{m_n} = c < c_{m_n+1} = … = c_n` with `m_n = ceil(p n)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftSequence {
    /// Minimal drift `c`.
    pub c: f64,
    /// Asymptotic fraction of minimal drifts.
    #[serde(default = "one")]
    pub p: f64,
    /// Multiplier applied to the non-minimal drifts.
    #[serde(default = "default_elevated")]
    pub elevated_factor: f64,
}

fn one() -> f64 {
    1.0
}

fn default_elevated() -> f64 {
    1.5
}

impl DriftSequence {
    pub fn constant(c: f64) -> Self {
        Self { c, p: 1.0, elevated_factor: default_elevated() }
    }

    pub fn thinned(c: f64, p: f64, elevated_factor: f64) -> Self {
        Self { c, p, elevated_factor }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::domain("drifts.c", format!("must be positive, got {}", self.c)));
        }
        if !(self.p > 0.0 && self.p <= 1.0) {
            return Err(Error::domain("drifts.p", format!("must lie in (0, 1], got {}", self.p)));
        }
        if !(self.elevated_factor >= 1.0 && self.elevated_factor.is_finite()) {
            return Err(Error::domain(
                "drifts.elevated_factor",
                format!("must be >= 1, got {}", self.elevated_factor),
            ));
        }
        if self.p < 1.0 && self.elevated_factor <= 1.0 {
            return Err(Error::domain("drifts.elevated_factor", "must exceed 1 when p < 1"));
        }
        Ok(())
    }

    /// `m_n = ceil(p n)`, at least 1.
    pub fn minimal_count(&self, n: u64) -> u64 {
        if self.p >= 1.0 {
            return n;
        }
        ((self.p * n as f64).ceil() as u64).clamp(1, n)
    }

    /// Drift of entity `i` (1-based) in a sequence of length `n`.
    pub fn drift(&self, i: u64, n: u64) -> f64 {
        if i <= self.minimal_count(n) {
            self.c
        } else {
            self.c * self.elevated_factor
        }
    }

    pub fn elevated(&self) -> f64 {
        self.c * self.elevated_factor
    }
}

/// Full model specification.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    /// Self-similarity index `H` of the idiosyncratic processes.
    pub hurst: f64,
    /// Self-similarity index `H₀` of the common factor.
    pub hurst_common: f64,
    /// Trend exponent `β`.
    pub beta: f64,
    #[serde(default = "one")]
    pub sigma: f64,
    pub sigma0: f64,
    pub drifts: DriftSequence,
    /// Pickands constant `H_α` with `α = 2H`; looked up or estimated when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pickands: Option<f64>,
}

impl ModelSpec {
    /// Constant drift `c`, `σ = 1`.
    pub fn new(hurst: f64, hurst_common: f64, beta: f64, sigma0: f64, c: f64) -> Result<Self> {
        let m = Self {
            hurst,
            hurst_common,
            beta,
            sigma: 1.0,
            sigma0,
            drifts: DriftSequence::constant(c),
            pickands: None,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn with_drifts(mut self, drifts: DriftSequence) -> Result<Self> {
        self.drifts = drifts;
        self.validate()?;
        Ok(self)
    }

    pub fn with_pickands(mut self, value: f64) -> Result<Self> {
        self.pickands = Some(value);
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        check_hurst("model.hurst", self.hurst)?;
        check_hurst("model.hurst_common", self.hurst_common)?;
        let floor = self.hurst.max(self.hurst_common);
        if !(self.beta > floor && self.beta.is_finite()) {
            return Err(Error::domain(
                "model.beta",
                format!("must satisfy beta > max(H, H0) = {floor}, got {}", self.beta),
            ));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::domain("model.sigma", format!("must be positive, got {}", self.sigma)));
        }
        if !(self.sigma0 >= 0.0 && self.sigma0.is_finite()) {
            return Err(Error::domain("model.sigma0", format!("must be >= 0, got {}", self.sigma0)));
        }
        if let Some(h) = self.pickands {
            if !(h > 0.0 && h.is_finite()) {
                return Err(Error::domain("model.pickands", format!("must be positive, got {h}")));
            }
        }
        self.drifts.validate()
    }

    /// Local-stationarity index `α = 2H` of the fBm driver.
    pub fn alpha(&self) -> f64 {
        2.0 * self.hurst
    }
}
