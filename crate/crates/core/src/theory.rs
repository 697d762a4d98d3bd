//! Closed-form rate calculators and error diagnostics.
//!
//! Only exponents are computed; the generic constants of the error bounds
//! are not modelled.

use crate::error::{check_len, invalid, Result};
use crate::linop::LinearOperator;

/// Smoothness description of an `a`-times smoothing forward map and a source
/// of Sobolev smoothness `s`, with the data-space embedding order `k` and
/// integrability `p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothnessParams {
    pub a: f64,
    pub s: f64,
    pub d: u32,
    pub k: f64,
    pub p: f64,
    /// Radius bound `‖u†‖_{H^s} ≤ rho_source`; informational only.
    pub rho_source: f64,
}

impl SmoothnessParams {
    pub fn new(a: f64, s: f64, d: u32, k: f64, p: f64) -> Self {
        Self {
            a,
            s,
            d,
            k,
            p,
            rho_source: 1.0,
        }
    }

    /// `ϑ = k/d − 1/p`.
    pub fn vartheta(&self) -> f64 {
        self.k / self.d as f64 - 1.0 / self.p
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a > 0.0 && self.a.is_finite()) {
            return Err(invalid("a", format!("must be positive, got {}", self.a)));
        }
        if !(self.s > 0.0 && self.s < self.a) {
            return Err(invalid(
                "s",
                format!("must satisfy 0 < s < a = {}, got {}", self.a, self.s),
            ));
        }
        if self.d == 0 {
            return Err(invalid("d", "must be at least 1"));
        }
        if !(self.p >= 1.0) {
            return Err(invalid("p", format!("must be at least 1, got {}", self.p)));
        }
        if !(self.vartheta() > 0.0) {
            return Err(invalid("k", format!("need k > d/p, got k = {}", self.k)));
        }
        if !(self.rho_source > 0.0) {
            return Err(invalid("rho_source", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateExponents {
    pub vartheta: f64,
    /// `θ = 2s(2ϑ+1) / ((2ϑ+1)(a−s) + a)`, the exponent of `α` in the bias bound.
    pub theta: f64,
    /// Exponent of `σ` in the mean squared error, `θ/(θ+1)`.
    pub squared_rate: f64,
    /// Exponent of `σ` in the root mean squared error.
    pub norm_rate: f64,
}

pub fn rate_exponents(params: &SmoothnessParams) -> Result<RateExponents> {
    params.validate()?;
    let SmoothnessParams { a, s, .. } = *params;
    let vartheta = params.vartheta();
    let q = 2.0 * vartheta + 1.0;
    let theta = 2.0 * s * q / (q * (a - s) + a);
    let squared_rate = theta / (theta + 1.0);
    Ok(RateExponents {
        vartheta,
        theta,
        squared_rate,
        norm_rate: squared_rate / 2.0,
    })
}

/// Minimax exponent `2s / (2a + 2s + d)` of the root mean squared error under
/// white noise.
pub fn optimal_gaussian_rate(a: f64, s: f64, d: u32) -> Result<f64> {
    if !(a > 0.0) {
        return Err(invalid("a", "must be positive"));
    }
    if !(s > 0.0) {
        return Err(invalid("s", "must be positive"));
    }
    if d == 0 {
        return Err(invalid("d", "must be at least 1"));
    }
    let d = d as f64;
    Ok(2.0 * s / (2.0 * a + 2.0 * s + d))
}

/// For an `a`-smoothing map the embedding holds with `k = a`, `p = 2`. Returns
/// whether the resulting norm rate equals the minimax rate to `1e-12`.
pub fn consistency_check_a_smoothing(a: f64, s: f64, d: u32) -> Result<bool> {
    if !(a > d as f64 / 2.0) {
        return Err(invalid("a", format!("need a > d/2, got a = {a}, d = {d}")));
    }
    let rates = rate_exponents(&SmoothnessParams::new(a, s, d, a, 2.0))?;
    let optimal = optimal_gaussian_rate(a, s, d)?;
    Ok((rates.norm_rate - optimal).abs() <= 1e-12)
}

/// `(θ, s/a)` for `k = a`, `p = 2`: the refined exponent of `α` against the
/// one obtained from a uniform residual bound.
pub fn improvement_exponents(a: f64, s: f64, d: u32) -> Result<(f64, f64)> {
    let rates = rate_exponents(&SmoothnessParams::new(a, s, d, a, 2.0))?;
    Ok((rates.theta, s / a))
}

/// Hölder index function `φ(t) = c t^κ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HolderIndexFunction {
    pub c: f64,
    pub kappa: f64,
}

impl HolderIndexFunction {
    pub fn new(c: f64, kappa: f64) -> Result<Self> {
        let phi = Self { c, kappa };
        phi.validate()?;
        Ok(phi)
    }

    /// Index function of a Sobolev source of radius `rho_source`:
    /// `φ(t) = C ρ^{2a/(a+s)} t^{s/(a+s)}`.
    pub fn for_sobolev_source(constant: f64, params: &SmoothnessParams) -> Result<Self> {
        params.validate()?;
        let SmoothnessParams { a, s, rho_source, .. } = *params;
        Self::new(constant * rho_source.powf(2.0 * a / (a + s)), s / (a + s))
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.c * t.powf(self.kappa)
    }

    fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(invalid("c", format!("must be positive, got {}", self.c)));
        }
        if !(self.kappa > 0.0 && self.kappa < 1.0) {
            return Err(invalid("kappa", format!("must lie in (0, 1), got {}", self.kappa)));
        }
        Ok(())
    }
}

/// `φ_app(α) = sup_{τ≥0} [φ(τ) − τ/α] = c(1−κ)(cκα)^{κ/(1−κ)}`.
///
/// The supremum is attained at `τ* = (cκα)^{1/(1−κ)}`.
pub fn phi_app_holder(phi: &HolderIndexFunction, alpha: f64) -> Result<f64> {
    phi.validate()?;
    if !(alpha > 0.0) {
        return Err(invalid("alpha", format!("must be positive, got {alpha}")));
    }
    let HolderIndexFunction { c, kappa } = *phi;
    Ok(c * (1.0 - kappa) * (c * kappa * alpha).powf(kappa / (1.0 - kappa)))
}

/// Effective noise level
///
/// ```text
/// err(u) = ‖T u − g†‖₁ − (‖T u − g_obs‖₁ − ‖T u† − g_obs‖₁)
/// ```
///
/// with the exact and the sampled forward map both given by `op`. It vanishes
/// at `u = u†` when `g_exact = T u_true`.
pub fn effective_noise_level<O>(op: &O, g_exact: &[f64], g_obs: &[f64], u: &[f64], u_true: &[f64]) -> Result<f64>
where
    O: LinearOperator + ?Sized,
{
    let n = op.dim();
    for len in [g_exact.len(), g_obs.len(), u.len(), u_true.len()] {
        check_len(n, len)?;
    }
    let s = op.grid().space();
    let dist = |a: &[f64], b: &[f64]| s.weight() * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>();
    let tu = op.apply(u);
    let tu_true = op.apply(u_true);
    Ok(dist(&tu, g_exact) - (dist(&tu, g_obs) - dist(&tu_true, g_obs)))
}
