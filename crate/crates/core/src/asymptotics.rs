//! Asymptotic variance constants and pointwise confidence bands.

use statrs::distribution::{ContinuousCDF, Normal};

use crate::covariance::CovStructure;
use crate::error::{Error, Result};
use crate::estimator::SpotVolSeries;
use crate::kernels::Kernel;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CltConstants {
    /// `2 σ_τ⁴ ∫K²`.
    pub delta1_sq: f64,
    /// `g_τ² ∬ K K C_γ`.
    pub delta2_sq: f64,
    /// `(Δ/h)^{1/2}`.
    pub rate_discr: f64,
    /// `h^{γ/2}`.
    pub rate_smooth: f64,
}

impl CltConstants {
    /// `sqrt(δ₁² Δ/h + δ₂² h^γ)`.
    pub fn std_error(&self) -> f64 {
        (self.delta1_sq * self.rate_discr.powi(2) + self.delta2_sq * self.rate_smooth.powi(2)).sqrt()
    }
}

pub fn clt_constants(
    sigma2_tau: f64,
    g_tau_sq: f64,
    kernel: &Kernel,
    cov: &CovStructure,
    h: f64,
    delta: f64,
) -> Result<CltConstants> {
    if !(h > 0.0 && delta > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "need h > 0 and delta > 0, got {h}, {delta}"
        )));
    }
    Ok(CltConstants {
        delta1_sq: 2.0 * sigma2_tau * sigma2_tau * kernel.l2_norm()?,
        delta2_sq: g_tau_sq * cov.quadratic_form(kernel)?,
        rate_discr: (delta / h).sqrt(),
        rate_smooth: h.powf(cov.gamma() / 2.0),
    })
}

/// Two-sided normal quantile for a coverage `level` in (0, 1).
pub fn normal_quantile(level: f64) -> Result<f64> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Config(format!("band level must lie in (0, 1), got {level}")));
    }
    let normal = Normal::standard();
    Ok(normal.inverse_cdf(0.5 + level / 2.0))
}

/// Pointwise bands `σ̂² ± z · se`, with `σ̂²` plugged into `δ₁²` and a
/// constant `g²` (for instance `IVV/T`) into `δ₂²`.
pub fn bands(
    series: &SpotVolSeries,
    g_sq: f64,
    kernel: &Kernel,
    cov: &CovStructure,
    delta: f64,
    level: f64,
) -> Result<Vec<(f64, f64)>> {
    let z = normal_quantile(level)?;
    series
        .estimates
        .iter()
        .map(|&s| {
            let se = clt_constants(s.max(0.0), g_sq, kernel, cov, series.bandwidth, delta)?.std_error();
            Ok((s - z * se, s + z * se))
        })
        .collect()
}
