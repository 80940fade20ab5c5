//! Approximate MSE, closed-form optimal bandwidths, the iterative plug-in
//! selector and leave-one-out cross-validation.

use rayon::prelude::*;

use crate::covariance::CovStructure;
use crate::error::{Error, Result};
use crate::estimator::{grid_sums, realized_quarticity, spot_vol_grid, PricePath, SpotVolSeries};
use crate::kernels::Kernel;
use crate::numeric::CompensatedSum;
use crate::volvol::{default_b, default_k, tsrvv_paired, KMode, Pairing};

/// Moments entering the MSE: `E[σ⁴]` and the scale `L` of the variance
/// increments, either pointwise or integrated over the window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VolModelMoments {
    pub e_sigma4: f64,
    pub l_scale: f64,
}

/// `2 (Δ/h) E[σ⁴] ∫K² + h^γ L ∬ K K C_γ`.
pub fn approx_mse(h: f64, delta: f64, moments: &VolModelMoments, kernel: &Kernel, cov: &CovStructure) -> Result<f64> {
    let k2 = kernel.l2_norm()?;
    let q = cov.quadratic_form(kernel)?;
    Ok(2.0 * delta / h * moments.e_sigma4 * k2 + h.powf(cov.gamma()) * moments.l_scale * q)
}

struct Ingredients {
    gamma: f64,
    numer: f64,
    denom: f64,
}

fn ingredients(t: f64, moments: &VolModelMoments, kernel: &Kernel, cov: &CovStructure) -> Result<Ingredients> {
    let gamma = cov.gamma();
    let numer = 2.0 * t * moments.e_sigma4 * kernel.l2_norm()?;
    let denom = gamma * moments.l_scale * cov.quadratic_form(kernel)?;
    if !(denom > 0.0) || !denom.is_finite() {
        return Err(Error::NonpositiveDenominator(denom));
    }
    Ok(Ingredients { gamma, numer, denom })
}

/// `n^{-1/(γ+1)} [2T E[σ⁴] ∫K² / (γ L ∬KKC)]^{1/(γ+1)}`.
pub fn optimal_bandwidth_local(
    n: usize,
    t: f64,
    moments: &VolModelMoments,
    kernel: &Kernel,
    cov: &CovStructure,
) -> Result<f64> {
    let c = ingredients(t, moments, kernel, cov)?;
    let e = 1.0 / (c.gamma + 1.0);
    Ok((n as f64).powf(-e) * (c.numer / c.denom).powf(e))
}

/// Same formula with moments integrated over the estimation window.
pub fn optimal_bandwidth_global(
    n: usize,
    t: f64,
    integrated: &VolModelMoments,
    kernel: &Kernel,
    cov: &CovStructure,
) -> Result<f64> {
    optimal_bandwidth_local(n, t, integrated, kernel, cov)
}

/// Minimum of [`approx_mse`] over `h`.
pub fn optimal_mse_value(
    n: usize,
    t: f64,
    moments: &VolModelMoments,
    kernel: &Kernel,
    cov: &CovStructure,
) -> Result<f64> {
    let c = ingredients(t, moments, kernel, cov)?;
    let g = c.gamma;
    Ok((n as f64).powf(-g / (1.0 + g)) * (1.0 + 1.0 / g) * c.numer.powf(g / (1.0 + g)) * c.denom.powf(1.0 / (1.0 + g)))
}

/// Starting value `sqrt(2T ∫K² / (n ∬KKC_1))`.
pub fn initial_bandwidth(n: usize, t: f64, kernel: &Kernel, cov: &CovStructure) -> Result<f64> {
    if !cov.is_brownian() {
        return Err(Error::InvalidArgument(
            "the initial plug-in bandwidth needs the Brownian structure".into(),
        ));
    }
    let q = cov.quadratic_form(kernel)?;
    if !(q > 0.0) {
        return Err(Error::NonpositiveDenominator(q));
    }
    Ok((2.0 * t * kernel.l2_norm()? / (n as f64 * q)).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Provenance {
    Initial,
    Plugin { iterations: usize },
    CrossValidation,
    Oracle,
    Fixed,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PluginStep {
    pub iteration: usize,
    pub h: f64,
    pub iq: f64,
    /// TSRVV rescaled to `[0, T]`; NaN for the initial step.
    pub ivv: f64,
    pub used_fallback: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BandwidthPlan {
    pub h: f64,
    pub provenance: Provenance,
    pub history: Vec<PluginStep>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PluginOptions {
    pub max_iter: usize,
    pub rel_tol: f64,
    /// Coarse TSRVV scale; `None` uses `n^{2/3}`.
    pub k: Option<usize>,
    /// Boundary trim; `None` uses `max(1, round(0.05 n))`.
    pub b: Option<usize>,
    pub pairing: Pairing,
}

impl Default for PluginOptions {
    fn default() -> Self {
        Self {
            max_iter: 2,
            rel_tol: 0.01,
            k: None,
            b: None,
            pairing: Pairing::default(),
        }
    }
}

/// Iterative plug-in selection: starting from [`initial_bandwidth`], each
/// iteration re-estimates `∫g²` by TSRVV at the current bandwidth, rescales it
/// from the trimmed window to `[0, T]`, and sets
/// `h = sqrt(2T IQ ∫K² / (n IVV ∬KKC))`. Returns the final boundary-corrected
/// grid estimate.
pub fn plugin_select(
    path: &PricePath,
    kernel: &Kernel,
    cov: &CovStructure,
    opts: &PluginOptions,
) -> Result<(BandwidthPlan, SpotVolSeries)> {
    let plan = plugin_plan(path, kernel, cov, opts)?;
    let series = spot_vol_grid(path, kernel, plan.h, true)?;
    Ok((plan, series))
}

/// Bandwidth part of [`plugin_select`] without the final grid estimate.
pub fn plugin_plan(
    path: &PricePath,
    kernel: &Kernel,
    cov: &CovStructure,
    opts: &PluginOptions,
) -> Result<BandwidthPlan> {
    let n = path.n();
    let t = path.horizon();
    let mut h = initial_bandwidth(n, t, kernel, cov)?;
    let iq = realized_quarticity(path);
    let mut history = vec![PluginStep {
        iteration: 0,
        h,
        iq,
        ivv: f64::NAN,
        used_fallback: false,
    }];
    let k = opts.k.unwrap_or_else(|| default_k(n, KMode::TwoThirds, 1.0));
    let b = opts.b.unwrap_or_else(|| default_b(n));
    let k2 = kernel.l2_norm()?;
    let q = cov.quadratic_form(kernel)?;
    let span = t / (t - 2.0 * b as f64 * path.delta());
    let mut iterations = 0;
    for it in 1..=opts.max_iter {
        let vv = tsrvv_paired(path, kernel, h, k, b, opts.pairing)?;
        if !(vv.ivv > 0.0) {
            return Err(Error::VolVolDegenerate(vv.ivv));
        }
        let ivv = vv.ivv * span;
        let next = (2.0 * t * iq * k2 / (n as f64 * ivv * q)).sqrt();
        history.push(PluginStep {
            iteration: it,
            h: next,
            iq,
            ivv,
            used_fallback: vv.used_fallback,
        });
        iterations = it;
        let done = (next - h).abs() <= opts.rel_tol * h;
        h = next;
        if done {
            break;
        }
    }
    let provenance = if iterations == 0 {
        Provenance::Initial
    } else {
        Provenance::Plugin { iterations }
    };
    Ok(BandwidthPlan { h, provenance, history })
}

/// Leave-one-out objective `Σ_i [r_i/Δ - σ̂²_{-i}(t_i)]²` over the trimmed
/// interior, where `r_i` is the increment starting at `t_i` and the
/// estimate drops it from both sums. Infinite when a leave-one-out
/// normalizer vanishes.
pub fn cv_objective(path: &PricePath, kernel: &Kernel, h: f64, trim: f64) -> f64 {
    let n = path.n();
    let delta = path.delta();
    let (sums, _) = grid_sums(path, kernel, h);
    let k0 = kernel.eval_scaled(0.0, h);
    let l = (trim * n as f64).floor() as usize;
    let r = path.sq_increments();
    let mut acc = CompensatedSum::new();
    for i in l..n.saturating_sub(l) {
        let (num, full) = sums[i];
        let num = num - k0 * r[i];
        let den = full - k0 * delta;
        if !(den > 1e-12 * full) {
            return f64::INFINITY;
        }
        let e = r[i] / delta - num / den;
        acc.add(e * e);
    }
    acc.value()
}

/// Grid point minimizing [`cv_objective`]; ties go to the earliest point.
pub fn cross_validate(path: &PricePath, kernel: &Kernel, h_grid: &[f64], trim: f64) -> Result<BandwidthPlan> {
    if h_grid.is_empty() {
        return Err(Error::InvalidArgument("cross-validation grid is empty".into()));
    }
    if !(0.0..0.5).contains(&trim) {
        return Err(Error::InvalidArgument(format!("trim must lie in [0, 0.5), got {trim}")));
    }
    if let Some(h) = h_grid.iter().find(|h| !(**h > 0.0)) {
        return Err(Error::InvalidArgument(format!("bandwidths must be positive, got {h}")));
    }
    let scores: Vec<f64> = h_grid
        .par_iter()
        .map(|&h| cv_objective(path, kernel, h, trim))
        .collect();
    let mut best = 0;
    for (i, s) in scores.iter().enumerate() {
        if s < &scores[best] {
            best = i;
        }
    }
    Ok(BandwidthPlan {
        h: h_grid[best],
        provenance: Provenance::CrossValidation,
        history: vec![],
    })
}

/// `count` log-spaced points from `lo` to `hi`.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..count)
        .map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp())
        .collect()
}
